//! Perturbative Fock-space model of the four-mode Bell source.
//!
//! The two squeezed inputs are expanded in the Fock basis and truncated at a
//! fixed total photon number. Every optical element is represented by its
//! unitary transfer matrix on annihilation operators, and the truncated state
//! is carried through by substituting each input creation operator with its
//! linear combination of output creation operators. Photon-number
//! correlations are then read off the resulting Fock amplitudes.
//!
//! Input modes: 0 = first squeezer (X squeezed), 1 = second squeezer
//! (P squeezed), 2 and 3 = vacuum ports of the second beamsplitter in the
//! horizontal and vertical polarizations. Output modes: 0 = A+, 1 = A−,
//! 2 = B+, 3 = B−.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;

const MODES: usize = 4;
const MAX_NORM_DEFICIT: f64 = 1e-6;

type Transfer = [[Complex64; MODES]; MODES];
type Poly = BTreeMap<[u8; MODES], Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub enum FockError {
    /// Squeezing outside the perturbative regime `1 − v_sqz ≤ 0.05`.
    OutsidePerturbativeRegime { v_sqz: f64 },
    /// Probability mass dropped by the truncation exceeds the budget.
    CutoffTooSmall { cutoff: usize, deficit: f64 },
    /// Every correlation vanished, so E is undefined.
    NoPairs,
}

impl fmt::Display for FockError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FockError::OutsidePerturbativeRegime { v_sqz } => {
                write!(f, "v_sqz = {v_sqz} is outside the perturbative regime (need 0.95 <= v_sqz < 1)")
            }
            FockError::CutoffTooSmall { cutoff, deficit } => {
                write!(f, "photon cutoff {cutoff} drops {deficit:e} of the norm")
            }
            FockError::NoPairs => write!(f, "no photon pairs in the truncated state"),
        }
    }
}

impl std::error::Error for FockError {}

/// Ideal (lossless, pure) circuit description for the Fock oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockCircuit {
    pub v_sqz: f64,
    /// Maximum total photon number kept in the expansion.
    pub cutoff: usize,
    pub arm_phase: f64,
    pub qwp_phase: f64,
}

impl FockCircuit {
    pub fn new(v_sqz: f64, cutoff: usize) -> Self {
        Self {
            v_sqz,
            cutoff,
            arm_phase: 0.0,
            qwp_phase: 0.0,
        }
    }
}

fn identity() -> Transfer {
    let mut u = [[Complex64::new(0.0, 0.0); MODES]; MODES];
    for (k, row) in u.iter_mut().enumerate() {
        row[k] = Complex64::new(1.0, 0.0);
    }
    u
}

fn matmul(a: &Transfer, b: &Transfer) -> Transfer {
    let mut out = [[Complex64::new(0.0, 0.0); MODES]; MODES];
    for i in 0..MODES {
        for j in 0..MODES {
            for k in 0..MODES {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// 2×2 real block `[[a, b], [c, d]]` acting on modes (i, j).
fn two_mode(i: usize, j: usize, block: [[f64; 2]; 2]) -> Transfer {
    let mut u = identity();
    u[i][i] = Complex64::new(block[0][0], 0.0);
    u[i][j] = Complex64::new(block[0][1], 0.0);
    u[j][i] = Complex64::new(block[1][0], 0.0);
    u[j][j] = Complex64::new(block[1][1], 0.0);
    u
}

fn balanced_splitter(i: usize, j: usize) -> Transfer {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    two_mode(i, j, [[h, h], [h, -h]])
}

/// A quadrature rotation by φ multiplies the annihilation operator by e^{−iφ}.
fn phase(i: usize, phi: f64) -> Transfer {
    let mut u = identity();
    u[i][i] = Complex64::from_polar(1.0, -phi);
    u
}

fn rotation(i: usize, j: usize, theta: f64) -> Transfer {
    let (s, c) = theta.sin_cos();
    two_mode(i, j, [[c, s], [-s, c]])
}

/// Transfer matrix from input annihilation operators to analyzer outputs.
fn network(circuit: &FockCircuit, theta_a: f64, theta_b: f64) -> Transfer {
    // Stage 1: first beamsplitter on the squeezers, path phase on arm 2.
    let bs1 = balanced_splitter(0, 1);
    // Stage 2: outputs reordered into (A^h, A^v, B^h, B^v).
    //   A^h = (arm1 + vac_h)/√2,  B^h = (arm1 − vac_h)/√2
    //   A^v = (vac_v + arm2)/√2,  B^v = (vac_v − arm2)/√2
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut bs2 = [[Complex64::new(0.0, 0.0); MODES]; MODES];
    let set = |m: &mut Transfer, row: usize, col: usize, v: f64| m[row][col] = Complex64::new(v, 0.0);
    set(&mut bs2, 0, 0, h);
    set(&mut bs2, 0, 2, h);
    set(&mut bs2, 1, 3, h);
    set(&mut bs2, 1, 1, h);
    set(&mut bs2, 2, 0, h);
    set(&mut bs2, 2, 2, -h);
    set(&mut bs2, 3, 3, h);
    set(&mut bs2, 3, 1, -h);

    let mut u = bs1;
    u = matmul(&phase(1, circuit.arm_phase), &u);
    u = matmul(&bs2, &u);
    u = matmul(&phase(1, circuit.qwp_phase), &u);
    u = matmul(&rotation(0, 1, theta_a), &u);
    u = matmul(&rotation(2, 3, theta_b), &u);
    u
}

fn poly_mul(a: &Poly, b: &Poly, cutoff: usize) -> Poly {
    let mut out = Poly::new();
    for (ka, ca) in a {
        for (kb, cb) in b {
            let mut key = [0u8; MODES];
            let mut total = 0usize;
            for m in 0..MODES {
                key[m] = ka[m] + kb[m];
                total += key[m] as usize;
            }
            if total > cutoff {
                continue;
            }
            *out.entry(key).or_insert(Complex64::new(0.0, 0.0)) += ca * cb;
        }
    }
    out
}

fn unit_poly() -> Poly {
    let mut p = Poly::new();
    p.insert([0; MODES], Complex64::new(1.0, 0.0));
    p
}

/// `(Σ_l u[l][k] b_l†)^power` as a polynomial in output creation operators.
fn creation_power(u: &Transfer, k: usize, power: usize, cutoff: usize) -> Poly {
    let mut linear = Poly::new();
    for l in 0..MODES {
        if u[l][k].norm() > 0.0 {
            let mut key = [0u8; MODES];
            key[l] = 1;
            linear.insert(key, u[l][k]);
        }
    }
    let mut out = unit_poly();
    for _ in 0..power {
        out = poly_mul(&out, &linear, cutoff);
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Coefficients of `(a†)^{2m}` in a single-mode squeezed vacuum.
///
/// `sign = −1` for X squeezing, `+1` for P squeezing.
fn squeezed_coefficients(r: f64, sign: f64, max_pairs: usize) -> Vec<f64> {
    let t = r.tanh();
    let norm = 1.0 / r.cosh().sqrt();
    (0..=max_pairs)
        .map(|m| norm * (sign * t).powi(m as i32) / (2f64.powi(m as i32) * factorial(m)))
        .collect()
}

/// Probability of `2m` photons in a single-mode squeezed vacuum.
fn pair_probability(r: f64, m: usize) -> f64 {
    let t2 = r.tanh().powi(2);
    factorial(2 * m) / (4f64.powi(m as i32) * factorial(m).powi(2)) * t2.powi(m as i32) / r.cosh()
}

/// R^{++}, R^{−−}, R^{+−}, R^{−+} of the truncated Fock state, normalized by
/// the retained norm.
pub fn fock_correlations(circuit: &FockCircuit, theta_a: f64, theta_b: f64) -> Result<[f64; 4], FockError> {
    let v = circuit.v_sqz;
    if !(v < 1.0 && 1.0 - v <= 0.05 + 1e-12) {
        return Err(FockError::OutsidePerturbativeRegime { v_sqz: v });
    }
    let r = -v.ln() / 2.0;
    let max_pairs = circuit.cutoff / 2;

    let mut kept = 0.0;
    for m0 in 0..=max_pairs {
        for m1 in 0..=max_pairs {
            if 2 * (m0 + m1) <= circuit.cutoff {
                kept += pair_probability(r, m0) * pair_probability(r, m1);
            }
        }
    }
    let deficit = 1.0 - kept;
    if deficit > MAX_NORM_DEFICIT {
        return Err(FockError::CutoffTooSmall {
            cutoff: circuit.cutoff,
            deficit,
        });
    }

    let u = network(circuit, theta_a, theta_b);
    let sq_x = squeezed_coefficients(r, -1.0, max_pairs);
    let sq_p = squeezed_coefficients(r, 1.0, max_pairs);

    let mut state = Poly::new();
    for m0 in 0..=max_pairs {
        for m1 in 0..=max_pairs {
            if 2 * (m0 + m1) > circuit.cutoff {
                continue;
            }
            let coef = Complex64::new(sq_x[m0] * sq_p[m1], 0.0);
            let term = poly_mul(
                &creation_power(&u, 0, 2 * m0, circuit.cutoff),
                &creation_power(&u, 1, 2 * m1, circuit.cutoff),
                circuit.cutoff,
            );
            for (key, c) in term {
                *state.entry(key).or_insert(Complex64::new(0.0, 0.0)) += coef * c;
            }
        }
    }

    let mut norm = 0.0;
    let mut r_tab = [0.0; 4];
    for (n, c) in &state {
        let occupation_weight: f64 = n.iter().map(|&k| factorial(k as usize)).product();
        let p = c.norm_sqr() * occupation_weight;
        norm += p;
        let (ap, am, bp, bm) = (n[0] as f64, n[1] as f64, n[2] as f64, n[3] as f64);
        r_tab[0] += p * ap * bp;
        r_tab[1] += p * am * bm;
        r_tab[2] += p * ap * bm;
        r_tab[3] += p * am * bp;
    }
    for x in r_tab.iter_mut() {
        *x /= norm;
    }
    Ok(r_tab)
}

/// E(θ_A, θ_B) from the truncated Fock expansion.
pub fn fock_e_value(circuit: &FockCircuit, theta_a: f64, theta_b: f64) -> Result<f64, FockError> {
    let [pp, mm, pm, mp] = fock_correlations(circuit, theta_a, theta_b)?;
    let total = pp + mm + pm + mp;
    if total <= 1e-300 {
        return Err(FockError::NoPairs);
    }
    Ok((pp + mm - pm - mp) / total)
}

/// CHSH combination `|E(a,b) + E(a',b') + E(a',b) − E(a,b')|`.
pub fn fock_bell_value(circuit: &FockCircuit, a: f64, a_prime: f64, b: f64, b_prime: f64) -> Result<f64, FockError> {
    let e = |x, y| fock_e_value(circuit, x, y);
    Ok((e(a, b)? + e(a_prime, b_prime)? + e(a_prime, b)? - e(a, b_prime)?).abs())
}
