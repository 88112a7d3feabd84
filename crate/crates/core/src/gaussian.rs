//! Zero-mean Gaussian states in quadrature space.
//!
//! Quadratures follow `X = a + a†`, `P = i(a† − a)`, so the vacuum has unit
//! variance and `n̂ = (X² + P² − 2)/4`. Matrices are ordered
//! `(X₁, P₁, X₂, P₂, …)` and the symplectic form is block diagonal with
//! per-mode blocks `[[0, 1], [−1, 0]]`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the uncertainty bound on symplectic eigenvalues.
pub const PHYSICAL_TOL: f64 = 1e-9;
/// Largest asymmetry accepted before a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Covariance matrix of an N-mode zero-mean Gaussian state, in shot-noise units.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    n_modes: usize,
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Wraps a 2N×2N matrix. The matrix must be symmetric within
    /// [`SYMMETRY_TOL`] (relative to its largest entry) with a positive
    /// diagonal; it is re-symmetrized exactly.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: cols,
            });
        }
        if rows == 0 || rows % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "covariance matrix dimension {rows} is not a positive even number"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("covariance matrix has non-finite entries".into()));
        }
        let scale = entries.amax().max(1.0);
        let asym = (&entries - entries.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidArgument(format!(
                "covariance matrix asymmetry {asym:e} exceeds tolerance"
            )));
        }
        if (0..rows).any(|k| entries[(k, k)] <= 0.0) {
            return Err(Error::InvalidArgument("covariance diagonal must be strictly positive".into()));
        }
        Ok(Self {
            n_modes: rows / 2,
            entries: symmetrized(entries),
        })
    }

    /// Diagonal covariance matrix with no physicality check.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)))
    }

    pub(crate) fn from_symmetric_unchecked(entries: DMatrix<f64>) -> Self {
        let n_modes = entries.nrows() / 2;
        Self {
            n_modes,
            entries: symmetrized(entries),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    /// `(V_X + V_P − 2)/4`.
    pub fn mean_photons(&self, mode: usize) -> f64 {
        (self.entries[(2 * mode, 2 * mode)] + self.entries[(2 * mode + 1, 2 * mode + 1)] - 2.0) / 4.0
    }

    pub fn total_mean_photons(&self) -> f64 {
        (0..self.n_modes).map(|m| self.mean_photons(m)).sum()
    }

    /// Reduced state on the listed modes, in the listed order.
    pub fn marginal(&self, modes: &[usize]) -> Result<Self> {
        for &m in modes {
            if m >= self.n_modes {
                return Err(Error::IndexOutOfRange {
                    index: m,
                    n_modes: self.n_modes,
                });
            }
        }
        let d = 2 * modes.len();
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let sub = DMatrix::from_fn(d, d, |r, c| self.entries[(idx[r], idx[c])]);
        Ok(Self {
            n_modes: modes.len(),
            entries: sub,
        })
    }

    /// Writes `block` back into the rows/columns of `modes`.
    pub fn with_marginal(&self, modes: &[usize], block: &CovarianceMatrix) -> Result<Self> {
        if block.n_modes != modes.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.len(),
                found: block.n_modes,
            });
        }
        let mut out = self.entries.clone();
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        for (r, &ir) in idx.iter().enumerate() {
            if ir >= out.nrows() {
                return Err(Error::IndexOutOfRange {
                    index: ir / 2,
                    n_modes: self.n_modes,
                });
            }
            for (c, &ic) in idx.iter().enumerate() {
                out[(ir, ic)] = block.entries[(r, c)];
            }
        }
        Ok(Self {
            n_modes: self.n_modes,
            entries: out,
        })
    }

    /// True when every symplectic eigenvalue is at least `1 − PHYSICAL_TOL`.
    pub fn is_physical(&self) -> bool {
        symplectic_eigenvalues(self)
            .map(|nu| nu.iter().all(|&v| v >= 1.0 - PHYSICAL_TOL))
            .unwrap_or(false)
    }
}

/// Linear phase-space map of a lossless optical element.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticTransform {
    n_modes: usize,
    entries: DMatrix<f64>,
}

impl SymplecticTransform {
    pub fn identity(n_modes: usize) -> Self {
        Self {
            n_modes,
            entries: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    /// Wraps an arbitrary matrix after checking `S Ω Sᵀ = Ω` to `tol`.
    pub fn from_matrix(entries: DMatrix<f64>, tol: f64) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols || rows % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: cols,
            });
        }
        let s = Self {
            n_modes: rows / 2,
            entries,
        };
        let err = s.symplectic_error();
        if err > tol {
            return Err(Error::InvalidArgument(format!("matrix is not symplectic (error {err:e})")));
        }
        Ok(s)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &SymplecticTransform) -> Result<Self> {
        if self.n_modes != first.n_modes {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes,
                found: first.n_modes,
            });
        }
        Ok(Self {
            n_modes: self.n_modes,
            entries: &self.entries * &first.entries,
        })
    }

    /// Composes a sequence of elements given in the order light meets them.
    pub fn chain(n_modes: usize, elements: &[SymplecticTransform]) -> Result<Self> {
        elements
            .iter()
            .try_fold(Self::identity(n_modes), |acc, el| el.after(&acc))
    }

    /// `max |S Ω Sᵀ − Ω|`.
    pub fn symplectic_error(&self) -> f64 {
        let om = omega(self.n_modes);
        (&self.entries * &om * self.entries.transpose() - om).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.entries.determinant()
    }

    /// True for orthogonal (photon-number conserving) transforms.
    pub fn is_passive(&self, tol: f64) -> bool {
        let d = 2 * self.n_modes;
        (&self.entries * self.entries.transpose() - DMatrix::<f64>::identity(d, d)).amax() <= tol
    }
}

/// Efficiency and additive noise of the Gaussian channel `γ → ηγ + εI`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub eta: f64,
    pub epsilon: f64,
}

impl ChannelParams {
    pub fn new(eta: f64, epsilon: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidArgument(format!("efficiency {eta} is outside (0, 1]")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise {epsilon} must be finite and >= 0")));
        }
        Ok(Self { eta, epsilon })
    }

    pub fn ideal() -> Self {
        Self { eta: 1.0, epsilon: 0.0 }
    }

    /// Loss channel `ε = 1 − η` plus additional noise.
    pub fn lossy(eta: f64, excess: f64) -> Result<Self> {
        Self::new(eta, (1.0 - eta) + excess)
    }

    /// False when the added noise is below the vacuum floor `1 − η`, in
    /// which case a vacuum input would be mapped below the uncertainty bound.
    pub fn is_physical(&self) -> bool {
        self.epsilon >= (1.0 - self.eta) - PHYSICAL_TOL
    }
}

/// Output of [`cp_map`], flagged rather than rejected when unphysical.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOutput {
    pub state: CovarianceMatrix,
    pub physical: bool,
}

/// Block-diagonal symplectic form.
pub fn omega(n_modes: usize) -> DMatrix<f64> {
    let mut om = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for m in 0..n_modes {
        om[(2 * m, 2 * m + 1)] = 1.0;
        om[(2 * m + 1, 2 * m)] = -1.0;
    }
    om
}

pub fn vacuum_state(n_modes: usize) -> CovarianceMatrix {
    assert!(n_modes >= 1, "a state needs at least one mode");
    CovarianceMatrix {
        n_modes,
        entries: DMatrix::identity(2 * n_modes, 2 * n_modes),
    }
}

/// Input of the Bell source: two X-squeezed modes followed by two vacua,
/// diagonal `[V_sqz, V_asqz, V_sqz, V_asqz, 1, 1, 1, 1]`.
pub fn bell_input_state(v_sqz: f64, v_asqz: f64) -> Result<CovarianceMatrix> {
    if !(v_sqz > 0.0 && v_sqz <= 1.0 && v_asqz >= 1.0 && v_asqz.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < v_sqz <= 1 <= v_asqz, got v_sqz = {v_sqz}, v_asqz = {v_asqz}"
        )));
    }
    if v_sqz * v_asqz < 1.0 - PHYSICAL_TOL {
        return Err(Error::UnphysicalInput(format!(
            "v_sqz * v_asqz = {} violates the uncertainty bound",
            v_sqz * v_asqz
        )));
    }
    CovarianceMatrix::diagonal(&[v_sqz, v_asqz, v_sqz, v_asqz, 1.0, 1.0, 1.0, 1.0])
}

fn check_mode(index: usize, n_modes: usize) -> Result<()> {
    if index >= n_modes {
        Err(Error::IndexOutOfRange { index, n_modes })
    } else {
        Ok(())
    }
}

fn check_pair(i: usize, j: usize, n_modes: usize) -> Result<()> {
    check_mode(i, n_modes)?;
    check_mode(j, n_modes)?;
    if i == j {
        return Err(Error::SameMode(i));
    }
    Ok(())
}

/// Same real 2×2 mode mixing applied to the X and the P block.
fn mode_mixing(i: usize, j: usize, n_modes: usize, block: [[f64; 2]; 2]) -> SymplecticTransform {
    let mut s = DMatrix::identity(2 * n_modes, 2 * n_modes);
    for q in 0..2 {
        let (a, b) = (2 * i + q, 2 * j + q);
        s[(a, a)] = block[0][0];
        s[(a, b)] = block[0][1];
        s[(b, a)] = block[1][0];
        s[(b, b)] = block[1][1];
    }
    SymplecticTransform { n_modes, entries: s }
}

/// 50:50 beamsplitter: `out_i = (in_i + in_j)/√2`, `out_j = (in_i − in_j)/√2`.
pub fn beamsplitter(i: usize, j: usize, n_modes: usize) -> Result<SymplecticTransform> {
    check_pair(i, j, n_modes)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Ok(mode_mixing(i, j, n_modes, [[h, h], [h, -h]]))
}

/// `X′ = cos φ X + sin φ P`, `P′ = −sin φ X + cos φ P` on mode `i`.
pub fn phase_rotation(i: usize, phi: f64, n_modes: usize) -> Result<SymplecticTransform> {
    check_mode(i, n_modes)?;
    let (s, c) = phi.sin_cos();
    let mut m = DMatrix::identity(2 * n_modes, 2 * n_modes);
    m[(2 * i, 2 * i)] = c;
    m[(2 * i, 2 * i + 1)] = s;
    m[(2 * i + 1, 2 * i)] = -s;
    m[(2 * i + 1, 2 * i + 1)] = c;
    Ok(SymplecticTransform { n_modes, entries: m })
}

/// Half-wave-plate plus PBS analyzer mixing two polarization modes by θ.
pub fn polarization_mixer(i: usize, j: usize, theta: f64, n_modes: usize) -> Result<SymplecticTransform> {
    check_pair(i, j, n_modes)?;
    let (s, c) = theta.sin_cos();
    Ok(mode_mixing(i, j, n_modes, [[c, s], [-s, c]]))
}

/// Reorders modes: output mode `k` is input mode `order[k]`.
pub fn mode_permutation(order: &[usize]) -> Result<SymplecticTransform> {
    let n = order.len();
    let mut seen = vec![false; n];
    for &m in order {
        check_mode(m, n)?;
        if std::mem::replace(&mut seen[m], true) {
            return Err(Error::InvalidArgument(format!("mode {m} appears twice in permutation")));
        }
    }
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for (k, &m) in order.iter().enumerate() {
        s[(2 * k, 2 * m)] = 1.0;
        s[(2 * k + 1, 2 * m + 1)] = 1.0;
    }
    Ok(SymplecticTransform { n_modes: n, entries: s })
}

/// `γ → S γ Sᵀ`, re-symmetrized.
pub fn apply(s: &SymplecticTransform, gamma: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    if s.n_modes != gamma.n_modes {
        return Err(Error::DimensionMismatch {
            expected: s.n_modes,
            found: gamma.n_modes,
        });
    }
    Ok(CovarianceMatrix::from_symmetric_unchecked(
        &s.entries * &gamma.entries * s.entries.transpose(),
    ))
}

/// `γ → η γ + ε I`.
pub fn cp_map(gamma: &CovarianceMatrix, ch: ChannelParams) -> ChannelOutput {
    let d = gamma.dim();
    let out = CovarianceMatrix::from_symmetric_unchecked(
        &gamma.entries * ch.eta + DMatrix::<f64>::identity(d, d) * ch.epsilon,
    );
    let physical = out.is_physical();
    ChannelOutput { state: out, physical }
}

/// Symplectic spectrum in descending order.
///
/// Computed as the square roots of the doubly degenerate eigenvalues of
/// `(γ^{1/2} Ω γ^{1/2})ᵀ (γ^{1/2} Ω γ^{1/2})`.
pub fn symplectic_eigenvalues(gamma: &CovarianceMatrix) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::new(gamma.entries.clone());
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&l| l <= 1e-14 * scale) {
        return Err(Error::NotPositiveDefinite);
    }
    let sqrt_vals = eig.eigenvalues.map(f64::sqrt);
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    let m = &root * omega(gamma.n_modes) * &root;
    let k = symmetrized(m.transpose() * &m);
    let mut nu2: Vec<f64> = SymmetricEigen::new(k).eigenvalues.iter().copied().collect();
    nu2.sort_by(|a, b| b.total_cmp(a));
    Ok(nu2.iter().step_by(2).map(|v| v.max(0.0).sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn vacuum_is_identity() {
        for n in [1, 4] {
            let v = vacuum_state(n);
            assert_eq!(v.matrix(), &DMatrix::<f64>::identity(2 * n, 2 * n));
            let nu = symplectic_eigenvalues(&v).unwrap();
            assert_eq!(nu.len(), n);
            assert!(nu.iter().all(|&x| close(x, 1.0, 1e-12)));
        }
    }

    #[test]
    fn bell_input_diagonal() {
        assert_eq!(bell_input_state(1.0, 1.0).unwrap().matrix(), vacuum_state(4).matrix());

        let v_sqz = 10f64.powf(-0.11);
        let v_asqz = 1.0 / (0.98f64.powi(2) * v_sqz);
        let g = bell_input_state(v_sqz, v_asqz).unwrap();
        let expected = [0.776_247_1, 1.341_367_7, 0.776_247_1, 1.341_367_7, 1.0, 1.0, 1.0, 1.0];
        for (k, e) in expected.iter().enumerate() {
            assert!(close(g.get(k, k), *e, 1e-7), "entry {k}: {}", g.get(k, k));
        }
        // Round trip of the unit conversions.
        assert!(close(-10.0 * g.get(0, 0).log10(), 1.1, 1e-12));
        assert!(close(1.0 / (g.get(0, 0) * g.get(1, 1)).sqrt(), 0.98, 1e-12));
    }

    #[test]
    fn bell_input_rejects_uncertainty_violation() {
        assert!(matches!(bell_input_state(0.5, 1.9), Err(Error::UnphysicalInput(_))));
        assert!(matches!(bell_input_state(1.2, 1.9), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn beamsplitter_has_order_four() {
        let bs = beamsplitter(0, 1, 2).unwrap();
        let twice = bs.after(&bs).unwrap();
        // BS² is the identity on this convention's 2×2 block.
        assert!((twice.matrix() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
        let g = CovarianceMatrix::from_matrix(DMatrix::from_row_slice(
            4,
            4,
            &[2.0, 0.3, 0.1, 0.0, 0.3, 1.5, 0.0, 0.2, 0.1, 0.0, 1.2, 0.1, 0.0, 0.2, 0.1, 3.0],
        ))
        .unwrap();
        let mut h = g.clone();
        for _ in 0..4 {
            h = apply(&bs, &h).unwrap();
        }
        assert!((h.matrix() - g.matrix()).amax() < 1e-12);
    }

    #[test]
    fn beamsplitter_on_vacuum_and_orthogonal_squeezers() {
        let bs = beamsplitter(0, 1, 2).unwrap();
        let out = apply(&bs, &vacuum_state(2)).unwrap();
        assert!((out.matrix() - vacuum_state(2).matrix()).amax() < 1e-15);

        let (vs, va) = (0.6, 1.0 / 0.6);
        let x_then_p = CovarianceMatrix::diagonal(&[vs, va, va, vs]).unwrap();
        let out = apply(&bs, &x_then_p).unwrap();
        // Direct arithmetic: <X1' X2'> = (<X1²> − <X2²>)/2.
        assert!(close(out.get(0, 2), (vs - va) / 2.0, 1e-14));
        assert!(close(out.get(1, 3), (va - vs) / 2.0, 1e-14));

        let p_then_x = CovarianceMatrix::diagonal(&[va, vs, vs, va]).unwrap();
        let out = apply(&bs, &p_then_x).unwrap();
        assert!(close(out.get(0, 2), (va - vs) / 2.0, 1e-14));
    }

    #[test]
    fn phase_rotation_basics() {
        let g = CovarianceMatrix::diagonal(&[0.5, 2.0]).unwrap();
        let id = phase_rotation(0, 0.0, 1).unwrap();
        assert_eq!(apply(&id, &g).unwrap(), g);
        let quarter = apply(&phase_rotation(0, FRAC_PI_2, 1).unwrap(), &g).unwrap();
        assert!(close(quarter.get(0, 0), 2.0, 1e-15));
        assert!(close(quarter.get(1, 1), 0.5, 1e-15));
        for phi in [0.1, 0.7, 2.3, -1.4] {
            let r = apply(&phase_rotation(0, phi, 1).unwrap(), &g).unwrap();
            assert!(close(r.mean_photons(0), g.mean_photons(0), 1e-14));
        }
    }

    #[test]
    fn mixer_identity_and_inversion() {
        assert_eq!(
            polarization_mixer(0, 1, 0.0, 2).unwrap().matrix(),
            &DMatrix::<f64>::identity(4, 4)
        );
        let pi = polarization_mixer(0, 1, PI, 2).unwrap();
        assert!((pi.matrix() + DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
    }

    #[test]
    fn index_validation() {
        assert!(matches!(beamsplitter(0, 4, 4), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(beamsplitter(2, 2, 4), Err(Error::SameMode(2))));
        assert!(matches!(phase_rotation(5, 0.1, 2), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(polarization_mixer(1, 1, 0.1, 2), Err(Error::SameMode(1))));
        let s = beamsplitter(0, 1, 2).unwrap();
        assert!(matches!(apply(&s, &vacuum_state(4)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn tmsv_from_orthogonal_squeezers() {
        let r: f64 = 0.4;
        let v = (-2.0 * r).exp();
        let g = CovarianceMatrix::diagonal(&[v, 1.0 / v, v, 1.0 / v]).unwrap();
        let s = SymplecticTransform::chain(2, &[phase_rotation(0, FRAC_PI_2, 2).unwrap(), beamsplitter(0, 1, 2).unwrap()])
            .unwrap();
        let out = apply(&s, &g).unwrap();
        assert!(close(out.get(0, 0), (2.0 * r).cosh(), 1e-13));
        assert!(close(out.get(1, 1), (2.0 * r).cosh(), 1e-13));
        assert!(close(out.get(0, 2), (2.0 * r).sinh(), 1e-13));
        assert!(close(out.get(1, 3), -(2.0 * r).sinh(), 1e-13));
        assert!(close(out.get(0, 1), 0.0, 1e-15));

        let marginal = out.marginal(&[0]).unwrap();
        let nu = symplectic_eigenvalues(&marginal).unwrap();
        assert!(close(nu[0], (2.0 * r).cosh(), 1e-12));
        let nu_joint = symplectic_eigenvalues(&out).unwrap();
        assert!(nu_joint.iter().all(|&x| close(x, 1.0, 1e-10)));
    }

    #[test]
    fn cp_map_cases() {
        let g = bell_input_state(0.7, 1.6).unwrap();
        let same = cp_map(&g, ChannelParams::ideal());
        assert_eq!(same.state, g);
        assert!(same.physical);

        let fixed = cp_map(&vacuum_state(2), ChannelParams::new(0.5, 0.5).unwrap());
        assert!((fixed.state.matrix() - vacuum_state(2).matrix()).amax() < 1e-15);
        assert!(fixed.physical);

        let under = cp_map(&vacuum_state(2), ChannelParams::new(0.5, 0.2).unwrap());
        assert!(close(under.state.get(0, 0), 0.7, 1e-15));
        assert!(!under.physical);
        assert!(!ChannelParams::new(0.5, 0.2).unwrap().is_physical());
    }

    #[test]
    fn pure_squeezed_state_spectrum() {
        let g = CovarianceMatrix::diagonal(&[0.25, 4.0]).unwrap();
        let nu = symplectic_eigenvalues(&g).unwrap();
        assert!(close(nu[0], 1.0, 1e-12));
        let thermal = CovarianceMatrix::diagonal(&[3.0, 3.0, 1.5, 1.5]).unwrap();
        let nu = symplectic_eigenvalues(&thermal).unwrap();
        assert!(close(nu[0], 3.0, 1e-12) && close(nu[1], 1.5, 1e-12));
    }

    #[test]
    fn spectrum_rejects_indefinite() {
        let bad = CovarianceMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(matches!(symplectic_eigenvalues(&bad), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn marginal_round_trip() {
        let g = apply(
            &beamsplitter(0, 2, 3).unwrap(),
            &CovarianceMatrix::diagonal(&[0.5, 2.0, 1.0, 1.0, 3.0, 3.0]).unwrap(),
        )
        .unwrap();
        let sub = g.marginal(&[2, 0]).unwrap();
        assert_eq!(g.with_marginal(&[2, 0], &sub).unwrap(), g);
    }
}
