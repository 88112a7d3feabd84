//! Least-squares fit of the source and channel model to measured R tables.
//!
//! The search runs in unconstrained coordinates mapped onto the parameter
//! bounds: logistic for η, softplus for ε, and `exp(∓softplus)` for the
//! squeezed and anti-squeezed variances. Every reported value therefore lies
//! inside its bounds without clipping.
//!
//! A uniform loss commutes with the passive network, so the R tables only
//! see `η + ε`, `η(V_sqz − 1)` and `η(V_asqz − 1)`. A free four-parameter
//! fit is rank deficient; [`FitOptions::fixed`] pins parameters (in practice
//! `V_sqz`, measured directly off the source) to make it identifiable.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{analyze, build_bell_state_unchecked, variance_to_db, CircuitConfig};
use crate::correlation::{r_table_raw, RTable};
use crate::error::{Error, Result};
use crate::gaussian::ChannelParams;
use crate::simplex::{minimize, SimplexOptions, SimplexResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub eta: f64,
    pub epsilon: f64,
    pub v_sqz: f64,
    pub v_asqz: f64,
}

impl ModelParams {
    pub fn as_array(&self) -> [f64; 4] {
        [self.eta, self.epsilon, self.v_sqz, self.v_asqz]
    }

    pub fn from_array(p: [f64; 4]) -> Self {
        Self {
            eta: p[0],
            epsilon: p[1],
            v_sqz: p[2],
            v_asqz: p[3],
        }
    }

    pub fn in_bounds(&self) -> bool {
        self.eta > 0.0
            && self.eta <= 1.0
            && self.epsilon >= 0.0
            && self.v_sqz > 0.0
            && self.v_sqz <= 1.0
            && self.v_asqz >= 1.0
            && self.as_array().iter().all(|v| v.is_finite())
    }

    fn circuit(&self) -> CircuitConfig {
        CircuitConfig::new(
            self.v_sqz,
            self.v_asqz,
            ChannelParams {
                eta: self.eta,
                epsilon: self.epsilon,
            },
        )
    }

    /// Whether the modeled four-mode state satisfies the uncertainty bound.
    pub fn is_physical(&self) -> bool {
        build_bell_state_unchecked(&self.circuit()).map_or(false, |g| g.is_physical())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Eta,
    Epsilon,
    VSqz,
    VAsqz,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::Eta, Param::Epsilon, Param::VSqz, Param::VAsqz];

    fn index(self) -> usize {
        self as usize
    }
}

/// R tables predicted by the model, one per `(θ_A, θ_B)` pair. Unphysical
/// parameter points are evaluated all the same.
pub fn predict_r_tables(params: &ModelParams, angle_pairs: &[(f64, f64)]) -> Result<Vec<RTable>> {
    if !params.in_bounds() {
        return Err(Error::InvalidArgument(format!("model parameters out of bounds: {params:?}")));
    }
    let gamma = build_bell_state_unchecked(&params.circuit())?;
    angle_pairs
        .iter()
        .map(|&(ta, tb)| r_table_raw(&analyze(&gamma, ta, tb)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    /// Total starts including the initial point.
    pub n_starts: usize,
    /// Iteration cap of one simplex run; see [`MAX_RESTARTS`].
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Spread of the perturbed starts in the unconstrained coordinates.
    pub perturbation: f64,
    /// Parameters held at their initial values.
    pub fixed: Vec<Param>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_starts: 9,
            max_iter: 500,
            rel_tol: 1e-10,
            perturbation: 1.0,
            fixed: Vec::new(),
        }
    }
}

impl FitOptions {
    pub fn pinned(fixed: &[Param]) -> Self {
        Self {
            fixed: fixed.to_vec(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub eta: f64,
    pub epsilon: f64,
    pub v_sqz: f64,
    pub v_asqz: f64,
    pub residual: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub physical: bool,
    pub inferred_squeezing_db: f64,
    /// Numerical rank of the R-table Jacobian in all four parameters.
    pub jacobian_rank: usize,
    /// True when the free parameters are locally determined by the data.
    pub identifiable: bool,
}

impl FitResult {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            eta: self.eta,
            epsilon: self.epsilon,
            v_sqz: self.v_sqz,
            v_asqz: self.v_asqz,
        }
    }
}

/// `−10 log10(V_sqz)`.
pub fn inferred_squeezing_db(fit: &FitResult) -> f64 {
    variance_to_db(fit.v_sqz)
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u
    } else {
        u.exp().ln_1p()
    }
}

fn inv_softplus(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

/// Keeps an initial value this far inside an open bound.
const INIT_MARGIN: f64 = 1e-6;

/// Fresh simplices allowed per start after the iteration cap is reached.
pub const MAX_RESTARTS: usize = 4;

fn to_unbounded(p: &ModelParams) -> [f64; 4] {
    let eta = p.eta.clamp(INIT_MARGIN, 1.0 - INIT_MARGIN);
    [
        (eta / (1.0 - eta)).ln(),
        inv_softplus(p.epsilon.max(INIT_MARGIN)),
        inv_softplus((-p.v_sqz.ln()).max(INIT_MARGIN)),
        inv_softplus(p.v_asqz.ln().max(INIT_MARGIN)),
    ]
}

fn from_unbounded(u: &[f64; 4]) -> ModelParams {
    ModelParams {
        eta: logistic(u[0]),
        epsilon: softplus(u[1]),
        v_sqz: (-softplus(u[2])).exp(),
        v_asqz: softplus(u[3]).exp(),
    }
}

fn flatten(tables: &[RTable]) -> Vec<f64> {
    tables.iter().flat_map(|t| t.as_array()).collect()
}

/// Numerical rank of `∂R/∂ln p` at `params`, over the selected parameters.
pub fn jacobian_rank(params: &ModelParams, angle_pairs: &[(f64, f64)], which: &[Param]) -> Result<usize> {
    if which.is_empty() {
        return Ok(0);
    }
    let base = params.as_array();
    let mut cols = Vec::with_capacity(which.len());
    for &p in which {
        let i = p.index();
        let h = 1e-5 * base[i].abs().max(1e-3);
        let mut hi = base;
        let mut lo = base;
        hi[i] += h;
        lo[i] -= h;
        // Stay inside the bound set for one-sided parameters.
        let (hi, lo, span) = {
            let hp = ModelParams::from_array(hi);
            let lp = ModelParams::from_array(lo);
            match (hp.in_bounds(), lp.in_bounds()) {
                (true, true) => (hp, lp, 2.0 * h),
                (false, true) => (*params, lp, h),
                (true, false) => (hp, *params, h),
                (false, false) => return Err(Error::InvalidArgument("parameters out of bounds".into())),
            }
        };
        let rh = flatten(&predict_r_tables(&hi, angle_pairs)?);
        let rl = flatten(&predict_r_tables(&lo, angle_pairs)?);
        let scale = base[i].abs().max(1e-3);
        cols.push(rh.iter().zip(&rl).map(|(a, b)| (a - b) / span * scale).collect::<Vec<f64>>());
    }
    let rows = cols[0].len();
    let j = DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
    let sv = j.svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > 1e-6 * smax).count())
}

/// Mean photon number per detected mode, which is the same for all four.
pub fn mean_photons_per_mode(params: &ModelParams) -> Result<f64> {
    Ok(build_bell_state_unchecked(&params.circuit())?.total_mean_photons() / 4.0)
}

/// The R tables depend on the per-mode photon number `n̄` only through
/// `n̄²`, so `ε → ε − 4n̄` maps every solution onto a twin with `−n̄`.
/// Returns the twin with non-negative photon number when it is in bounds
/// and ε is free.
fn photon_positive_branch(params: &ModelParams, fixed: &[Param]) -> ModelParams {
    if fixed.contains(&Param::Epsilon) {
        return *params;
    }
    match mean_photons_per_mode(params) {
        Ok(n) if n < 0.0 && params.epsilon - 4.0 * n >= 0.0 => ModelParams {
            epsilon: params.epsilon - 4.0 * n,
            ..*params
        },
        _ => *params,
    }
}

/// Diagnostics of one start.
#[derive(Debug, Clone, PartialEq)]
pub struct StartOutcome {
    pub params: ModelParams,
    pub residual: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub result: FitResult,
    pub best_start: usize,
    pub starts: Vec<StartOutcome>,
}

/// Fits the model to `(θ_A, θ_B, R table)` observations.
pub fn fit_report(measured: &[((f64, f64), RTable)], init: &ModelParams, opts: &FitOptions) -> Result<FitReport> {
    if measured.len() < 4 {
        return Err(Error::DegenerateData(format!(
            "{} analyzer settings given, need at least 4",
            measured.len()
        )));
    }
    if !init.in_bounds() {
        return Err(Error::InvalidArgument(format!("initial parameters out of bounds: {init:?}")));
    }
    if opts.n_starts == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    let angle_pairs: Vec<(f64, f64)> = measured.iter().map(|(a, _)| *a).collect();
    let target: Vec<f64> = measured.iter().flat_map(|(_, t)| t.as_array()).collect();
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite R value".into()));
    }
    let (lo, hi) = target
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo <= 1e-15 * hi.abs().max(1e-300) || hi.abs() < 1e-300 {
        return Err(Error::DegenerateData("all R values are equal".into()));
    }
    let scale: f64 = target.iter().map(|v| v * v).sum();

    let free: Vec<usize> = Param::ALL
        .iter()
        .filter(|p| !opts.fixed.contains(p))
        .map(|p| p.index())
        .collect();
    let u0 = to_unbounded(init);
    let objective = |x: &[f64]| -> f64 {
        let mut u = u0;
        for (&i, &v) in free.iter().zip(x) {
            u[i] = v;
        }
        let params = from_unbounded(&u);
        match predict_r_tables(&params, &angle_pairs) {
            Ok(t) => flatten(&t).iter().zip(&target).map(|(p, m)| (p - m).powi(2)).sum(),
            Err(_) => f64::INFINITY,
        }
    };
    let simplex_opts = SimplexOptions {
        max_iter: opts.max_iter,
        rel_tol: opts.rel_tol,
        abs_tol: 1e-24 * scale,
        initial_step: 0.5,
    };

    let starts: Vec<StartOutcome> = (0..opts.n_starts)
        .into_par_iter()
        .map(|k| {
            let mut x0: Vec<f64> = free.iter().map(|&i| u0[i]).collect();
            if k > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
                for v in &mut x0 {
                    *v += opts.perturbation * rng.random_range(-1.0..1.0);
                }
            }
            let mut r = minimize(objective, &x0, &simplex_opts);
            // A simplex that hits the cap has usually collapsed in the
            // η/ε valley; a fresh one from its best point keeps descending.
            let mut restarts = 0;
            while !r.converged && restarts < MAX_RESTARTS {
                let next = minimize(objective, &r.x, &simplex_opts);
                let mut trace = std::mem::take(&mut r.trace);
                trace.extend(&next.trace);
                r = SimplexResult {
                    n_iter: r.n_iter + next.n_iter,
                    trace,
                    ..next
                };
                restarts += 1;
            }
            let mut u = u0;
            for (&i, &v) in free.iter().zip(&r.x) {
                u[i] = v;
            }
            let mut params = from_unbounded(&u);
            for p in &opts.fixed {
                let i = p.index();
                let mut a = params.as_array();
                a[i] = init.as_array()[i];
                params = ModelParams::from_array(a);
            }
            StartOutcome {
                params,
                residual: r.f,
                n_iter: r.n_iter,
                converged: r.converged,
                trace: r.trace,
            }
        })
        .collect();

    let best_start = (0..starts.len())
        .min_by(|&a, &b| starts[a].residual.total_cmp(&starts[b].residual).then(a.cmp(&b)))
        .unwrap_or(0);
    let best = &starts[best_start];
    let params = photon_positive_branch(&best.params, &opts.fixed);
    let residual = if params == best.params {
        best.residual
    } else {
        let t = flatten(&predict_r_tables(&params, &angle_pairs)?);
        t.iter().zip(&target).map(|(p, m)| (p - m).powi(2)).sum()
    };
    let free_params: Vec<Param> = Param::ALL.iter().copied().filter(|p| !opts.fixed.contains(p)).collect();
    let full_rank = jacobian_rank(&params, &angle_pairs, &Param::ALL)?;
    let free_rank = jacobian_rank(&params, &angle_pairs, &free_params)?;
    let result = FitResult {
        eta: params.eta,
        epsilon: params.epsilon,
        v_sqz: params.v_sqz,
        v_asqz: params.v_asqz,
        residual,
        n_iter: best.n_iter,
        converged: best.converged,
        physical: params.is_physical(),
        inferred_squeezing_db: variance_to_db(params.v_sqz),
        jacobian_rank: full_rank,
        identifiable: free_rank == free_params.len(),
    };
    Ok(FitReport {
        result,
        best_start,
        starts,
    })
}

pub fn fit(measured: &[((f64, f64), RTable)], init: &ModelParams, opts: &FitOptions) -> Result<FitResult> {
    fit_report(measured, init, opts).map(|r| r.result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_bell_state, db_to_variance, BellAngles};
    use crate::correlation::{e_value, r_tables_for};

    fn canonical_pairs() -> Vec<(f64, f64)> {
        BellAngles::canonical().pairs().to_vec()
    }

    fn observations(p: &ModelParams) -> Vec<((f64, f64), RTable)> {
        let pairs = canonical_pairs();
        let t = predict_r_tables(p, &pairs).unwrap();
        pairs.into_iter().zip(t).collect()
    }

    fn truth() -> ModelParams {
        ModelParams {
            eta: 0.95,
            epsilon: 0.02,
            v_sqz: 0.776,
            v_asqz: 1.341,
        }
    }

    #[test]
    fn vacuum_prediction_is_zero() {
        let p = ModelParams {
            eta: 1.0,
            epsilon: 0.0,
            v_sqz: 1.0,
            v_asqz: 1.0,
        };
        for t in predict_r_tables(&p, &canonical_pairs()).unwrap() {
            assert!(t.as_array().iter().all(|v| v.abs() < 1e-16));
        }
    }

    #[test]
    fn prediction_matches_the_circuit_pipeline() {
        let v = db_to_variance(1.1);
        let p = ModelParams {
            eta: 1.0,
            epsilon: 0.0,
            v_sqz: v,
            v_asqz: 1.0 / v,
        };
        let direct = r_tables_for(&build_bell_state(&p.circuit()).unwrap(), &BellAngles::canonical()).unwrap();
        assert_eq!(predict_r_tables(&p, &canonical_pairs()).unwrap(), direct.to_vec());
    }

    #[test]
    fn added_noise_washes_out_correlations() {
        let pairs = canonical_pairs();
        let mut last = [f64::INFINITY; 4];
        for k in 0..12 {
            let p = ModelParams {
                epsilon: 0.05 + 0.1 * k as f64,
                ..truth()
            };
            let t = predict_r_tables(&p, &pairs).unwrap();
            for (i, tab) in t.iter().enumerate() {
                let e = e_value(tab).unwrap().abs();
                assert!(e < last[i], "step {k}, pair {i}");
                last[i] = e;
            }
        }
        assert!(last.iter().all(|&e| e < 0.2));
    }

    #[test]
    fn transforms_round_trip_and_respect_bounds() {
        let p = truth();
        let back = from_unbounded(&to_unbounded(&p));
        for (a, b) in p.as_array().iter().zip(back.as_array()) {
            assert!((a - b).abs() < 1e-12);
        }
        for u in [-40.0, -3.0, 0.0, 3.0, 40.0] {
            assert!(from_unbounded(&[u; 4]).in_bounds(), "u = {u}");
        }
    }

    #[test]
    fn model_has_rank_three() {
        assert_eq!(jacobian_rank(&truth(), &canonical_pairs(), &Param::ALL).unwrap(), 3);
        let three = [Param::Eta, Param::Epsilon, Param::VAsqz];
        assert_eq!(jacobian_rank(&truth(), &canonical_pairs(), &three).unwrap(), 3);
    }

    fn physical_truth() -> ModelParams {
        ModelParams {
            epsilon: 0.05 + db_to_variance(17.5),
            ..truth()
        }
    }

    fn pinned_init(v_sqz: f64) -> ModelParams {
        ModelParams {
            eta: 0.8,
            epsilon: 0.1,
            v_sqz,
            v_asqz: 1.2,
        }
    }

    #[test]
    fn pinned_round_trip() {
        let t = physical_truth();
        let r = fit(&observations(&t), &pinned_init(t.v_sqz), &FitOptions::pinned(&[Param::VSqz])).unwrap();
        for (got, want) in r.params().as_array().iter().zip(t.as_array()) {
            assert!(((got - want) / want).abs() < 0.01, "{:?}", r.params());
        }
        assert!(r.identifiable && r.converged && r.physical);
        assert_eq!(r.jacobian_rank, 3);
        assert!(r.residual < 1e-20);
    }

    #[test]
    fn photon_number_twin() {
        // A point with ε below the loss floor has negative photon numbers
        // and an exact twin with the opposite sign.
        let t = truth();
        let n = mean_photons_per_mode(&t).unwrap();
        assert!(n < 0.0);
        let twin = ModelParams {
            epsilon: t.epsilon - 4.0 * n,
            ..t
        };
        assert!((mean_photons_per_mode(&twin).unwrap() + n).abs() < 1e-15);
        let (a, b) = (observations(&t), observations(&twin));
        for ((_, x), (_, y)) in a.iter().zip(&b) {
            for (u, v) in x.as_array().iter().zip(y.as_array()) {
                assert!((u - v).abs() < 1e-15);
            }
        }
        let r = fit(&a, &pinned_init(t.v_sqz), &FitOptions::pinned(&[Param::VSqz])).unwrap();
        for (got, want) in r.params().as_array().iter().zip(twin.as_array()) {
            assert!(((got - want) / want).abs() < 0.01, "{:?}", r.params());
        }
        assert!(((r.eta - t.eta) / t.eta).abs() < 0.01);
        assert!(mean_photons_per_mode(&r.params()).unwrap() >= 0.0);
    }

    #[test]
    fn free_fit_matches_data_and_reports_degeneracy() {
        let t = physical_truth();
        let obs = observations(&t);
        let rep = fit_report(&obs, &pinned_init(0.9), &FitOptions::default()).unwrap();
        let r = &rep.result;
        assert!(!r.identifiable);
        let combos = |p: ModelParams| [p.eta + p.epsilon, p.eta * (p.v_sqz - 1.0), p.eta * (p.v_asqz - 1.0)];
        for (a, b) in combos(r.params()).iter().zip(combos(t)) {
            assert!(((a - b) / b).abs() < 1e-3, "{a} vs {b}");
        }
        for s in &rep.starts {
            assert!(s.trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn degenerate_inputs() {
        let flat: Vec<((f64, f64), RTable)> = canonical_pairs()
            .into_iter()
            .map(|a| (a, RTable::from_array([0.0; 4])))
            .collect();
        assert!(matches!(
            fit(&flat, &truth(), &FitOptions::default()),
            Err(Error::DegenerateData(_))
        ));
        let obs = observations(&truth());
        assert!(matches!(
            fit(&obs[..3], &truth(), &FitOptions::default()),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn squeezing_in_db() {
        let mk = |v| FitResult {
            eta: 1.0,
            epsilon: 0.0,
            v_sqz: v,
            v_asqz: 1.0,
            residual: 0.0,
            n_iter: 0,
            converged: true,
            physical: true,
            inferred_squeezing_db: 0.0,
            jacobian_rank: 0,
            identifiable: true,
        };
        assert_eq!(inferred_squeezing_db(&mk(1.0)), 0.0);
        assert!((inferred_squeezing_db(&mk(10f64.powf(-0.11))) - 1.1).abs() < 1e-12);
        assert!((inferred_squeezing_db(&mk(10f64.powf(-0.39))) - 3.9).abs() < 1e-12);
    }
}
