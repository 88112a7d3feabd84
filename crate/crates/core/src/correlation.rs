//! Photon-number correlations from quadrature second moments, and the CHSH
//! quantities built on them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::circuit::{analyze, build_bell_state, pair_marginal, BellAngles, CircuitConfig, PAIR_ORDER};
use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;

/// Smallest correlation sum accepted as a denominator.
pub const EPS_DENOM: f64 = 1e-12;
/// Negative R values down to this are treated as rounding and clamped.
pub const NEGATIVE_R_TOL: f64 = 1e-9;

/// Second moments of one (A, B) detector pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMoments {
    pub xx: f64,
    pub pp: f64,
    pub xp: f64,
    pub px: f64,
    pub va_x: f64,
    pub va_p: f64,
    pub vb_x: f64,
    pub vb_p: f64,
    pub v_v: f64,
}

impl SecondMoments {
    /// Independent modes with the given variances and no cross-moments.
    pub fn uncorrelated(va_x: f64, va_p: f64, vb_x: f64, vb_p: f64) -> Self {
        Self {
            xx: 0.0,
            pp: 0.0,
            xp: 0.0,
            px: 0.0,
            va_x,
            va_p,
            vb_x,
            vb_p,
            v_v: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vars = [self.va_x, self.va_p, self.vb_x, self.vb_p, self.v_v];
        if vars.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::MomentExtraction("variances must be positive and finite".into()));
        }
        let cross = [
            (self.xx, self.va_x * self.vb_x),
            (self.pp, self.va_p * self.vb_p),
            (self.xp, self.va_x * self.vb_p),
            (self.px, self.va_p * self.vb_x),
        ];
        for (c, prod) in cross {
            if !c.is_finite() || c.abs() > prod.sqrt() + 1e-9 {
                return Err(Error::MomentExtraction(format!(
                    "cross-moment {c} exceeds the Cauchy-Schwarz bound {}",
                    prod.sqrt()
                )));
            }
        }
        Ok(())
    }
}

/// `R = <n_A n_B>` of a Gaussian pair:
/// `(1/16)[2(xx² + pp² + xp² + px²) + (Σ_A)(Σ_B) − 2V(Σ_A) − 2V(Σ_B) + 4V²]`
/// with `Σ_A = V_{A;X} + V_{A;P}`.
pub fn r_from_moments(m: &SecondMoments) -> f64 {
    let sa = m.va_x + m.va_p;
    let sb = m.vb_x + m.vb_p;
    let cross = m.xx * m.xx + m.pp * m.pp + m.xp * m.xp + m.px * m.px;
    (2.0 * cross + sa * sb - 2.0 * m.v_v * sa - 2.0 * m.v_v * sb + 4.0 * m.v_v * m.v_v) / 16.0
}

/// The four pair correlations at one analyzer setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RTable {
    pub r_pp: f64,
    pub r_mm: f64,
    pub r_pm: f64,
    pub r_mp: f64,
}

impl RTable {
    /// From values in `(++, −−, +−, −+)` order.
    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            r_pp: v[0],
            r_mm: v[1],
            r_pm: v[2],
            r_mp: v[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.r_pp, self.r_mm, self.r_pm, self.r_mp]
    }

    pub fn sum(&self) -> f64 {
        self.r_pp + self.r_mm + self.r_pm + self.r_mp
    }
}

/// An R table together with the number of entries clamped from tiny
/// negative values to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckedRTable {
    pub table: RTable,
    pub clamped: usize,
}

/// R table of an analyzed state in `(A⁺, A⁻, B⁺, B⁻)` order, with the
/// clamp count.
pub fn r_table_checked(gamma_analyzed: &CovarianceMatrix) -> Result<CheckedRTable> {
    let mut values = [0.0; 4];
    let mut clamped = 0;
    for (slot, (a, b)) in values.iter_mut().zip(PAIR_ORDER) {
        let r = r_from_moments(&pair_marginal(gamma_analyzed, a, b)?.moments());
        *slot = if r >= 0.0 {
            r
        } else if r >= -NEGATIVE_R_TOL {
            clamped += 1;
            0.0
        } else {
            return Err(Error::NegativeCorrelation { value: r });
        };
    }
    Ok(CheckedRTable {
        table: RTable::from_array(values),
        clamped,
    })
}

pub fn r_table(gamma_analyzed: &CovarianceMatrix) -> Result<RTable> {
    r_table_checked(gamma_analyzed).map(|c| c.table)
}

/// Like [`r_table`] but with negative values passed through unchanged.
pub(crate) fn r_table_raw(gamma_analyzed: &CovarianceMatrix) -> Result<RTable> {
    let mut values = [0.0; 4];
    for (slot, (a, b)) in values.iter_mut().zip(PAIR_ORDER) {
        *slot = r_from_moments(&pair_marginal(gamma_analyzed, a, b)?.moments());
    }
    Ok(RTable::from_array(values))
}

/// `(R⁺⁺ + R⁻⁻ − R⁺⁻ − R⁻⁺) / ΣR`.
pub fn e_value(t: &RTable) -> Result<f64> {
    let denom = t.sum();
    if !(denom > EPS_DENOM) {
        return Err(Error::NoPhotons { denominator: denom });
    }
    Ok((t.r_pp + t.r_mm - t.r_pm - t.r_mp) / denom)
}

/// `|E₁ + E₂ + E₃ − E₄|` with the E values in [`BellAngles::pairs`] order.
pub fn bell_value(e: [f64; 4]) -> f64 {
    (e[0] + e[1] + e[2] - e[3]).abs()
}

/// Normalized fringes `R^{ij} / ΣR`.
pub fn p_values(t: &RTable) -> Result<[f64; 4]> {
    let denom = t.sum();
    if !(denom > EPS_DENOM) {
        return Err(Error::NoPhotons { denominator: denom });
    }
    Ok(t.as_array().map(|r| r / denom))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    pub e_values: [f64; 4],
    pub b: f64,
    pub angle_set: BellAngles,
    pub r_tables: [RTable; 4],
}

impl BellResult {
    pub fn from_tables(r_tables: [RTable; 4], angle_set: BellAngles) -> Result<Self> {
        let mut e_values = [0.0; 4];
        for (e, t) in e_values.iter_mut().zip(&r_tables) {
            *e = e_value(t)?;
        }
        Ok(Self {
            e_values,
            b: bell_value(e_values),
            angle_set,
            r_tables,
        })
    }
}

/// R tables of a four-mode `(A^h, A^v, B^h, B^v)` state at the four angle pairs.
pub fn r_tables_for(gamma4: &CovarianceMatrix, angles: &BellAngles) -> Result<[RTable; 4]> {
    let pairs = angles.pairs();
    let mut out = [RTable::from_array([0.0; 4]); 4];
    for (slot, (ta, tb)) in out.iter_mut().zip(pairs) {
        *slot = r_table(&analyze(gamma4, ta, tb)?)?;
    }
    Ok(out)
}

pub fn bell_from_state(gamma4: &CovarianceMatrix, angles: &BellAngles) -> Result<BellResult> {
    angles.validate()?;
    BellResult::from_tables(r_tables_for(gamma4, angles)?, *angles)
}

/// Analytic Bell result of a circuit configuration.
pub fn bell_from_config(cfg: &CircuitConfig, angles: &BellAngles) -> Result<BellResult> {
    bell_from_state(&build_bell_state(cfg)?, angles)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub theta_b: f64,
    /// `(P⁺⁺, P⁻⁻, P⁺⁻, P⁻⁺)`.
    pub p: [f64; 4],
    pub e: f64,
}

/// Normalized correlations as θ_B is swept at fixed θ_A.
pub fn fringe(cfg: &CircuitConfig, theta_a: f64, theta_b_grid: &[f64]) -> Result<Vec<FringePoint>> {
    if theta_b_grid.is_empty() {
        return Err(Error::InvalidArgument("fringe grid is empty".into()));
    }
    let gamma = build_bell_state(cfg)?;
    theta_b_grid
        .iter()
        .map(|&theta_b| {
            let t = r_table(&analyze(&gamma, theta_a, theta_b)?)?;
            Ok(FringePoint {
                theta_b,
                p: p_values(&t)?,
                e: e_value(&t)?,
            })
        })
        .collect()
}

/// Period of the correlation fringes in θ_B.
pub const FRINGE_PERIOD: f64 = std::f64::consts::PI;

/// Visibility `(max − min)/(max + min)` of the least-squares sinusoid
/// `c₀ + c₁ cos 2θ + c₂ sin 2θ` through the points, i.e. `√(c₁² + c₂²)/c₀`,
/// capped at 1.
pub fn visibility(theta_b: &[f64], values: &[f64]) -> Result<f64> {
    if theta_b.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_b.len(),
            found: values.len(),
        });
    }
    if theta_b.len() < 8 {
        return Err(Error::FitDegenerate(format!("{} points, need at least 8", theta_b.len())));
    }
    let (lo, hi) = theta_b
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    if hi - lo < FRAC_PI_2 - 1e-12 {
        return Err(Error::FitDegenerate(format!(
            "grid spans {:.4} rad, need half a period",
            hi - lo
        )));
    }
    let design = DMatrix::from_fn(theta_b.len(), 3, |r, c| match c {
        0 => 1.0,
        1 => (2.0 * theta_b[r]).cos(),
        _ => (2.0 * theta_b[r]).sin(),
    });
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * smax {
        return Err(Error::FitDegenerate("grid does not resolve the sinusoid".into()));
    }
    let coef = svd
        .solve(&DVector::from_column_slice(values), 1e-14)
        .map_err(|e| Error::FitDegenerate(e.to_string()))?;
    let (offset, amp) = (coef[0], coef[1].hypot(coef[2]));
    if !(offset > 1e-12) {
        return Err(Error::FitDegenerate(format!("fitted fringe offset {offset:e}")));
    }
    if amp < 1e-12 {
        return Ok(0.0);
    }
    Ok((amp / offset).min(1.0))
}

/// Visibility of the P⁺⁺ fringe.
pub fn fringe_visibility(points: &[FringePoint]) -> Result<f64> {
    let t: Vec<f64> = points.iter().map(|p| p.theta_b).collect();
    let v: Vec<f64> = points.iter().map(|p| p.p[0]).collect();
    visibility(&t, &v)
}

/// `n` evenly spaced points on `[start, end]`.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|k| start + (end - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{db_to_variance, Port};
    use crate::gaussian::{vacuum_state, ChannelParams};
    use std::f64::consts::{FRAC_PI_8, PI};

    fn reference_cfg(eta: f64, clearance_db: f64) -> CircuitConfig {
        CircuitConfig::from_squeezing_db(1.1, 0.98, ChannelParams::lossy(eta, db_to_variance(clearance_db)).unwrap())
    }

    #[test]
    fn vacuum_moments_give_zero() {
        assert_eq!(r_from_moments(&SecondMoments::uncorrelated(1.0, 1.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn product_thermal_factorizes() {
        for (va, vb) in [(1.5, 2.0), (3.0, 1.0), (1.2, 7.5)] {
            let r = r_from_moments(&SecondMoments::uncorrelated(va, va, vb, vb));
            let expected = (va - 1.0) / 2.0 * ((vb - 1.0) / 2.0);
            assert!((r - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn tmsv_moment_set() {
        let r: f64 = 0.5;
        let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
        let m = SecondMoments {
            xx: s,
            pp: -s,
            ..SecondMoments::uncorrelated(c, c, c, c)
        };
        assert!((r_from_moments(&m) - 0.419_008_605_4).abs() < 1e-9);
    }

    #[test]
    fn moment_validation() {
        assert!(SecondMoments::uncorrelated(1.0, 1.0, 1.0, 1.0).validate().is_ok());
        let bad = SecondMoments {
            xx: 2.0,
            ..SecondMoments::uncorrelated(1.0, 1.0, 1.0, 1.0)
        };
        assert!(bad.validate().is_err());
        assert!(SecondMoments::uncorrelated(0.0, 1.0, 1.0, 1.0).validate().is_err());
    }

    #[test]
    fn e_and_p_examples() {
        let even = RTable::from_array([0.25; 4]);
        assert_eq!(e_value(&even).unwrap(), 0.0);
        assert_eq!(p_values(&even).unwrap(), [0.25; 4]);
        assert_eq!(e_value(&RTable::from_array([0.5, 0.5, 0.0, 0.0])).unwrap(), 1.0);
        assert_eq!(p_values(&RTable::from_array([2.0, 0.0, 0.0, 0.0])).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        let zero = RTable::from_array([0.0; 4]);
        assert!(matches!(e_value(&zero), Err(Error::NoPhotons { .. })));
        assert!(matches!(p_values(&zero), Err(Error::NoPhotons { .. })));
    }

    #[test]
    fn bell_value_examples() {
        assert_eq!(bell_value([1.0, 1.0, 1.0, -1.0]), 4.0);
        assert_eq!(bell_value([0.0; 4]), 0.0);
    }

    #[test]
    fn r_table_vacuum_and_symmetry() {
        assert_eq!(r_table(&vacuum_state(4)).unwrap().as_array(), [0.0; 4]);
        let g = analyze(&build_bell_state(&CircuitConfig::pure(0.9, ChannelParams::ideal())).unwrap(), FRAC_PI_8, 0.0)
            .unwrap();
        let t = r_table(&g).unwrap();
        assert!((t.r_pp - t.r_mm).abs() < 1e-14);
        assert!((t.r_pm - t.r_mp).abs() < 1e-14);
    }

    #[test]
    fn clamps_small_negatives_and_rejects_large() {
        // A pair with variances just under vacuum pushes R slightly negative.
        let g = CovarianceMatrix::diagonal(&[1.0 - 2e-5, 1.0 - 2e-5, 1.0, 1.0, 1.0 + 1e-5, 1.0 + 1e-5, 1.0, 1.0])
            .unwrap();
        let r = r_from_moments(&pair_marginal(&g, Port::Plus, Port::Plus).unwrap().moments());
        assert!(r < 0.0 && r > -NEGATIVE_R_TOL);
        let c = r_table_checked(&g).unwrap();
        assert_eq!(c.table.r_pp, 0.0);
        assert_eq!(c.clamped, 1);

        let bad = CovarianceMatrix::diagonal(&[0.5, 0.5, 1.0, 1.0, 3.0, 3.0, 1.0, 1.0]).unwrap();
        assert!(matches!(r_table(&bad), Err(Error::NegativeCorrelation { .. })));
    }

    #[test]
    fn operating_point_bell_values() {
        let b = bell_from_config(&reference_cfg(1.0, 17.5), &BellAngles::canonical()).unwrap().b;
        assert!((b - 2.2334).abs() < 1e-4, "B = {b}");
        let b = bell_from_config(&reference_cfg(1.0, 14.5), &BellAngles::canonical()).unwrap().b;
        assert!((b - 1.9305).abs() < 1e-4, "B = {b}");
    }

    #[test]
    fn ideal_limit_approaches_tsirelson() {
        let cfg = CircuitConfig::pure(1.0 - 1e-5, ChannelParams::ideal());
        let b = bell_from_config(&cfg, &BellAngles::canonical()).unwrap().b;
        assert!((b - 2.0 * 2f64.sqrt()).abs() < 1e-3, "B = {b}");
    }

    #[test]
    fn vacuum_config_has_no_photons() {
        let cfg = CircuitConfig::new(1.0, 1.0, ChannelParams::ideal());
        assert!(matches!(
            bell_from_config(&cfg, &BellAngles::canonical()),
            Err(Error::NoPhotons { .. })
        ));
        assert!(matches!(fringe(&cfg, FRAC_PI_8, &[0.0, 0.1]), Err(Error::NoPhotons { .. })));
    }

    #[test]
    fn visibility_examples() {
        let t = linspace(0.0, PI, 17);
        let constant = vec![0.3; t.len()];
        assert_eq!(visibility(&t, &constant).unwrap(), 0.0);
        let touching: Vec<f64> = t.iter().map(|x| 0.5 + 0.5 * (2.0 * x + 0.4).cos()).collect();
        assert!((visibility(&t, &touching).unwrap() - 1.0).abs() < 1e-12);
        let half: Vec<f64> = t.iter().map(|x| 1.0 + 0.5 * (2.0 * x).sin()).collect();
        assert!((visibility(&t, &half).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(visibility(&t, &vec![0.0; t.len()]), Err(Error::FitDegenerate(_))));
        assert!(matches!(visibility(&t[..5], &half[..5]), Err(Error::FitDegenerate(_))));
        let narrow = linspace(0.0, 0.3, 10);
        assert!(matches!(visibility(&narrow, &vec![1.0; 10]), Err(Error::FitDegenerate(_))));
    }

    #[test]
    fn operating_point_fringe_visibility() {
        let pts = fringe(&reference_cfg(1.0, 17.5), FRAC_PI_8, &linspace(0.0, FRAC_PI_2, 17)).unwrap();
        let v = fringe_visibility(&pts).unwrap();
        assert!((v - 0.7904).abs() < 1e-3, "visibility {v}");
        for p in &pts {
            assert!((p.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fringe_extrema_are_a_quarter_turn_apart() {
        let cfg = CircuitConfig::pure(0.95, ChannelParams::ideal());
        let grid = linspace(0.0, PI, 2001);
        let pts = fringe(&cfg, FRAC_PI_8, &grid).unwrap();
        let argmax = pts.iter().max_by(|a, b| a.p[0].total_cmp(&b.p[0])).unwrap().theta_b;
        let argmin = pts.iter().min_by(|a, b| a.p[0].total_cmp(&b.p[0])).unwrap().theta_b;
        let sep = (argmax - argmin).abs();
        assert!((sep - FRAC_PI_2).abs() < 2e-3, "separation {sep}");
    }
}
