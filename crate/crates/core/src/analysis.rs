//! Moment estimation, Bell values and bootstrap errors from homodyne records.
//!
//! Records are reduced to running sums per chop period; a period's signal
//! sums are scaled by that period's shot-noise estimate and pooled. The
//! bootstrap repeats the same reduction over rows drawn with replacement
//! inside each period, so the shot-noise reference is resampled along with
//! the signal.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{analyze, build_bell_state, BellAngles, CircuitConfig, A_MINUS, A_PLUS, B_MINUS, B_PLUS};
use crate::correlation::{bell_value, e_value, r_from_moments, BellResult, RTable, SecondMoments, EPS_DENOM};
use crate::error::{Error, Result};
use crate::sampler::{
    derive_seed, four_settings, sample_records, ChopPeriod, HomodyneRecord, MeasurementSetting, NormalizedRecord,
    NoiseConfig, Quadrature, Sample, SettingId,
};

/// Shortest signal record accepted per setting.
pub const MIN_RECORD: usize = 1000;
/// Smallest bootstrap size accepted.
pub const MIN_BOOT: usize = 100;

/// Records of all four measurement settings at one analyzer setting.
#[derive(Debug, Clone, PartialEq)]
pub struct AnglePairRecords {
    pub theta_a: f64,
    pub theta_b: f64,
    pub records: Vec<HomodyneRecord>,
}

/// Records at the four analyzer settings, in [`BellAngles::pairs`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSet {
    pub angles: BellAngles,
    pub pairs: Vec<AnglePairRecords>,
}

impl RecordSet {
    /// Multiplies every sample by a common factor.
    pub fn scaled(&self, factor: f64) -> Self {
        self.map_records(|r| r.scaled(factor))
    }

    /// Applies a shot-noise variance error to every record.
    pub fn with_miscalibrated_shot(&self, variance_factor: f64) -> Self {
        self.map_records(|r| r.with_miscalibrated_shot(variance_factor))
    }

    fn map_records(&self, f: impl Fn(&HomodyneRecord) -> HomodyneRecord) -> Self {
        Self {
            angles: self.angles,
            pairs: self
                .pairs
                .iter()
                .map(|p| AnglePairRecords {
                    records: p.records.iter().map(&f).collect(),
                    ..*p
                })
                .collect(),
        }
    }
}

/// Samples every measurement setting at every analyzer setting of `angles`.
/// Angle pair `k` uses seed `derive_seed(seed, k)`.
pub fn generate_record_set(
    cfg: &CircuitConfig,
    angles: &BellAngles,
    n_sig: usize,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<RecordSet> {
    angles.validate()?;
    let gamma = build_bell_state(cfg)?;
    let pairs = angles.pairs();
    let analyzed = pairs
        .iter()
        .map(|&(ta, tb)| analyze(&gamma, ta, tb))
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, MeasurementSetting)> = (0..4)
        .flat_map(|k| four_settings().map(|s| (k, s)))
        .collect();
    let records = tasks
        .par_iter()
        .map(|&(k, s)| sample_records(&analyzed[k], s, n_sig, noise, derive_seed(seed, k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut it = records.into_iter();
    let pairs = pairs
        .iter()
        .map(|&(theta_a, theta_b)| AnglePairRecords {
            theta_a,
            theta_b,
            records: it.by_ref().take(4).collect(),
        })
        .collect();
    Ok(RecordSet {
        angles: *angles,
        pairs,
    })
}

/// Running first and second moments of four-column rows.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Sums {
    n: f64,
    s1: [f64; 4],
    s2: [[f64; 4]; 4],
}

impl Sums {
    #[inline]
    fn add(&mut self, r: &Sample) {
        self.n += 1.0;
        for i in 0..4 {
            self.s1[i] += r[i];
            for j in i..4 {
                self.s2[i][j] += r[i] * r[j];
            }
        }
    }

    /// Like `add` but only the variances, enough for a shot reference.
    #[inline]
    fn add_diag(&mut self, r: &Sample) {
        self.n += 1.0;
        for i in 0..4 {
            self.s1[i] += r[i];
            self.s2[i][i] += r[i] * r[i];
        }
    }

    fn of(rows: &[Sample]) -> Self {
        let mut s = Self::default();
        rows.iter().for_each(|r| s.add(r));
        s
    }

    fn sd(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|c| (self.s2[c][c] / self.n - (self.s1[c] / self.n).powi(2)).max(0.0).sqrt())
    }
}

/// Covariance of one setting's normalized signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingCovariance {
    pub setting: MeasurementSetting,
    pub cov: [[f64; 4]; 4],
    pub n_signal: usize,
}

impl SettingCovariance {
    /// From an already normalized record.
    pub fn from_normalized(rec: &NormalizedRecord) -> Self {
        let c = crate::sampler::sample_covariance(&rec.signal);
        Self {
            setting: rec.setting,
            cov: [0, 1, 2, 3].map(|i| [0, 1, 2, 3].map(|j| c[(i, j)])),
            n_signal: rec.signal.len(),
        }
    }

    /// Pools per-period (signal, shot) sums, normalizing each period by
    /// its own shot-noise standard deviation.
    fn from_period_sums(
        setting: MeasurementSetting,
        normalized: bool,
        sums: impl Iterator<Item = (Sums, Sums)>,
    ) -> Result<Self> {
        let mut n = 0.0;
        let mut t1 = [0.0; 4];
        let mut t2 = [[0.0; 4]; 4];
        for (k, (sig, shot)) in sums.enumerate() {
            let sd = if normalized {
                [1.0; 4]
            } else if shot.n < 2.0 {
                return Err(Error::EmptyCalibration(k));
            } else {
                shot.sd()
            };
            if sd.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::EmptyCalibration(k));
            }
            n += sig.n;
            for i in 0..4 {
                t1[i] += sig.s1[i] / sd[i];
                for j in i..4 {
                    t2[i][j] += sig.s2[i][j] / (sd[i] * sd[j]);
                }
            }
        }
        let mut cov = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                let v = t2[i][j] / n - (t1[i] / n) * (t1[j] / n);
                cov[i][j] = v;
                cov[j][i] = v;
            }
        }
        Ok(Self {
            setting,
            cov,
            n_signal: n as usize,
        })
    }
}

/// Normalized covariance of a raw record, equal to calibrating and then
/// taking the sample covariance.
pub fn record_covariance(rec: &HomodyneRecord) -> Result<SettingCovariance> {
    SettingCovariance::from_period_sums(
        rec.setting,
        rec.normalized,
        rec.periods.iter().map(|p| (Sums::of(&p.signal), Sums::of(&p.shot))),
    )
}

/// Estimated dark-noise variance per detector.
pub fn dark_variance(rec: &HomodyneRecord) -> Option<[f64; 4]> {
    if rec.dark.len() < 2 {
        return None;
    }
    Some(Sums::of(&rec.dark).sd().map(|s| s * s))
}

fn find_setting(covs: &[SettingCovariance], id: SettingId) -> Result<&SettingCovariance> {
    let want = MeasurementSetting::canonical(id).quadratures;
    covs.iter()
        .find(|c| c.setting.quadratures == want)
        .ok_or_else(|| Error::MissingSetting(id.to_string()))
}

/// Detector pairs `(A, B)` in R-table order.
const PAIRS: [(usize, usize); 4] = [(A_PLUS, B_PLUS), (A_MINUS, B_MINUS), (A_PLUS, B_MINUS), (A_MINUS, B_PLUS)];

/// Second moments of the four detector pairs from the four settings.
///
/// Settings are matched by their quadrature assignment rather than their
/// label. Each variance is the mean over the two settings that measure it.
pub fn estimate_moments(covs: &[SettingCovariance]) -> Result<[SecondMoments; 4]> {
    let [s1, s2, s3, s4] = SettingId::ALL.map(|id| find_setting(covs, id));
    let (s1, s2, s3, s4) = (s1?, s2?, s3?, s4?);
    for s in [s1, s2, s3, s4] {
        if s.n_signal < MIN_RECORD {
            return Err(Error::ShortRecord {
                found: s.n_signal,
                required: MIN_RECORD,
            });
        }
    }
    debug_assert_eq!(s3.setting.quadratures[0], Quadrature::X);
    Ok(PAIRS.map(|(a, b)| SecondMoments {
        xx: s1.cov[a][b],
        pp: s2.cov[a][b],
        xp: s3.cov[a][b],
        px: s4.cov[a][b],
        va_x: 0.5 * (s1.cov[a][a] + s3.cov[a][a]),
        va_p: 0.5 * (s2.cov[a][a] + s4.cov[a][a]),
        vb_x: 0.5 * (s1.cov[b][b] + s4.cov[b][b]),
        vb_p: 0.5 * (s2.cov[b][b] + s3.cov[b][b]),
        v_v: 1.0,
    }))
}

/// Denominator below which an estimated R table counts as photon-free:
/// ten times the estimator floor `2/n` of a vacuum record.
pub fn no_photon_threshold(n_signal: usize) -> f64 {
    EPS_DENOM.max(20.0 / n_signal as f64)
}

/// Bell value of a record set with its intermediate quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordAnalysis {
    pub bell: BellResult,
    pub moments: [[SecondMoments; 4]; 4],
    /// Count of estimated R values below zero (left unclamped).
    pub negative_r: usize,
}

fn analysis_from_covs(angles: BellAngles, per_pair: &[Vec<SettingCovariance>]) -> Result<RecordAnalysis> {
    if per_pair.len() != 4 {
        return Err(Error::InvalidArgument(format!(
            "need records at 4 analyzer settings, got {}",
            per_pair.len()
        )));
    }
    let mut tables = [RTable::from_array([0.0; 4]); 4];
    let mut moments = [[SecondMoments::uncorrelated(1.0, 1.0, 1.0, 1.0); 4]; 4];
    let mut e_values = [0.0; 4];
    let mut negative_r = 0;
    for k in 0..4 {
        let m = estimate_moments(&per_pair[k]).map_err(|e| match e {
            Error::MissingSetting(s) => Error::MissingSetting(format!("{s} at analyzer setting {}", k + 1)),
            other => other,
        })?;
        let t = RTable::from_array(m.map(|mm| r_from_moments(&mm)));
        negative_r += t.as_array().iter().filter(|&&r| r < 0.0).count();
        let n_min = per_pair[k].iter().map(|c| c.n_signal).min().unwrap_or(0);
        let denom = t.sum();
        if !(denom > no_photon_threshold(n_min)) {
            return Err(Error::NoPhotons { denominator: denom });
        }
        e_values[k] = e_value(&t)?;
        tables[k] = t;
        moments[k] = m;
    }
    Ok(RecordAnalysis {
        bell: BellResult {
            e_values,
            b: bell_value(e_values),
            angle_set: angles,
            r_tables: tables,
        },
        moments,
        negative_r,
    })
}

pub fn bell_from_records(set: &RecordSet) -> Result<RecordAnalysis> {
    set.angles.validate()?;
    let covs = set
        .pairs
        .iter()
        .map(|p| p.records.iter().map(record_covariance).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    analysis_from_covs(set.angles, &covs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellEstimate {
    pub b_mean: f64,
    pub b_std: f64,
    pub n_boot: usize,
    pub sigma_above_2: f64,
    /// Bell value of the full records.
    pub b_point: f64,
    pub e_values: [f64; 4],
    pub r_tables: [RTable; 4],
    pub angles: BellAngles,
    pub rejected: usize,
    pub negative_r: usize,
}

fn resample_period(p: &ChopPeriod, rng: &mut ChaCha8Rng) -> (Sums, Sums) {
    let draw = |rows: &[Sample], rng: &mut ChaCha8Rng, add: fn(&mut Sums, &Sample)| {
        let mut s = Sums::default();
        if rows.is_empty() {
            return s;
        }
        // 32-bit draws are noticeably faster; periods are never that long.
        if let Ok(len) = u32::try_from(rows.len()) {
            let pick = Uniform::new(0, len).expect("non-empty block");
            for _ in 0..rows.len() {
                add(&mut s, &rows[pick.sample(rng) as usize]);
            }
        } else {
            let pick = Uniform::new(0, rows.len()).expect("non-empty block");
            for _ in 0..rows.len() {
                add(&mut s, &rows[pick.sample(rng)]);
            }
        }
        s
    };
    let sig = draw(&p.signal, rng, Sums::add);
    let shot = draw(&p.shot, rng, Sums::add_diag);
    (sig, shot)
}

fn replicate(set: &RecordSet, seed: u64, index: u64) -> Result<f64> {
    let rep_seed = derive_seed(seed, index);
    let covs = set
        .pairs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            p.records
                .iter()
                .enumerate()
                .map(|(s, rec)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
                    rng.set_stream((4 * k + s) as u64);
                    SettingCovariance::from_period_sums(
                        rec.setting,
                        rec.normalized,
                        rec.periods.iter().map(|per| resample_period(per, &mut rng)),
                    )
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    analysis_from_covs(set.angles, &covs).map(|a| a.bell.b)
}

/// Bootstrap of the Bell value. Replicate `i` draws from its own generator
/// seeded by `derive_seed(seed, i)`, so results do not depend on thread
/// scheduling. Replicates without photons are replaced by fresh ones, up to
/// 1% of `n_boot`.
pub fn bootstrap(set: &RecordSet, n_boot: usize, seed: u64) -> Result<BellEstimate> {
    if n_boot < MIN_BOOT {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least {MIN_BOOT} replicates, got {n_boot}"
        )));
    }
    let full = bell_from_records(set)?;
    let budget = n_boot / 100;
    let mut values = Vec::with_capacity(n_boot);
    let mut rejected = 0;
    let mut next = 0u64;
    while values.len() < n_boot {
        let want = n_boot - values.len();
        let batch: Vec<Result<f64>> = (next..next + want as u64)
            .into_par_iter()
            .map(|i| replicate(set, seed, i))
            .collect();
        next += want as u64;
        for r in batch {
            match r {
                Ok(b) => values.push(b),
                Err(Error::NoPhotons { .. }) => rejected += 1,
                Err(e) => return Err(e),
            }
        }
        if rejected > budget {
            return Err(Error::BootstrapRejections {
                rejected,
                requested: n_boot,
                budget,
            });
        }
    }
    let n = values.len() as f64;
    let b_mean = values.iter().sum::<f64>() / n;
    let b_std = (values.iter().map(|b| (b - b_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sigma_above_2 = if b_std > 0.0 { (b_mean - 2.0) / b_std } else { f64::NAN };
    Ok(BellEstimate {
        b_mean,
        b_std,
        n_boot,
        sigma_above_2,
        b_point: full.bell.b,
        e_values: full.bell.e_values,
        r_tables: full.bell.r_tables,
        angles: set.angles,
        rejected,
        negative_r: full.negative_r,
    })
}
