//! Synthetic homodyne records with chopper-interleaved shot-noise blocks.
//!
//! Each chop period holds a run of signal samples followed by a run of
//! shot-noise samples taken with the signal blocked. Both runs see the same
//! local-oscillator gain, so normalizing a period's signal by its own shot
//! noise cancels slow intensity drift. Electronic dark noise is added to
//! every sample and recorded once on its own at the end of the run.

use nalgebra::{Cholesky, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::circuit::db_to_variance;
use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;

pub type Sample = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    P,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::X => 0,
            Quadrature::P => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SettingId {
    S1,
    S2,
    S3,
    S4,
}

impl SettingId {
    pub const ALL: [SettingId; 4] = [SettingId::S1, SettingId::S2, SettingId::S3, SettingId::S4];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SettingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.index() + 1)
    }
}

impl std::str::FromStr for SettingId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "S1" => Ok(SettingId::S1),
            "S2" => Ok(SettingId::S2),
            "S3" => Ok(SettingId::S3),
            "S4" => Ok(SettingId::S4),
            other => Err(Error::Format(format!("unknown measurement setting {other:?}"))),
        }
    }
}

/// Quadrature measured by each of the detectors `(A⁺, A⁻, B⁺, B⁻)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub id: SettingId,
    pub quadratures: [Quadrature; 4],
}

impl MeasurementSetting {
    pub fn canonical(id: SettingId) -> Self {
        use Quadrature::{P, X};
        let quadratures = match id {
            SettingId::S1 => [X, X, X, X],
            SettingId::S2 => [P, P, P, P],
            SettingId::S3 => [X, X, P, P],
            SettingId::S4 => [P, P, X, X],
        };
        Self { id, quadratures }
    }

    /// Row/column of each detector's quadrature in a four-mode covariance matrix.
    pub fn indices(&self) -> [usize; 4] {
        let q = self.quadratures;
        [0, 1, 2, 3].map(|m| 2 * m + q[m].offset())
    }
}

/// XX, PP, XP and PX on every detector pair.
pub fn four_settings() -> [MeasurementSetting; 4] {
    SettingId::ALL.map(MeasurementSetting::canonical)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Signal,
    Shot,
    Dark,
}

impl BlockKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockKind::Signal => "signal",
            BlockKind::Shot => "shot",
            BlockKind::Dark => "dark",
        }
    }

    fn stream_offset(self) -> u64 {
        match self {
            BlockKind::Signal => 0,
            BlockKind::Shot => 1,
            BlockKind::Dark => 2,
        }
    }
}

impl std::str::FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "signal" => Ok(BlockKind::Signal),
            "shot" => Ok(BlockKind::Shot),
            "dark" => Ok(BlockKind::Dark),
            other => Err(Error::Format(format!("unknown block kind {other:?}"))),
        }
    }
}

pub const DEFAULT_CHOP_PERIOD: usize = 4096;
pub const DEFAULT_DARK_SAMPLES: usize = 4096;
pub const MAX_DRIFT_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Dark noise below shot noise in dB; `None` turns dark noise off.
    pub dark_clearance_db: Option<f64>,
    /// Peak fractional gain excursion of the sinusoidal drift.
    pub drift_fraction: f64,
    /// Signal samples per chop period; every period has as many shot samples.
    pub chop_period: usize,
    /// Length of the dark-noise block.
    pub n_dark: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            dark_clearance_db: Some(17.5),
            drift_fraction: 0.0,
            chop_period: DEFAULT_CHOP_PERIOD,
            n_dark: DEFAULT_DARK_SAMPLES,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            dark_clearance_db: None,
            ..Self::default()
        }
    }

    pub fn dark_variance(&self) -> f64 {
        self.dark_clearance_db.map_or(0.0, db_to_variance)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.dark_clearance_db {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidArgument(format!("dark clearance {c} dB must be positive")));
            }
        }
        if !(0.0..=MAX_DRIFT_FRACTION).contains(&self.drift_fraction) {
            return Err(Error::InvalidArgument(format!(
                "drift fraction {} is outside [0, {MAX_DRIFT_FRACTION}]",
                self.drift_fraction
            )));
        }
        if self.chop_period == 0 {
            return Err(Error::InvalidArgument("chop period must be at least one sample".into()));
        }
        Ok(())
    }
}

/// Gain of chop period `k` out of `n_periods`.
pub fn drift_gain(drift_fraction: f64, k: usize, n_periods: usize) -> f64 {
    1.0 + drift_fraction * (std::f64::consts::TAU * k as f64 / n_periods as f64).sin()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChopPeriod {
    pub signal: Vec<Sample>,
    pub shot: Vec<Sample>,
}

/// Raw acquisition of one measurement setting at one analyzer setting.
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneRecord {
    pub setting: MeasurementSetting,
    pub periods: Vec<ChopPeriod>,
    pub dark: Vec<Sample>,
    pub gain_trace: Vec<f64>,
    pub seed: u64,
    /// Samples are already in shot-noise units; shot blocks are ignored.
    pub normalized: bool,
}

impl HomodyneRecord {
    pub fn n_signal(&self) -> usize {
        self.periods.iter().map(|p| p.signal.len()).sum()
    }

    pub fn n_shot(&self) -> usize {
        self.periods.iter().map(|p| p.shot.len()).sum()
    }

    pub fn signal_rows(&self) -> impl Iterator<Item = &Sample> {
        self.periods.iter().flat_map(|p| p.signal.iter())
    }

    /// Multiplies every sample by `factor`, as a change of detector units.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |rows: &Vec<Sample>| rows.iter().map(|r| r.map(|v| v * factor)).collect();
        Self {
            periods: self
                .periods
                .iter()
                .map(|p| ChopPeriod {
                    signal: scale(&p.signal),
                    shot: scale(&p.shot),
                })
                .collect(),
            dark: scale(&self.dark),
            ..self.clone()
        }
    }

    /// Scales the shot blocks so their variance is off by `variance_factor`,
    /// emulating a mis-measured shot-noise reference.
    pub fn with_miscalibrated_shot(&self, variance_factor: f64) -> Self {
        let f = variance_factor.sqrt();
        Self {
            periods: self
                .periods
                .iter()
                .map(|p| ChopPeriod {
                    signal: p.signal.clone(),
                    shot: p.shot.iter().map(|r| r.map(|v| v * f)).collect(),
                })
                .collect(),
            ..self.clone()
        }
    }
}

/// 64-bit mix used to derive independent seeds from a base seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one (seed, setting, block) sub-stream.
pub fn block_rng(seed: u64, setting: SettingId, block: BlockKind) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3 * setting.index() as u64 + block.stream_offset());
    rng
}

fn normal4(rng: &mut ChaCha8Rng) -> Vector4<f64> {
    Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Draws a record from the detected-quadrature marginal of an analyzed
/// four-mode state `(A⁺, A⁻, B⁺, B⁻)`.
pub fn sample_records(
    gamma_analyzed: &CovarianceMatrix,
    setting: MeasurementSetting,
    n_sig: usize,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<HomodyneRecord> {
    noise.validate()?;
    if gamma_analyzed.n_modes() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: gamma_analyzed.n_modes(),
        });
    }
    if !gamma_analyzed.is_physical() {
        return Err(Error::UnphysicalInput("cannot sample an unphysical covariance matrix".into()));
    }
    if n_sig == 0 {
        return Err(Error::InvalidArgument("record length must be positive".into()));
    }
    let idx = setting.indices();
    let dark = noise.dark_variance();
    let dark_sd = dark.sqrt();
    // Signal plus independent dark noise is one Gaussian of covariance
    // Σ + dI; shot plus dark is (1 + d)I.
    let cov = Matrix4::from_fn(|r, c| gamma_analyzed.get(idx[r], idx[c]) + if r == c { dark } else { 0.0 });
    let chol = Cholesky::new(cov).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let shot_sd = (1.0 + dark).sqrt();

    let n_periods = n_sig.div_ceil(noise.chop_period);
    let gain_trace: Vec<f64> = (0..n_periods)
        .map(|k| drift_gain(noise.drift_fraction, k, n_periods))
        .collect();

    let mut sig_rng = block_rng(seed, setting.id, BlockKind::Signal);
    let mut shot_rng = block_rng(seed, setting.id, BlockKind::Shot);
    let mut dark_rng = block_rng(seed, setting.id, BlockKind::Dark);

    let periods = gain_trace
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            let len = noise.chop_period.min(n_sig - k * noise.chop_period);
            let signal = (0..len)
                .map(|_| {
                    let q = l * normal4(&mut sig_rng);
                    [0, 1, 2, 3].map(|c| g * q[c])
                })
                .collect();
            let shot = (0..len)
                .map(|_| {
                    let v = normal4(&mut shot_rng);
                    [0, 1, 2, 3].map(|c| g * shot_sd * v[c])
                })
                .collect();
            ChopPeriod { signal, shot }
        })
        .collect();
    let dark = (0..noise.n_dark)
        .map(|_| {
            let d = normal4(&mut dark_rng);
            [0, 1, 2, 3].map(|c| dark_sd * d[c])
        })
        .collect();

    Ok(HomodyneRecord {
        setting,
        periods,
        dark,
        gain_trace,
        seed,
        normalized: false,
    })
}

/// Signal samples in shot-noise units.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRecord {
    pub setting: MeasurementSetting,
    pub signal: Vec<Sample>,
    /// Shot-noise standard deviation used for each chop period.
    pub shot_sd: Vec<[f64; 4]>,
}

/// Per-column standard deviation about the mean.
pub fn column_sd(rows: &[Sample]) -> [f64; 4] {
    let n = rows.len() as f64;
    let mut s1 = [0.0; 4];
    let mut s2 = [0.0; 4];
    for r in rows {
        for c in 0..4 {
            s1[c] += r[c];
            s2[c] += r[c] * r[c];
        }
    }
    [0, 1, 2, 3].map(|c| (s2[c] / n - (s1[c] / n).powi(2)).max(0.0).sqrt())
}

/// Divides each period's signal by that period's shot-noise standard
/// deviation. Dark noise is left in the reference.
pub fn calibrate(raw: &HomodyneRecord) -> Result<NormalizedRecord> {
    if raw.normalized {
        return Ok(NormalizedRecord {
            setting: raw.setting,
            signal: raw.signal_rows().copied().collect(),
            shot_sd: vec![[1.0; 4]; raw.periods.len()],
        });
    }
    let mut signal = Vec::with_capacity(raw.n_signal());
    let mut shot_sd = Vec::with_capacity(raw.periods.len());
    for (k, p) in raw.periods.iter().enumerate() {
        if p.shot.len() < 2 {
            return Err(Error::EmptyCalibration(k));
        }
        let sd = column_sd(&p.shot);
        if sd.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::EmptyCalibration(k));
        }
        signal.extend(p.signal.iter().map(|r| [0, 1, 2, 3].map(|c| r[c] / sd[c])));
        shot_sd.push(sd);
    }
    Ok(NormalizedRecord {
        setting: raw.setting,
        signal,
        shot_sd,
    })
}

/// Covariance of a set of rows about their mean, normalized by `n`.
pub fn sample_covariance(rows: &[Sample]) -> Matrix4<f64> {
    let n = rows.len() as f64;
    let mut mean = Vector4::zeros();
    for r in rows {
        mean += Vector4::from_column_slice(r);
    }
    mean /= n;
    let mut cov = Matrix4::zeros();
    for r in rows {
        let d = Vector4::from_column_slice(r) - mean;
        cov += d * d.transpose();
    }
    cov / n
}
