//! Run configuration: every experiment knob in one JSON document.

use cvbell_core::circuit::{db_to_variance, BellAngles, CircuitConfig};
use cvbell_core::gaussian::ChannelParams;
use cvbell_core::sampler::{NoiseConfig, DEFAULT_CHOP_PERIOD, DEFAULT_DARK_SAMPLES, MAX_DRIFT_FRACTION};
use cvbell_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Input squeezing in dB; the squeezed variance is `10^(−dB/10)`.
    pub squeezing_db: f64,
    /// Single-mode purity of each squeezer, `1/√(V_sqz V_asqz)`.
    pub purity: f64,
    pub eta: f64,
    /// Dark noise below shot noise in dB, or `null` for none.
    pub dark_clearance_db: Option<f64>,
    pub angles: BellAngles,
    /// Signal samples per measurement setting and analyzer setting.
    pub n_samples: usize,
    pub n_boot: usize,
    pub seed: u64,
    pub chop_period: usize,
    pub n_dark: usize,
    pub drift_fraction: f64,
    pub qwp_phase: f64,
    pub arm_phase: f64,
    /// Overrides the default `(1 − η) + dark variance`.
    pub epsilon: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            squeezing_db: 1.1,
            purity: 0.98,
            eta: 1.0,
            dark_clearance_db: Some(17.5),
            angles: BellAngles::canonical(),
            n_samples: 1_000_000,
            n_boot: 1000,
            seed: 0,
            chop_period: DEFAULT_CHOP_PERIOD,
            n_dark: DEFAULT_DARK_SAMPLES,
            drift_fraction: 0.01,
            qwp_phase: 0.0,
            arm_phase: 0.0,
            epsilon: None,
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidArgument(msg)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dark_variance(&self) -> f64 {
        self.dark_clearance_db.map_or(0.0, db_to_variance)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or((1.0 - self.eta) + self.dark_variance())
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("squeezing_db", self.squeezing_db),
            ("purity", self.purity),
            ("eta", self.eta),
            ("drift_fraction", self.drift_fraction),
            ("qwp_phase", self.qwp_phase),
            ("arm_phase", self.arm_phase),
        ];
        if let Some((name, v)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!("{name} = {v} is not finite")));
        }
        if self.squeezing_db < 0.0 {
            return Err(invalid(format!("squeezing_db = {} must be ≥ 0", self.squeezing_db)));
        }
        if !(self.purity > 0.0 && self.purity <= 1.0) {
            return Err(invalid(format!("purity = {} must lie in (0, 1]", self.purity)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(invalid(format!("eta = {} must lie in (0, 1]", self.eta)));
        }
        if let Some(c) = self.dark_clearance_db {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("dark_clearance_db = {c} must be positive")));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(invalid(format!("epsilon = {e} must be ≥ 0")));
            }
        }
        if !(0.0..=MAX_DRIFT_FRACTION).contains(&self.drift_fraction) {
            return Err(invalid(format!(
                "drift_fraction = {} must lie in [0, {MAX_DRIFT_FRACTION}]",
                self.drift_fraction
            )));
        }
        if self.chop_period == 0 {
            return Err(invalid("chop_period must be positive".into()));
        }
        if self.n_samples == 0 {
            return Err(invalid("n_samples must be positive".into()));
        }
        self.angles.validate()?;
        self.circuit()?.validate()
    }

    pub fn circuit(&self) -> Result<CircuitConfig> {
        let channel = ChannelParams::new(self.eta, self.epsilon())?;
        Ok(CircuitConfig {
            qwp_phase: self.qwp_phase,
            arm_phase: self.arm_phase,
            ..CircuitConfig::from_squeezing_db(self.squeezing_db, self.purity, channel)
        })
    }

    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig {
            dark_clearance_db: self.dark_clearance_db,
            drift_fraction: self.drift_fraction,
            chop_period: self.chop_period,
            n_dark: self.n_dark,
        }
    }
}

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepParam {
    SqueezingDb,
    DarkClearanceDb,
    Eta,
    Purity,
}

impl SweepParam {
    pub fn apply(self, base: &RunConfig, value: f64) -> RunConfig {
        let mut cfg = base.clone();
        match self {
            SweepParam::SqueezingDb => cfg.squeezing_db = value,
            SweepParam::DarkClearanceDb => cfg.dark_clearance_db = Some(value),
            SweepParam::Eta => cfg.eta = value,
            SweepParam::Purity => cfg.purity = value,
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_epsilon_composes_loss_and_dark() {
        let cfg = RunConfig {
            eta: 0.9,
            ..RunConfig::default()
        };
        assert!((cfg.epsilon() - (0.1 + 10f64.powf(-1.75))).abs() < 1e-15);
        let explicit = RunConfig {
            epsilon: Some(0.3),
            ..cfg
        };
        assert_eq!(explicit.epsilon(), 0.3);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"squeezing": 1.0}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
        let cfg: RunConfig = serde_json::from_str(r#"{"eta": 0.95}"#).unwrap();
        assert_eq!(cfg.eta, 0.95);
        assert_eq!(cfg.squeezing_db, 1.1);
    }

    #[test]
    fn validation_catches_out_of_range_fields() {
        let bad = [
            RunConfig { purity: 1.2, ..RunConfig::default() },
            RunConfig { eta: 0.0, ..RunConfig::default() },
            RunConfig { squeezing_db: -1.0, ..RunConfig::default() },
            RunConfig { drift_fraction: 0.05, ..RunConfig::default() },
            RunConfig { dark_clearance_db: Some(-3.0), ..RunConfig::default() },
            RunConfig { epsilon: Some(-0.1), ..RunConfig::default() },
            RunConfig { chop_period: 0, ..RunConfig::default() },
            RunConfig { n_samples: 0, ..RunConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn sweep_sets_one_field() {
        let base = RunConfig::default();
        assert_eq!(SweepParam::Eta.apply(&base, 0.5).eta, 0.5);
        assert_eq!(SweepParam::DarkClearanceDb.apply(&base, 14.5).dark_clearance_db, Some(14.5));
        assert_eq!(SweepParam::Purity.apply(&base, 0.9).squeezing_db, base.squeezing_db);
    }
}
