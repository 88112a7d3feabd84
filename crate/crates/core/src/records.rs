//! Record files: one CSV per (analyzer setting, measurement setting) plus a
//! JSON sidecar describing the acquisition.
//!
//! CSV columns are `block,setting,chop_period,a_plus,a_minus,b_plus,b_minus`
//! with `block` one of `signal`, `shot`, `dark`. Rows of several settings
//! may share a file; they are told apart by the `setting` column.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{AnglePairRecords, RecordSet};
use crate::circuit::BellAngles;
use crate::error::{Error, Result};
use crate::sampler::{BlockKind, ChopPeriod, HomodyneRecord, MeasurementSetting, NoiseConfig, SettingId};

pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Detector output before shot-noise normalization.
    Raw,
    /// Already divided by the shot-noise standard deviation; shot blocks
    /// may be absent.
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordFileEntry {
    /// Position in the CHSH order of the analyzer settings, from 0.
    pub angle_index: usize,
    pub theta_a: f64,
    pub theta_b: f64,
    pub setting: SettingId,
    /// Relative to the metadata file.
    pub path: String,
    /// Seed of this record's generator, when simulated.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gain_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordMetadata {
    pub seed: u64,
    pub n_sig: usize,
    pub clearance_db: Option<f64>,
    pub drift: f64,
    pub chop_period: usize,
    pub angles: BellAngles,
    pub settings: Vec<MeasurementSetting>,
    pub units: Units,
    pub files: Vec<RecordFileEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    block: String,
    setting: String,
    chop_period: usize,
    a_plus: f64,
    a_minus: f64,
    b_plus: f64,
    b_minus: f64,
}

fn row(block: BlockKind, setting: SettingId, period: usize, s: &[f64; 4]) -> Row {
    Row {
        block: block.as_str().to_string(),
        setting: setting.to_string(),
        chop_period: period,
        a_plus: s[0],
        a_minus: s[1],
        b_plus: s[2],
        b_minus: s[3],
    }
}

/// Writes one record; dark rows carry the index one past the last period.
pub fn write_record_csv(path: &Path, rec: &HomodyneRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let id = rec.setting.id;
    for (k, p) in rec.periods.iter().enumerate() {
        for s in &p.signal {
            w.serialize(row(BlockKind::Signal, id, k, s))?;
        }
        for s in &p.shot {
            w.serialize(row(BlockKind::Shot, id, k, s))?;
        }
    }
    let dark_period = rec.periods.len();
    for s in &rec.dark {
        w.serialize(row(BlockKind::Dark, id, dark_period, s))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads every setting found in a CSV file, keyed by the `setting` column.
/// Quadrature assignments default to the canonical ones.
pub fn read_records_csv(path: &Path) -> Result<BTreeMap<SettingId, HomodyneRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out: BTreeMap<SettingId, HomodyneRecord> = BTreeMap::new();
    for (line, rec) in rdr.deserialize::<Row>().enumerate() {
        let r = rec?;
        let id: SettingId = r.setting.parse()?;
        let block: BlockKind = r.block.parse()?;
        let sample = [r.a_plus, r.a_minus, r.b_plus, r.b_minus];
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("{}: non-finite sample on data row {}", path.display(), line + 1)));
        }
        let entry = out.entry(id).or_insert_with(|| HomodyneRecord {
            setting: MeasurementSetting::canonical(id),
            periods: Vec::new(),
            dark: Vec::new(),
            gain_trace: Vec::new(),
            seed: 0,
            normalized: false,
        });
        match block {
            BlockKind::Dark => entry.dark.push(sample),
            BlockKind::Signal | BlockKind::Shot => {
                if entry.periods.len() <= r.chop_period {
                    entry.periods.resize_with(r.chop_period + 1, ChopPeriod::default);
                }
                let p = &mut entry.periods[r.chop_period];
                if block == BlockKind::Signal {
                    p.signal.push(sample);
                } else {
                    p.shot.push(sample);
                }
            }
        }
    }
    // Dark rows may have created trailing periods with no signal.
    for rec in out.values_mut() {
        while rec.periods.last().is_some_and(|p| p.signal.is_empty() && p.shot.is_empty()) {
            rec.periods.pop();
        }
    }
    Ok(out)
}

pub fn record_file_name(angle_index: usize, setting: SettingId) -> String {
    format!("pair{}_{}.csv", angle_index + 1, setting)
}

/// Writes a record set as CSV files plus `metadata.json` into `dir`.
pub fn write_record_set(dir: &Path, set: &RecordSet, noise: &NoiseConfig, n_sig: usize, seed: u64) -> Result<RecordMetadata> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (k, pair) in set.pairs.iter().enumerate() {
        for rec in &pair.records {
            let name = record_file_name(k, rec.setting.id);
            write_record_csv(&dir.join(&name), rec)?;
            files.push(RecordFileEntry {
                angle_index: k,
                theta_a: pair.theta_a,
                theta_b: pair.theta_b,
                setting: rec.setting.id,
                path: name,
                seed: rec.seed,
                gain_trace: rec.gain_trace.clone(),
            });
        }
    }
    let settings = set
        .pairs
        .first()
        .map(|p| p.records.iter().map(|r| r.setting).collect())
        .unwrap_or_default();
    let meta = RecordMetadata {
        seed,
        n_sig,
        clearance_db: noise.dark_clearance_db,
        drift: noise.drift_fraction,
        chop_period: noise.chop_period,
        angles: set.angles,
        settings,
        units: Units::Raw,
        files,
    };
    fs::write(dir.join(METADATA_FILE), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(meta)
}

/// Loads a record set from a metadata file, checking that every analyzer
/// setting has all four measurement settings.
pub fn read_record_set(metadata_path: &Path) -> Result<(RecordMetadata, RecordSet)> {
    let text = fs::read_to_string(metadata_path)?;
    let meta: RecordMetadata = serde_json::from_str(&text)?;
    let base: PathBuf = metadata_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let pairs_angles = meta.angles.pairs();
    let mut cache: BTreeMap<String, BTreeMap<SettingId, HomodyneRecord>> = BTreeMap::new();
    let mut pairs = Vec::with_capacity(4);
    for (k, &(theta_a, theta_b)) in pairs_angles.iter().enumerate() {
        let mut records = Vec::with_capacity(4);
        for id in SettingId::ALL {
            let missing = |why: &str| Error::MissingSetting(format!("{id} at analyzer setting {}{why}", k + 1));
            let entry = meta
                .files
                .iter()
                .find(|f| f.angle_index == k && f.setting == id)
                .ok_or_else(|| missing(""))?;
            let path = base.join(&entry.path);
            if !cache.contains_key(&entry.path) {
                if !path.exists() {
                    return Err(missing(&format!(" ({} not found)", path.display())));
                }
                cache.insert(entry.path.clone(), read_records_csv(&path)?);
            }
            let mut rec = cache[&entry.path]
                .get(&id)
                .cloned()
                .ok_or_else(|| missing(&format!(" (no rows in {})", path.display())))?;
            if let Some(s) = meta.settings.iter().find(|s| s.id == id) {
                rec.setting = *s;
            }
            rec.gain_trace = entry.gain_trace.clone();
            rec.seed = entry.seed;
            rec.normalized = meta.units == Units::Normalized;
            records.push(rec);
        }
        pairs.push(AnglePairRecords {
            theta_a,
            theta_b,
            records,
        });
    }
    let set = RecordSet {
        angles: meta.angles,
        pairs,
    };
    Ok((meta, set))
}
