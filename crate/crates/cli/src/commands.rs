//! The subcommands, as functions from inputs to serializable outputs.

use crate::config::{RunConfig, SweepParam};
use cvbell_core::analysis::{bootstrap, generate_record_set};
use cvbell_core::circuit::BellAngles;
use cvbell_core::correlation::{bell_from_config, fringe, fringe_visibility, FringePoint, RTable};
use cvbell_core::fit::{fit, FitOptions, FitResult, ModelParams, Param};
use cvbell_core::records::{read_record_set, write_record_set, RecordMetadata, METADATA_FILE};
use cvbell_core::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub b: f64,
    pub e_values: [f64; 4],
    pub r_tables: [RTable; 4],
    pub angles: BellAngles,
    /// `(θ_A, θ_B)` of each table, in CHSH order.
    pub angle_pairs: [[f64; 2]; 4],
    pub v_sqz: f64,
    pub v_asqz: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub config_echo: RunConfig,
}

pub fn simulate(cfg: &RunConfig) -> Result<SimulateOutput> {
    let circuit = cfg.circuit()?;
    let bell = bell_from_config(&circuit, &cfg.angles)?;
    Ok(SimulateOutput {
        b: bell.b,
        e_values: bell.e_values,
        r_tables: bell.r_tables,
        angles: cfg.angles,
        angle_pairs: cfg.angles.pairs().map(|(a, b)| [a, b]),
        v_sqz: circuit.v_sqz,
        v_asqz: circuit.v_asqz,
        eta: circuit.channel.eta,
        epsilon: circuit.channel.epsilon,
        config_echo: cfg.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub b: f64,
    pub e: [f64; 4],
}

/// Bell value along `grid`; rows come back in grid order.
pub fn sweep(cfg: &RunConfig, param: SweepParam, grid: &[f64]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    grid.par_iter()
        .map(|&v| {
            let point = param.apply(cfg, v);
            point.validate()?;
            let bell = bell_from_config(&point.circuit()?, &point.angles)?;
            Ok(SweepRow {
                sweep_value: v,
                b: bell.b,
                e: bell.e_values,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("sweep_value,b,e1,e2,e3,e4\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.sweep_value, r.b, r.e[0], r.e[1], r.e[2], r.e[3]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeSummary {
    pub theta_a: f64,
    pub n_points: usize,
    /// P⁺⁺ visibility, `null` when the grid cannot support the fit.
    pub visibility: Option<f64>,
    pub visibility_error: Option<String>,
    pub config_echo: RunConfig,
}

pub fn fringe_table(cfg: &RunConfig, theta_a: f64, grid: &[f64]) -> Result<(Vec<FringePoint>, FringeSummary)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("fringe grid is empty".into()));
    }
    if let Some(t) = grid.iter().chain([&theta_a]).find(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(format!("angle {t} is not finite")));
    }
    let points = fringe(&cfg.circuit()?, theta_a, grid)?;
    let (visibility, visibility_error) = match fringe_visibility(&points) {
        Ok(v) => (Some(v), None),
        Err(Error::FitDegenerate(msg)) | Err(Error::InvalidArgument(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    let summary = FringeSummary {
        theta_a,
        n_points: points.len(),
        visibility,
        visibility_error,
        config_echo: cfg.clone(),
    };
    Ok((points, summary))
}

pub fn fringe_csv(points: &[FringePoint]) -> String {
    let mut out = String::from("theta_b,p_pp,p_mm,p_pm,p_mp,e\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{},{},{}", p.theta_b, p.p[0], p.p[1], p.p[2], p.p[3], p.e);
    }
    out
}

/// Simulates records for `cfg` and writes them with their metadata to `dir`.
pub fn sample(cfg: &RunConfig, dir: &Path) -> Result<RecordMetadata> {
    let noise = cfg.noise();
    let set = generate_record_set(&cfg.circuit()?, &cfg.angles, cfg.n_samples, &noise, cfg.seed)?;
    write_record_set(dir, &set, &noise, cfg.n_samples, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeEcho {
    pub records: RecordMetadata,
    pub n_boot: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOutput {
    pub b_mean: f64,
    pub b_std: f64,
    pub n_boot: usize,
    /// `null` when the bootstrap spread is zero.
    pub sigma_above_2: Option<f64>,
    /// Bell value of the full records.
    pub b_point: f64,
    pub e_values: [f64; 4],
    pub r_tables: [RTable; 4],
    pub angles: BellAngles,
    pub rejected: usize,
    pub negative_r: usize,
    pub config_echo: AnalyzeEcho,
}

/// Accepts a metadata file or the directory holding one.
pub fn metadata_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(METADATA_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn analyze(records: &Path, n_boot: usize, seed: u64) -> Result<AnalyzeOutput> {
    let (meta, set) = read_record_set(&metadata_path(records))?;
    let est = bootstrap(&set, n_boot, seed)?;
    Ok(AnalyzeOutput {
        b_mean: est.b_mean,
        b_std: est.b_std,
        n_boot: est.n_boot,
        sigma_above_2: est.sigma_above_2.is_finite().then_some(est.sigma_above_2),
        b_point: est.b_point,
        e_values: est.e_values,
        r_tables: est.r_tables,
        angles: est.angles,
        rejected: est.rejected,
        negative_r: est.negative_r,
        config_echo: AnalyzeEcho {
            records: meta,
            n_boot,
            seed,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitInput {
    pub angle_pairs: Vec<[f64; 2]>,
    pub r_tables: Vec<RTable>,
    pub init: ModelParams,
    /// Parameters held at their initial values.
    #[serde(default)]
    pub fixed: Vec<Param>,
}

impl FitInput {
    /// Tables of a simulation, ready to fit.
    pub fn from_simulation(sim: &SimulateOutput, init: ModelParams, fixed: Vec<Param>) -> Self {
        Self {
            angle_pairs: sim.angle_pairs.to_vec(),
            r_tables: sim.r_tables.to_vec(),
            init,
            fixed,
        }
    }
}

pub fn run_fit(input: &FitInput) -> Result<FitResult> {
    if input.angle_pairs.len() != input.r_tables.len() {
        return Err(Error::InvalidArgument(format!(
            "{} angle pairs but {} R tables",
            input.angle_pairs.len(),
            input.r_tables.len()
        )));
    }
    let measured: Vec<((f64, f64), RTable)> = input
        .angle_pairs
        .iter()
        .zip(&input.r_tables)
        .map(|(a, t)| ((a[0], a[1]), *t))
        .collect();
    fit(&measured, &input.init, &FitOptions::pinned(&input.fixed))
}
