use clap::{Args, Parser, Subcommand};
use cvbell_cli::commands::{self, FitInput};
use cvbell_cli::config::{RunConfig, SweepParam};
use cvbell_cli::{ErrorReport, EXIT_NOT_CONVERGED, EXIT_OK};
use cvbell_core::correlation::linspace;
use cvbell_core::{Error, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cvbell", version, about = "Continuous-variable CHSH simulations, record analysis and model fits")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON). Defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (or directory for `sample`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct Grid {
    /// Explicit comma-separated grid values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["from", "to", "steps"])]
    values: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

impl Grid {
    fn resolve(&self, default: (f64, f64, usize)) -> Vec<f64> {
        match &self.values {
            Some(v) => v.clone(),
            None => linspace(
                self.from.unwrap_or(default.0),
                self.to.unwrap_or(default.1),
                self.steps.unwrap_or(default.2),
            ),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analytic Bell value, E values and R tables.
    Simulate,
    /// Bell value along a grid of one parameter, as CSV.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[command(flatten)]
        grid: Grid,
    },
    /// Normalized correlations as θ_B is swept at fixed θ_A, as CSV.
    Fringe {
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_8, allow_hyphen_values = true)]
        theta_a: f64,
        #[command(flatten)]
        grid: Grid,
    },
    /// Synthetic homodyne records plus metadata, written to the --out directory.
    Sample,
    /// Bootstrap Bell estimate from record files.
    Analyze {
        /// Metadata file, or the directory holding `metadata.json`.
        #[arg(long)]
        records: PathBuf,
        /// Bootstrap replicates; defaults to the config's `n_boot`.
        #[arg(long)]
        n_boot: Option<usize>,
    },
    /// Fits the source and channel model to R tables.
    Fit {
        /// JSON with `angle_pairs`, `r_tables`, `init` and optional `fixed`.
        #[arg(long)]
        input: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn sidecar_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        let mut name = out.as_os_str().to_owned();
        name.push(".summary.json");
        PathBuf::from(name)
    } else {
        out.with_extension("json")
    }
}

fn run(cli: &Cli) -> Result<i32> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Simulate => {
            let res = commands::simulate(&load_config(cli)?)?;
            emit(out, &to_json(&res)?)?;
        }
        Command::Sweep { param, grid } => {
            let cfg = load_config(cli)?;
            let rows = commands::sweep(&cfg, *param, &grid.resolve((0.2, 4.0, 20)))?;
            emit(out, &commands::sweep_csv(&rows))?;
        }
        Command::Fringe { theta_a, grid } => {
            let cfg = load_config(cli)?;
            let (points, summary) =
                commands::fringe_table(&cfg, *theta_a, &grid.resolve((0.0, std::f64::consts::PI, 64)))?;
            emit(out, &commands::fringe_csv(&points))?;
            match (summary.visibility, &summary.visibility_error) {
                (Some(v), _) => eprintln!("visibility {v:.6} over {} points", summary.n_points),
                (None, Some(msg)) => eprintln!("visibility unavailable: {msg}"),
                (None, None) => {}
            }
            if let Some(p) = out {
                std::fs::write(sidecar_path(p), to_json(&summary)?)?;
            }
        }
        Command::Sample => {
            let dir = out.ok_or_else(|| Error::InvalidArgument("sample needs --out DIR".into()))?;
            let meta = commands::sample(&load_config(cli)?, dir)?;
            eprintln!("wrote {} record files to {}", meta.files.len(), dir.display());
        }
        Command::Analyze { records, n_boot } => {
            let cfg = load_config(cli)?;
            let res = commands::analyze(records, n_boot.unwrap_or(cfg.n_boot), cfg.seed)?;
            emit(out, &to_json(&res)?)?;
        }
        Command::Fit { input } => {
            let text = std::fs::read_to_string(input)
                .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", input.display())))?;
            let parsed: FitInput = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidArgument(format!("fit input {}: {e}", input.display())))?;
            let res = commands::run_fit(&parsed)?;
            emit(out, &to_json(&res)?)?;
            if !res.converged {
                eprintln!("fit did not converge after {} iterations", res.n_iter);
                return Ok(EXIT_NOT_CONVERGED);
            }
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("cannot set up threads: {e}");
    }
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            let report = ErrorReport::new(&e);
            match serde_json::to_string(&report) {
                Ok(line) => eprintln!("{line}"),
                Err(_) => eprintln!("error: {e}"),
            }
            report.exit_code
        }
    };
    ExitCode::from(code as u8)
}
