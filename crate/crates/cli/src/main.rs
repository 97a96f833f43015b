mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use batchdiff_core::{SynthKind, UpdateRule};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{DenoiserKind, RunConfig};
use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "batchdiff", version, about = "Video inverse problems with per-frame diffusion priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic clip.
    Generate(GenerateArgs),
    /// Apply a forward operator and optional Gaussian noise.
    Degrade(DegradeArgs),
    /// Batch-consistent diffusion solve with a known operator.
    Solve(RunArgs),
    /// Two-stage blind temporal deblurring.
    Blind(BlindArgs),
    /// Classical reconstruction.
    Baseline(BaselineArgs),
    /// Compare a reconstruction against a reference.
    Metrics(MetricsArgs),
    /// Sweep noise_sync x update x eta and write a CSV of metrics.
    Ablate(RunArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, default_value = "moving_square")]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 16)]
    pub frames: usize,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also dump frames as binary PPM into this directory.
    #[arg(long)]
    pub ppm_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DegradeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub op: String,
    #[arg(long, default_value_t = 0.0)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags shared by every command that reads a run config. Each overrides the
/// config key of the same name.
#[derive(Args, Debug, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub measurement: Option<PathBuf>,
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub op: Option<String>,
    #[arg(long, num_args = 4, value_names = ["N", "C", "H", "W"])]
    pub shape: Option<Vec<usize>>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub nfe: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub cg_steps: Option<usize>,
    #[arg(long)]
    pub update: Option<UpdateRule>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub noise_sync: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trace: Option<bool>,
    /// Comma-separated eta grid for `ablate`.
    #[arg(long, value_delimiter = ',')]
    pub etas: Option<Vec<f64>>,
    #[arg(long)]
    pub denoiser: Option<DenoiserKind>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub bridge_cmd: Option<String>,
    #[arg(long)]
    pub bridge_timeout: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BlindArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated PSF parameter grid.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub pre_restoration: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BaselineMethod {
    Cg,
    AdmmTv,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Measurement for the residual; its op comes from `--op` or the sidecar.
    #[arg(long)]
    pub measurement: Option<PathBuf>,
    #[arg(long)]
    pub op: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $flag:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v.into();
                }
            };
        }
        set!(c.data.measurement, self.measurement.clone().map(Some));
        set!(c.data.reference, self.reference.clone().map(Some));
        set!(c.op.op, self.op.clone().map(Some));
        if let Some(s) = &self.shape {
            c.data.shape = Some([s[0], s[1], s[2], s[3]]);
        }
        set!(c.output.dir, self.out_dir);
        set!(c.solver.nfe, self.nfe);
        set!(c.solver.eta, self.eta);
        set!(c.solver.cg_steps, self.cg_steps);
        set!(c.solver.update, self.update);
        set!(c.solver.gamma, self.gamma);
        set!(c.solver.noise_sync, self.noise_sync);
        set!(c.solver.seed, self.seed);
        set!(c.solver.trace, self.trace);
        set!(c.solver.etas, self.etas);
        set!(c.denoiser.kind, self.denoiser);
        set!(c.denoiser.scale, self.scale);
        set!(c.denoiser.bridge_cmd, self.bridge_cmd.clone().map(Some));
        set!(c.denoiser.timeout_secs, self.bridge_timeout);
        if self.bridge_cmd.is_some() && self.denoiser.is_none() {
            c.denoiser.kind = DenoiserKind::External;
        }
        Ok(c)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Degrade(a) => commands::degrade(&a),
        Command::Solve(a) => commands::solve(&a.resolve()?),
        Command::Blind(a) => {
            let mut c = a.run.resolve()?;
            if let Some(g) = a.grid {
                c.op.grid = g;
            }
            if let Some(f) = a.family {
                c.op.family = f;
            }
            if let Some(p) = a.pre_restoration {
                c.data.pre_restoration = Some(p);
            }
            commands::blind(&c)
        }
        Command::Baseline(a) => {
            let mut c = a.run.resolve()?;
            if let Some(i) = a.iters {
                c.solver.cg_iters = Some(i);
            }
            if let Some(r) = a.rho {
                c.solver.rho = r;
            }
            if let Some(l) = a.lambda {
                c.solver.lambda = l;
            }
            commands::baseline(&c, a.method)
        }
        Command::Metrics(a) => commands::metrics(&a),
        Command::Ablate(a) => commands::ablate(&a.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
