//! Run configuration: a TOML file with `[data]`, `[op]`, `[solver]`,
//! `[denoiser]` and `[output]` sections. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::time::Duration;

use batchdiff_core::{AdmmConfig, NoiseSchedule, PsfFamily, SolverConfig, TvAxes, UpdateRule};
use serde::{Deserialize, Serialize};

use crate::error::{io_at, CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub op: OpSection,
    pub solver: SolverSection,
    pub denoiser: DenoiserSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub measurement: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub pre_restoration: Option<PathBuf>,
    /// Unknown-signal shape `[N, C, H, W]`; defaults to the sidecar, then to
    /// the measurement shape.
    pub shape: Option<[usize; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpSection {
    pub op: Option<String>,
    /// PSF family searched by `blind`.
    pub family: String,
    pub grid: Vec<f64>,
}

impl Default for OpSection {
    fn default() -> Self {
        OpSection {
            op: None,
            family: "uniform".into(),
            grid: (0..8).map(|k| (2 * k + 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub nfe: usize,
    pub eta: f64,
    pub cg_steps: usize,
    pub update: UpdateRule,
    pub gamma: f64,
    pub noise_sync: bool,
    pub seed: u64,
    pub trace: bool,
    pub cg_tol: f64,
    pub t_base: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    /// η grid swept by `ablate`.
    pub etas: Vec<f64>,
    /// Stand-alone CG budget; defaults to `nfe * cg_steps`.
    pub cg_iters: Option<usize>,
    pub rho: f64,
    pub lambda: f64,
    pub admm_outer: usize,
    pub admm_inner: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        let a = AdmmConfig::default();
        SolverSection {
            nfe: s.nfe,
            eta: s.eta,
            cg_steps: s.cg_steps,
            update: s.update,
            gamma: s.gamma,
            noise_sync: s.noise_sync,
            seed: s.seed,
            trace: s.trace,
            cg_tol: s.cg_tol,
            t_base: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
            etas: (0..=5).map(|k| k as f64 * 0.2).collect(),
            cg_iters: None,
            rho: a.rho,
            lambda: a.lambda,
            admm_outer: a.outer,
            admm_inner: a.inner,
        }
    }
}

impl SolverSection {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            nfe: self.nfe,
            eta: self.eta,
            cg_steps: self.cg_steps,
            update: self.update,
            gamma: self.gamma,
            noise_sync: self.noise_sync,
            seed: self.seed,
            trace: self.trace,
            cg_tol: self.cg_tol,
        }
    }

    pub fn schedule(&self) -> CliResult<NoiseSchedule> {
        Ok(NoiseSchedule::linear(self.t_base, self.beta_start, self.beta_end)?)
    }

    pub fn admm_config(&self) -> AdmmConfig {
        AdmmConfig {
            rho: self.rho,
            lambda: self.lambda,
            outer: self.admm_outer,
            inner: self.admm_inner,
            axes: TvAxes::default(),
        }
    }

    pub fn cg_budget(&self) -> usize {
        self.cg_iters.unwrap_or(self.nfe * self.cg_steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    Zero,
    OracleGaussian,
    Smoother,
    External,
}

impl std::str::FromStr for DenoiserKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero" => Ok(DenoiserKind::Zero),
            "oracle_gaussian" => Ok(DenoiserKind::OracleGaussian),
            "smoother" => Ok(DenoiserKind::Smoother),
            "external" => Ok(DenoiserKind::External),
            _ => Err(format!("unknown denoiser {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserSection {
    pub kind: DenoiserKind,
    /// Smoother strength.
    pub scale: f64,
    pub mu: f64,
    pub sigma0: f64,
    /// Shell command that starts a bridge speaking the denoiser protocol.
    pub bridge_cmd: Option<String>,
    pub timeout_secs: f64,
}

impl Default for DenoiserSection {
    fn default() -> Self {
        DenoiserSection {
            kind: DenoiserKind::Smoother,
            scale: 1.0,
            mu: 0.5,
            sigma0: 0.25,
            bridge_cmd: None,
            timeout_secs: 30.0,
        }
    }
}

impl DenoiserSection {
    pub fn timeout(&self) -> CliResult<Duration> {
        Duration::try_from_secs_f64(self.timeout_secs)
            .ok()
            .filter(|d| !d.is_zero())
            .ok_or_else(|| CliError::config(format!("denoiser.timeout_secs {} must be > 0", self.timeout_secs)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_at(path))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Writes the fully resolved config to `dir/resolved.toml`.
    pub fn write_resolved(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join("resolved.toml");
        std::fs::write(&path, self.to_toml()).map_err(io_at(&path))?;
        Ok(path)
    }

    pub fn psf_family(&self) -> CliResult<PsfFamily> {
        match self.op.family.as_str() {
            "uniform" => Ok(PsfFamily::Uniform),
            "gauss" | "gaussian" => Ok(PsfFamily::Gaussian),
            other => Err(CliError::config(format!("unknown PSF family {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_temporal_task_settings() {
        let c = RunConfig::parse("").unwrap();
        let s = c.solver.solver_config();
        assert_eq!((s.nfe, s.eta, s.cg_steps), (20, 0.15, 5));
        assert!(s.noise_sync);
        assert_eq!(c.solver.etas.len(), 6);
        assert_eq!(c.solver.cg_budget(), 100);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::parse("[solver]\nnfee = 3\n").unwrap_err();
        assert!(err.to_string().contains("nfee"), "{err}");
        assert_eq!(err.exit_code(), 2);
        let err = RunConfig::parse("[solvr]\nnfe = 3\n").unwrap_err();
        assert!(err.to_string().contains("solvr"), "{err}");
    }

    #[test]
    fn round_trips_through_toml() {
        let text = r#"
[data]
measurement = "y.svtf"
shape = [4, 1, 8, 8]

[op]
op = "temporal:uniform:3 | sr:2"

[solver]
nfe = 7
update = "gd"
noise_sync = false

[denoiser]
kind = "external"
bridge_cmd = "bridge --mode zero"
"#;
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.solver.update, UpdateRule::Gd);
        assert_eq!(c.denoiser.kind, DenoiserKind::External);
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn bad_values() {
        assert!(RunConfig::parse("[solver]\nupdate = \"newton\"\n").is_err());
        let mut c = RunConfig::default();
        c.denoiser.timeout_secs = 0.0;
        assert!(c.denoiser.timeout().is_err());
        c.op.family = "box".into();
        assert!(c.psf_family().is_err());
    }
}
