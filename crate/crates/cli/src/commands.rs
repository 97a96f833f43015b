use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use batchdiff_core::denoiser::ExternalDenoiser;
use batchdiff_core::video::{load_svtf, save_ppm_frames, save_svtf};
use batchdiff_core::{
    admm_tv, blind_deblur, degrade as degrade_video, parse_op, residual, solve as solve_video, standalone_cg,
    synth_video, EpsModel, LinearOp, MetricReport, NoisePredictor, Shape, SolveTrace, UpdateRule, VideoTensor,
};
use serde::{Deserialize, Serialize};

use crate::config::{DenoiserKind, RunConfig};
use crate::error::{io_at, CliError, CliResult};
use crate::{BaselineMethod, DegradeArgs, GenerateArgs, MetricsArgs};

/// Written next to every degraded measurement as `<file>.op.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub op: String,
    pub in_shape: [usize; 4],
    pub noise_std: f64,
    pub seed: u64,
}

pub fn sidecar_path(measurement: &Path) -> PathBuf {
    let mut s = measurement.as_os_str().to_owned();
    s.push(".op.json");
    PathBuf::from(s)
}

fn read_sidecar(measurement: &Path) -> CliResult<Option<Sidecar>> {
    let path = sidecar_path(measurement);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(io_at(&path))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn shape_of(dims: [usize; 4]) -> Shape {
    Shape::new(dims[0], dims[1], dims[2], dims[3])
}

fn dims_of(s: Shape) -> [usize; 4] {
    [s.frames, s.channels, s.height, s.width]
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(io_at(path))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_at(dir))
}

pub fn generate(a: &GenerateArgs) -> CliResult<()> {
    let shape = Shape::new(a.frames, a.channels, a.height, a.width);
    let v = synth_video(a.kind, shape, a.seed)?;
    save_svtf(&v, &a.out)?;
    if let Some(dir) = &a.ppm_dir {
        save_ppm_frames(&v, dir)?;
    }
    Ok(())
}

pub fn degrade(a: &DegradeArgs) -> CliResult<()> {
    let x = load_svtf(&a.input)?;
    let op = parse_op(&a.op, x.shape())?;
    let y = degrade_video(&x, &op, a.noise_std, a.seed)?;
    save_svtf(&y, &a.out)?;
    let car = Sidecar {
        op: a.op.clone(),
        in_shape: dims_of(x.shape()),
        noise_std: a.noise_std,
        seed: a.seed,
    };
    write_json(&sidecar_path(&a.out), &car)
}

/// The measurement, the operator and the (possibly updated) config with the
/// operator descriptor and unknown shape filled in.
struct Problem {
    y: VideoTensor,
    op: LinearOp,
    config: RunConfig,
}

fn load_problem(cfg: &RunConfig) -> CliResult<Problem> {
    let path = cfg
        .data
        .measurement
        .as_ref()
        .ok_or_else(|| CliError::config("data.measurement is required"))?;
    let y = load_svtf(path)?;
    let car = read_sidecar(path)?;
    let descriptor = cfg
        .op
        .op
        .clone()
        .or_else(|| car.as_ref().map(|c| c.op.clone()))
        .ok_or_else(|| CliError::config("op.op is required (no sidecar next to the measurement)"))?;
    let dims = cfg
        .data
        .shape
        .or_else(|| car.as_ref().map(|c| c.in_shape))
        .unwrap_or_else(|| dims_of(y.shape()));
    let op = parse_op(&descriptor, shape_of(dims))?;
    if op.out_shape() != y.shape() {
        return Err(CliError::config(format!(
            "operator {descriptor:?} maps {} to {}, but the measurement is {}",
            op.in_shape(),
            op.out_shape(),
            y.shape()
        )));
    }
    let mut config = cfg.clone();
    config.op.op = Some(descriptor);
    config.data.shape = Some(dims);
    Ok(Problem { y, op, config })
}

fn load_reference(cfg: &RunConfig, shape: Shape) -> CliResult<Option<VideoTensor>> {
    cfg.data
        .reference
        .as_ref()
        .map(|p| {
            let r = load_svtf(p)?;
            if r.shape() != shape {
                return Err(CliError::config(format!(
                    "reference {} is {}, expected {}",
                    p.display(),
                    r.shape(),
                    shape
                )));
            }
            Ok(r)
        })
        .transpose()
}

fn build_model(cfg: &RunConfig) -> CliResult<Box<dyn NoisePredictor>> {
    let d = &cfg.denoiser;
    Ok(match d.kind {
        DenoiserKind::Zero => Box::new(EpsModel::Zero),
        DenoiserKind::Smoother => Box::new(EpsModel::Smoother { scale: d.scale }),
        DenoiserKind::OracleGaussian => Box::new(EpsModel::OracleGaussian {
            mu: d.mu,
            sigma0: d.sigma0,
        }),
        DenoiserKind::External => {
            let cmd = d
                .bridge_cmd
                .as_deref()
                .ok_or_else(|| CliError::config("denoiser.kind = \"external\" needs denoiser.bridge_cmd"))?;
            Box::new(ExternalDenoiser::spawn_shell(cmd, d.timeout()?)?)
        }
    })
}

fn write_trace(dir: &Path, trace: &SolveTrace) -> CliResult<()> {
    let path = dir.join("trace.jsonl");
    let file = fs::File::create(&path).map_err(io_at(&path))?;
    let mut w = BufWriter::new(file);
    for step in &trace.steps {
        serde_json::to_writer(&mut w, step).expect("serializable");
        w.write_all(b"\n").map_err(io_at(&path))?;
    }
    w.flush().map_err(io_at(&path))?;

    if trace.steps.iter().any(|s| s.tweedie_batch.is_some()) {
        let tdir = dir.join("tweedie");
        ensure_dir(&tdir)?;
        for (i, step) in trace.steps.iter().enumerate() {
            if let Some(b) = &step.tweedie_batch {
                save_svtf(b, tdir.join(format!("step_{i:04}.svtf")))?;
            }
        }
    }
    Ok(())
}

fn report(
    dir: &Path,
    x: &VideoTensor,
    reference: Option<&VideoTensor>,
    problem: (&LinearOp, &VideoTensor),
) -> CliResult<()> {
    if let Some(r) = reference {
        let m = MetricReport::compute(x, r, Some(problem))?;
        write_json(&dir.join("metrics.json"), &m)?;
        println!("{}", serde_json::to_string(&m).expect("serializable"));
    } else {
        println!("residual {:.6e}", residual(problem.0, x, problem.1)?);
    }
    Ok(())
}

pub fn solve(cfg: &RunConfig) -> CliResult<()> {
    let p = load_problem(cfg)?;
    let reference = load_reference(&p.config, p.op.in_shape())?;
    let dir = &p.config.output.dir;
    ensure_dir(dir)?;
    p.config.write_resolved(dir)?;

    let schedule = p.config.solver.schedule()?;
    let model = build_model(&p.config)?;
    let (x, trace) = solve_video(&p.op, &p.y, model.as_ref(), &schedule, &p.config.solver.solver_config())?;
    save_svtf(&x, dir.join("solution.svtf"))?;
    write_trace(dir, &trace)?;
    report(dir, &x, reference.as_ref(), (&p.op, &p.y))
}

#[derive(Serialize)]
struct BlindSummary {
    initial_psf: String,
    refined_psf: String,
    stage1_residual: f64,
    residual: f64,
}

pub fn blind(cfg: &RunConfig) -> CliResult<()> {
    let mut cfg = cfg.clone();
    let path = cfg
        .data
        .measurement
        .clone()
        .ok_or_else(|| CliError::config("data.measurement is required"))?;
    let y = load_svtf(&path)?;
    let family = cfg.psf_family()?;
    let pre = cfg.data.pre_restoration.as_ref().map(load_svtf).transpose()?;
    let reference = load_reference(&cfg, y.shape())?;
    let dir = cfg.output.dir.clone();
    ensure_dir(&dir)?;
    cfg.data.shape = Some(dims_of(y.shape()));
    cfg.write_resolved(&dir)?;

    let schedule = cfg.solver.schedule()?;
    let model = build_model(&cfg)?;
    let out = blind_deblur(
        &y,
        model.as_ref(),
        &schedule,
        &cfg.solver.solver_config(),
        pre.as_ref(),
        family,
        &cfg.op.grid,
    )?;
    save_svtf(&out.video, dir.join("solution.svtf"))?;
    save_svtf(&out.stage1, dir.join("stage1.svtf"))?;
    let op1 = LinearOp::temporal_psf(y.shape(), out.initial_psf)?;
    let op2 = LinearOp::temporal_psf(y.shape(), out.refined_psf)?;
    let summary = BlindSummary {
        initial_psf: out.initial_psf.to_string(),
        refined_psf: out.refined_psf.to_string(),
        stage1_residual: residual(&op1, &out.stage1, &y)?,
        residual: residual(&op2, &out.video, &y)?,
    };
    write_json(&dir.join("blind.json"), &summary)?;
    println!("psf {} -> {}", summary.initial_psf, summary.refined_psf);
    report(&dir, &out.video, reference.as_ref(), (&op2, &y))
}

pub fn baseline(cfg: &RunConfig, method: BaselineMethod) -> CliResult<()> {
    let p = load_problem(cfg)?;
    let reference = load_reference(&p.config, p.op.in_shape())?;
    let dir = &p.config.output.dir;
    ensure_dir(dir)?;
    p.config.write_resolved(dir)?;

    let x = match method {
        BaselineMethod::Cg => standalone_cg(&p.op, &p.y, p.config.solver.cg_budget())?,
        BaselineMethod::AdmmTv => {
            let rep = admm_tv(&p.op, &p.y, &p.config.solver.admm_config())?;
            write_json(&dir.join("objective.json"), &rep.objective)?;
            rep.x
        }
    };
    save_svtf(&x, dir.join("solution.svtf"))?;
    report(dir, &x, reference.as_ref(), (&p.op, &p.y))
}

pub fn metrics(a: &MetricsArgs) -> CliResult<()> {
    let x = load_svtf(&a.x)?;
    let r = load_svtf(&a.reference)?;
    let problem = match &a.measurement {
        Some(path) => {
            let mut cfg = RunConfig::default();
            cfg.data.measurement = Some(path.clone());
            cfg.op.op = a.op.clone();
            cfg.data.shape = Some(dims_of(x.shape()));
            let p = load_problem(&cfg)?;
            Some((p.op, p.y))
        }
        None => None,
    };
    let m = MetricReport::compute(&x, &r, problem.as_ref().map(|(op, y)| (op, y)))?;
    let text = serde_json::to_string(&m).expect("serializable");
    if let Some(out) = &a.out {
        fs::write(out, format!("{text}\n")).map_err(io_at(out))?;
    }
    println!("{text}");
    Ok(())
}

pub const ABLATION_HEADER: &str = "noise_sync,update,eta,psnr_db,ssim,residual,inter_batch_diff";

/// One solve per (noise_sync, update, eta), all from the same seed.
pub fn ablate(cfg: &RunConfig) -> CliResult<()> {
    let p = load_problem(cfg)?;
    let reference = load_reference(&p.config, p.op.in_shape())?
        .ok_or_else(|| CliError::config("ablate needs data.reference"))?;
    if p.config.solver.etas.is_empty() {
        return Err(CliError::config("solver.etas is empty"));
    }
    let dir = &p.config.output.dir;
    ensure_dir(dir)?;
    p.config.write_resolved(dir)?;
    let schedule = p.config.solver.schedule()?;
    let model = build_model(&p.config)?;

    let path = dir.join("ablation.csv");
    let mut rows = vec![ABLATION_HEADER.to_string()];
    for sync in [true, false] {
        for update in [UpdateRule::Cg, UpdateRule::Gd] {
            for &eta in &p.config.solver.etas {
                let mut sc = p.config.solver.solver_config();
                sc.noise_sync = sync;
                sc.update = update;
                sc.eta = eta;
                sc.trace = false;
                let (x, _) = solve_video(&p.op, &p.y, model.as_ref(), &schedule, &sc)?;
                let m = MetricReport::compute(&x, &reference, Some((&p.op, &p.y)))?;
                rows.push(format!(
                    "{sync},{update},{eta},{},{},{},{}",
                    m.psnr_db,
                    m.ssim,
                    m.residual.expect("residual requested"),
                    m.inter_batch_diff
                ));
            }
        }
    }
    fs::write(&path, rows.join("\n") + "\n").map_err(io_at(&path))?;
    println!("{} rows -> {}", rows.len() - 1, path.display());
    Ok(())
}
