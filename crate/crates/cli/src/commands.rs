use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Args;
use serde_json::json;

use posediff_core::diffusion::{
    level_subset, sample_per_condition, train_from, AdamState, NoiseSchedule, SamplerConfig,
    StepInfo, TrainConfig, TrainObserver, DEFAULT_STEP_SCALE,
};
use posediff_core::eval::{evaluate, mollweide_export};
use posediff_core::score_net::{Checkpoint, NetConfig, ScoreNetParams};
use posediff_core::symsol::{gen_dataset, parse_shapes, Dataset, DatasetConfig};
use posediff_core::verify::{verify_suite, Bound, Fault};
use posediff_core::Rotation;

use crate::poses::{read_poses, write_poses, PoseHeader};
use crate::settings::{key, Key, Settings};
use crate::{CheckFailed, Common, UsageError};

pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn resolve_run_dir(raw: &str) -> PathBuf {
    let p = PathBuf::from(raw);
    match std::env::var_os("POSEDIFF_RUN_ROOT") {
        Some(root) if p.is_relative() => Path::new(&root).join(p),
        _ => p,
    }
}

/// Resolves settings, then records them in the run directory (if any)
/// before any work starts.
fn prepare(
    keys: &'static [Key],
    common: &Common,
    mut flags: Vec<(&'static str, Option<String>)>,
) -> anyhow::Result<(Settings, Option<PathBuf>)> {
    flags.push(("seed", common.seed.clone()));
    flags.push(("run_dir", common.run_dir.clone()));
    let s = Settings::resolve(keys, common.config.as_deref(), &flags)?;
    let dir = s.raw("run_dir").map(resolve_run_dir);
    if let Some(d) = &dir {
        std::fs::create_dir_all(d).with_context(|| format!("creating run directory {}", d.display()))?;
        std::fs::write(d.join(CONFIG_FILE), s.render())?;
    }
    Ok((s, dir))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

static VERIFY_KEYS: &[Key] = &[
    key("seed", None, "random seed"),
    key("run_dir", None, "run directory"),
    key("fault", Some("none"), "none | right-for-left"),
];

pub fn verify(common: &Common, fault: Option<String>, as_json: bool) -> anyhow::Result<()> {
    let (s, dir) = prepare(VERIFY_KEYS, common, vec![("fault", fault)])?;
    let seed: u64 = s.get("seed")?;
    let fault = match s.raw("fault") {
        Some("none") | None => None,
        Some("right-for-left") => Some(Fault::RightForLeftJacobian),
        Some(other) => return Err(usage(format!("unknown fault `{other}`"))),
    };
    let report = verify_suite(seed, fault);
    let text = if as_json {
        serde_json::to_string_pretty(&report)? + "\n"
    } else {
        let mut t = String::new();
        for r in &report.rows {
            let op = match r.bound {
                Bound::Max => "<=",
                Bound::Min => ">",
            };
            t += &format!(
                "{} {:<40} {:>12.3e} {op} {:.0e}\n",
                if r.pass { "PASS" } else { "FAIL" },
                r.property,
                r.value,
                r.threshold
            );
        }
        t += &format!("{} properties, {} failed\n", report.rows.len(), report.failures());
        t
    };
    print!("{text}");
    if let Some(d) = dir {
        std::fs::write(d.join("verify.txt"), &text)?;
    }
    if report.failures() > 0 {
        return Err(CheckFailed(format!("{} of {} properties failed", report.failures(), report.rows.len())).into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

static GEN_KEYS: &[Key] = &[
    key("seed", None, "random seed"),
    key("run_dir", None, "run directory"),
    key("shapes", Some("tet,cube"), "comma-separated shapes: tet, cube, icosa, cone, cyl"),
    key("n", Some("2000"), "poses per shape"),
    key("views", Some("1"), "reference poses per shape; 0 gives each pose its own"),
    key("mode", Some("so3"), "so3 | r3so3 | se3"),
    key("trans_range", Some("-1,1"), "per-axis translation range lo,hi"),
    key("out", None, "output dataset file"),
];

#[derive(Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    shapes: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    views: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    trans_range: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

pub fn gen_data(a: &GenDataArgs) -> anyhow::Result<()> {
    let (s, _) = prepare(
        GEN_KEYS,
        &a.common,
        vec![
            ("shapes", a.shapes.clone()),
            ("n", a.n.clone()),
            ("views", a.views.clone()),
            ("mode", a.mode.clone()),
            ("trans_range", a.trans_range.clone()),
            ("out", a.out.clone()),
        ],
    )?;
    let range: Vec<f64> = s.list("trans_range")?;
    let [lo, hi] = range[..] else {
        return Err(usage("trans_range needs exactly two values"));
    };
    let cfg = DatasetConfig {
        shapes: parse_shapes(s.raw("shapes").unwrap_or_default())?,
        n_per_shape: s.get("n")?,
        views_per_shape: s.get("views")?,
        translation_range: [lo, hi],
        mode: s.get("mode")?,
        seed: s.get("seed")?,
    };
    let out: PathBuf = s.get("out")?;
    let ds = gen_dataset(&cfg)?;
    let mut w = create(&out)?;
    ds.write(&mut w)?;
    w.flush()?;
    println!(
        "wrote {} poses ({} conditions) to {}",
        ds.samples.len(),
        ds.header.num_conditions(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

static TRAIN_KEYS: &[Key] = &[
    key("seed", None, "random seed"),
    key("run_dir", None, "run directory (required)"),
    key("data", None, "dataset file"),
    key("steps", Some("10000"), "optimizer steps"),
    key("batch_size", Some("32"), "clean poses per step"),
    key("fan_out", Some("32"), "noisy samples per clean pose"),
    key("levels", Some("100"), "number of noise levels"),
    key("sigma_min", Some("1e-4"), "smallest noise level"),
    key("sigma_max", Some("1.0"), "largest noise level"),
    key("lr_init", Some("1e-3"), "initial learning rate"),
    key("lr_final", Some("1e-5"), "final learning rate"),
    key("score_kind", Some("surrogate"), "SE(3) target: surrogate | true"),
    key("loss_power", Some("2"), "per-sample loss weight exponent p (weight sigma^p)"),
    key("output_power", Some("1"), "network output scaling exponent q (output / sigma^q)"),
    key("width", Some("256"), "hidden width"),
    key("blocks", Some("1"), "MLP blocks"),
    key("pose_freqs", Some("4"), "rotation encoding frequencies"),
    key("trans_freqs", Some("6"), "translation encoding frequencies"),
    key("noise_freqs", Some("6"), "noise-index encoding frequencies"),
    key("embed_dim", Some("64"), "condition embedding size"),
    key("conditioning", Some("fourier"), "fourier | scale-bias"),
    key("trans_scale", Some("0.2"), "translation multiplier before encoding"),
    key("log_every", Some("100"), "steps between metrics rows"),
    key("checkpoint_every", Some("0"), "steps between checkpoints (0: final only)"),
    key("step_scale", Some("0.5"), "default sampler step scale stored with the model"),
];

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    fan_out: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    sigma_min: Option<String>,
    #[arg(long)]
    sigma_max: Option<String>,
    #[arg(long)]
    lr_init: Option<String>,
    #[arg(long)]
    lr_final: Option<String>,
    #[arg(long)]
    score_kind: Option<String>,
    #[arg(long)]
    loss_power: Option<String>,
    #[arg(long)]
    output_power: Option<String>,
    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    pose_freqs: Option<String>,
    #[arg(long)]
    trans_freqs: Option<String>,
    #[arg(long)]
    noise_freqs: Option<String>,
    #[arg(long)]
    embed_dim: Option<String>,
    #[arg(long)]
    conditioning: Option<String>,
    #[arg(long)]
    trans_scale: Option<String>,
    #[arg(long)]
    log_every: Option<String>,
    #[arg(long)]
    checkpoint_every: Option<String>,
    #[arg(long)]
    step_scale: Option<String>,
}

struct RunObserver {
    dir: PathBuf,
    metrics: BufWriter<File>,
    start: Instant,
    meta: serde_json::Value,
}

impl TrainObserver for RunObserver {
    fn on_log(&mut self, i: &StepInfo) -> posediff_core::Result<()> {
        let wall = self.start.elapsed().as_secs_f64();
        writeln!(self.metrics, "{},{:.10e},{:.6e},{wall:.3}", i.step, i.loss, i.lr)?;
        self.metrics.flush()?;
        Ok(())
    }

    fn on_checkpoint(&mut self, step: usize, params: &ScoreNetParams, adam: &AdamState) -> posediff_core::Result<()> {
        let mut meta = self.meta.clone();
        meta["step"] = json!(step);
        let ckpt = Checkpoint {
            params: params.clone(),
            optimizer: Some(adam.clone()),
            meta,
        };
        let dir = self.dir.join("checkpoints");
        std::fs::create_dir_all(&dir)?;
        ckpt.save(&dir.join(format!("step_{step:08}.ckpt")))
    }
}

pub fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let (s, dir) = prepare(
        TRAIN_KEYS,
        &a.common,
        vec![
            ("data", a.data.clone()),
            ("steps", a.steps.clone()),
            ("batch_size", a.batch_size.clone()),
            ("fan_out", a.fan_out.clone()),
            ("levels", a.levels.clone()),
            ("sigma_min", a.sigma_min.clone()),
            ("sigma_max", a.sigma_max.clone()),
            ("lr_init", a.lr_init.clone()),
            ("lr_final", a.lr_final.clone()),
            ("score_kind", a.score_kind.clone()),
            ("loss_power", a.loss_power.clone()),
            ("output_power", a.output_power.clone()),
            ("width", a.width.clone()),
            ("blocks", a.blocks.clone()),
            ("pose_freqs", a.pose_freqs.clone()),
            ("trans_freqs", a.trans_freqs.clone()),
            ("noise_freqs", a.noise_freqs.clone()),
            ("embed_dim", a.embed_dim.clone()),
            ("conditioning", a.conditioning.clone()),
            ("trans_scale", a.trans_scale.clone()),
            ("log_every", a.log_every.clone()),
            ("checkpoint_every", a.checkpoint_every.clone()),
            ("step_scale", a.step_scale.clone()),
        ],
    )?;
    let dir = dir.ok_or_else(|| usage("train needs --run-dir"))?;
    let data_path: PathBuf = s.get("data")?;
    let ds = Dataset::load(&data_path).with_context(|| format!("loading {}", data_path.display()))?;
    let mode = ds.header.mode;

    let mut tc = TrainConfig::new(mode, s.get("seed")?);
    tc.total_steps = s.get("steps")?;
    tc.batch_size = s.get("batch_size")?;
    tc.noisy_per_datum = s.get("fan_out")?;
    tc.levels = s.get("levels")?;
    tc.sigma_min = s.get("sigma_min")?;
    tc.sigma_max = s.get("sigma_max")?;
    tc.lr_init = s.get("lr_init")?;
    tc.lr_final = s.get("lr_final")?;
    tc.score_kind = s.get("score_kind")?;
    tc.loss_power = s.get("loss_power")?;
    tc.log_every = s.get("log_every")?;
    tc.checkpoint_every = s.get("checkpoint_every")?;

    let mut nc = NetConfig::new(mode, ds.header.num_conditions(), tc.levels);
    nc.width = s.get("width")?;
    nc.blocks = s.get("blocks")?;
    nc.pose_freqs = s.get("pose_freqs")?;
    nc.trans_freqs = s.get("trans_freqs")?;
    nc.noise_freqs = s.get("noise_freqs")?;
    nc.embed_dim = s.get("embed_dim")?;
    nc.conditioning = s.get("conditioning")?;
    nc.trans_scale = s.get("trans_scale")?;
    nc.output_power = s.get("output_power")?;
    nc.sigma_min = tc.sigma_min;
    nc.sigma_max = tc.sigma_max;
    let step_scale: f64 = s.get("step_scale")?;

    let mut metrics = create(&dir.join(METRICS_FILE))?;
    writeln!(metrics, "step,loss,lr,wall_time_s")?;
    let meta = json!({
        "train": tc,
        "dataset": ds.header,
        "step_scale": step_scale,
    });
    let mut obs = RunObserver {
        dir: dir.clone(),
        metrics,
        start: Instant::now(),
        meta: meta.clone(),
    };

    let mut params = ScoreNetParams::init(nc, &mut posediff_core::rng::split(tc.seed, 0))?;
    let mut adam = AdamState::new(params.num_params());
    train_from(&mut params, &mut adam, &ds.records(), &tc, 0, &mut obs)?;

    let mut meta = meta;
    meta["step"] = json!(tc.total_steps);
    let final_path = dir.join(FINAL_CHECKPOINT);
    Checkpoint {
        params,
        optimizer: Some(adam),
        meta,
    }
    .save(&final_path)?;
    println!("trained {} steps; checkpoint {}", tc.total_steps, final_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// sampling helpers
// ---------------------------------------------------------------------------

#[derive(Args, Clone)]
pub struct SamplerArgs {
    #[arg(long)]
    substeps: Option<String>,
    #[arg(long)]
    inner_steps: Option<String>,
    #[arg(long)]
    step_scale: Option<String>,
    #[arg(long)]
    polish: Option<String>,
}

impl SamplerArgs {
    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("substeps", self.substeps.clone()),
            ("inner_steps", self.inner_steps.clone()),
            ("step_scale", self.step_scale.clone()),
            ("polish", self.polish.clone()),
        ]
    }
}

fn load_checkpoint(s: &Settings) -> anyhow::Result<Checkpoint> {
    let path: PathBuf = s.get("checkpoint")?;
    Checkpoint::load(&path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn step_scale(s: &Settings, ckpt: &Checkpoint) -> anyhow::Result<f64> {
    Ok(match s.opt("step_scale")? {
        Some(v) => v,
        None => ckpt.meta["step_scale"].as_f64().unwrap_or(DEFAULT_STEP_SCALE),
    })
}

fn sampler(s: &Settings, steps: Option<usize>, levels: usize) -> anyhow::Result<SamplerConfig> {
    Ok(SamplerConfig {
        substeps: s.get("substeps")?,
        inner_steps: s.get("inner_steps")?,
        polish: s.get("polish")?,
        noiseless: false,
        levels: match steps {
            Some(n) if n != levels => Some(level_subset(levels, n)?),
            _ => None,
        },
    })
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

static SAMPLE_KEYS: &[Key] = &[
    key("seed", None, "random seed"),
    key("run_dir", None, "run directory"),
    key("checkpoint", None, "checkpoint file"),
    key("cond", Some("0"), "condition id"),
    key("n", Some("1000"), "number of poses"),
    key("out", None, "output pose file"),
    key("steps", None, "noise levels visited (default: all trained levels)"),
    key("substeps", Some("1"), "sub-updates per level"),
    key("inner_steps", Some("1"), "Langevin updates per level"),
    key("step_scale", None, "step scale (default: the value stored in the checkpoint)"),
    key("polish", Some("true"), "final noise-free step"),
];

#[derive(Args)]
pub struct SampleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    cond: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    steps: Option<String>,
}

pub fn sample(a: &SampleArgs) -> anyhow::Result<()> {
    let mut flags = vec![
        ("checkpoint", a.checkpoint.clone()),
        ("cond", a.cond.clone()),
        ("n", a.n.clone()),
        ("out", a.out.clone()),
        ("steps", a.steps.clone()),
    ];
    flags.extend(a.sampler.flags());
    let (s, _) = prepare(SAMPLE_KEYS, &a.common, flags)?;
    let seed: u64 = s.get("seed")?;
    let ckpt = load_checkpoint(&s)?;
    let cfg = &ckpt.params.config;
    let cond: usize = s.get("cond")?;
    if cond >= cfg.num_conditions {
        return Err(usage(format!("condition {cond} out of range (model has {})", cfg.num_conditions)));
    }
    let sched = NoiseSchedule::for_net(cfg, step_scale(&s, &ckpt)?)?;
    let scfg = sampler(&s, s.opt("steps")?, cfg.num_levels)?;
    let n: usize = s.get("n")?;
    let out = sample_per_condition(&ckpt.params, &sched, &scfg, &[cond], n, seed)?.remove(0).1;
    let path: PathBuf = s.get("out")?;
    let mut w = create(&path)?;
    write_poses(
        &mut w,
        &PoseHeader {
            mode: cfg.mode,
            cond,
            seed,
            count: out.len(),
        },
        &out,
    )?;
    w.flush()?;
    println!("wrote {} poses to {}", out.len(), path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval / ablate-steps
// ---------------------------------------------------------------------------

static EVAL_KEYS: &[Key] = &[
    key("seed", None, "random seed"),
    key("run_dir", None, "run directory"),
    key("checkpoint", None, "checkpoint file"),
    key("data", None, "dataset the checkpoint was trained on"),
    key("n", Some("1000"), "samples per shape"),
    key("out", None, "optional JSON report file"),
    key("steps", None, "noise levels visited (default: all trained levels)"),
    key("substeps", Some("1"), "sub-updates per level"),
    key("inner_steps", Some("1"), "Langevin updates per level"),
    key("step_scale", None, "step scale (default: the value stored in the checkpoint)"),
    key("polish", Some("true"), "final noise-free step"),
];

static ABLATE_KEYS: &[Key] = &[
    key("seed", None, "random seed"),
    key("run_dir", None, "run directory"),
    key("checkpoint", None, "checkpoint file"),
    key("data", None, "dataset the checkpoint was trained on"),
    key("n", Some("1000"), "samples per shape"),
    key("out", None, "optional CSV file (default: stdout)"),
    key("steps", Some("100,50,10,5"), "comma-separated step counts"),
    key("substeps", Some("1"), "sub-updates per level"),
    key("inner_steps", Some("1"), "Langevin updates per level"),
    key("step_scale", None, "step scale (default: the value stored in the checkpoint)"),
    key("polish", Some("true"), "final noise-free step"),
];

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    steps: Option<String>,
}

#[derive(Args)]
pub struct AblateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Comma-separated step counts, e.g. 100,50,10,5.
    #[arg(long)]
    steps: Option<String>,
}

/// Samples every condition of `ds` with `n` poses per shape split across views.
fn evaluate_checkpoint(
    ds: &Dataset,
    ckpt: &Checkpoint,
    sched: &NoiseSchedule,
    scfg: &SamplerConfig,
    n: usize,
    seed: u64,
) -> anyhow::Result<posediff_core::eval::EvalReport> {
    let cfg = &ckpt.params.config;
    if cfg.num_conditions != ds.header.num_conditions() || cfg.mode != ds.header.mode {
        bail!("checkpoint and dataset disagree on mode or number of conditions");
    }
    let per_view = (n / ds.header.views()).max(1);
    let conds: Vec<usize> = (0..ds.header.num_conditions()).collect();
    let samples = sample_per_condition(&ckpt.params, sched, scfg, &conds, per_view, seed)?;
    Ok(evaluate(ds, &samples)?)
}

fn load_data(s: &Settings) -> anyhow::Result<Dataset> {
    let path: PathBuf = s.get("data")?;
    Dataset::load(&path).with_context(|| format!("loading {}", path.display()))
}

pub fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    let mut flags = vec![
        ("checkpoint", a.checkpoint.clone()),
        ("data", a.data.clone()),
        ("n", a.n.clone()),
        ("out", a.out.clone()),
        ("steps", a.steps.clone()),
    ];
    flags.extend(a.sampler.flags());
    let (s, _) = prepare(EVAL_KEYS, &a.common, flags)?;
    let seed: u64 = s.get("seed")?;
    let ds = load_data(&s)?;
    let ckpt = load_checkpoint(&s)?;
    let cfg = &ckpt.params.config;
    let sched = NoiseSchedule::for_net(cfg, step_scale(&s, &ckpt)?)?;
    let scfg = sampler(&s, s.opt("steps")?, cfg.num_levels)?;
    let report = evaluate_checkpoint(&ds, &ckpt, &sched, &scfg, s.get("n")?, seed)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    print!("{text}");
    if let Some(out) = s.opt::<PathBuf>("out")? {
        std::fs::write(out, text)?;
    }
    Ok(())
}

pub fn ablate_steps(a: &AblateArgs) -> anyhow::Result<()> {
    let mut flags = vec![
        ("checkpoint", a.checkpoint.clone()),
        ("data", a.data.clone()),
        ("n", a.n.clone()),
        ("out", a.out.clone()),
        ("steps", a.steps.clone()),
    ];
    flags.extend(a.sampler.flags());
    let (s, _) = prepare(ABLATE_KEYS, &a.common, flags)?;
    let seed: u64 = s.get("seed")?;
    let ds = load_data(&s)?;
    let ckpt = load_checkpoint(&s)?;
    let cfg = &ckpt.params.config;
    let sched = NoiseSchedule::for_net(cfg, step_scale(&s, &ckpt)?)?;
    let kind = ckpt.meta["train"]["score_kind"].as_str().unwrap_or("surrogate").to_string();
    let steps: Vec<usize> = s.list("steps")?;
    if let Some(bad) = steps.iter().find(|&&k| k < 2 || k > cfg.num_levels) {
        return Err(usage(format!("step count {bad} outside [2, {}]", cfg.num_levels)));
    }
    let mut csv = String::from("score_kind,steps,shape,spread_deg,trans_err\n");
    for &k in &steps {
        let scfg = sampler(&s, Some(k), cfg.num_levels)?;
        let report = evaluate_checkpoint(&ds, &ckpt, &sched, &scfg, s.get("n")?, seed)?;
        for r in &report.shapes {
            csv += &format!("{kind},{k},{},{:.6},{:.6}\n", r.shape, r.spread_deg, r.trans_err);
        }
    }
    match s.opt::<PathBuf>("out")? {
        Some(out) => {
            let mut w = create(&out)?;
            w.write_all(csv.as_bytes())?;
            w.flush()?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// export-viz
// ---------------------------------------------------------------------------

static EXPORT_KEYS: &[Key] = &[
    key("seed", None, "unused; accepted for uniformity"),
    key("run_dir", None, "run directory"),
    key("samples", None, "pose file written by `sample`"),
    key("out", None, "output CSV"),
];

#[derive(Args)]
pub struct ExportArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

pub fn export_viz(a: &ExportArgs) -> anyhow::Result<()> {
    let (s, _) = prepare(
        EXPORT_KEYS,
        &a.common,
        vec![("samples", a.samples.clone()), ("out", a.out.clone())],
    )?;
    let input: PathBuf = s.get("samples")?;
    let (_, poses) = read_poses(std::io::BufReader::new(
        File::open(&input).with_context(|| format!("opening {}", input.display()))?,
    ))?;
    let rots: Vec<Rotation> = poses.iter().map(|p| p.rot).collect();
    let out: PathBuf = s.get("out")?;
    let mut w = create(&out)?;
    let n = mollweide_export(&rots, &mut w)?;
    w.flush()?;
    println!("wrote {n} rows to {}", out.display());
    Ok(())
}
