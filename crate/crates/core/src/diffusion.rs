//! Noise schedule, denoising-score-matching training and the geodesic
//! random-walk sampler.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{gaussian_tangent, IsotropicScale};
use crate::error::{invalid, Error, Result};
use crate::lie::{group_exp, retract, ParamMode, RigidTransform, Tangent};
use crate::score_net::{NetConfig, NetInput, OptimizerState, ScoreNetParams, TrainSample};
use crate::scores::{score_closed, score_simplified, score_surrogate, ScoreKind, ScoreVector};

/// Default Langevin step scale `ε₀`.
pub const DEFAULT_STEP_SCALE: f64 = 0.5;

/// Noise levels `σ_0 < … < σ_{L−1}` with their Langevin step sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub sigmas: Vec<f64>,
    pub eps_steps: Vec<f64>,
}

/// Linear noise levels with `ε_i = ε₀ σ_i² / σ_max²`.
pub fn make_schedule(sigma_min: f64, sigma_max: f64, levels: usize, step_scale: f64) -> Result<NoiseSchedule> {
    if !(sigma_min > 0.0 && sigma_min < sigma_max && sigma_max.is_finite()) {
        return Err(invalid(format!(
            "noise bounds must satisfy 0 < sigma_min < sigma_max, got [{sigma_min}, {sigma_max}]"
        )));
    }
    if levels < 2 {
        return Err(invalid("a schedule needs at least two levels"));
    }
    if !(step_scale > 0.0 && step_scale.is_finite()) {
        return Err(invalid("step scale must be positive"));
    }
    let sigmas: Vec<f64> = (0..levels)
        .map(|i| {
            if i == levels - 1 {
                sigma_max
            } else {
                sigma_min + (sigma_max - sigma_min) * i as f64 / (levels - 1) as f64
            }
        })
        .collect();
    let eps_steps = sigmas
        .iter()
        .map(|s| step_scale * s * s / (sigma_max * sigma_max))
        .collect();
    Ok(NoiseSchedule { sigmas, eps_steps })
}

impl NoiseSchedule {
    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn sigma_max(&self) -> f64 {
        *self.sigmas.last().expect("non-empty schedule")
    }

    /// Schedule matching a network's trained levels.
    pub fn for_net(cfg: &NetConfig, step_scale: f64) -> Result<Self> {
        make_schedule(cfg.sigma_min, cfg.sigma_max, cfg.num_levels, step_scale)
    }
}

/// Evenly spread subset of `steps` trained level indices, always
/// including both ends, in ascending order.
pub fn level_subset(levels: usize, steps: usize) -> Result<Vec<usize>> {
    if steps < 2 || steps > levels {
        return Err(invalid(format!("cannot pick {steps} of {levels} levels")));
    }
    let mut out: Vec<usize> = (0..steps)
        .map(|j| ((j * (levels - 1)) as f64 / (steps - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    Ok(out)
}

/// `½‖pred − target‖²`.
pub fn dsm_loss(pred: &ScoreVector, target: &ScoreVector) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(invalid("score dimensions differ"));
    }
    Ok(0.5
        * pred
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>())
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates.
pub type AdamState = OptimizerState;

impl OptimizerState {
    pub fn new(n: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(invalid("parameter, gradient and optimizer sizes differ"));
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - ADAM_BETA1.powf(t);
    let c2 = 1.0 - ADAM_BETA2.powf(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// One clean training pose with its condition id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub cond: usize,
    pub pose: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: ParamMode,
    pub levels: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Clean poses per optimizer step.
    pub batch_size: usize,
    /// Noisy copies drawn for every clean pose.
    pub noisy_per_datum: usize,
    pub total_steps: usize,
    pub lr_init: f64,
    pub lr_final: f64,
    pub seed: u64,
    /// Regression target on SE(3); ignored on the other groups.
    pub score_kind: ScoreKind,
    /// Per-sample loss weight `σ_i^p`.
    pub loss_power: f64,
    pub log_every: usize,
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn new(mode: ParamMode, seed: u64) -> Self {
        Self {
            mode,
            levels: 100,
            sigma_min: 1e-4,
            sigma_max: 1.0,
            batch_size: 32,
            noisy_per_datum: 32,
            total_steps: 10_000,
            lr_init: 1e-3,
            lr_final: 1e-5,
            seed,
            score_kind: ScoreKind::Surrogate,
            loss_power: 2.0,
            log_every: 100,
            checkpoint_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        make_schedule(self.sigma_min, self.sigma_max, self.levels, 1.0)?;
        if self.batch_size == 0 || self.noisy_per_datum == 0 {
            return Err(invalid("batch size and fan-out must be positive"));
        }
        if !(self.lr_init > 0.0 && self.lr_final > 0.0) {
            return Err(invalid("learning rates must be positive"));
        }
        if !self.loss_power.is_finite() {
            return Err(invalid("loss power must be finite"));
        }
        Ok(())
    }

    /// Constant for the first half, then exponential decay to `lr_final`.
    pub fn learning_rate(&self, step: usize) -> f64 {
        let half = self.total_steps / 2;
        if step < half || self.total_steps <= 1 {
            return self.lr_init;
        }
        let span = (self.total_steps - 1 - half).max(1) as f64;
        let t = ((step - half) as f64 / span).min(1.0);
        self.lr_init * (self.lr_final / self.lr_init).powf(t)
    }
}

/// Progress report passed to [`TrainObserver::on_log`].
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

/// Hooks invoked by [`train`].
pub trait TrainObserver {
    fn on_log(&mut self, _info: &StepInfo) -> Result<()> {
        Ok(())
    }

    fn on_checkpoint(&mut self, _step: usize, _params: &ScoreNetParams, _adam: &AdamState) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Builds one minibatch of noisy samples and their regression targets.
pub fn make_minibatch<R: Rng + ?Sized>(
    data: &[TrainRecord],
    cfg: &TrainConfig,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<Vec<TrainSample>> {
    let mut out = Vec::with_capacity(cfg.batch_size * cfg.noisy_per_datum);
    for _ in 0..cfg.batch_size {
        let rec = &data[rng.random_range(0..data.len())];
        for _ in 0..cfg.noisy_per_datum {
            let level = rng.random_range(0..schedule.len());
            let sigma = IsotropicScale::new(schedule.sigmas[level])?;
            let (pose, target) = loop {
                let z = gaussian_tangent(sigma.sigma(), cfg.mode, rng);
                let pose = retract(&rec.pose, &z, cfg.mode)?;
                let target = match (cfg.mode, cfg.score_kind) {
                    (ParamMode::Se3, ScoreKind::Surrogate) => Ok(score_surrogate(&z, sigma)),
                    // the exact score lives on the principal branch of the logarithm
                    (ParamMode::Se3, ScoreKind::True) => score_closed(&pose, &rec.pose, sigma, cfg.mode),
                    _ => score_simplified(&z, sigma, cfg.mode),
                };
                match target {
                    Ok(t) => break (pose, t),
                    Err(Error::Singularity { .. }) => continue,
                    Err(e) => return Err(e),
                }
            };
            out.push(TrainSample {
                pose,
                level,
                cond: rec.cond,
                target,
                weight: sigma.sigma().powf(cfg.loss_power),
            });
        }
    }
    Ok(out)
}

/// Runs `cfg.total_steps` Adam steps of denoising score matching,
/// starting from `params` and `adam`.
pub fn train_from(
    params: &mut ScoreNetParams,
    adam: &mut AdamState,
    data: &[TrainRecord],
    cfg: &TrainConfig,
    first_step: usize,
    observer: &mut dyn TrainObserver,
) -> Result<()> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(invalid("training set is empty"));
    }
    if params.config.mode != cfg.mode || params.config.num_levels != cfg.levels {
        return Err(invalid("network and training configuration disagree on mode or levels"));
    }
    if let Some(r) = data.iter().find(|r| r.cond >= params.config.num_conditions) {
        return Err(invalid(format!("condition id {} exceeds the embedding table", r.cond)));
    }
    let schedule = make_schedule(cfg.sigma_min, cfg.sigma_max, cfg.levels, 1.0)?;
    let mut rng = crate::rng::split(cfg.seed, 1);
    // Skip ahead deterministically when resuming.
    for _ in 0..first_step {
        make_minibatch(data, cfg, &schedule, &mut rng)?;
    }
    for step in first_step..cfg.total_steps {
        let batch = make_minibatch(data, cfg, &schedule, &mut rng)?;
        let (loss, grad) = params.loss_and_grad(&batch)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { step, loss });
        }
        let lr = cfg.learning_rate(step);
        adam_step(&mut params.values, &grad, adam, lr)?;
        if cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.total_steps) {
            observer.on_log(&StepInfo { step, loss, lr })?;
        }
        if cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 {
            observer.on_checkpoint(step + 1, params, adam)?;
        }
    }
    Ok(())
}

/// Initializes a network from `seed` and trains it.
pub fn train(
    net: NetConfig,
    data: &[TrainRecord],
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(ScoreNetParams, AdamState)> {
    let mut params = ScoreNetParams::init(net, &mut crate::rng::split(cfg.seed, 0))?;
    let mut adam = AdamState::new(params.num_params());
    train_from(&mut params, &mut adam, data, cfg, 0, observer)?;
    Ok((params, adam))
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Anything that returns scores for a batch of poses at one noise level.
pub trait ScoreModel {
    fn mode(&self) -> ParamMode;

    fn scores(&self, poses: &[RigidTransform], level: usize, cond: usize) -> Result<Vec<ScoreVector>>;
}

impl ScoreModel for ScoreNetParams {
    fn mode(&self) -> ParamMode {
        self.config.mode
    }

    fn scores(&self, poses: &[RigidTransform], level: usize, cond: usize) -> Result<Vec<ScoreVector>> {
        let levels = vec![level; poses.len()];
        let conds = vec![cond; poses.len()];
        self.forward(&NetInput {
            poses,
            levels: &levels,
            conds: &conds,
        })
    }
}

/// Exact score of a concentrated Gaussian target `N(center, σ*²)` after
/// perturbation at level `i`, approximated as `N(center, σ*² + σ_i²)`.
#[derive(Debug, Clone)]
pub struct AnalyticScore {
    pub mode: ParamMode,
    pub center: RigidTransform,
    pub sigma_star: f64,
    pub sigmas: Vec<f64>,
}

impl ScoreModel for AnalyticScore {
    fn mode(&self) -> ParamMode {
        self.mode
    }

    fn scores(&self, poses: &[RigidTransform], level: usize, _cond: usize) -> Result<Vec<ScoreVector>> {
        let s = self
            .sigmas
            .get(level)
            .ok_or_else(|| invalid(format!("noise index {level} out of range")))?;
        let total = IsotropicScale::new((self.sigma_star * self.sigma_star + s * s).sqrt())?;
        poses
            .iter()
            .map(|y| score_closed(y, &self.center, total, self.mode))
            .collect()
    }
}

/// Always-zero score, useful for checking the sampler plumbing.
#[derive(Debug, Clone, Copy)]
pub struct ZeroScore(pub ParamMode);

impl ScoreModel for ZeroScore {
    fn mode(&self) -> ParamMode {
        self.0
    }

    fn scores(&self, poses: &[RigidTransform], _level: usize, _cond: usize) -> Result<Vec<ScoreVector>> {
        Ok(vec![Tangent::zeros(self.0); poses.len()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Sub-updates per level, each with step `ε_i / substeps`.
    pub substeps: usize,
    /// Langevin updates per level.
    pub inner_steps: usize,
    /// Finish with one noise-free denoising step `X ← X·Exp(σ_k² s)` at the
    /// second-lowest visited level `k` (the lowest if only one is visited).
    pub polish: bool,
    /// Disable the injected noise (deterministic descent).
    pub noiseless: bool,
    /// Visited level indices; `None` visits every level.
    pub levels: Option<Vec<usize>>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            substeps: 1,
            inner_steps: 1,
            polish: true,
            noiseless: false,
            levels: None,
        }
    }
}

/// Draws `n` poses by the annealed geodesic random walk
/// `X ← X·Exp(ε_i s + √(2ε_i) z)`, visiting levels from `σ_max` down.
pub fn sample_batch<R: Rng + ?Sized>(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    cfg: &SamplerConfig,
    cond: usize,
    n: usize,
    init: Option<&[RigidTransform]>,
    rng: &mut R,
) -> Result<Vec<RigidTransform>> {
    let mode = model.mode();
    if cfg.substeps == 0 || cfg.inner_steps == 0 {
        return Err(invalid("substeps and inner steps must be at least 1"));
    }
    let mut levels = match &cfg.levels {
        Some(l) => l.clone(),
        None => (0..schedule.len()).collect(),
    };
    if levels.is_empty() || levels.iter().any(|&l| l >= schedule.len()) {
        return Err(invalid("sampler levels out of range"));
    }
    levels.sort_unstable();
    levels.dedup();

    let mut xs: Vec<RigidTransform> = match init {
        Some(x) => {
            if x.len() != n {
                return Err(invalid("initial pose count does not match n"));
            }
            x.to_vec()
        }
        None => (0..n)
            .map(|_| group_exp(&gaussian_tangent(schedule.sigma_max(), mode, rng), mode))
            .collect::<Result<_>>()?,
    };

    for &level in levels.iter().rev() {
        let eps = schedule.eps_steps[level] / cfg.substeps as f64;
        let noise = (2.0 * eps).sqrt();
        for _ in 0..cfg.inner_steps * cfg.substeps {
            let scores = model.scores(&xs, level, cond)?;
            for (x, s) in xs.iter_mut().zip(&scores) {
                let mut step = s.scale(eps);
                if !cfg.noiseless {
                    step = step.axpy(noise, &gaussian_tangent(1.0, mode, rng))?;
                }
                *x = retract(x, &step, mode).map_err(|_| Error::NonFiniteState { level })?;
            }
        }
    }
    if cfg.polish {
        // σ_min is a numerical floor; its denoising step would be a no-op
        let level = levels[levels.len().min(2) - 1];
        let eps = schedule.sigmas[level].powi(2);
        let scores = model.scores(&xs, level, cond)?;
        for (x, s) in xs.iter_mut().zip(&scores) {
            *x = retract(x, &s.scale(eps), mode).map_err(|_| Error::NonFiniteState { level })?;
        }
    }
    Ok(xs)
}

/// Single-chain convenience wrapper around [`sample_batch`].
pub fn sample<R: Rng + ?Sized>(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    cfg: &SamplerConfig,
    cond: usize,
    init: Option<RigidTransform>,
    rng: &mut R,
) -> Result<RigidTransform> {
    let init = init.map(|x| vec![x]);
    Ok(sample_batch(model, schedule, cfg, cond, 1, init.as_deref(), rng)?.remove(0))
}

/// Draws `n` poses for each condition, each condition on its own RNG
/// stream so results do not depend on the order of `conds`.
pub fn sample_per_condition(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    cfg: &SamplerConfig,
    conds: &[usize],
    n: usize,
    seed: u64,
) -> Result<Vec<(usize, Vec<RigidTransform>)>> {
    conds
        .iter()
        .map(|&c| {
            let mut rng = crate::rng::split(seed, c as u64);
            Ok((c, sample_batch(model, schedule, cfg, c, n, None, &mut rng)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use nalgebra::Vector3;

    #[test]
    fn schedule_examples() {
        let s = make_schedule(1e-4, 1.0, 100, 0.1).unwrap();
        assert_eq!(s.sigmas[0], 1e-4);
        assert_eq!(s.sigmas[99], 1.0);
        let d0 = s.sigmas[1] - s.sigmas[0];
        assert!(s.sigmas.windows(2).all(|w| ((w[1] - w[0]) - d0).abs() < 1e-12));
        for i in [0, 13, 50] {
            for j in [7, 99] {
                let r = s.eps_steps[i] / s.eps_steps[j];
                let e = (s.sigmas[i] / s.sigmas[j]).powi(2);
                assert!((r - e).abs() < 1e-12 * e.max(1.0));
            }
        }
        let two = make_schedule(0.01, 2.0, 2, 1.0).unwrap();
        assert_eq!(two.sigmas, vec![0.01, 2.0]);
        assert!(make_schedule(1.0, 0.5, 10, 1.0).is_err());
        assert!(make_schedule(0.1, 0.5, 1, 1.0).is_err());
    }

    #[test]
    fn subsets_keep_the_ends() {
        assert_eq!(level_subset(100, 5).unwrap(), vec![0, 25, 50, 74, 99]);
        assert_eq!(level_subset(100, 100).unwrap(), (0..100).collect::<Vec<_>>());
        assert!(level_subset(10, 11).is_err());
    }

    #[test]
    fn loss_examples() {
        let z = Tangent::zeros(ParamMode::Se3);
        let one = Tangent::from_slice(ParamMode::Se3, &[1.0; 6]).unwrap();
        assert_eq!(dsm_loss(&one, &one).unwrap(), 0.0);
        assert_eq!(dsm_loss(&z, &one).unwrap(), 3.0);
        assert_eq!(dsm_loss(&one, &z).unwrap(), dsm_loss(&z, &one).unwrap());
    }

    #[test]
    fn adam_first_step_has_unit_magnitude() {
        let mut p = vec![1.0, 2.0, 3.0];
        let mut st = AdamState::new(3);
        adam_step(&mut p, &[0.5, 0.0, -2.0], &mut st, 0.01).unwrap();
        assert!((p[0] - 0.99).abs() < 1e-6);
        assert_eq!(p[1], 2.0);
        assert!((p[2] - 3.01).abs() < 1e-6);
    }

    #[test]
    fn zero_score_without_noise_is_a_fixed_point() {
        let x = RigidTransform::new(
            crate::lie::so3_exp(&Vector3::new(0.3, 0.2, 0.1)).unwrap(),
            Vector3::new(1.0, -1.0, 0.5),
        )
        .unwrap();
        let sched = make_schedule(1e-3, 1.0, 10, 1.0).unwrap();
        let cfg = SamplerConfig {
            noiseless: true,
            ..Default::default()
        };
        let y = sample(&ZeroScore(ParamMode::Se3), &sched, &cfg, 0, Some(x), &mut seeded(0)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn learning_rate_schedule() {
        let mut c = TrainConfig::new(ParamMode::So3, 0);
        c.total_steps = 101;
        c.lr_init = 1e-2;
        c.lr_final = 1e-4;
        assert_eq!(c.learning_rate(0), 1e-2);
        assert_eq!(c.learning_rate(49), 1e-2);
        assert!((c.learning_rate(100) - 1e-4).abs() < 1e-15);
        assert!(c.learning_rate(75) < 1e-2 && c.learning_rate(75) > 1e-4);
    }
}
