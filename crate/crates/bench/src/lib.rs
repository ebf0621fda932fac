//! Shared fixtures for the benchmarks.

use posediff_core::diffusion::{make_schedule, NoiseSchedule, TrainConfig, TrainRecord};
use posediff_core::distributions::gaussian_tangent;
use posediff_core::lie::group_exp;
use posediff_core::rng::seeded;
use posediff_core::score_net::{NetConfig, ScoreNetParams};
use posediff_core::{ParamMode, RigidTransform, Tangent};

pub fn tangents(mode: ParamMode, n: usize, sigma: f64) -> Vec<Tangent> {
    let mut rng = seeded(11);
    (0..n).map(|_| gaussian_tangent(sigma, mode, &mut rng)).collect()
}

pub fn poses(mode: ParamMode, n: usize) -> Vec<RigidTransform> {
    tangents(mode, n, 0.8)
        .iter()
        .map(|t| group_exp(t, mode).expect("small tangent"))
        .collect()
}

pub fn net(mode: ParamMode, width: usize, levels: usize) -> ScoreNetParams {
    let mut cfg = NetConfig::new(mode, 2, levels);
    cfg.width = width;
    ScoreNetParams::init(cfg, &mut seeded(3)).expect("valid config")
}

pub fn schedule(levels: usize) -> NoiseSchedule {
    make_schedule(1e-4, 1.0, levels, 0.5).expect("valid schedule")
}

pub fn records(mode: ParamMode, n: usize) -> Vec<TrainRecord> {
    poses(mode, n)
        .into_iter()
        .enumerate()
        .map(|(i, pose)| TrainRecord { cond: i % 2, pose })
        .collect()
}

pub fn train_config(mode: ParamMode) -> TrainConfig {
    let mut cfg = TrainConfig::new(mode, 1);
    cfg.levels = 100;
    cfg
}
