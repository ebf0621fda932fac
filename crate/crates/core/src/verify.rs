//! Self-check suite over the group, kernel and score implementations.
//!
//! Every property produces exactly one [`CheckRow`]; the row order and
//! count ([`PROPERTY_COUNT`]) are fixed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Vector3, Vector6};
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::distributions::{
    gaussian_tangent, igso3_angle_pdf, igso3_density, Igso3Method, IsotropicScale,
};
use crate::lie::{
    group_exp, group_jacobian, group_log, se3_jacobian_inv, se3_q_matrix, so3_jacobian,
    JacobianKind, ParamMode, Se3InvKind, Tangent,
};
use crate::scores::{
    score_closed, score_numerical, score_simplified, score_surrogate, score_true_se3,
    DEFAULT_FD_STEP,
};
use crate::PoseRng;

pub const PROPERTY_COUNT: usize = 21;

/// Deliberate defects used to confirm the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Use the SO(3) right Jacobian wherever the left one is required.
    RightForLeftJacobian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// Passes when `value <= threshold`.
    Max,
    /// Passes when `value > threshold`.
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub property: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn row(&self, property: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.property == property)
    }
}

struct Suite {
    rng: PoseRng,
    fault: Option<Fault>,
    rows: Vec<CheckRow>,
}

impl Suite {
    fn push(&mut self, property: &'static str, value: f64, threshold: f64, bound: Bound) {
        let pass = value.is_finite()
            && match bound {
                Bound::Max => value <= threshold,
                Bound::Min => value > threshold,
            };
        self.rows.push(CheckRow {
            property,
            value,
            threshold,
            bound,
            pass,
        });
    }

    /// Random tangent with rotation angle below `max_angle`.
    fn tangent(&mut self, mode: ParamMode, max_angle: f64) -> Tangent {
        let dim = mode.tangent_dim();
        let mut c = [0.0; 6];
        for v in c.iter_mut().take(dim) {
            *v = self.rng.random_range(-2.0..2.0);
        }
        let mut t = Tangent::from_slice(mode, &c[..dim]).expect("dimension matches");
        let phi = t.phi();
        let n = phi.norm();
        if n > max_angle {
            let target = self.rng.random_range(0.0..max_angle);
            let scaled = phi * (target / n);
            let mut c2 = [0.0; 6];
            c2[..dim].copy_from_slice(t.as_slice());
            let off = dim - 3;
            c2[off..dim].copy_from_slice(scaled.as_slice());
            t = Tangent::from_slice(mode, &c2[..dim]).expect("dimension matches");
        }
        t
    }

    fn sigma(&mut self) -> IsotropicScale {
        IsotropicScale::new(self.rng.random_range(0.1..1.0)).expect("positive")
    }

    fn so3_left(&self, phi: &Vector3<f64>) -> Matrix3<f64> {
        let kind = match self.fault {
            Some(Fault::RightForLeftJacobian) => JacobianKind::Right,
            None => JacobianKind::Left,
        };
        so3_jacobian(phi, kind).expect("forward Jacobians are defined everywhere")
    }
}

const N_JACOBIAN: usize = 1000;
const N_SCORE: usize = 200;
const N_KS: usize = 100_000;
const MAX_ANGLE: f64 = PI - 0.1;

fn vec_of(t: &Tangent) -> DMatrix<f64> {
    DMatrix::from_column_slice(t.dim(), 1, t.as_slice())
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1.0);
    num / den
}

fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn eigenvector_checks(s: &mut Suite) {
    let mut worst = [0.0f64; 4];
    for _ in 0..N_JACOBIAN {
        let z = s.tangent(ParamMode::So3, MAX_ANGLE).phi();
        worst[0] = worst[0].max((s.so3_left(&z) * z - z).amax());
        let jr = so3_jacobian(&z, JacobianKind::Right).expect("defined");
        worst[1] = worst[1].max((jr * z - z).amax());

        let t = s.tangent(ParamMode::Se3, MAX_ANGLE);
        let v = vec_of(&t);
        for (k, kind) in [(2, JacobianKind::Left), (3, JacobianKind::Right)] {
            let j = group_jacobian(&t, ParamMode::Se3, kind).expect("defined");
            worst[k] = worst[k].max((&j * &v - &v).amax());
        }
    }
    s.push("so3_left_jacobian_fixes_z", worst[0], 1e-9, Bound::Max);
    s.push("so3_right_jacobian_fixes_z", worst[1], 1e-9, Bound::Max);
    s.push("se3_left_jacobian_fixes_z", worst[2], 1e-9, Bound::Max);
    s.push("se3_right_jacobian_fixes_z", worst[3], 1e-9, Bound::Max);
}

fn jacobian_relations(s: &mut Suite) {
    let mut transpose = 0.0f64;
    let mut inverse = 0.0f64;
    let mut gap = f64::INFINITY;
    let mut q_sym = 0.0f64;
    for _ in 0..N_JACOBIAN {
        let z = s.tangent(ParamMode::So3, MAX_ANGLE).phi();
        let jr = so3_jacobian(&z, JacobianKind::Right).expect("defined");
        transpose = transpose.max((s.so3_left(&z) - jr.transpose()).amax());

        let t = s.tangent(ParamMode::Se3, MAX_ANGLE);
        for mode in [ParamMode::So3, ParamMode::Se3] {
            let tt = if mode == ParamMode::So3 {
                Tangent::Rot(t.phi())
            } else {
                t
            };
            for (fwd, inv) in [
                (JacobianKind::Left, JacobianKind::LeftInv),
                (JacobianKind::Right, JacobianKind::RightInv),
            ] {
                let a = group_jacobian(&tt, mode, fwd).expect("defined");
                let b = group_jacobian(&tt, mode, inv).expect("below the singularity");
                let id = DMatrix::<f64>::identity(a.nrows(), a.ncols());
                inverse = inverse.max((a * b - id).amax());
            }
        }
        let rho = t.rho();
        let phi = t.phi();
        // generic: ρ and φ far from parallel
        if phi.norm() > 0.1 && rho.cross(&phi).norm() > 0.1 * rho.norm() * phi.norm() {
            let a = se3_jacobian_inv(&t, Se3InvKind::RightInvTranspose).expect("defined");
            let b = se3_jacobian_inv(&t, Se3InvKind::LeftInv).expect("defined");
            gap = gap.min((a - b).norm());
        }
        q_sym = q_sym.max((se3_q_matrix(&-rho, &-phi).transpose() - se3_q_matrix(&rho, &phi)).amax());
    }
    s.push("so3_left_equals_right_transpose", transpose, 1e-10, Bound::Max);
    s.push("jacobian_times_inverse_is_identity", inverse, 1e-9, Bound::Max);
    s.push("se3_inverse_transpose_gap", gap, 1e-6, Bound::Min);
    s.push("se3_q_transpose_symmetry", q_sym, 1e-10, Bound::Max);
}

fn roundtrips(s: &mut Suite) {
    for (mode, name) in [
        (ParamMode::So3, "so3_exp_log_roundtrip"),
        (ParamMode::R3So3, "r3so3_exp_log_roundtrip"),
        (ParamMode::Se3, "se3_exp_log_roundtrip"),
    ] {
        let mut worst = 0.0f64;
        for _ in 0..N_JACOBIAN {
            let t = s.tangent(mode, MAX_ANGLE);
            let back = group_exp(&t, mode).and_then(|x| group_log(&x, mode));
            let err = match back {
                Ok(b) => b
                    .as_slice()
                    .iter()
                    .zip(t.as_slice())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max),
                Err(_) => f64::INFINITY,
            };
            worst = worst.max(err);
        }
        s.push(name, worst, 1e-9, Bound::Max);
    }
}

fn score_checks(s: &mut Suite) {
    let mut simp = [0.0f64; 2];
    let mut true_se3 = 0.0f64;
    let mut numerical = [0.0f64; 3];
    let modes = [ParamMode::So3, ParamMode::R3So3, ParamMode::Se3];
    for _ in 0..N_SCORE {
        for (mi, mode) in modes.into_iter().enumerate() {
            let x = group_exp(&s.tangent(mode, MAX_ANGLE), mode).expect("valid");
            let sig = s.sigma();
            let z = s.tangent(mode, 2.5);
            let y = crate::lie::retract(&x, &z, mode).expect("valid");
            let closed = score_closed(&y, &x, sig, mode).expect("below the singularity");
            match mode {
                ParamMode::Se3 => {
                    let t = score_true_se3(&z, sig).expect("below the singularity");
                    true_se3 = true_se3.max(rel(closed.as_slice(), t.as_slice()));
                }
                _ => {
                    let t = score_simplified(&z, sig, mode).expect("rotation modes");
                    simp[mi] = simp[mi].max(rel(closed.as_slice(), t.as_slice()));
                }
            }
            let num = score_numerical(&y, &x, sig, mode, DEFAULT_FD_STEP).expect("valid step");
            let den: f64 = closed.norm().max(1e-8);
            let diff: f64 = closed
                .as_slice()
                .iter()
                .zip(num.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            numerical[mi] = numerical[mi].max(diff / den);
        }
    }
    s.push("so3_closed_equals_simplified", simp[0], 1e-10, Bound::Max);
    s.push("r3so3_closed_equals_simplified", simp[1], 1e-10, Bound::Max);
    s.push("se3_closed_equals_true", true_se3, 1e-10, Bound::Max);
    s.push("so3_closed_matches_numerical", numerical[0], 1e-4, Bound::Max);
    s.push("r3so3_closed_matches_numerical", numerical[1], 1e-4, Bound::Max);
    s.push("se3_closed_matches_numerical", numerical[2], 1e-4, Bound::Max);

    let mut gap = f64::INFINITY;
    for _ in 0..N_SCORE {
        let z = s.tangent(ParamMode::Se3, MAX_ANGLE);
        let (rho, phi) = (z.rho(), z.phi());
        if phi.norm() < 0.1 || rho.cross(&phi).norm() < 0.1 * rho.norm() * phi.norm() {
            continue;
        }
        let sig = s.sigma();
        let a = Vector6::from_column_slice(score_surrogate(&z, sig).as_slice());
        let b = Vector6::from_column_slice(score_true_se3(&z, sig).expect("defined").as_slice());
        gap = gap.min((a - b).norm());
    }
    s.push("se3_surrogate_true_gap", gap, 0.0, Bound::Min);
}

fn distribution_checks(s: &mut Suite) {
    let mut norm = 0.0f64;
    for eps in [0.05, 0.5] {
        let total = simpson(|p| igso3_angle_pdf(p, eps), 0.0, PI, 20_000);
        norm = norm.max((total - 1.0).abs());
    }
    s.push("igso3_normalized", norm, 1e-3, Bound::Max);

    let eps = 0.5;
    let pdf = |m: Igso3Method| {
        move |p: f64| igso3_density(p, eps, m).expect("interior angle") * (1.0 - p.cos()) / PI
    };
    let zs = simpson(pdf(Igso3Method::TruncatedSeries), 1e-9, PI - 1e-9, 20_000);
    let zc = simpson(pdf(Igso3Method::ClosedApprox), 1e-9, PI - 1e-9, 20_000);
    let mut worst = 0.0f64;
    for k in 0..=295 {
        let phi = 0.05 + 0.01 * k as f64;
        let a = igso3_density(phi, eps, Igso3Method::TruncatedSeries).expect("interior") / zs;
        let b = igso3_density(phi, eps, Igso3Method::ClosedApprox).expect("interior") / zc;
        worst = worst.max((a - b).abs() / a.abs());
    }
    s.push("igso3_series_matches_closed_approx", worst, 1e-2, Bound::Max);

    let sigma = 0.3;
    let normal = Normal::new(0.0, sigma).expect("valid normal");
    let draws: Vec<Tangent> = (0..N_KS)
        .map(|_| gaussian_tangent(sigma, ParamMode::Se3, &mut s.rng))
        .collect();
    let ks = (0..6)
        .map(|i| ks_statistic(draws.iter().map(|d| d.as_slice()[i]).collect(), |x| normal.cdf(x)))
        .fold(0.0, f64::max);
    s.push("concentrated_gaussian_axis_ks", ks, 0.02, Bound::Max);
}

/// Runs every property check with sample counts fixed by the seed.
pub fn verify_suite(seed: u64, fault: Option<Fault>) -> VerifyReport {
    let mut s = Suite {
        rng: crate::rng::seeded(seed),
        fault,
        rows: Vec::with_capacity(PROPERTY_COUNT),
    };
    eigenvector_checks(&mut s);
    jacobian_relations(&mut s);
    roundtrips(&mut s);
    score_checks(&mut s);
    distribution_checks(&mut s);
    debug_assert_eq!(s.rows.len(), PROPERTY_COUNT);
    VerifyReport { seed, rows: s.rows }
}
