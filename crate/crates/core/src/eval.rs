//! Evaluation metrics and visualization export.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lie::{between, ParamMode, RigidTransform, Rotation};
use crate::symsol::{equivalent_distance, symmetry_group, Dataset, Shape, SymmetrySpec};

/// Pitch magnitude beyond which a ZYX decomposition is flagged as gimbal-locked.
pub const GIMBAL_MARGIN: f64 = 1e-3;

/// Mean symmetry-aware angular error in degrees.
pub fn rotation_spread(predictions: &[Rotation], gt: &Rotation, spec: &SymmetrySpec) -> Result<f64> {
    if predictions.is_empty() {
        return Err(invalid("no predictions to evaluate"));
    }
    Ok(predictions
        .iter()
        .map(|p| equivalent_distance(spec, gt, p))
        .sum::<f64>()
        / predictions.len() as f64)
}

/// Mean Euclidean distance between predicted and true translations.
pub fn translation_error(predictions: &[Vector3<f64>], gt: &Vector3<f64>) -> Result<f64> {
    if predictions.is_empty() {
        return Err(invalid("no predictions to evaluate"));
    }
    Ok(predictions.iter().map(|p| (p - gt).norm()).sum::<f64>() / predictions.len() as f64)
}

/// Mean geodesic distance of `poses` from `center`.
pub fn mean_distance(poses: &[RigidTransform], center: &RigidTransform, mode: ParamMode) -> Result<f64> {
    if poses.is_empty() {
        return Err(invalid("no poses to evaluate"));
    }
    let mut total = 0.0;
    for y in poses {
        total += between(center, y, mode)?.norm();
    }
    Ok(total / poses.len() as f64)
}

/// Index of the discrete mode `gt·S_k` nearest to `pred`.
pub fn nearest_mode(spec: &SymmetrySpec, gt: &Rotation, pred: &Rotation) -> Result<usize> {
    if !spec.is_discrete() {
        return Err(Error::Unsupported(format!(
            "mode coverage needs a discrete symmetry group, {} has continuous symmetries",
            spec.shape
        )));
    }
    let mut best = (0, f64::INFINITY);
    for (k, s) in spec.discrete.iter().enumerate() {
        let d = pred.angle_to(&(gt * s));
        if d < best.1 {
            best = (k, d);
        }
    }
    Ok(best.0)
}

/// Fraction of predictions assigned to each discrete symmetry mode.
pub fn mode_coverage(predictions: &[Rotation], gt: &Rotation, spec: &SymmetrySpec) -> Result<Vec<f64>> {
    if predictions.is_empty() {
        return Err(invalid("no predictions to evaluate"));
    }
    let mut counts = vec![0usize; spec.discrete.len()];
    for p in predictions {
        counts[nearest_mode(spec, gt, p)?] += 1;
    }
    let n = predictions.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// ZYX (yaw, pitch, roll) with `R = Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn euler_zyx(r: &Rotation) -> (f64, f64, f64) {
    let m = r.matrix();
    let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
    if std::f64::consts::FRAC_PI_2 - pitch.abs() < 1e-9 {
        // yaw and roll are coupled; put everything into yaw
        let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
        return (yaw, pitch, 0.0);
    }
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    (yaw, pitch, roll)
}

pub fn from_euler_zyx(yaw: f64, pitch: f64, roll: f64) -> Rotation {
    let rz = Rotation::from_axis_angle(&Vector3::z(), yaw).expect("unit axis");
    let ry = Rotation::from_axis_angle(&Vector3::y(), pitch).expect("unit axis");
    let rx = Rotation::from_axis_angle(&Vector3::x(), roll).expect("unit axis");
    rz * ry * rx
}

/// Writes `lon,lat,roll,gimbal_flag` rows (radians) for each rotation.
pub fn mollweide_export<W: Write>(rotations: &[Rotation], out: &mut W) -> Result<usize> {
    writeln!(out, "lon,lat,roll,gimbal_flag")?;
    for r in rotations {
        let (yaw, pitch, roll) = euler_zyx(r);
        let flag = u8::from(std::f64::consts::FRAC_PI_2 - pitch.abs() < GIMBAL_MARGIN);
        writeln!(out, "{yaw:.17e},{pitch:.17e},{roll:.17e},{flag}")?;
    }
    Ok(rotations.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub shape: Shape,
    pub count: usize,
    pub spread_deg: f64,
    pub trans_err: f64,
    /// Mean per-view mode fractions; absent for continuous symmetries.
    pub coverage: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub shapes: Vec<ShapeReport>,
}

impl EvalReport {
    pub fn shape(&self, shape: Shape) -> Option<&ShapeReport> {
        self.shapes.iter().find(|s| s.shape == shape)
    }
}

/// Scores sampled poses per condition against the dataset's references.
pub fn evaluate(dataset: &Dataset, samples: &[(usize, Vec<RigidTransform>)]) -> Result<EvalReport> {
    let refs = dataset.references();
    struct Acc {
        count: usize,
        spread: f64,
        trans: f64,
        coverage: Option<Vec<f64>>,
        views: usize,
    }
    let mut acc: BTreeMap<Shape, Acc> = BTreeMap::new();
    for (cond, poses) in samples {
        if poses.is_empty() {
            continue;
        }
        let r = refs
            .get(*cond)
            .copied()
            .flatten()
            .ok_or_else(|| invalid(format!("condition {cond} has no reference pose")))?;
        let spec = symmetry_group(r.shape);
        let rots: Vec<Rotation> = poses.iter().map(|p| p.rot).collect();
        let trans: Vec<Vector3<f64>> = poses.iter().map(|p| p.trans).collect();
        let n = poses.len() as f64;
        let a = acc.entry(r.shape).or_insert_with(|| Acc {
            count: 0,
            spread: 0.0,
            trans: 0.0,
            coverage: spec.is_discrete().then(|| vec![0.0; spec.discrete.len()]),
            views: 0,
        });
        a.count += poses.len();
        a.spread += rotation_spread(&rots, &r.pose.rot, &spec)? * n;
        a.trans += translation_error(&trans, &r.pose.trans)? * n;
        if let Some(c) = a.coverage.as_mut() {
            for (ci, f) in c.iter_mut().zip(mode_coverage(&rots, &r.pose.rot, &spec)?) {
                *ci += f;
            }
        }
        a.views += 1;
    }
    let shapes = acc
        .into_iter()
        .map(|(shape, a)| ShapeReport {
            shape,
            count: a.count,
            spread_deg: a.spread / a.count as f64,
            trans_err: a.trans / a.count as f64,
            coverage: a
                .coverage
                .map(|c| c.into_iter().map(|f| f / a.views as f64).collect()),
        })
        .collect();
    Ok(EvalReport { shapes })
}
