//! Synthetic symmetric-solid pose datasets and symmetry-aware distances.
//!
//! A dataset is a list of `(condition, pose)` pairs. Each condition is one
//! view of one shape: a reference pose `G`, with training poses `G·S` for
//! random symmetry elements `S`, i.e. every pose that renders identically.

use std::io::{BufRead, Write};

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::uniform_rotation;
use crate::error::{invalid, Error, Result};
use crate::lie::{ParamMode, RigidTransform, Rotation};

pub const DATASET_SCHEMA: u32 = 1;

const CLOSURE_TOL: f64 = 1e-9;
const COARSE_SCAN: usize = 720;
const GOLDEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Tet,
    Cube,
    Icosa,
    Cone,
    Cyl,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Tet, Shape::Cube, Shape::Icosa, Shape::Cone, Shape::Cyl];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Result<Self> {
        Shape::ALL
            .get(id)
            .copied()
            .ok_or_else(|| invalid(format!("unknown shape id {id}")))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Shape::Tet => "tet",
            Shape::Cube => "cube",
            Shape::Icosa => "icosa",
            Shape::Cone => "cone",
            Shape::Cyl => "cyl",
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown shape '{s}'")))
    }
}

/// Parses a comma-separated shape list such as `tet,cube`.
pub fn parse_shapes(s: &str) -> Result<Vec<Shape>> {
    let shapes = s
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<Vec<Shape>>>()?;
    if shapes.is_empty() {
        return Err(invalid("empty shape list"));
    }
    Ok(shapes)
}

/// One circle of continuous symmetries: `flip · R_axis(θ)` for all `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleComponent {
    pub axis: Vector3<f64>,
    pub flip: Option<Rotation>,
}

impl CircleComponent {
    pub fn element(&self, theta: f64) -> Rotation {
        let r = Rotation::from_axis_angle(&self.axis, theta).expect("unit axis");
        match self.flip {
            Some(f) => f * r,
            None => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrySpec {
    pub shape: Shape,
    pub discrete: Vec<Rotation>,
    pub continuous: Vec<CircleComponent>,
}

impl SymmetrySpec {
    pub fn is_discrete(&self) -> bool {
        self.continuous.is_empty()
    }

    /// Uniformly random element of the symmetry set.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> Rotation {
        let d = self.discrete[rng.random_range(0..self.discrete.len())];
        if self.continuous.is_empty() {
            return d;
        }
        let c = &self.continuous[rng.random_range(0..self.continuous.len())];
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        d * c.element(theta)
    }
}

/// Index of `r` in `set`, matched to within `tol` radians.
pub fn find_rotation(set: &[Rotation], r: &Rotation, tol: f64) -> Option<usize> {
    set.iter().position(|s| s.angle_to(r) < tol)
}

/// Smallest set containing `generators` and closed under composition.
pub fn close_group(generators: &[Rotation]) -> Vec<Rotation> {
    let mut group = vec![Rotation::identity()];
    let mut frontier = vec![Rotation::identity()];
    while let Some(g) = frontier.pop() {
        for h in generators {
            let p = g * *h;
            if find_rotation(&group, &p, CLOSURE_TOL).is_none() {
                group.push(p);
                frontier.push(p);
            }
        }
    }
    group
}

fn axis_rotation(axis: [f64; 3], order: u32) -> Rotation {
    let a = Vector3::from(axis).normalize();
    Rotation::from_axis_angle(&a, std::f64::consts::TAU / order as f64).expect("unit axis")
}

pub fn symmetry_group(shape: Shape) -> SymmetrySpec {
    let z = Vector3::z();
    let (discrete, continuous) = match shape {
        Shape::Tet => (
            close_group(&[axis_rotation([1.0, 1.0, 1.0], 3), axis_rotation([1.0, -1.0, -1.0], 3)]),
            vec![],
        ),
        Shape::Cube => (
            close_group(&[axis_rotation([0.0, 0.0, 1.0], 4), axis_rotation([1.0, 0.0, 0.0], 4)]),
            vec![],
        ),
        Shape::Icosa => {
            let phi = (1.0 + 5f64.sqrt()) / 2.0;
            (
                close_group(&[axis_rotation([0.0, 1.0, phi], 5), axis_rotation([1.0, 1.0, 1.0], 3)]),
                vec![],
            )
        }
        Shape::Cone => (vec![Rotation::identity()], vec![CircleComponent { axis: z, flip: None }]),
        Shape::Cyl => (
            vec![Rotation::identity()],
            vec![
                CircleComponent { axis: z, flip: None },
                CircleComponent {
                    axis: z,
                    flip: Some(axis_rotation([1.0, 0.0, 0.0], 2)),
                },
            ],
        ),
    };
    SymmetrySpec {
        shape,
        discrete,
        continuous,
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b)).min(fc).min(fd)
}

/// Minimum geodesic angle (radians) between `pred` and `gt·S` over the
/// symmetry set of `spec`.
pub fn equivalent_angle(spec: &SymmetrySpec, gt: &Rotation, pred: &Rotation) -> f64 {
    if spec.continuous.is_empty() {
        return spec
            .discrete
            .iter()
            .map(|s| pred.angle_to(&(gt * s)))
            .fold(f64::INFINITY, f64::min);
    }
    let step = std::f64::consts::TAU / COARSE_SCAN as f64;
    let mut best = f64::INFINITY;
    for d in &spec.discrete {
        let base = gt * d;
        for c in &spec.continuous {
            let f = |t: f64| pred.angle_to(&(base * c.element(t)));
            let (k, _) = (0..COARSE_SCAN)
                .map(|k| (k, f(k as f64 * step)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            let t0 = k as f64 * step;
            best = best.min(golden_min(f, t0 - step, t0 + step));
        }
    }
    best
}

/// [`equivalent_angle`] in degrees.
pub fn equivalent_distance(spec: &SymmetrySpec, gt: &Rotation, pred: &Rotation) -> f64 {
    equivalent_angle(spec, gt, pred).to_degrees()
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    pub cond: usize,
    pub shape: Shape,
    pub view: usize,
    pub pose: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: u32,
    pub mode: ParamMode,
    pub seed: u64,
    pub shapes: Vec<Shape>,
    pub n_per_shape: usize,
    /// Distinct reference poses per shape; 0 gives every sample its own.
    pub views_per_shape: usize,
    pub translation_range: [f64; 2],
}

impl DatasetHeader {
    pub fn views(&self) -> usize {
        if self.views_per_shape == 0 {
            self.n_per_shape
        } else {
            self.views_per_shape
        }
    }

    pub fn num_conditions(&self) -> usize {
        self.shapes.len() * self.views()
    }

    pub fn condition(&self, shape_index: usize, view: usize) -> usize {
        shape_index * self.views() + view
    }

    /// `(shape, view)` behind a condition id.
    pub fn decode_condition(&self, cond: usize) -> Result<(Shape, usize)> {
        let v = self.views();
        let s = self
            .shapes
            .get(cond / v)
            .ok_or_else(|| invalid(format!("condition {cond} out of range")))?;
        Ok((*s, cond % v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<PoseSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub shapes: Vec<Shape>,
    pub n_per_shape: usize,
    pub views_per_shape: usize,
    pub translation_range: [f64; 2],
    pub mode: ParamMode,
    pub seed: u64,
}

pub fn uniform_translation<R: Rng + ?Sized>(range: [f64; 2], rng: &mut R) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(range[0]..=range[1]))
}

/// Generates `n_per_shape` poses for every shape. Reference rotations are
/// uniform on SO(3); translations are uniform per axis in range (zero for
/// rotation-only datasets). Samples cycle through the views in order.
pub fn gen_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    if cfg.n_per_shape == 0 || cfg.shapes.is_empty() {
        return Err(invalid("need at least one shape and one sample per shape"));
    }
    if cfg.views_per_shape > cfg.n_per_shape {
        return Err(invalid("more views than samples per shape"));
    }
    let [lo, hi] = cfg.translation_range;
    if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(invalid("translation range must be finite with lo <= hi"));
    }
    let header = DatasetHeader {
        schema: DATASET_SCHEMA,
        mode: cfg.mode,
        seed: cfg.seed,
        shapes: cfg.shapes.clone(),
        n_per_shape: cfg.n_per_shape,
        views_per_shape: cfg.views_per_shape,
        translation_range: cfg.translation_range,
    };
    let views = header.views();
    let mut samples = Vec::with_capacity(cfg.shapes.len() * cfg.n_per_shape);
    for (si, &shape) in cfg.shapes.iter().enumerate() {
        let mut rng = crate::rng::split(cfg.seed, si as u64);
        let spec = symmetry_group(shape);
        let refs: Vec<RigidTransform> = (0..views)
            .map(|_| {
                let rot = uniform_rotation(&mut rng);
                let trans = match cfg.mode {
                    ParamMode::So3 => Vector3::zeros(),
                    _ => uniform_translation(cfg.translation_range, &mut rng),
                };
                RigidTransform { rot, trans }
            })
            .collect();
        for i in 0..cfg.n_per_shape {
            let view = i % views;
            let g = refs[view];
            let rot = if cfg.views_per_shape == 0 {
                g.rot
            } else {
                g.rot * spec.random_element(&mut rng)
            };
            samples.push(PoseSample {
                cond: header.condition(si, view),
                shape,
                view,
                pose: RigidTransform { rot, trans: g.trans },
            });
        }
    }
    Ok(Dataset { header, samples })
}

#[derive(Serialize, Deserialize)]
struct Record {
    cond: usize,
    shape_id: usize,
    view: usize,
    q: [f64; 4],
    t: [f64; 3],
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl Dataset {
    /// Line-delimited JSON: one header line, then one record per sample.
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        serde_json::to_writer(&mut *w, &self.header).map_err(|e| Error::Format {
            what: "dataset header",
            detail: e.to_string(),
        })?;
        writeln!(w)?;
        for s in &self.samples {
            let q = s.pose.rot.wxyz();
            let t = s.pose.trans;
            writeln!(
                w,
                "{{\"cond\":{},\"shape_id\":{},\"view\":{},\"q\":[{},{},{},{}],\"t\":[{},{},{}]}}",
                s.cond,
                s.shape.id(),
                s.view,
                fmt17(q[0]),
                fmt17(q[1]),
                fmt17(q[2]),
                fmt17(q[3]),
                fmt17(t[0]),
                fmt17(t[1]),
                fmt17(t[2]),
            )?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let fmt_err = |detail: String| Error::Format {
            what: "dataset",
            detail,
        };
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| fmt_err("empty file".into()))??;
        let header: DatasetHeader = serde_json::from_str(&first).map_err(|e| fmt_err(e.to_string()))?;
        if header.schema != DATASET_SCHEMA {
            return Err(fmt_err(format!("unsupported schema {}", header.schema)));
        }
        let mut samples = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(&line).map_err(|e| fmt_err(format!("line {}: {e}", n + 2)))?;
            let [w, x, y, z] = rec.q;
            samples.push(PoseSample {
                cond: rec.cond,
                shape: Shape::from_id(rec.shape_id)?,
                view: rec.view,
                pose: RigidTransform {
                    rot: Rotation::from_wxyz(w, x, y, z)?,
                    trans: Vector3::from(rec.t),
                },
            });
        }
        Ok(Dataset { header, samples })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Reference pose of each condition (its first sample), indexed by id.
    pub fn references(&self) -> Vec<Option<PoseSample>> {
        let mut out = vec![None; self.header.num_conditions()];
        for s in &self.samples {
            if let Some(slot) = out.get_mut(s.cond) {
                slot.get_or_insert(*s);
            }
        }
        out
    }

    pub fn records(&self) -> Vec<crate::diffusion::TrainRecord> {
        self.samples
            .iter()
            .map(|s| crate::diffusion::TrainRecord {
                cond: s.cond,
                pose: s.pose,
            })
            .collect()
    }
}
