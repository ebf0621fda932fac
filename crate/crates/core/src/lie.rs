//! Group algebra for SO(3), R³×SO(3) and SE(3).
//!
//! Rotations are stored as unit quaternions with a canonical sign, and
//! rigid transforms pair a rotation with a translation vector. One
//! [`RigidTransform`] value serves all three groups; the [`ParamMode`]
//! passed to each operation decides which exponential, logarithm and
//! composition rule apply.
//!
//! Tangent vectors of the 6-DoF groups are always ordered `(ρ, φ)`:
//! translational part first, rotational part second.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix6, Quaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Below this angle every SO(3) series coefficient switches to its Taylor expansion.
pub const SMALL_ANGLE: f64 = 1e-4;

/// The Q-matrix coefficients cancel to 4th/5th order, so they switch to
/// their series much earlier than the SO(3) coefficients.
pub const Q_SERIES_ANGLE: f64 = 1e-2;

/// Inverse Jacobians refuse rotation angles within this margin of π.
pub const SINGULAR_MARGIN: f64 = 1e-6;

/// Skew-symmetric matrix `v×` such that `v× w = v × w`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`] (reads the off-diagonal entries).
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

fn check_finite3(v: &Vector3<f64>, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} has non-finite entries: {v:?}")))
    }
}

// ---------------------------------------------------------------------------
// Parametrization mode
// ---------------------------------------------------------------------------

/// Which group a [`RigidTransform`] is interpreted in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamMode {
    /// Rotations only; translations are carried as zero.
    So3,
    /// Product group: rotations and translations diffuse independently.
    R3So3,
    /// Rigid-body motions with coupled rotation and translation.
    Se3,
}

impl ParamMode {
    pub const ALL: [ParamMode; 3] = [ParamMode::So3, ParamMode::R3So3, ParamMode::Se3];

    /// Dimension of the Lie algebra.
    pub fn tangent_dim(self) -> usize {
        match self {
            ParamMode::So3 => 3,
            ParamMode::R3So3 | ParamMode::Se3 => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParamMode::So3 => "so3",
            ParamMode::R3So3 => "r3so3",
            ParamMode::Se3 => "se3",
        }
    }
}

impl fmt::Display for ParamMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "so3" => Ok(ParamMode::So3),
            "r3so3" => Ok(ParamMode::R3So3),
            "se3" => Ok(ParamMode::Se3),
            other => Err(invalid(format!("unknown parametrization mode '{other}'"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Rotation
// ---------------------------------------------------------------------------

/// Element of SO(3) stored as a unit quaternion `(w, x, y, z)`.
///
/// The sign is canonical: `w ≥ 0`, and when `w = 0` the first nonzero
/// vector component is positive. Equal rotations therefore have equal
/// quaternions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    q: Quaternion<f64>,
}

impl Rotation {
    pub fn identity() -> Self {
        Self {
            q: Quaternion::new(1.0, 0.0, 0.0, 0.0),
        }
    }

    /// Builds a rotation from raw quaternion coefficients, normalizing them.
    /// Coefficients that are already unit length up to rounding are kept
    /// bit-for-bit, so serialized rotations read back exactly.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(invalid(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalized"
            )));
        }
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self::with_sign(q));
        }
        Ok(Self::canonical(q / n))
    }

    fn canonical(q: Quaternion<f64>) -> Self {
        // Renormalize so the unit-norm invariant survives long composition chains.
        Self::with_sign(q / q.norm())
    }

    fn with_sign(q: Quaternion<f64>) -> Self {
        let flip = if q.w != 0.0 {
            q.w < 0.0
        } else {
            let first = [q.i, q.j, q.k].into_iter().find(|c| *c != 0.0).unwrap_or(0.0);
            first < 0.0
        };
        Self { q: if flip { -q } else { q } }
    }

    /// Quaternion coefficients `[w, x, y, z]`.
    pub fn wxyz(&self) -> [f64; 4] {
        [self.q.w, self.q.i, self.q.j, self.q.k]
    }

    pub fn quaternion(&self) -> Quaternion<f64> {
        self.q
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.q.w, self.q.i, self.q.j, self.q.k);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Converts a rotation matrix, branching on the largest diagonal
    /// element so half-turns are recovered without cancellation.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("rotation matrix has non-finite entries"));
        }
        let trace = m.trace();
        let (w, x, y, z);
        if trace > m[(0, 0)] && trace > m[(1, 1)] && trace > m[(2, 2)] {
            let s = (1.0 + trace).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).max(0.0).sqrt() * 2.0;
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            x = 0.25 * s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if m[(1, 1)] >= m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).max(0.0).sqrt() * 2.0;
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            y = 0.25 * s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).max(0.0).sqrt() * 2.0;
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
            z = 0.25 * s;
        }
        Self::from_wxyz(w, x, y, z)
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("rotation axis must be nonzero and finite"));
        }
        so3_exp(&(axis * (angle / n)))
    }

    pub fn exp(phi: &Vector3<f64>) -> Result<Self> {
        so3_exp(phi)
    }

    pub fn log(&self) -> Vector3<f64> {
        so3_log(self)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let v = Vector3::new(self.q.i, self.q.j, self.q.k).norm();
        2.0 * v.atan2(self.q.w)
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(self.q.conjugate())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.matrix() * v
    }

    /// Geodesic angle between two rotations, in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        // ‖q₁ − q₂‖ = 2 sin(θ/4); the chord form is accurate near zero.
        let d = (self.q - other.q).norm().min((self.q + other.q).norm());
        4.0 * (0.5 * d).clamp(0.0, 1.0).asin()
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation::canonical(self.q * rhs.q)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation::canonical(self.q * rhs.q)
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

// ---------------------------------------------------------------------------
// Rigid transform and tangent vectors
// ---------------------------------------------------------------------------

/// Rotation plus translation. Interpreted as an element of SE(3) or of
/// R³×SO(3) depending on the [`ParamMode`] of the operation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidTransform {
    pub rot: Rotation,
    pub trans: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rot: Rotation, trans: Vector3<f64>) -> Result<Self> {
        check_finite3(&trans, "translation")?;
        Ok(Self { rot, trans })
    }

    pub fn identity() -> Self {
        Self {
            rot: Rotation::identity(),
            trans: Vector3::zeros(),
        }
    }

    pub fn from_rotation(rot: Rotation) -> Self {
        Self {
            rot,
            trans: Vector3::zeros(),
        }
    }
}

/// Lie-algebra vector: 3 coordinates for SO(3), 6 ordered `(ρ, φ)` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tangent {
    Rot(Vector3<f64>),
    Rigid(Vector6<f64>),
}

impl Tangent {
    pub fn rigid(rho: Vector3<f64>, phi: Vector3<f64>) -> Self {
        Tangent::Rigid(Vector6::new(rho.x, rho.y, rho.z, phi.x, phi.y, phi.z))
    }

    pub fn zeros(mode: ParamMode) -> Self {
        match mode {
            ParamMode::So3 => Tangent::Rot(Vector3::zeros()),
            _ => Tangent::Rigid(Vector6::zeros()),
        }
    }

    /// Builds a tangent for `mode` from a flat slice of matching length.
    pub fn from_slice(mode: ParamMode, coords: &[f64]) -> Result<Self> {
        if coords.len() != mode.tangent_dim() {
            return Err(invalid(format!(
                "{mode} tangent needs {} coordinates, got {}",
                mode.tangent_dim(),
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("tangent has non-finite entries"));
        }
        Ok(match mode {
            ParamMode::So3 => Tangent::Rot(Vector3::from_column_slice(coords)),
            _ => Tangent::Rigid(Vector6::from_column_slice(coords)),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Tangent::Rot(_) => 3,
            Tangent::Rigid(_) => 6,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        match self {
            Tangent::Rot(v) => v.as_slice(),
            Tangent::Rigid(v) => v.as_slice(),
        }
    }

    /// Rotational part `φ`.
    pub fn phi(&self) -> Vector3<f64> {
        match self {
            Tangent::Rot(v) => *v,
            Tangent::Rigid(v) => Vector3::new(v[3], v[4], v[5]),
        }
    }

    /// Translational part `ρ` (zero for SO(3) tangents).
    pub fn rho(&self) -> Vector3<f64> {
        match self {
            Tangent::Rot(_) => Vector3::zeros(),
            Tangent::Rigid(v) => Vector3::new(v[0], v[1], v[2]),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Tangent::Rot(v) => v.norm(),
            Tangent::Rigid(v) => v.norm(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        match self {
            Tangent::Rot(v) => Tangent::Rot(v * s),
            Tangent::Rigid(v) => Tangent::Rigid(v * s),
        }
    }

    /// `self + s * other`; both tangents must have the same dimension.
    pub fn axpy(&self, s: f64, other: &Tangent) -> Result<Self> {
        match (self, other) {
            (Tangent::Rot(a), Tangent::Rot(b)) => Ok(Tangent::Rot(a + b * s)),
            (Tangent::Rigid(a), Tangent::Rigid(b)) => Ok(Tangent::Rigid(a + b * s)),
            _ => Err(invalid("tangent dimension mismatch")),
        }
    }

    fn check_mode(&self, mode: ParamMode) -> Result<()> {
        if self.dim() != mode.tangent_dim() {
            return Err(invalid(format!(
                "{mode} expects a {}-dimensional tangent, got {}",
                mode.tangent_dim(),
                self.dim()
            )));
        }
        if self.as_slice().iter().any(|c| !c.is_finite()) {
            return Err(invalid("tangent has non-finite entries"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// SO(3) exponential and logarithm
// ---------------------------------------------------------------------------

/// Exponential map of 𝔰𝔬(3).
pub fn so3_exp(phi: &Vector3<f64>) -> Result<Rotation> {
    check_finite3(phi, "rotation vector")?;
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    // sin(θ/2)/θ and cos(θ/2)
    let (k, w) = if theta < SMALL_ANGLE {
        (
            0.5 - theta2 / 48.0 + theta2 * theta2 / 3840.0,
            1.0 - theta2 / 8.0 + theta2 * theta2 / 384.0,
        )
    } else {
        let half = 0.5 * theta;
        (half.sin() / theta, half.cos())
    };
    Ok(Rotation::canonical(Quaternion::new(
        w,
        k * phi.x,
        k * phi.y,
        k * phi.z,
    )))
}

/// Principal logarithm of SO(3); the result has norm in `[0, π]`.
pub fn so3_log(r: &Rotation) -> Vector3<f64> {
    let q = r.quaternion();
    let v = Vector3::new(q.i, q.j, q.k);
    let s = v.norm();
    let w = q.w;
    if s < 0.5 * SMALL_ANGLE {
        // θ/sin(θ/2) ≈ 2/w (1 + s²/(6w²)) ... expanded in s with w ≈ 1
        let w2 = w * w;
        v * (2.0 / w) * (1.0 - s * s / (3.0 * w2))
    } else {
        // w ≥ 0 by the canonical sign, so θ ∈ [0, π].
        let theta = 2.0 * s.atan2(w);
        v * (theta / s)
    }
}

// ---------------------------------------------------------------------------
// Group operations
// ---------------------------------------------------------------------------

/// Exponential map of the chosen group.
///
/// SE(3) returns `(Exp(φ), J_l(φ) ρ)`; R³×SO(3) returns `(Exp(φ), ρ)`.
pub fn group_exp(tau: &Tangent, mode: ParamMode) -> Result<RigidTransform> {
    tau.check_mode(mode)?;
    match mode {
        ParamMode::So3 => Ok(RigidTransform::from_rotation(so3_exp(&tau.phi())?)),
        ParamMode::R3So3 => Ok(RigidTransform {
            rot: so3_exp(&tau.phi())?,
            trans: tau.rho(),
        }),
        ParamMode::Se3 => {
            let phi = tau.phi();
            Ok(RigidTransform {
                rot: so3_exp(&phi)?,
                trans: so3_left_jacobian(&phi) * tau.rho(),
            })
        }
    }
}

/// Logarithm of the chosen group; inverse of [`group_exp`] for rotation
/// angles below π.
pub fn group_log(x: &RigidTransform, mode: ParamMode) -> Result<Tangent> {
    check_finite3(&x.trans, "translation")?;
    let phi = so3_log(&x.rot);
    match mode {
        ParamMode::So3 => Ok(Tangent::Rot(phi)),
        ParamMode::R3So3 => Ok(Tangent::rigid(x.trans, phi)),
        ParamMode::Se3 => {
            let jinv = so3_left_jacobian_inv(&phi)?;
            Ok(Tangent::rigid(jinv * x.trans, phi))
        }
    }
}

/// Group composition `X ∘ Y`.
///
/// SE(3): `(R₂R₁, T₂ + R₂T₁)`; R³×SO(3): `(R₂R₁, T₂ + T₁)`; SO(3) composes
/// rotations and carries a zero translation.
pub fn compose(x: &RigidTransform, y: &RigidTransform, mode: ParamMode) -> RigidTransform {
    let rot = &x.rot * &y.rot;
    let trans = match mode {
        ParamMode::So3 => Vector3::zeros(),
        ParamMode::R3So3 => x.trans + y.trans,
        ParamMode::Se3 => x.trans + x.rot.rotate(&y.trans),
    };
    RigidTransform { rot, trans }
}

/// Group inverse.
pub fn inverse(x: &RigidTransform, mode: ParamMode) -> RigidTransform {
    let rot = x.rot.inverse();
    let trans = match mode {
        ParamMode::So3 => Vector3::zeros(),
        ParamMode::R3So3 => -x.trans,
        ParamMode::Se3 => -rot.rotate(&x.trans),
    };
    RigidTransform { rot, trans }
}

/// `X ∘ Exp(τ)`: right-perturbation used by both the noise kernel and the sampler.
pub fn retract(x: &RigidTransform, tau: &Tangent, mode: ParamMode) -> Result<RigidTransform> {
    Ok(compose(x, &group_exp(tau, mode)?, mode))
}

/// `Log(X⁻¹ Y)`: tangent taking `X` to `Y` by right-perturbation.
pub fn between(x: &RigidTransform, y: &RigidTransform, mode: ParamMode) -> Result<Tangent> {
    group_log(&compose(&inverse(x, mode), y, mode), mode)
}

// ---------------------------------------------------------------------------
// SO(3) Jacobians
// ---------------------------------------------------------------------------

/// Which Jacobian to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianKind {
    Left,
    Right,
    LeftInv,
    RightInv,
}

impl JacobianKind {
    fn is_inverse(self) -> bool {
        matches!(self, JacobianKind::LeftInv | JacobianKind::RightInv)
    }
}

/// `(1 - cos θ)/θ²` and `(θ - sin θ)/θ³`.
fn so3_coeffs(theta: f64) -> (f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
        )
    } else {
        let half = (0.5 * theta).sin();
        (
            2.0 * half * half / (theta * theta),
            (theta - theta.sin()) / (theta * theta * theta),
        )
    }
}

/// `1/θ² − (1 + cos θ)/(2θ sin θ)`, the `z×²` coefficient of the inverse Jacobians.
fn so3_inv_coeff(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    }
}

fn check_singular(theta: f64) -> Result<()> {
    if theta >= std::f64::consts::PI - SINGULAR_MARGIN {
        Err(Error::Singularity {
            angle: theta,
            margin: SINGULAR_MARGIN,
        })
    } else {
        Ok(())
    }
}

pub(crate) fn so3_left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let k = hat(phi);
    let (a, b) = so3_coeffs(phi.norm());
    Matrix3::identity() + k * a + k * k * b
}

pub(crate) fn so3_left_jacobian_inv(phi: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let theta = phi.norm();
    check_singular(theta)?;
    let k = hat(phi);
    Ok(Matrix3::identity() - k * 0.5 + k * k * so3_inv_coeff(theta))
}

/// Closed-form left/right Jacobians of SO(3) and their inverses.
pub fn so3_jacobian(phi: &Vector3<f64>, kind: JacobianKind) -> Result<Matrix3<f64>> {
    check_finite3(phi, "rotation vector")?;
    let theta = phi.norm();
    if kind.is_inverse() {
        check_singular(theta)?;
    }
    let k = hat(phi);
    let k2 = k * k;
    let id = Matrix3::identity();
    Ok(match kind {
        JacobianKind::Left => {
            let (a, b) = so3_coeffs(theta);
            id + k * a + k2 * b
        }
        JacobianKind::Right => {
            let (a, b) = so3_coeffs(theta);
            id - k * a + k2 * b
        }
        JacobianKind::LeftInv => id - k * 0.5 + k2 * so3_inv_coeff(theta),
        JacobianKind::RightInv => id + k * 0.5 + k2 * so3_inv_coeff(theta),
    })
}

// ---------------------------------------------------------------------------
// SE(3) Jacobians
// ---------------------------------------------------------------------------

/// Coefficients of the three φ-dependent Q-matrix terms.
fn q_coeffs(theta: f64) -> (f64, f64, f64) {
    let t2 = theta * theta;
    if theta < Q_SERIES_ANGLE {
        (
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362_880.0,
            1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40_320.0 - t2 * t2 * t2 / 3_628_800.0,
            1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120_960.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        let t4 = t2 * t2;
        (
            (theta - s) / (t2 * theta),
            (t2 + 2.0 * c - 2.0) / (2.0 * t4),
            (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t4 * theta),
        )
    }
}

/// Translation/rotation coupling block of the SE(3) left Jacobian.
pub fn se3_q_matrix(rho: &Vector3<f64>, phi: &Vector3<f64>) -> Matrix3<f64> {
    let r = hat(rho);
    let p = hat(phi);
    let pr = p * r;
    let rp = r * p;
    let prp = pr * p;
    let pp = p * p;
    let (c1, c2, c3) = q_coeffs(phi.norm());
    r * 0.5
        + (pr + rp + prp) * c1
        + (pp * r + rp * p - prp * 3.0) * c2
        + (prp * p + pp * r * p) * c3
}

/// Which inverse SE(3) Jacobian [`se3_jacobian_inv`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Se3InvKind {
    /// `J_l⁻¹(z) = [[J_l⁻¹(φ), Z], [0, J_l⁻¹(φ)]]`
    LeftInv,
    /// `J_r⁻ᵀ(z) = [[J_l⁻¹(φ), 0], [Z, J_l⁻¹(φ)]]`
    RightInvTranspose,
}

/// Block-form inverse Jacobians of SE(3), with `Z(ρ, φ) = −J_l⁻¹(φ) Q(ρ, φ) J_l⁻¹(φ)`.
pub fn se3_jacobian_inv(tau: &Tangent, kind: Se3InvKind) -> Result<Matrix6<f64>> {
    tau.check_mode(ParamMode::Se3)?;
    let phi = tau.phi();
    let jinv = so3_left_jacobian_inv(&phi)?;
    let z = -jinv * se3_q_matrix(&tau.rho(), &phi) * jinv;
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&jinv);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&jinv);
    match kind {
        Se3InvKind::LeftInv => m.fixed_view_mut::<3, 3>(0, 3).copy_from(&z),
        Se3InvKind::RightInvTranspose => m.fixed_view_mut::<3, 3>(3, 0).copy_from(&z),
    }
    Ok(m)
}

fn block_upper(diag: &Matrix3<f64>, upper: &Matrix3<f64>) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(diag);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(diag);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(upper);
    m
}

/// Left/right Jacobian (or inverse) of any supported group, as a square
/// matrix of the tangent dimension.
///
/// The inverses of the 6-DoF groups are obtained from the forward
/// Jacobians' block structure, independently of [`se3_jacobian_inv`].
pub fn group_jacobian(
    tau: &Tangent,
    mode: ParamMode,
    kind: JacobianKind,
) -> Result<nalgebra::DMatrix<f64>> {
    tau.check_mode(mode)?;
    let phi = tau.phi();
    match mode {
        ParamMode::So3 => {
            let j = so3_jacobian(&phi, kind)?;
            Ok(nalgebra::DMatrix::from_column_slice(3, 3, j.as_slice()))
        }
        ParamMode::R3So3 => {
            let j = so3_jacobian(&phi, kind)?;
            let mut m = nalgebra::DMatrix::identity(6, 6);
            m.view_mut((3, 3), (3, 3)).copy_from(&j);
            Ok(m)
        }
        ParamMode::Se3 => {
            // J_r(ρ, φ) = J_l(−ρ, −φ)
            let (rho, phi) = match kind {
                JacobianKind::Left | JacobianKind::LeftInv => (tau.rho(), phi),
                JacobianKind::Right | JacobianKind::RightInv => (-tau.rho(), -phi),
            };
            let m = if kind.is_inverse() {
                check_singular(phi.norm())?;
                let jinv = so3_left_jacobian_inv(&phi)?;
                block_upper(&jinv, &(-jinv * se3_q_matrix(&rho, &phi) * jinv))
            } else {
                block_upper(&so3_left_jacobian(&phi), &se3_q_matrix(&rho, &phi))
            };
            Ok(nalgebra::DMatrix::from_column_slice(6, 6, m.as_slice()))
        }
    }
}
