//! Stein scores of the concentrated Gaussian perturbation kernel.
//!
//! All scores are tangent vectors at the perturbed pose `Y`, expressed in
//! the right-perturbation coordinates used by [`crate::lie::retract`].

use nalgebra::Vector6;

use crate::distributions::{concentrated_logprob, IsotropicScale};
use crate::error::{invalid, Result};
use crate::lie::{
    between, retract, se3_jacobian_inv, so3_jacobian, JacobianKind, ParamMode, RigidTransform,
    Se3InvKind, Tangent,
};

/// Tangent-space gradient of a log-density.
pub type ScoreVector = Tangent;

/// Default central-difference step of [`score_numerical`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Which score formula a model is trained against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// `−z/σ²`, ignoring the SE(3) Jacobian.
    Surrogate,
    /// `−J_r⁻ᵀ(z) z/σ²`.
    True,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Surrogate => "surrogate",
            ScoreKind::True => "true",
        }
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "surrogate" => Ok(ScoreKind::Surrogate),
            "true" => Ok(ScoreKind::True),
            other => Err(invalid(format!("unknown score kind '{other}'"))),
        }
    }
}

/// Score of `p(Y | X)` at `Y`: `−J_r⁻ᵀ(z) z / σ²` with `z = Log(X⁻¹Y)`.
pub fn score_closed(
    y: &RigidTransform,
    x: &RigidTransform,
    sigma: IsotropicScale,
    mode: ParamMode,
) -> Result<ScoreVector> {
    let z = between(x, y, mode)?;
    score_from_tangent(&z, sigma, mode)
}

/// Closed-form score expressed directly in terms of the perturbation `z`.
pub fn score_from_tangent(z: &Tangent, sigma: IsotropicScale, mode: ParamMode) -> Result<ScoreVector> {
    let k = -1.0 / sigma.eps();
    match mode {
        ParamMode::So3 => {
            // J_r⁻ᵀ = J_l⁻¹ on SO(3)
            let m = so3_jacobian(&z.phi(), JacobianKind::LeftInv)?;
            Ok(Tangent::Rot(m * z.phi() * k))
        }
        ParamMode::R3So3 => {
            let m = so3_jacobian(&z.phi(), JacobianKind::LeftInv)?;
            Ok(Tangent::rigid(z.rho() * k, m * z.phi() * k))
        }
        ParamMode::Se3 => score_true_se3(z, sigma),
    }
}

/// `−z/σ²` for the groups where it is exact.
pub fn score_simplified(z: &Tangent, sigma: IsotropicScale, mode: ParamMode) -> Result<ScoreVector> {
    if mode == ParamMode::Se3 {
        return Err(invalid(
            "the simplified score is not exact on SE(3); use the surrogate or true score",
        ));
    }
    if z.dim() != mode.tangent_dim() {
        return Err(invalid("tangent dimension does not match mode"));
    }
    Ok(z.scale(-1.0 / sigma.eps()))
}

/// Surrogate score `−z/σ²`, defined for every mode.
pub fn score_surrogate(z: &Tangent, sigma: IsotropicScale) -> ScoreVector {
    z.scale(-1.0 / sigma.eps())
}

/// Exact SE(3) score `−J_r⁻ᵀ(z) z / σ²`.
pub fn score_true_se3(z: &Tangent, sigma: IsotropicScale) -> Result<ScoreVector> {
    let m = se3_jacobian_inv(z, Se3InvKind::RightInvTranspose)?;
    let v = m * Vector6::from_column_slice(z.as_slice()) * (-1.0 / sigma.eps());
    Ok(Tangent::Rigid(v))
}

/// Target score for training on `mode` with the given formula.
pub fn target_score(
    z: &Tangent,
    sigma: IsotropicScale,
    mode: ParamMode,
    kind: ScoreKind,
) -> Result<ScoreVector> {
    match kind {
        ScoreKind::Surrogate => Ok(score_surrogate(z, sigma)),
        ScoreKind::True => score_from_tangent(z, sigma, mode),
    }
}

/// Central-difference score of [`concentrated_logprob`] along each tangent basis direction.
pub fn score_numerical(
    y: &RigidTransform,
    x: &RigidTransform,
    sigma: IsotropicScale,
    mode: ParamMode,
    h: f64,
) -> Result<ScoreVector> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(invalid(format!("finite-difference step {h} outside [1e-7, 1e-3]")));
    }
    score_numerical_unchecked(y, x, sigma, mode, h)
}

/// As [`score_numerical`] but accepts any positive step.
pub fn score_numerical_unchecked(
    y: &RigidTransform,
    x: &RigidTransform,
    sigma: IsotropicScale,
    mode: ParamMode,
    h: f64,
) -> Result<ScoreVector> {
    let dim = mode.tangent_dim();
    let mut out = [0.0; 6];
    let mut e = [0.0; 6];
    for i in 0..dim {
        e[i] = h;
        let fwd = retract(y, &Tangent::from_slice(mode, &e[..dim])?, mode)?;
        e[i] = -h;
        let bwd = retract(y, &Tangent::from_slice(mode, &e[..dim])?, mode)?;
        e[i] = 0.0;
        let lp = concentrated_logprob(&fwd, x, sigma, mode)?;
        let lm = concentrated_logprob(&bwd, x, sigma, mode)?;
        out[i] = (lp - lm) / (2.0 * h);
    }
    Tangent::from_slice(mode, &out[..dim])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::so3_exp;
    use nalgebra::Vector3;
    use approx::assert_abs_diff_eq;

    fn s(v: f64) -> IsotropicScale {
        IsotropicScale::new(v).unwrap()
    }

    #[test]
    fn closed_score_vanishes_at_mean() {
        let x = RigidTransform::new(
            so3_exp(&Vector3::new(0.3, 0.2, -0.1)).unwrap(),
            Vector3::new(1.0, 0.0, 2.0),
        )
        .unwrap();
        for mode in [ParamMode::R3So3, ParamMode::Se3] {
            let sc = score_closed(&x, &x, s(0.3), mode).unwrap();
            assert!(sc.norm() < 1e-12);
        }
    }

    #[test]
    fn so3_closed_example() {
        let y = RigidTransform::from_rotation(so3_exp(&Vector3::new(0.1, 0.0, 0.0)).unwrap());
        let sc = score_closed(&y, &RigidTransform::identity(), s(0.5), ParamMode::So3).unwrap();
        assert_abs_diff_eq!(sc.phi(), Vector3::new(-0.4, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn simplified_examples() {
        let z = Tangent::Rot(Vector3::new(0.2, 0.0, 0.0));
        let sc = score_simplified(&z, s(0.5), ParamMode::So3).unwrap();
        assert_abs_diff_eq!(sc.phi(), Vector3::new(-0.8, 0.0, 0.0), epsilon = 1e-15);
        let zero = score_simplified(&Tangent::zeros(ParamMode::So3), s(0.5), ParamMode::So3).unwrap();
        assert_eq!(zero.norm(), 0.0);
        assert!(score_simplified(&Tangent::zeros(ParamMode::Se3), s(0.5), ParamMode::Se3).is_err());
    }

    #[test]
    fn surrogate_equals_true_for_pure_translation() {
        let z = Tangent::rigid(Vector3::new(0.4, -1.0, 0.3), Vector3::zeros());
        let a = score_surrogate(&z, s(0.2));
        let b = score_true_se3(&z, s(0.2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn surrogate_differs_from_true_on_coupled_tangent() {
        let z = Tangent::rigid(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 0.0, 1.0));
        let a = score_surrogate(&z, s(1.0));
        let b = score_true_se3(&z, s(1.0)).unwrap();
        let gap = Vector6::from_column_slice(a.as_slice()) - Vector6::from_column_slice(b.as_slice());
        assert!(gap.norm() > 1e-3);
    }

    #[test]
    fn numerical_step_is_range_checked() {
        let x = RigidTransform::identity();
        assert!(score_numerical(&x, &x, s(0.5), ParamMode::So3, 1e-2).is_err());
        let sc = score_numerical(&x, &x, s(0.5), ParamMode::So3, 1e-5).unwrap();
        assert!(sc.norm() < 1e-6);
    }

    #[test]
    fn kind_parses() {
        assert_eq!("surrogate".parse::<ScoreKind>().unwrap(), ScoreKind::Surrogate);
        assert!("autograd".parse::<ScoreKind>().is_err());
    }
}
