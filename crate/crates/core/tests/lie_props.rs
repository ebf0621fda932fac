use nalgebra::{DMatrix, Matrix3, Matrix6, Vector3, Vector6};
use posediff_core::lie::{
    compose, group_exp, group_jacobian, group_log, hat, inverse, se3_jacobian_inv, se3_q_matrix,
    so3_exp, so3_jacobian, JacobianKind, ParamMode, RigidTransform, Se3InvKind, Tangent,
};
use proptest::prelude::*;

const QUAD_INTERVALS: usize = 400;

/// Composite Simpson rule over [0, 1] for a matrix-valued integrand.
fn simpson<const N: usize>(
    f: impl Fn(f64) -> nalgebra::SMatrix<f64, N, N>,
) -> nalgebra::SMatrix<f64, N, N> {
    let n = QUAD_INTERVALS;
    let h = 1.0 / n as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

fn matrix_exp3(m: &Matrix3<f64>) -> Matrix3<f64> {
    m.exp()
}

/// `∫₀¹ exp(s φ×) ds`, the SO(3) left Jacobian from its definition.
fn so3_left_quad(phi: &Vector3<f64>) -> Matrix3<f64> {
    let k = hat(phi);
    simpson(|s| matrix_exp3(&(k * s)))
}

/// Adjoint of a rigid transform in `(ρ, φ)` ordering.
fn adjoint(x: &RigidTransform) -> Matrix6<f64> {
    let r = x.rot.matrix();
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(hat(&x.trans) * r));
    m
}

/// `∫₀¹ Ad(Exp(s z)) ds`, the SE(3) left Jacobian from its definition.
fn se3_left_quad(rho: &Vector3<f64>, phi: &Vector3<f64>) -> Matrix6<f64> {
    simpson(|s| {
        let x = group_exp(&Tangent::rigid(rho * s, phi * s), ParamMode::Se3).unwrap();
        adjoint(&x)
    })
}

fn vec3(max: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-max..max).prop_map(|a| Vector3::new(a[0], a[1], a[2]))
}

/// Rotation vector with norm in `[lo, hi]`.
fn rotvec(lo: f64, hi: f64) -> impl Strategy<Value = Vector3<f64>> {
    (vec3(1.0), lo..hi).prop_filter_map("degenerate axis", |(v, n)| {
        let len = v.norm();
        (len > 1e-3).then(|| v * (n / len))
    })
}

fn to_dmat6(m: &Matrix6<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(6, 6, m.as_slice())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quaternion_stays_unit_and_canonical(a in rotvec(0.0, 3.1), b in rotvec(0.0, 3.1)) {
        let r = &so3_exp(&a).unwrap() * &so3_exp(&b).unwrap();
        let q = r.wxyz();
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!((n - 1.0).abs() < 1e-12);
        prop_assert!(q[0] >= 0.0);
    }

    #[test]
    fn so3_left_jacobian_inverse(phi in rotvec(1e-6, 3.0)) {
        let j = so3_jacobian(&phi, JacobianKind::Left).unwrap();
        let ji = so3_jacobian(&phi, JacobianKind::LeftInv).unwrap();
        prop_assert!((j * ji - Matrix3::identity()).norm() < 1e-9);
        let jr = so3_jacobian(&phi, JacobianKind::Right).unwrap();
        let jri = so3_jacobian(&phi, JacobianKind::RightInv).unwrap();
        prop_assert!((jr * jri - Matrix3::identity()).norm() < 1e-9);
    }

    #[test]
    fn so3_left_is_right_transposed(phi in rotvec(0.0, 3.0)) {
        let jl = so3_jacobian(&phi, JacobianKind::Left).unwrap();
        let jr = so3_jacobian(&phi, JacobianKind::Right).unwrap();
        prop_assert!((jl - jr.transpose()).amax() < 1e-10);
        let jli = so3_jacobian(&phi, JacobianKind::LeftInv).unwrap();
        let jri = so3_jacobian(&phi, JacobianKind::RightInv).unwrap();
        prop_assert!((jli - jri.transpose()).amax() < 1e-10);
    }

    #[test]
    fn so3_jacobian_matches_quadrature(phi in rotvec(0.0, 3.0)) {
        let closed = so3_jacobian(&phi, JacobianKind::Left).unwrap();
        prop_assert!((closed - so3_left_quad(&phi)).amax() < 1e-6);
        let right = so3_jacobian(&phi, JacobianKind::Right).unwrap();
        prop_assert!((right - so3_left_quad(&(-phi))).amax() < 1e-6);
    }

    #[test]
    fn q_matrix_matches_quadrature(rho in vec3(2.0), phi in rotvec(0.0, 3.0)) {
        let quad = se3_left_quad(&rho, &phi);
        let q = se3_q_matrix(&rho, &phi);
        let q_quad: Matrix3<f64> = quad.fixed_view::<3, 3>(0, 3).into_owned();
        prop_assert!((q - q_quad).amax() < 1e-6, "closed {q} quad {q_quad}");
    }

    #[test]
    fn q_matrix_transpose_symmetry(rho in vec3(2.0), phi in rotvec(0.0, 3.0)) {
        let lhs = se3_q_matrix(&-rho, &-phi).transpose();
        prop_assert!((lhs - se3_q_matrix(&rho, &phi)).amax() < 1e-10);
    }

    #[test]
    fn se3_jacobians_match_quadrature(rho in vec3(2.0), phi in rotvec(1e-3, 2.8)) {
        let tau = Tangent::rigid(rho, phi);
        let jl_quad = se3_left_quad(&rho, &phi);
        let jr_quad = se3_left_quad(&-rho, &-phi);
        let jl = group_jacobian(&tau, ParamMode::Se3, JacobianKind::Left).unwrap();
        let jr = group_jacobian(&tau, ParamMode::Se3, JacobianKind::Right).unwrap();
        prop_assert!((jl - to_dmat6(&jl_quad)).amax() < 1e-6);
        prop_assert!((jr - to_dmat6(&jr_quad)).amax() < 1e-6);

        let jl_inv = se3_jacobian_inv(&tau, Se3InvKind::LeftInv).unwrap();
        let jl_inv_quad = jl_quad.try_inverse().unwrap();
        prop_assert!((jl_inv - jl_inv_quad).amax() < 1e-6);

        let jr_inv_t = se3_jacobian_inv(&tau, Se3InvKind::RightInvTranspose).unwrap();
        let jr_inv_t_quad = jr_quad.try_inverse().unwrap().transpose();
        prop_assert!((jr_inv_t - jr_inv_t_quad).amax() < 1e-6);

        let jri = group_jacobian(&tau, ParamMode::Se3, JacobianKind::RightInv).unwrap();
        prop_assert!((jri.transpose() - to_dmat6(&jr_inv_t)).amax() < 1e-9);
    }

    #[test]
    fn eigenvector_property(rho in vec3(2.0), phi in rotvec(0.0, 3.0)) {
        for mode in ParamMode::ALL {
            let tau = match mode {
                ParamMode::So3 => Tangent::Rot(phi),
                _ => Tangent::rigid(rho, phi),
            };
            let z = DMatrix::from_column_slice(tau.dim(), 1, tau.as_slice());
            for kind in [JacobianKind::Left, JacobianKind::Right] {
                let j = group_jacobian(&tau, mode, kind).unwrap();
                prop_assert!((&j * &z - &z).norm() < 1e-9, "{mode} {kind:?}");
            }
        }
    }

    #[test]
    fn se3_left_inverse_differs_from_right_inverse_transpose(
        rho in rotvec(0.1, 2.0),
        phi in rotvec(0.1, 2.0),
    ) {
        let tau = Tangent::rigid(rho, phi);
        let a = se3_jacobian_inv(&tau, Se3InvKind::LeftInv).unwrap();
        let b = se3_jacobian_inv(&tau, Se3InvKind::RightInvTranspose).unwrap();
        prop_assert!((a - b).norm() > 1e-6);
    }

    #[test]
    fn exp_log_roundtrip(rho in vec3(5.0), phi in rotvec(0.0, std::f64::consts::PI - 1e-3)) {
        for mode in [ParamMode::R3So3, ParamMode::Se3] {
            let tau = Tangent::rigid(rho, phi);
            let x = group_exp(&tau, mode).unwrap();
            let back = group_log(&x, mode).unwrap();
            let diff = Vector6::from_column_slice(back.as_slice())
                - Vector6::from_column_slice(tau.as_slice());
            prop_assert!(diff.amax() < 1e-9, "{mode}: {diff}");
            let again = group_exp(&back, mode).unwrap();
            prop_assert!(again.rot.angle_to(&x.rot) < 1e-9);
            prop_assert!((again.trans - x.trans).amax() < 1e-9);
        }
        let r = so3_exp(&phi).unwrap();
        prop_assert!((r.log() - phi).amax() < 1e-9);
    }

    #[test]
    fn group_axioms(
        a in (vec3(3.0), rotvec(0.0, 3.1)),
        b in (vec3(3.0), rotvec(0.0, 3.1)),
        c in (vec3(3.0), rotvec(0.0, 3.1)),
    ) {
        for mode in ParamMode::ALL {
            let mk = |(t, p): (Vector3<f64>, Vector3<f64>)| {
                let t = if mode == ParamMode::So3 { Vector3::zeros() } else { t };
                RigidTransform::new(so3_exp(&p).unwrap(), t).unwrap()
            };
            let (x, y, z) = (mk(a), mk(b), mk(c));
            let l = compose(&compose(&x, &y, mode), &z, mode);
            let r = compose(&x, &compose(&y, &z, mode), mode);
            prop_assert!(l.rot.angle_to(&r.rot) < 1e-10);
            prop_assert!((l.trans - r.trans).amax() < 1e-10);

            let e = compose(&x, &inverse(&x, mode), mode);
            prop_assert!(e.rot.angle() < 1e-12 * 10.0);
            prop_assert!(e.trans.amax() < 1e-12 * 10.0);
            prop_assert!(compose(&x, &RigidTransform::identity(), mode).rot.angle_to(&x.rot) < 1e-14);
        }
    }
}

#[test]
fn quadrature_oracle_reproduces_hand_values() {
    let t = 2.0 / std::f64::consts::PI;
    let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, t, -t, 0.0, t, t);
    let quad = so3_left_quad(&Vector3::new(std::f64::consts::FRAC_PI_2, 0.0, 0.0));
    assert!((quad - expected).amax() < 1e-9);

    let rho = Vector3::new(1.0, 0.0, 0.0);
    let phi = Vector3::new(0.0, 0.0, 1.0);
    let q_quad: Matrix3<f64> = se3_left_quad(&rho, &phi).fixed_view::<3, 3>(0, 3).into_owned();
    assert!((se3_q_matrix(&rho, &phi) - q_quad).amax() < 1e-6);
}

#[test]
fn se3_log_inverts_known_exp() {
    let t = 2.0 / std::f64::consts::PI;
    let x = RigidTransform::new(
        so3_exp(&Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2)).unwrap(),
        Vector3::new(t, t, 0.0),
    )
    .unwrap();
    let tau = group_log(&x, ParamMode::Se3).unwrap();
    assert!((tau.rho() - Vector3::new(1.0, 0.0, 0.0)).amax() < 1e-12);
    assert!(group_log(&RigidTransform::identity(), ParamMode::Se3).unwrap().norm() == 0.0);
}
