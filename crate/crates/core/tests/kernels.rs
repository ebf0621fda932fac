use std::f64::consts::PI;

use nalgebra::{Vector3, Vector6};
use posediff_core::distributions::{
    concentrated_logprob, concentrated_sample, igso3_angle_pdf, igso3_density, igso3_sample,
    Igso3Method, IsotropicScale,
};
use posediff_core::lie::{retract, so3_exp, ParamMode, RigidTransform, Tangent};
use posediff_core::rng::seeded;
use posediff_core::scores::{
    score_closed, score_numerical, score_numerical_unchecked, score_simplified, score_surrogate,
    score_true_se3,
};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn scale(s: f64) -> IsotropicScale {
    IsotropicScale::new(s).unwrap()
}

/// Adaptive Simpson quadrature.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Two-sample-free KS statistic of `samples` against a continuous CDF.
fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
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

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    num / den
}

fn pose(t: [f64; 3], r: [f64; 3]) -> RigidTransform {
    RigidTransform::new(so3_exp(&Vector3::from(r)).unwrap(), Vector3::from(t)).unwrap()
}

// ---------------------------------------------------------------------------
// Concentrated Gaussian
// ---------------------------------------------------------------------------

#[test]
fn tangent_marginals_are_gaussian() {
    let mut rng = seeded(11);
    let sigma = 0.3;
    let x = pose([0.5, -1.0, 2.0], [0.4, 0.1, -0.7]);
    let n = 100_000;
    let mut cols = vec![Vec::with_capacity(n); 6];
    for _ in 0..n {
        let (_, z) = concentrated_sample(&x, scale(sigma), ParamMode::Se3, &mut rng).unwrap();
        for (c, v) in cols.iter_mut().zip(z.as_slice()) {
            c.push(*v);
        }
    }
    let normal = Normal::new(0.0, sigma).unwrap();
    for col in cols {
        let mean = col.iter().sum::<f64>() / n as f64;
        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((std - sigma).abs() < 0.01, "std {std}");
        let ks = ks_statistic(col, |v| normal.cdf(v));
        assert!(ks < 0.02, "ks {ks}");
    }
}

#[test]
fn tiny_sigma_stays_close() {
    let mut rng = seeded(5);
    let x = pose([1.0, 2.0, 3.0], [0.2, 0.2, 0.2]);
    let sigma = 1e-6;
    for _ in 0..100 {
        let (y, _) = concentrated_sample(&x, scale(sigma), ParamMode::Se3, &mut rng).unwrap();
        assert!(y.rot.angle_to(&x.rot) < 10.0 * sigma);
        assert!((y.trans - x.trans).norm() < 10.0 * sigma);
    }
}

#[test]
fn logprob_gradient_matches_closed_score() {
    let mut rng = seeded(17);
    let x = pose([0.1, 0.3, -0.2], [1.0, -0.5, 0.2]);
    for mode in ParamMode::ALL {
        let x = if mode == ParamMode::So3 { RigidTransform::from_rotation(x.rot) } else { x };
        for _ in 0..50 {
            let s = scale(0.6);
            let (y, _) = concentrated_sample(&x, s, mode, &mut rng).unwrap();
            let num = score_numerical(&y, &x, s, mode, 1e-5).unwrap();
            let cl = score_closed(&y, &x, s, mode).unwrap();
            let err: f64 = num
                .as_slice()
                .iter()
                .zip(cl.as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-5, "{mode}: {err}");
        }
    }
}

// ---------------------------------------------------------------------------
// IG_SO(3)
// ---------------------------------------------------------------------------

#[test]
fn igso3_series_is_normalized() {
    for eps in [0.05, 0.5] {
        let total = adaptive_simpson(&|p| igso3_angle_pdf(p, eps), 0.0, PI, 1e-10);
        assert!((total - 1.0).abs() < 1e-3, "eps {eps}: {total}");
        // the normalizer applied to the density itself, away from the endpoints
        let inner = adaptive_simpson(
            &|p| {
                igso3_density(p, eps, Igso3Method::TruncatedSeries).unwrap() * (1.0 - p.cos()) / PI
            },
            1e-9,
            PI - 1e-9,
            1e-10,
        );
        assert!((inner - 1.0).abs() < 1e-3);
    }
}

#[test]
fn large_eps_approaches_uniform_marginal() {
    let mut rng = seeded(23);
    let angles: Vec<f64> = (0..100_000)
        .map(|_| igso3_sample(8.0, &mut rng).unwrap().angle())
        .collect();
    let ks = ks_statistic(angles, |p| (p - p.sin()) / PI);
    assert!(ks < 0.02, "ks {ks}");
}

#[test]
fn small_eps_mean_angle_matches_chi() {
    let mut rng = seeded(29);
    let eps: f64 = 0.01;
    let n = 100_000;
    let mean = (0..n)
        .map(|_| igso3_sample(eps, &mut rng).unwrap().angle())
        .sum::<f64>()
        / n as f64;
    // the heat-kernel parametrization spreads each axis with variance 2ε
    let chi_mean = (2.0 * eps).sqrt() * 2.0 * (2.0 / PI).sqrt();
    assert!((mean / chi_mean - 1.0).abs() < 0.05, "{mean} vs {chi_mean}");
}

#[test]
fn igso3_axes_are_isotropic() {
    let mut rng = seeded(31);
    let n = 100_000;
    let mut acc = Vector3::zeros();
    for _ in 0..n {
        let r = igso3_sample(0.2, &mut rng).unwrap();
        let v = r.log();
        acc += v / v.norm();
    }
    assert!((acc / n as f64).norm() < 0.02);
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

#[test]
fn se3_scores_match_numerical_oracle() {
    let mut rng = seeded(37);
    let x = pose([0.4, 0.0, -1.0], [0.0, 0.8, 0.3]);
    for _ in 0..200 {
        let s = scale(0.7);
        let (y, z) = concentrated_sample(&x, s, ParamMode::Se3, &mut rng).unwrap();
        if z.phi().norm() > 2.8 {
            continue;
        }
        let num = score_numerical(&y, &x, s, ParamMode::Se3, 1e-5).unwrap();
        let tr = score_true_se3(&z, s).unwrap();
        let cl = score_closed(&y, &x, s, ParamMode::Se3).unwrap();
        assert!(rel_err(tr.as_slice(), num.as_slice()) < 1e-4);
        assert!(rel_err(cl.as_slice(), tr.as_slice()) < 1e-10);
    }
}

#[test]
fn so3_numerical_agreement() {
    let mut rng = seeded(41);
    for _ in 0..1000 {
        let s = scale(0.5);
        let (y, _) = concentrated_sample(&RigidTransform::identity(), s, ParamMode::So3, &mut rng).unwrap();
        let num = score_numerical(&y, &RigidTransform::identity(), s, ParamMode::So3, 1e-5).unwrap();
        let cl = score_closed(&y, &RigidTransform::identity(), s, ParamMode::So3).unwrap();
        assert!(rel_err(num.as_slice(), cl.as_slice()) < 1e-4);
    }
}

#[test]
fn numerical_score_is_second_order() {
    let x = pose([0.2, -0.1, 0.5], [0.3, -0.2, 0.1]);
    let z = Tangent::rigid(Vector3::new(0.5, 0.2, -0.4), Vector3::new(0.9, -0.6, 0.7));
    let y = retract(&x, &z, ParamMode::Se3).unwrap();
    let s = scale(0.8);
    let exact = score_closed(&y, &x, s, ParamMode::Se3).unwrap();
    // steps large enough that truncation dominates roundoff
    let hs = [1e-3, 5e-4, 2.5e-4];
    let errs: Vec<f64> = hs
        .iter()
        .map(|&h| {
            let num = score_numerical_unchecked(&y, &x, s, ParamMode::Se3, h).unwrap();
            let d = Vector6::from_column_slice(num.as_slice()) - Vector6::from_column_slice(exact.as_slice());
            d.norm()
        })
        .collect();
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = lx.iter().sum::<f64>() / 3.0;
    let my = ly.iter().sum::<f64>() / 3.0;
    let slope = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / lx.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() < 0.2, "slope {slope}, errors {errs:?}");
}

#[test]
fn surrogate_gap_vanishes_without_rotation() {
    let z = Tangent::rigid(Vector3::new(0.3, -0.7, 1.1), Vector3::zeros());
    let s = scale(0.4);
    let a = score_surrogate(&z, s);
    let b = score_true_se3(&z, s).unwrap();
    assert!(rel_err(a.as_slice(), b.as_slice()) < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplified_equals_closed(
        phi in prop::array::uniform3(-1.5f64..1.5),
        rho in prop::array::uniform3(-2.0f64..2.0),
        sigma in 0.05f64..2.0,
    ) {
        let s = scale(sigma);
        let zr = Tangent::Rot(Vector3::from(phi));
        let y = retract(&RigidTransform::identity(), &zr, ParamMode::So3).unwrap();
        let a = score_simplified(&zr, s, ParamMode::So3).unwrap();
        let b = score_closed(&y, &RigidTransform::identity(), s, ParamMode::So3).unwrap();
        prop_assert!(rel_err(a.as_slice(), b.as_slice()) < 1e-10);

        let zt = Tangent::rigid(Vector3::from(rho), Vector3::from(phi));
        let y = retract(&RigidTransform::identity(), &zt, ParamMode::R3So3).unwrap();
        let a = score_simplified(&zt, s, ParamMode::R3So3).unwrap();
        let b = score_closed(&y, &RigidTransform::identity(), s, ParamMode::R3So3).unwrap();
        prop_assert!(rel_err(a.as_slice(), b.as_slice()) < 1e-10);
    }

    #[test]
    fn scores_scale_inverse_square(
        v in prop::array::uniform3(-1.0f64..1.0),
        sigma in 0.05f64..2.0,
    ) {
        let z = Tangent::rigid(Vector3::from(v), Vector3::from(v) * 0.5);
        let a = score_surrogate(&z, scale(2.0 * sigma));
        let b = score_surrogate(&z, scale(sigma)).scale(0.25);
        prop_assert!(rel_err(a.as_slice(), b.as_slice()) < 1e-15);
    }

    #[test]
    fn surrogate_gap_is_positive_for_generic_tangents(
        rho in prop::array::uniform3(-2.0f64..2.0),
        phi in prop::array::uniform3(-1.5f64..1.5),
    ) {
        let rho = Vector3::from(rho);
        let phi = Vector3::from(phi);
        prop_assume!(rho.norm() > 0.1 && phi.norm() > 0.1);
        // ρ ∥ φ makes the gap vanish analytically; skip near-parallel pairs
        prop_assume!(rho.normalize().cross(&phi.normalize()).norm() > 0.05);
        let z = Tangent::rigid(rho, phi);
        let a = score_surrogate(&z, scale(1.0));
        let b = score_true_se3(&z, scale(1.0)).unwrap();
        prop_assert!(rel_err(a.as_slice(), b.as_slice()) > 0.0);
    }

    #[test]
    fn logprob_peaks_at_mean(
        t in prop::array::uniform3(-2.0f64..2.0),
        r in prop::array::uniform3(-1.0f64..1.0),
        dir in prop::array::uniform3(-1.0f64..1.0),
        rot in prop::array::uniform3(-1.0f64..1.0),
        sigma in 0.1f64..1.0,
    ) {
        let x = pose(t, r);
        let s = scale(sigma);
        for mode in [ParamMode::R3So3, ParamMode::Se3] {
            let at_mean = concentrated_logprob(&x, &x, s, mode).unwrap();
            let z = Tangent::rigid(Vector3::from(dir), Vector3::from(rot));
            prop_assume!(z.norm() > 1e-3);
            let y = retract(&x, &z, mode).unwrap();
            prop_assert!(concentrated_logprob(&y, &x, s, mode).unwrap() < at_mean);
        }
    }
}

#[test]
fn fallback_is_continuous_with_table() {
    // just above and below the resolution limit the mean angles agree
    let mut rng = seeded(43);
    let n = 20_000;
    let mean = |eps: f64, rng: &mut posediff_core::PoseRng| {
        (0..n).map(|_| igso3_sample(eps, rng).unwrap().angle()).sum::<f64>() / n as f64
            / (2.0 * eps).sqrt()
    };
    let a = mean(2e-4, &mut rng);
    let b = mean(2e-3, &mut rng);
    assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
}
