//! Perturbation kernels: the concentrated Gaussian on each group and the
//! isotropic Gaussian on SO(3) (IG_SO(3)).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::lie::{between, retract, so3_exp, ParamMode, RigidTransform, Rotation, Tangent, SINGULAR_MARGIN};

/// Number of angles in an [`Igso3Table`].
pub const IGSO3_TABLE_SIZE: usize = 1024;
/// Maximum degree of the IG_SO(3) series.
pub const IGSO3_SERIES_TERMS: usize = 2000;
const IGSO3_SERIES_TOL: f64 = 1e-12;
/// Tables with fewer distinct CDF values than this resolve the angle too
/// coarsely; sampling then uses the tangent Gaussian instead.
const IGSO3_MIN_SUPPORT: usize = 32;

/// Isotropic standard deviation `σ` in tangent coordinates.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct IsotropicScale(f64);

impl IsotropicScale {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self(sigma))
        } else {
            Err(invalid(format!("sigma must be positive and finite, got {sigma}")))
        }
    }

    pub fn sigma(self) -> f64 {
        self.0
    }

    /// IG_SO(3) concentration `ε = σ²`.
    pub fn eps(self) -> f64 {
        self.0 * self.0
    }
}

/// Draws `z ~ N(0, σ²I)` of the mode's tangent dimension.
pub fn gaussian_tangent<R: Rng + ?Sized>(sigma: f64, mode: ParamMode, rng: &mut R) -> Tangent {
    let mut c = [0.0; 6];
    for v in c.iter_mut().take(mode.tangent_dim()) {
        let n: f64 = rng.sample(StandardNormal);
        *v = sigma * n;
    }
    Tangent::from_slice(mode, &c[..mode.tangent_dim()]).expect("finite gaussian draw")
}

/// Samples `Y = X·Exp(z)` with `z ~ N(0, σ²I)` and returns both.
pub fn concentrated_sample<R: Rng + ?Sized>(
    x: &RigidTransform,
    sigma: IsotropicScale,
    mode: ParamMode,
    rng: &mut R,
) -> Result<(RigidTransform, Tangent)> {
    let z = gaussian_tangent(sigma.sigma(), mode, rng);
    Ok((retract(x, &z, mode)?, z))
}

/// Log-density of the concentrated Gaussian centred at `X`, evaluated at `Y`.
///
/// Uses the Euclidean normalizer `√((2π)^κ σ^{2κ})`, which is only
/// accurate while `σ` is small compared with the injectivity radius.
pub fn concentrated_logprob(
    y: &RigidTransform,
    x: &RigidTransform,
    sigma: IsotropicScale,
    mode: ParamMode,
) -> Result<f64> {
    let z = between(x, y, mode)?;
    let angle = z.phi().norm();
    if angle >= PI - SINGULAR_MARGIN {
        return Err(Error::Singularity {
            angle,
            margin: SINGULAR_MARGIN,
        });
    }
    let var = sigma.eps();
    let kappa = mode.tangent_dim() as f64;
    let sq: f64 = z.as_slice().iter().map(|v| v * v).sum();
    Ok(-0.5 * sq / var - 0.5 * kappa * (2.0 * PI * var).ln())
}

/// How [`igso3_density`] evaluates `f_ε(φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Igso3Method {
    /// Truncated sum over irreducible representations.
    TruncatedSeries,
    /// Closed-form approximation, accurate for small `ε`.
    ClosedApprox,
}

/// `Σ_l (2l+1) e^{−εl(l+1)} sin((2l+1)φ/2)`, the series before division by `sin(φ/2)`.
fn igso3_series_numerator(phi: f64, eps: f64) -> f64 {
    let mut acc = 0.0;
    for l in 0..=IGSO3_SERIES_TERMS {
        let lf = l as f64;
        let weight = (2.0 * lf + 1.0) * (-eps * lf * (lf + 1.0)).exp();
        acc += weight * ((lf + 0.5) * phi).sin();
        if weight < IGSO3_SERIES_TOL {
            break;
        }
    }
    acc
}

fn igso3_closed_approx(phi: f64, eps: f64) -> f64 {
    let pre = PI.sqrt() * eps.powf(-1.5) * (eps / 4.0 - (phi / 2.0).powi(2) / eps).exp();
    let wrap = (-PI * PI / eps).exp()
        * ((phi - 2.0 * PI) * (PI * phi / eps).exp() + (phi + 2.0 * PI) * (-PI * phi / eps).exp());
    pre * (phi - wrap) / (2.0 * (phi / 2.0).sin())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("eps must be positive and finite, got {eps}")))
    }
}

/// IG_SO(3) angular density `f_ε(φ)` for `φ ∈ (0, π)`.
///
/// Multiply by `(1 − cos φ)/π` to obtain a density over the angle.
pub fn igso3_density(phi: f64, eps: f64, method: Igso3Method) -> Result<f64> {
    check_eps(eps)?;
    if !(phi > 0.0 && phi < PI) {
        return Err(invalid(format!("angle must lie in (0, pi), got {phi}")));
    }
    Ok(match method {
        Igso3Method::TruncatedSeries => igso3_series_numerator(phi, eps) / (phi / 2.0).sin(),
        Igso3Method::ClosedApprox => igso3_closed_approx(phi, eps),
    })
}

/// Angle density `f_ε(φ)(1 − cos φ)/π`, finite at `φ = 0`.
pub fn igso3_angle_pdf(phi: f64, eps: f64) -> f64 {
    // (1 − cos φ)/sin(φ/2) = 2 sin(φ/2)
    igso3_series_numerator(phi, eps) * 2.0 * (phi / 2.0).sin() / PI
}

/// Tabulated angle CDF for inverse-transform sampling.
#[derive(Debug, Clone)]
pub struct Igso3Table {
    eps: f64,
    grid: Vec<f64>,
    cdf: Vec<f64>,
    converged: bool,
}

impl Igso3Table {
    /// Tabulates the CDF on [`IGSO3_TABLE_SIZE`] equally spaced angles in
    /// `[0, π]` and drops points where the CDF does not increase.
    pub fn new(eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let n = IGSO3_TABLE_SIZE;
        let full_grid: Vec<f64> = (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect();
        let pdf: Vec<f64> = full_grid
            .iter()
            .map(|&p| igso3_angle_pdf(p, eps).max(0.0))
            .collect();
        let mut full_cdf = vec![0.0; n];
        for i in 1..n {
            full_cdf[i] = full_cdf[i - 1] + 0.5 * (pdf[i] + pdf[i - 1]) * (full_grid[i] - full_grid[i - 1]);
        }
        let total = full_cdf[n - 1];
        if !(total.is_finite() && total > 0.0) {
            return Err(invalid(format!("IG_SO(3) table for eps={eps} has no mass")));
        }
        let mut grid = Vec::with_capacity(n);
        let mut cdf = Vec::with_capacity(n);
        for (g, c) in full_grid.into_iter().zip(full_cdf) {
            let c = c / total;
            if cdf.last().is_none_or(|&prev| c > prev) {
                grid.push(g);
                cdf.push(c);
            }
        }
        *cdf.last_mut().expect("non-empty table") = 1.0;
        let nf = IGSO3_SERIES_TERMS as f64;
        let converged = (2.0 * nf + 1.0) * (-eps * nf * (nf + 1.0)).exp() < IGSO3_SERIES_TOL;
        Ok(Self {
            eps,
            grid,
            cdf,
            converged,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Whether the table resolves the angle distribution finely enough to sample from.
    pub fn is_resolved(&self) -> bool {
        self.converged && self.cdf.len() >= IGSO3_MIN_SUPPORT
    }

    /// Inverse CDF by linear interpolation; `u` is clamped to `[0, 1]`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let k = self.cdf.partition_point(|&c| c < u);
        if k == 0 {
            return self.grid[0];
        }
        if k >= self.cdf.len() {
            return self.grid[self.grid.len() - 1];
        }
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = (u - c0) / (c1 - c0);
        self.grid[k - 1] + t * (self.grid[k] - self.grid[k - 1])
    }
}

fn table_cache() -> &'static Mutex<HashMap<u64, Arc<Igso3Table>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Igso3Table>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached table for `eps`, built on first use.
pub fn igso3_table(eps: f64) -> Result<Arc<Igso3Table>> {
    check_eps(eps)?;
    let key = eps.to_bits();
    if let Some(t) = table_cache().lock().expect("table cache").get(&key) {
        return Ok(Arc::clone(t));
    }
    let table = Arc::new(Igso3Table::new(eps)?);
    table_cache()
        .lock()
        .expect("table cache")
        .entry(key)
        .or_insert_with(|| Arc::clone(&table));
    Ok(table)
}

fn uniform_axis<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Draws a rotation from IG_SO(3) with concentration `eps`.
///
/// For small `eps` the angle distribution approaches that of `‖z‖` with
/// `z ~ N(0, 2·eps·I)`. When `eps` is too small for the tabulated CDF to
/// resolve the angle, sampling falls back to exactly that Gaussian.
pub fn igso3_sample<R: Rng + ?Sized>(eps: f64, rng: &mut R) -> Result<Rotation> {
    let table = igso3_table(eps)?;
    if !table.is_resolved() {
        let z = gaussian_tangent((2.0 * eps).sqrt(), ParamMode::So3, rng);
        return so3_exp(&z.phi());
    }
    let u: f64 = rng.random();
    let angle = table.inverse_cdf(u);
    so3_exp(&(uniform_axis(rng) * angle))
}

/// Uniformly distributed rotation.
pub fn uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let q = [
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    ];
    Rotation::from_wxyz(q[0], q[1], q[2], q[3]).unwrap_or_else(|_| uniform_rotation(rng))
}
