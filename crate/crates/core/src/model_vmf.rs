//! The von Mises-Fisher model on the sphere `S^{n-1}`.
//!
//! Points are natural parameters `z = η x̄ ∈ Rⁿ`. The log-normalizer is
//! `ψ(η) = ν log 2π + log(η^{1−ν} I_{ν−1}(η))` with `ν = n/2`, and the Fisher
//! metric is warped with `α² = ψ''(η)` and `β² = η A(η)` where
//! `A = ψ' = I_ν / I_{ν−1}` is the mean resultant length.

use crate::error::{domain, Error, Result};
use crate::specfun;
use crate::warped::{curvatures_from_derivatives, WarpProfile};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Below this η the power-series branch replaces the Bessel ratios.
pub const SERIES_THRESHOLD: f64 = 1e-3;
pub const MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmfModel {
    n: usize,
}

/// `A(η)` with its first two derivatives. `A' = ψ''`.
#[derive(Debug, Clone, Copy)]
pub struct ResultantDerivs {
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    /// `A / η`, finite at the origin.
    pub a_over_eta: f64,
}

impl VmfModel {
    pub fn new(n: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(domain(format!("vMF ambient dimension must be in 2..={MAX_DIM}, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nu(&self) -> f64 {
        0.5 * self.n as f64
    }

    fn check_eta(eta: f64) -> Result<()> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(domain(format!("eta must be finite and >= 0, got {eta}")));
        }
        Ok(())
    }

    pub fn resultant(&self, eta: f64) -> Result<ResultantDerivs> {
        Self::check_eta(eta)?;
        let n = self.n as f64;
        if eta < SERIES_THRESHOLD {
            let e2 = eta * eta;
            let c1 = 1.0 / n;
            let c3 = -1.0 / (n * n * (n + 2.0));
            let c5 = 2.0 / (n.powi(3) * (n + 2.0) * (n + 4.0));
            let c7 = -(5.0 * n + 12.0) / (n.powi(4) * (n + 2.0).powi(2) * (n + 4.0) * (n + 6.0));
            let a_over_eta = c1 + e2 * (c3 + e2 * (c5 + e2 * c7));
            let a1 = c1 + e2 * (3.0 * c3 + e2 * (5.0 * c5 + e2 * 7.0 * c7));
            let a2 = eta * (6.0 * c3 + e2 * (20.0 * c5 + e2 * 42.0 * c7));
            return Ok(ResultantDerivs { a: eta * a_over_eta, a1, a2, a_over_eta });
        }
        if eta > self.asymptotic_threshold() {
            return Ok(self.resultant_asymptotic(eta));
        }
        let a = specfun::bessel_ratio(self.nu(), eta)?;
        let a_over_eta = a / eta;
        let a1 = 1.0 - a * a - (n - 1.0) * a_over_eta;
        let a2 = -2.0 * a * a1 - (n - 1.0) * (a1 - a_over_eta) / eta;
        Ok(ResultantDerivs { a, a1, a2, a_over_eta })
    }

    fn asymptotic_threshold(&self) -> f64 {
        f64::max(30.0, 2.0 * self.nu() * self.nu())
    }

    // Hankel expansion I_μ(x) ∝ Σ (−1)^k a_k(μ) x^{−k}. With δ = 1 − A and
    // ε = δ − (n−1)/(2η) built from coefficient differences, ψ'' = 2ε − δ² +
    // (n−1)δ/η carries no cancellation of its O(1/η) parts.
    fn resultant_asymptotic(&self, eta: f64) -> ResultantDerivs {
        let n = self.n as f64;
        let nu = self.nu();
        let (m0, m1) = (4.0 * (nu - 1.0).powi(2), 4.0 * nu * nu);
        let mut a_lo = 1.0; // a_k(ν−1) (−1/η)^k
        let mut a_hi = 1.0; // a_k(ν) (−1/η)^k
        let mut s = 1.0;
        let mut diff = 0.0; // Σ_{k≥2} of (a_lo − a_hi)
        let mut tail = 0.0; // Σ_{k≥1} a_lo
        let mut last = f64::INFINITY;
        for k in 1..60 {
            let kf = k as f64;
            let odd = (2.0 * kf - 1.0).powi(2);
            let c = -1.0 / (kf * 8.0 * eta);
            a_lo *= (m0 - odd) * c;
            a_hi *= (m1 - odd) * c;
            let size = a_lo.abs().max(a_hi.abs());
            if size > last {
                break;
            }
            last = size;
            s += a_lo;
            tail += a_lo;
            if k >= 2 {
                diff += a_lo - a_hi;
            }
            if size < 1e-18 {
                break;
            }
        }
        let h = (n - 1.0) / (2.0 * eta);
        let eps = (diff - h * tail) / s;
        let delta = h + eps;
        let a = 1.0 - delta;
        let a_over_eta = a / eta;
        let a1 = 2.0 * eps - delta * delta + (n - 1.0) * delta / eta;
        let a2 = -2.0 * a * a1 - (n - 1.0) * (a1 - a_over_eta) / eta;
        ResultantDerivs { a, a1, a2, a_over_eta }
    }

    /// Log-normalizer `ψ(η)`; at `η = 0` the log area of the sphere.
    pub fn psi(&self, eta: f64) -> Result<f64> {
        Self::check_eta(eta)?;
        let nu = self.nu();
        if eta == 0.0 {
            return Ok(self.log_sphere_area());
        }
        Ok(nu * (2.0 * PI).ln() + (1.0 - nu) * eta.ln() + specfun::ln_bessel_i(nu - 1.0, eta)?)
    }

    pub fn log_sphere_area(&self) -> f64 {
        let nu = self.nu();
        2f64.ln() + nu * PI.ln() - libm::lgamma(nu)
    }

    /// `ψ''(η)`, the variance of `⟨x, x̄⟩`.
    pub fn psi_pp(&self, eta: f64) -> Result<f64> {
        Ok(self.resultant(eta)?.a1)
    }

    /// `β²(η) = η A(η) = (η²/n)(1 − I_{ν+1}/I_{ν−1})`.
    pub fn beta_sq(&self, eta: f64) -> Result<f64> {
        let r = self.resultant(eta)?;
        Ok(eta * r.a)
    }

    pub fn log_density(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.check_vec(x)?;
        self.check_vec(z)?;
        let norm_x = dot(x, x).sqrt();
        if (norm_x - 1.0).abs() > 1e-10 {
            return Err(domain(format!("x must be a unit vector, |x| = {norm_x}")));
        }
        let eta = dot(z, z).sqrt();
        Ok(dot(x, z) - self.psi(eta)?)
    }

    /// Fisher information `I_z(U, U)` in the Euclidean chart `z = η x̄`.
    pub fn fisher_metric(&self, z: &[f64], u: &[f64]) -> Result<f64> {
        self.check_vec(z)?;
        self.check_vec(u)?;
        let eta = dot(z, z).sqrt();
        let uu = dot(u, u);
        if eta == 0.0 {
            return Ok(uu / self.n as f64);
        }
        let r = self.resultant(eta)?;
        let u_eta = dot(u, z) / eta;
        let perp = (uu - u_eta * u_eta).max(0.0);
        // β²‖u‖² with u = U_⊥ / η equals (A/η) ‖U_⊥‖².
        Ok(r.a1 * u_eta * u_eta + r.a_over_eta * perp)
    }

    /// Draws `count` points from the vMF distribution with natural parameter
    /// `z`, by Wood's rejection sampler for the cosine `w = ⟨x, x̄⟩`.
    pub fn sample<R: Rng + ?Sized>(&self, z: &[f64], count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        self.check_vec(z)?;
        let n = self.n;
        let m = (n - 1) as f64;
        let eta = dot(z, z).sqrt();
        let mean: Vec<f64> = if eta > 0.0 { z.iter().map(|v| v / eta).collect() } else { unit(n, 0) };
        let b = m / (2.0 * eta + (4.0 * eta * eta + m * m).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = eta * x0 + m * (1.0 - x0 * x0).ln();
        let beta = Beta::new(0.5 * m, 0.5 * m).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let zb: f64 = beta.sample(rng);
            let w = (1.0 - (1.0 + b) * zb) / (1.0 - (1.0 - b) * zb);
            let u: f64 = rng.random();
            if eta * w + m * (1.0 - x0 * w).ln() - c < u.ln() {
                continue;
            }
            // Uniform direction orthogonal to the mean.
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let proj = dot(&v, &mean);
            v.iter_mut().zip(&mean).for_each(|(a, b)| *a -= proj * b);
            let nv = dot(&v, &v).sqrt();
            let s = (1.0 - w * w).max(0.0).sqrt() / nv;
            out.push(mean.iter().zip(&v).map(|(a, b)| w * a + s * b).collect());
        }
        Ok(out)
    }

    pub fn profile(&self) -> VmfProfile {
        VmfProfile { model: *self }
    }

    /// Surface and radial curvature over a grid of η, with the plateau
    /// estimate of the large-η limit.
    pub fn curvature_profile(&self, eta_grid: &[f64]) -> Result<CurvatureProfile> {
        if eta_grid.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(domain("curvature grid values must be positive"));
        }
        let profile = self.profile();
        let points = eta_grid
            .par_iter()
            .map(|&eta| {
                let (ks, kr) = profile.curvatures(eta)?;
                Ok(CurvaturePoint { eta, ks, kr })
            })
            .collect::<Result<Vec<_>>>()?;
        let plateau = Plateau::estimate(&points);
        Ok(CurvatureProfile { points, plateau })
    }

    /// Plateau of `(K_s, K_r)` over η ∈ [100, 200].
    pub fn limiting_curvatures(&self) -> Result<Plateau> {
        let grid: Vec<f64> = (0..=100).map(|i| 100.0 + i as f64).collect();
        self.curvature_profile(&grid)?
            .plateau
            .ok_or_else(|| Error::Numerical("empty plateau".into()))
    }

    fn check_vec(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(domain("non-finite vector entry"));
        }
        Ok(())
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvaturePoint {
    pub eta: f64,
    pub ks: f64,
    pub kr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub ks: f64,
    pub kr: f64,
    /// Largest max-minus-min range of either curvature over the plateau window.
    pub spread: f64,
    pub window: (f64, f64),
    pub count: usize,
}

impl Plateau {
    /// Mean over η ∈ [100, 200] when the grid reaches it, else over the top decade.
    pub fn estimate(points: &[CurvaturePoint]) -> Option<Self> {
        let max = points.iter().map(|p| p.eta).fold(f64::NAN, f64::max);
        if !max.is_finite() {
            return None;
        }
        let mut window = (100.0, 200.0);
        if points.iter().filter(|p| p.eta >= window.0 && p.eta <= window.1).count() < 2 {
            window = (max / 10.0, max);
        }
        let sel: Vec<&CurvaturePoint> =
            points.iter().filter(|p| p.eta >= window.0 && p.eta <= window.1).collect();
        let m = sel.len() as f64;
        let ks = sel.iter().map(|p| p.ks).sum::<f64>() / m;
        let kr = sel.iter().map(|p| p.kr).sum::<f64>() / m;
        let range = |f: fn(&CurvaturePoint) -> f64| {
            let lo = sel.iter().map(|p| f(p)).fold(f64::INFINITY, f64::min);
            let hi = sel.iter().map(|p| f(p)).fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        };
        let spread = range(|p| p.ks).max(range(|p| p.kr));
        Some(Self { ks, kr, spread, window, count: sel.len() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    pub points: Vec<CurvaturePoint>,
    pub plateau: Option<Plateau>,
}

/// Warping functions of the vMF metric in the coordinate σ = η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmfProfile {
    model: VmfModel,
}

impl VmfProfile {
    pub fn model(&self) -> &VmfModel {
        &self.model
    }

    /// Curvatures from the analytic derivatives; the base sphere has `K = 1`.
    pub fn curvatures(&self, eta: f64) -> Result<(f64, f64)> {
        if !(eta > 0.0) {
            return Err(domain("vMF curvature needs eta > 0"));
        }
        let r = self.model.resultant(eta)?;
        let alpha = r.a1.sqrt();
        let alpha_p = r.a2 / (2.0 * alpha);
        let beta = (eta * r.a).sqrt();
        let g1 = r.a + eta * r.a1;
        let g2 = 2.0 * r.a1 + eta * r.a2;
        let beta_p = g1 / (2.0 * beta);
        let beta_pp = (g2 - 2.0 * beta_p * beta_p) / (2.0 * beta);
        Ok(curvatures_from_derivatives(1.0, alpha, alpha_p, beta, beta_p, beta_pp))
    }
}

impl WarpProfile for VmfProfile {
    fn block_dims(&self) -> Vec<usize> {
        vec![self.model.n - 1]
    }
    fn base_name(&self) -> String {
        format!("S^{}", self.model.n - 1)
    }
    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn alpha(&self, eta: f64) -> f64 {
        self.model.resultant(eta).map(|r| r.a1.sqrt()).unwrap_or(f64::NAN)
    }
    fn beta(&self, _block: usize, eta: f64) -> f64 {
        self.model.resultant(eta).map(|r| (eta * r.a).sqrt()).unwrap_or(f64::NAN)
    }
    fn alpha_derivative(&self, eta: f64) -> Option<f64> {
        let r = self.model.resultant(eta).ok()?;
        Some(r.a2 / (2.0 * r.a1.sqrt()))
    }
    fn beta_derivatives(&self, _block: usize, eta: f64) -> Option<(f64, f64)> {
        if eta <= 0.0 {
            return None;
        }
        let r = self.model.resultant(eta).ok()?;
        let beta = (eta * r.a).sqrt();
        let b1 = (r.a + eta * r.a1) / (2.0 * beta);
        let b2 = (2.0 * r.a1 + eta * r.a2 - 2.0 * b1 * b1) / (2.0 * beta);
        Some((b1, b2))
    }
}
