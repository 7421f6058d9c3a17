//! Warped and multiply-warped metrics
//! `I(U,U) = (α(σ) u_σ)² + Σ_q β_q(σ)² Q(u_q, u_q)`
//! on a product of a base manifold with the half-line of scales.

use crate::error::{domain, Error, Result};
use crate::quadrature;

/// Smallest scale accepted by the generic operations.
pub const MIN_SIGMA: f64 = 1e-8;

/// The warping data `(α, β_1, ..., β_r)` of a metric.
///
/// Analytic derivatives are optional. Curvature evaluation falls back to
/// Richardson-extrapolated central differences when they are missing.
pub trait WarpProfile: Send + Sync {
    fn block_dims(&self) -> Vec<usize>;
    fn base_name(&self) -> String;
    /// Closed interval of admissible σ.
    fn domain(&self) -> (f64, f64);
    fn alpha(&self, sigma: f64) -> f64;
    fn beta(&self, block: usize, sigma: f64) -> f64;

    fn num_blocks(&self) -> usize {
        self.block_dims().len()
    }
    fn alpha_derivative(&self, _sigma: f64) -> Option<f64> {
        None
    }
    /// `(dβ/dσ, d²β/dσ²)` for one block.
    fn beta_derivatives(&self, _block: usize, _sigma: f64) -> Option<(f64, f64)> {
        None
    }
    /// `dβ/dσ` alone, for profiles that know the first derivative only.
    fn beta_prime(&self, block: usize, sigma: f64) -> Option<f64> {
        self.beta_derivatives(block, sigma).map(|d| d.0)
    }
}

impl<T: WarpProfile + ?Sized> WarpProfile for &T {
    fn block_dims(&self) -> Vec<usize> {
        (**self).block_dims()
    }
    fn base_name(&self) -> String {
        (**self).base_name()
    }
    fn domain(&self) -> (f64, f64) {
        (**self).domain()
    }
    fn alpha(&self, sigma: f64) -> f64 {
        (**self).alpha(sigma)
    }
    fn beta(&self, block: usize, sigma: f64) -> f64 {
        (**self).beta(block, sigma)
    }
    fn num_blocks(&self) -> usize {
        (**self).num_blocks()
    }
    fn alpha_derivative(&self, sigma: f64) -> Option<f64> {
        (**self).alpha_derivative(sigma)
    }
    fn beta_derivatives(&self, block: usize, sigma: f64) -> Option<(f64, f64)> {
        (**self).beta_derivatives(block, sigma)
    }
    fn beta_prime(&self, block: usize, sigma: f64) -> Option<f64> {
        (**self).beta_prime(block, sigma)
    }
}

/// Tangent vector reduced to its scale component and the squared base norms
/// `Q(u_q, u_q)` of its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentDecomposition {
    pub u_sigma: f64,
    pub block_norms: Vec<f64>,
}

impl TangentDecomposition {
    pub fn new(u_sigma: f64, block_norms: Vec<f64>) -> Self {
        Self { u_sigma, block_norms }
    }
}

/// The isotropic normal model on `R^d`: `α = √(2d)/σ`, `β = 1/σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoNormalProfile {
    pub d: usize,
}

impl IsoNormalProfile {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(domain("isotropic normal dimension must be >= 1"));
        }
        Ok(Self { d })
    }

    /// Classical Mahalanobis distance `‖x − y‖ / σ`.
    pub fn mahalanobis(&self, x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
        if x.len() != self.d || y.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: x.len().max(y.len()) });
        }
        if !(sigma > 0.0) {
            return Err(domain("sigma must be positive"));
        }
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        Ok(d2.sqrt() / sigma)
    }
}

impl WarpProfile for IsoNormalProfile {
    fn block_dims(&self) -> Vec<usize> {
        vec![self.d]
    }
    fn base_name(&self) -> String {
        format!("R^{}", self.d)
    }
    fn domain(&self) -> (f64, f64) {
        (MIN_SIGMA, f64::INFINITY)
    }
    fn alpha(&self, sigma: f64) -> f64 {
        (2.0 * self.d as f64).sqrt() / sigma
    }
    fn beta(&self, _block: usize, sigma: f64) -> f64 {
        1.0 / sigma
    }
    fn alpha_derivative(&self, sigma: f64) -> Option<f64> {
        Some(-(2.0 * self.d as f64).sqrt() / (sigma * sigma))
    }
    fn beta_derivatives(&self, _block: usize, sigma: f64) -> Option<(f64, f64)> {
        Some((-1.0 / (sigma * sigma), 2.0 / (sigma * sigma * sigma)))
    }
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A profile assembled from closures, without analytic derivatives.
pub struct CustomProfile {
    alpha: ScalarFn,
    betas: Vec<ScalarFn>,
    block_dims: Vec<usize>,
    base_name: String,
    domain: (f64, f64),
}

impl CustomProfile {
    pub fn new(
        alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
        betas: Vec<ScalarFn>,
        block_dims: Vec<usize>,
        base_name: impl Into<String>,
    ) -> Result<Self> {
        if betas.is_empty() || betas.len() != block_dims.len() {
            return Err(Error::BlockMismatch { profile: betas.len(), input: block_dims.len() });
        }
        Ok(Self {
            alpha: Box::new(alpha),
            betas,
            block_dims,
            base_name: base_name.into(),
            domain: (MIN_SIGMA, f64::INFINITY),
        })
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }
}

impl WarpProfile for CustomProfile {
    fn block_dims(&self) -> Vec<usize> {
        self.block_dims.clone()
    }
    fn base_name(&self) -> String {
        self.base_name.clone()
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
    fn alpha(&self, sigma: f64) -> f64 {
        (self.alpha)(sigma)
    }
    fn beta(&self, block: usize, sigma: f64) -> f64 {
        (self.betas[block])(sigma)
    }
}

pub fn check_sigma<P: WarpProfile + ?Sized>(profile: &P, sigma: f64) -> Result<()> {
    let (lo, hi) = profile.domain();
    let lo_eff = if lo == 0.0 { 0.0 } else { lo.max(MIN_SIGMA) };
    if !sigma.is_finite() || sigma < lo_eff || sigma > hi {
        return Err(Error::OutOfRange { what: "sigma", value: sigma, lo: lo_eff, hi });
    }
    Ok(())
}

fn check_blocks<P: WarpProfile + ?Sized>(profile: &P, n: usize) -> Result<()> {
    if n != profile.num_blocks() {
        return Err(Error::BlockMismatch { profile: profile.num_blocks(), input: n });
    }
    Ok(())
}

pub fn metric_eval<P: WarpProfile + ?Sized>(
    profile: &P,
    sigma: f64,
    u: &TangentDecomposition,
) -> Result<f64> {
    let ext = extrinsic_metric(profile, sigma, &u.block_norms)?;
    let a = profile.alpha(sigma) * u.u_sigma;
    Ok(a * a + ext)
}

/// The metric restricted to the slice of fixed σ: `Σ_q β_q² Q(u_q, u_q)`.
pub fn extrinsic_metric<P: WarpProfile + ?Sized>(
    profile: &P,
    sigma: f64,
    block_norms: &[f64],
) -> Result<f64> {
    check_sigma(profile, sigma)?;
    check_blocks(profile, block_norms.len())?;
    Ok(block_norms
        .iter()
        .enumerate()
        .filter(|(_, &q)| q != 0.0)
        .map(|(b, &q)| profile.beta(b, sigma).powi(2) * q)
        .sum())
}

/// `r(σ1) − r(σ0) = ∫ α dσ`, negative when `σ1 < σ0`.
pub fn vertical_distance<P: WarpProfile + ?Sized>(profile: &P, sigma0: f64, sigma1: f64) -> Result<f64> {
    check_sigma(profile, sigma0)?;
    check_sigma(profile, sigma1)?;
    if sigma0 == sigma1 {
        return Ok(0.0);
    }
    let (a, b, sign) = if sigma0 < sigma1 { (sigma0, sigma1, 1.0) } else { (sigma1, sigma0, -1.0) };
    let value = if a > 0.0 && b / a > 4.0 {
        // Log substitution keeps wide scale ranges well resolved.
        quadrature::integrate(
            |u| {
                let s = u.exp();
                profile.alpha(s) * s
            },
            a.ln(),
            b.ln(),
            1e-10,
            1e-300,
        )?
        .value
    } else {
        quadrature::integrate(|s| profile.alpha(s), a, b, 1e-10, 1e-300)?.value
    };
    Ok(sign * value)
}

/// Tail diagnostics for the completeness integral.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletenessReport {
    /// `r(horizon) − r(sigma_ref)`.
    pub upper_integral: f64,
    /// `r(sigma_ref) − r(1/horizon)`.
    pub lower_integral: f64,
    /// Fitted exponent `p` in `α ~ σ^p` near `horizon`.
    pub upper_exponent: f64,
    /// Fitted exponent near `1/horizon`.
    pub lower_exponent: f64,
    /// `α` decays no faster than `1/σ` at the upper end.
    pub upper_diverging: bool,
    /// `α` grows at least like `1/σ` at the lower end.
    pub lower_diverging: bool,
}

const EXPONENT_SLACK: f64 = 0.05;

fn loglog_slope<P: WarpProfile + ?Sized>(profile: &P, lo: f64, hi: f64) -> f64 {
    let m = 16;
    let pts: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let s = lo * (hi / lo).powf(i as f64 / (m - 1) as f64);
            (s.ln(), profile.alpha(s).ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Partial vertical integrals towards both ends plus fitted tail exponents.
/// A heuristic, never a certificate.
pub fn completeness_probe<P: WarpProfile + ?Sized>(
    profile: &P,
    sigma_ref: f64,
    horizon: f64,
) -> Result<CompletenessReport> {
    if !(horizon > sigma_ref) || !(horizon > 1.0) {
        return Err(domain("horizon must exceed both sigma_ref and 1"));
    }
    let low = 1.0 / horizon;
    let upper_integral = vertical_distance(profile, sigma_ref, horizon)?;
    let lower_integral = vertical_distance(profile, low, sigma_ref)?;
    let upper_exponent = loglog_slope(profile, horizon / 100.0, horizon);
    let lower_exponent = loglog_slope(profile, low, 100.0 * low);
    Ok(CompletenessReport {
        upper_integral,
        lower_integral,
        upper_exponent,
        lower_exponent,
        upper_diverging: upper_exponent >= -1.0 - EXPONENT_SLACK,
        lower_diverging: lower_exponent <= -1.0 + EXPONENT_SLACK,
    })
}

/// First and second derivative by central differences with one Richardson step.
pub fn fd_derivatives(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
    let f0 = f(x);
    let d1 = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let d2 = |h: f64| (f(x + h) - 2.0 * f0 + f(x - h)) / (h * h);
    let first = (4.0 * d1(0.5 * h) - d1(h)) / 3.0;
    let second = (4.0 * d2(0.5 * h) - d2(h)) / 3.0;
    (first, second)
}

fn fd_step<P: WarpProfile + ?Sized>(profile: &P, sigma: f64) -> f64 {
    let h = f64::max(1e-4, 1e-4 * sigma);
    let (lo, hi) = profile.domain();
    // Keep all stencil points inside the domain.
    h.min(0.5 * (sigma - lo)).min(0.5 * (hi - sigma))
}

/// `(dβ/dσ, d²β/dσ², dα/dσ)`, analytic when the profile provides them.
pub fn profile_derivatives<P: WarpProfile + ?Sized>(profile: &P, block: usize, sigma: f64) -> (f64, f64, f64) {
    let h = fd_step(profile, sigma);
    let (b1, b2) = profile
        .beta_derivatives(block, sigma)
        .unwrap_or_else(|| fd_derivatives(|s| profile.beta(block, s), sigma, h));
    let a1 = profile
        .alpha_derivative(sigma)
        .unwrap_or_else(|| fd_derivatives(|s| profile.alpha(s), sigma, h).0);
    (b1, b2, a1)
}

/// Surface and radial sectional curvatures `(K_s, K_r)` of a single-block
/// warped metric whose base has constant curvature `base_curvature`.
pub fn curvatures<P: WarpProfile + ?Sized>(profile: &P, base_curvature: f64, sigma: f64) -> Result<(f64, f64)> {
    check_blocks(profile, 1)?;
    check_sigma(profile, sigma)?;
    if sigma <= 0.0 {
        return Err(domain("curvature needs sigma > 0"));
    }
    let (b1, b2, a1) = profile_derivatives(profile, 0, sigma);
    Ok(curvatures_from_derivatives(
        base_curvature,
        profile.alpha(sigma),
        a1,
        profile.beta(0, sigma),
        b1,
        b2,
    ))
}

/// `K_s = K/β² − (∂_r β / β)²` and `K_r = −∂²_r β / β` with `∂_r = α⁻¹ ∂_σ`.
pub fn curvatures_from_derivatives(k_base: f64, alpha: f64, alpha_p: f64, beta: f64, beta_p: f64, beta_pp: f64) -> (f64, f64) {
    let dr_beta = beta_p / alpha;
    let drr_beta = (beta_pp * alpha - beta_p * alpha_p) / alpha.powi(3);
    let ks = k_base / (beta * beta) - (dr_beta / beta).powi(2);
    let kr = -drr_beta / beta;
    (ks, kr)
}

/// Monotone table of `r(σ)` with exact evaluation and inversion.
///
/// Nodes are spaced geometrically; values between nodes are completed by
/// quadrature from the nearest lower node, and the inverse uses safeguarded
/// Newton steps inside the bracketing node interval.
pub struct VerticalCoordinate<P: WarpProfile> {
    profile: P,
    sigmas: Vec<f64>,
    rs: Vec<f64>,
}

impl<P: WarpProfile> VerticalCoordinate<P> {
    /// Builds the table on `[lo, hi]`, with `r(lo) = 0`.
    pub fn build(profile: P, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        check_sigma(&profile, lo)?;
        check_sigma(&profile, hi)?;
        if !(hi > lo) || nodes < 2 {
            return Err(domain("vertical coordinate needs lo < hi and at least two nodes"));
        }
        let mut sigmas = Vec::with_capacity(nodes);
        if lo == 0.0 {
            sigmas.push(0.0);
            let start = (hi * 1e-8).min(1e-6);
            for i in 0..nodes - 1 {
                sigmas.push(start * (hi / start).powf(i as f64 / (nodes - 2).max(1) as f64));
            }
        } else {
            for i in 0..nodes {
                sigmas.push(lo * (hi / lo).powf(i as f64 / (nodes - 1) as f64));
            }
        }
        *sigmas.last_mut().unwrap() = hi;
        let mut rs = vec![0.0; sigmas.len()];
        for i in 1..sigmas.len() {
            rs[i] = rs[i - 1] + vertical_distance(&profile, sigmas[i - 1], sigmas[i])?;
        }
        for w in rs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Numerical("vertical coordinate is not strictly increasing".into()));
            }
        }
        Ok(Self { profile, sigmas, rs })
    }

    pub fn profile(&self) -> &P {
        &self.profile
    }

    pub fn sigma_range(&self) -> (f64, f64) {
        (self.sigmas[0], *self.sigmas.last().unwrap())
    }

    pub fn r_range(&self) -> (f64, f64) {
        (self.rs[0], *self.rs.last().unwrap())
    }

    pub fn r(&self, sigma: f64) -> Result<f64> {
        let (lo, hi) = self.sigma_range();
        if !(sigma >= lo && sigma <= hi) {
            return Err(Error::OutOfRange { what: "sigma", value: sigma, lo, hi });
        }
        let i = self.sigmas.partition_point(|&s| s <= sigma).saturating_sub(1);
        Ok(self.rs[i] + vertical_distance(&self.profile, self.sigmas[i], sigma)?)
    }

    pub fn sigma(&self, r: f64) -> Result<f64> {
        let (rlo, rhi) = self.r_range();
        if !(r >= rlo && r <= rhi) {
            return Err(Error::OutOfRange { what: "r", value: r, lo: rlo, hi: rhi });
        }
        let i = self.rs.partition_point(|&x| x <= r).saturating_sub(1).min(self.rs.len() - 2);
        let (mut a, mut b) = (self.sigmas[i], self.sigmas[i + 1]);
        let target = r - self.rs[i];
        let base = self.sigmas[i];
        let mut s = 0.5 * (a + b);
        for _ in 0..200 {
            let g = vertical_distance(&self.profile, base, s)? - target;
            if g > 0.0 {
                b = s;
            } else {
                a = s;
            }
            let newton = s - g / self.profile.alpha(s);
            let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - s).abs() <= 1e-15 * s.abs().max(1e-300) || b - a <= 1e-15 * b {
                return Ok(next);
            }
            s = next;
        }
        Ok(s)
    }
}
