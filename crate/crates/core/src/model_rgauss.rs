//! Riemannian Gaussian distributions on the SPD cone `P_n`.
//!
//! The density `exp(−d²(x, x̄)/2σ²)/Z(σ)` is an exponential family in
//! `η = −1/(2σ²)` with sufficient statistic `d²(x, x̄)`, so `ψ' = E d²` and
//! `ψ'' = Var d²`. Both moments are estimated by importance sampling of the
//! eigenvalue integral
//!
//! ```text
//! Z(σ) ∝ ∫ exp(−|r|²/2σ²) Π_{i<j} sinh(|r_i − r_j|/2) dr,
//! ```
//!
//! restricted to ordered `r`. The proposal is an equal mixture of
//! - the ordered eigenvalues of a GOE matrix with scale σ, which matches the
//!   integrand at small σ where `sinh(h) ≈ h`;
//! - a Gaussian centred at `σ² c / 2` with `c_k = 2k − n − 1`, which matches
//!   the integrand at large σ where `sinh(h) ≈ e^h / 2`.
//!
//! The same standardized draws are reused at every grid point, so estimated
//! curves are smooth in σ. Batches use independent ChaCha streams and are
//! reduced in a fixed order, so tables are reproducible bit-for-bit.

use crate::error::{domain, Error, Result};
use crate::interp::Hermite;
use crate::spd::{affine_distance, derham_distances_sq, derham_split, SpdMatrix, SpdTangent};
use crate::warped::WarpProfile;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;
use std::sync::Arc;

pub const BATCHES: usize = 20;
pub const MIN_SAMPLES: usize = 10_000;

/// Tabulated log-normalizer and its first two η-derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiTable {
    pub n: usize,
    pub eta: Vec<f64>,
    /// `ψ(η)` up to an additive constant, zero at the first grid point.
    pub psi: Vec<f64>,
    pub psi_p: Vec<f64>,
    pub psi_pp: Vec<f64>,
    pub stderr_psi_p: Vec<f64>,
    pub stderr_psi_pp: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

/// `η` grid for `count` log-spaced σ in `[sigma_min, sigma_max]`.
pub fn eta_grid_from_sigma(sigma_min: f64, sigma_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(sigma_min > 0.0 && sigma_max > sigma_min) || count < 2 {
        return Err(domain("sigma grid needs 0 < min < max and at least two points"));
    }
    Ok((0..count)
        .map(|i| {
            let s = sigma_min * (sigma_max / sigma_min).powf(i as f64 / (count - 1) as f64);
            eta_of_sigma(s)
        })
        .collect())
}

/// 40 log-spaced values of σ in `[0.05, 5]`.
pub fn default_eta_grid() -> Vec<f64> {
    eta_grid_from_sigma(0.05, 5.0, 40).expect("valid default grid")
}

pub fn eta_of_sigma(sigma: f64) -> f64 {
    -0.5 / (sigma * sigma)
}

pub fn sigma_of_eta(eta: f64) -> f64 {
    (-0.5 / eta).sqrt()
}

struct Draw {
    goe: bool,
    v: Vec<f64>,
}

fn draw_batch(n: usize, m: usize, seed: u64, batch: usize) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    (0..m)
        .map(|_| {
            let goe = rng.random::<bool>();
            let v = if goe {
                let mut h = DMatrix::zeros(n, n);
                for i in 0..n {
                    h[(i, i)] = rng.sample::<f64, _>(StandardNormal);
                    for j in i + 1..n {
                        let e = rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
                        h[(i, j)] = e;
                        h[(j, i)] = e;
                    }
                }
                let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
                ev.sort_by(f64::total_cmp);
                ev
            } else {
                (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
            };
            Draw { goe, v }
        })
        .collect()
}

fn log_sinh(h: f64) -> f64 {
    h + (-(-2.0 * h).exp()).ln_1p() - LN_2
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Precomputed σ-independent constants of the proposal densities.
struct Proposal {
    n: usize,
    ln_n_factorial: f64,
    /// `Σ_j [lnΓ(1 + j/2) − lnΓ(3/2)] + (n/2) ln 2π`.
    ln_mehta: f64,
    centre: Vec<f64>,
}

impl Proposal {
    fn new(n: usize) -> Self {
        let nf = n as f64;
        let ln_mehta = (1..=n)
            .map(|j| libm::lgamma(1.0 + 0.5 * j as f64) - libm::lgamma(1.5))
            .sum::<f64>()
            + 0.5 * nf * (2.0 * PI).ln();
        Self {
            n,
            ln_n_factorial: (1..=n).map(|k| (k as f64).ln()).sum(),
            ln_mehta,
            centre: (1..=n).map(|k| 2.0 * k as f64 - nf - 1.0).collect(),
        }
    }

    /// Log importance weight and `|r|²` for one standardized draw at scale σ.
    fn weight(&self, d: &Draw, sigma: f64, r: &mut [f64]) -> (f64, f64) {
        let n = self.n;
        let s2 = sigma * sigma;
        for k in 0..n {
            r[k] = if d.goe { sigma * d.v[k] } else { 0.5 * s2 * self.centre[k] + sigma * d.v[k] };
        }
        let sq: f64 = r.iter().map(|x| x * x).sum();
        if r.windows(2).any(|w| w[1] < w[0]) {
            return (f64::NEG_INFINITY, sq);
        }
        let mut log_sinh_sum = 0.0;
        let mut log_vdm = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let h = r[j] - r[i];
                log_sinh_sum += log_sinh(0.5 * h);
                log_vdm += h.ln();
            }
        }
        let nf = n as f64;
        let ln_sigma = sigma.ln();
        let log_f = -sq / (2.0 * s2) + log_sinh_sum;
        let log_q1 = self.ln_n_factorial - sq / (2.0 * s2) + log_vdm
            - (nf + 0.5 * nf * (nf - 1.0)) * ln_sigma
            - self.ln_mehta;
        let dev: f64 = r.iter().zip(&self.centre).map(|(x, c)| (x - 0.5 * s2 * c).powi(2)).sum();
        let log_q2 = -dev / (2.0 * s2) - 0.5 * nf * (2.0 * PI * s2).ln();
        (log_f - (logaddexp(log_q1, log_q2) - LN_2), sq)
    }
}

/// Weighted moments of one batch at one grid point.
#[derive(Clone, Copy)]
struct BatchMoments {
    log_scale: f64,
    weight: f64,
    mean: f64,
    var: f64,
}

fn batch_moments(lw: &[f64], q: &[f64]) -> BatchMoments {
    let l = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|&x| (x - l).exp()).collect();
    let s0: f64 = w.iter().sum();
    let mean = w.iter().zip(q).map(|(w, q)| w * q).sum::<f64>() / s0;
    let var = w.iter().zip(q).map(|(w, q)| w * (q - mean).powi(2)).sum::<f64>() / s0;
    BatchMoments { log_scale: l, weight: s0, mean, var }
}

/// Estimates `ψ'` and `ψ''` on `eta_grid` (strictly increasing, all `< 0`).
///
/// Runs on the current rayon pool; the result does not depend on its size.
pub fn tabulate_psi(n: usize, eta_grid: &[f64], samples: usize, seed: u64) -> Result<PsiTable> {
    if n == 0 {
        return Err(domain("matrix dimension must be >= 1"));
    }
    if samples < MIN_SAMPLES {
        return Err(domain(format!("at least {MIN_SAMPLES} samples are required, got {samples}")));
    }
    if eta_grid.len() < 2 || eta_grid.iter().any(|&e| !(e < 0.0) || !e.is_finite()) {
        return Err(domain("eta grid needs at least two finite negative values"));
    }
    if eta_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("eta grid must be strictly increasing"));
    }
    let per_batch = samples.div_ceil(BATCHES);
    let proposal = Proposal::new(n);
    let sigmas: Vec<f64> = eta_grid.iter().map(|&e| sigma_of_eta(e)).collect();

    let per_batch_results: Vec<Vec<BatchMoments>> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let draws = draw_batch(n, per_batch, seed, b);
            let mut r = vec![0.0; n];
            let mut lw = vec![0.0; per_batch];
            let mut q = vec![0.0; per_batch];
            sigmas
                .iter()
                .map(|&s| {
                    for (i, d) in draws.iter().enumerate() {
                        (lw[i], q[i]) = proposal.weight(d, s, &mut r);
                    }
                    batch_moments(&lw, &q)
                })
                .collect()
        })
        .collect();

    let g = eta_grid.len();
    let mut psi_p = vec![0.0; g];
    let mut psi_pp = vec![0.0; g];
    let mut se_p = vec![0.0; g];
    let mut se_pp = vec![0.0; g];
    for k in 0..g {
        let bm: Vec<BatchMoments> = per_batch_results.iter().map(|v| v[k]).collect();
        let l = bm.iter().map(|m| m.log_scale).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = bm.iter().map(|m| m.weight * (m.log_scale - l).exp()).collect();
        let wt: f64 = w.iter().sum();
        let mean = bm.iter().zip(&w).map(|(m, w)| w * m.mean).sum::<f64>() / wt;
        let var = bm.iter().zip(&w).map(|(m, w)| w * (m.var + (m.mean - mean).powi(2))).sum::<f64>() / wt;
        if !(var > 0.0) || !mean.is_finite() {
            return Err(Error::Numerical(format!("degenerate moments at eta = {}", eta_grid[k])));
        }
        psi_p[k] = mean;
        psi_pp[k] = var;
        se_p[k] = batch_stderr(bm.iter().map(|m| m.mean));
        se_pp[k] = batch_stderr(bm.iter().map(|m| m.var));
    }
    let mut psi = vec![0.0; g];
    for k in 1..g {
        psi[k] = psi[k - 1] + 0.5 * (eta_grid[k] - eta_grid[k - 1]) * (psi_p[k] + psi_p[k - 1]);
    }
    Ok(PsiTable {
        n,
        eta: eta_grid.to_vec(),
        psi,
        psi_p,
        psi_pp,
        stderr_psi_p: se_p,
        stderr_psi_pp: se_pp,
        samples: per_batch * BATCHES,
        seed,
    })
}

fn batch_stderr(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (var / m).sqrt()
}

fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

impl PsiTable {
    pub const CSV_HEADER: &'static str =
        "eta,sigma,psi,psi_p,psi_pp,stderr_psi_p,stderr_psi_pp,samples,seed";

    pub fn sigma(&self) -> Vec<f64> {
        self.eta.iter().map(|&e| sigma_of_eta(e)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for k in 0..self.eta.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                fmt12(self.eta[k]),
                fmt12(sigma_of_eta(self.eta[k])),
                fmt12(self.psi[k]),
                fmt12(self.psi_p[k]),
                fmt12(self.psi_pp[k]),
                fmt12(self.stderr_psi_p[k]),
                fmt12(self.stderr_psi_pp[k]),
                self.samples,
                self.seed
            );
        }
        out
    }

    pub fn from_csv(n: usize, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty psi table".into()))?;
        if header.trim() != Self::CSV_HEADER {
            return Err(Error::Parse(format!("unexpected psi table header: {header}")));
        }
        let mut t = PsiTable {
            n,
            eta: vec![],
            psi: vec![],
            psi_p: vec![],
            psi_pp: vec![],
            stderr_psi_p: vec![],
            stderr_psi_pp: vec![],
            samples: 0,
            seed: 0,
        };
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 9 {
                return Err(Error::Parse(format!("row {}: expected 9 columns", i + 1)));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)));
            t.eta.push(num(f[0])?);
            t.psi.push(num(f[2])?);
            t.psi_p.push(num(f[3])?);
            t.psi_pp.push(num(f[4])?);
            t.stderr_psi_p.push(num(f[5])?);
            t.stderr_psi_pp.push(num(f[6])?);
            t.samples = f[7].parse().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
            t.seed = f[8].parse().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
        }
        if t.eta.len() < 2 {
            return Err(Error::Parse("psi table needs at least two rows".into()));
        }
        if t.psi_pp.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Parse("psi table has non-positive psi_pp".into()));
        }
        Ok(t)
    }
}

/// Interpolated view of a [`PsiTable`] in the scale coordinate.
///
/// `ψ'` and `ψ''` are monotone-cubic in `log σ`; `ψ` is cubic Hermite in η
/// with slopes `ψ'`. Arguments outside the grid are rejected.
#[derive(Debug, Clone)]
pub struct PsiInterp {
    psi_p: Hermite,
    psi_pp: Hermite,
    psi: Hermite,
    sigma_range: (f64, f64),
}

impl PsiInterp {
    pub fn new(table: &PsiTable) -> Result<Self> {
        let log_sigma: Vec<f64> = table.eta.iter().map(|&e| sigma_of_eta(e).ln()).collect();
        let psi_p = Hermite::monotone(log_sigma.clone(), table.psi_p.clone())?;
        let psi_pp = Hermite::monotone(log_sigma, table.psi_pp.clone())?;
        let psi = Hermite::new(table.eta.clone(), table.psi.clone(), table.psi_p.clone())?;
        let lo = sigma_of_eta(table.eta[0]);
        let hi = sigma_of_eta(*table.eta.last().unwrap());
        Ok(Self { psi_p, psi_pp, psi, sigma_range: (lo, hi) })
    }

    pub fn sigma_range(&self) -> (f64, f64) {
        self.sigma_range
    }

    fn arg(&self, sigma: f64) -> Result<f64> {
        let (lo, hi) = self.sigma_range;
        // Round-off at the grid ends is tolerated.
        let tol = 1e-12 * hi;
        if !(sigma >= lo - tol && sigma <= hi + tol) {
            return Err(Error::OutOfRange { what: "sigma", value: sigma, lo, hi });
        }
        Ok(sigma.clamp(lo, hi).ln())
    }

    /// `(ψ'(σ), dψ'/dσ)`.
    pub fn psi_p(&self, sigma: f64) -> Result<(f64, f64)> {
        let (v, d) = self.psi_p.eval(self.arg(sigma)?)?;
        Ok((v, d / sigma))
    }

    pub fn psi_pp(&self, sigma: f64) -> Result<f64> {
        Ok(self.psi_pp.eval(self.arg(sigma)?)?.0)
    }

    pub fn psi(&self, sigma: f64) -> Result<f64> {
        self.arg(sigma)?;
        let (lo, hi) = self.psi.range();
        Ok(self.psi.eval(eta_of_sigma(sigma).clamp(lo, hi))?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MahalanobisCoeffs {
    /// `−2η = 1/σ²`.
    pub beta1_sq: f64,
    beta2_sq: Option<f64>,
}

impl MahalanobisCoeffs {
    /// `8η²ψ₂'(η)/(n² + n − 2)`; undefined for `n = 1`.
    pub fn beta2_sq(&self) -> Result<f64> {
        self.beta2_sq.ok_or_else(|| domain("beta2 is undefined for n = 1"))
    }
}

/// A Riemannian Gaussian model on `P_n`.
#[derive(Debug, Clone)]
pub struct RGaussModel {
    n: usize,
    table: Option<Arc<PsiTable>>,
    interp: Option<Arc<PsiInterp>>,
}

impl RGaussModel {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(domain("matrix dimension must be >= 1"));
        }
        Ok(Self { n, table: None, interp: None })
    }

    pub fn with_table(mut self, table: PsiTable) -> Result<Self> {
        if table.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: table.n });
        }
        self.interp = Some(Arc::new(PsiInterp::new(&table)?));
        self.table = Some(Arc::new(table));
        Ok(self)
    }

    /// Tabulates ψ and attaches the table.
    pub fn tabulated(n: usize, eta_grid: &[f64], samples: usize, seed: u64) -> Result<Self> {
        Self::new(n)?.with_table(tabulate_psi(n, eta_grid, samples, seed)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of the determinant-one factor, `(n² + n − 2)/2`.
    pub fn sp_dim(&self) -> usize {
        (self.n * self.n + self.n - 2) / 2
    }

    pub fn table(&self) -> Result<&PsiTable> {
        self.table.as_deref().ok_or_else(|| domain("no psi table attached"))
    }

    pub fn interp(&self) -> Result<&PsiInterp> {
        self.interp.as_deref().ok_or_else(|| domain("no psi table attached"))
    }

    /// `ψ₂'(σ) = ψ'(σ) − σ²` with its σ-derivative.
    pub fn psi2_p(&self, sigma: f64) -> Result<(f64, f64)> {
        let (v, d) = self.interp()?.psi_p(sigma)?;
        Ok((v - sigma * sigma, d - 2.0 * sigma))
    }

    pub fn coeffs(&self, sigma: f64) -> Result<MahalanobisCoeffs> {
        if !(sigma > 0.0) {
            return Err(domain("sigma must be positive"));
        }
        let beta1_sq = 1.0 / (sigma * sigma);
        let beta2_sq = if self.n >= 2 {
            let (p2, _) = self.psi2_p(sigma)?;
            let eta = eta_of_sigma(sigma);
            Some(8.0 * eta * eta * p2 / (self.n * self.n + self.n - 2) as f64)
        } else {
            None
        };
        Ok(MahalanobisCoeffs { beta1_sq, beta2_sq })
    }

    fn check(&self, x: &SpdMatrix) -> Result<()> {
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.dim() });
        }
        Ok(())
    }

    /// `ψ''u_η² − 2η Q(u₁,u₁) + 8η²ψ₂'/(n²+n−2) Q(u₂,u₂)`.
    pub fn fisher_metric(&self, x: &SpdMatrix, eta: f64, u_eta: f64, u: &SpdTangent) -> Result<f64> {
        self.check(x)?;
        if !(eta < 0.0) {
            return Err(domain("eta must be negative"));
        }
        let sigma = sigma_of_eta(eta);
        let psi_pp = self.interp()?.psi_pp(sigma)?;
        let split = derham_split(x, u)?;
        let q1 = crate::spd::affine_metric(x, &split.u1, &split.u1)?;
        let q2 = crate::spd::affine_metric(x, &split.u2, &split.u2)?;
        let c = self.coeffs(sigma)?;
        let mut v = psi_pp * u_eta * u_eta + c.beta1_sq * q1;
        if self.n >= 2 {
            v += c.beta2_sq()? * q2;
        } else if q2 > 1e-20 * q1.max(1.0) {
            return Err(domain("n = 1 admits no trace-free tangent component"));
        }
        Ok(v)
    }

    /// Distance on `P_n` induced by the metric at fixed σ.
    pub fn generalized_mahalanobis(&self, x: &SpdMatrix, y: &SpdMatrix, sigma: f64) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        let c = self.coeffs(sigma)?;
        let (d1, d2) = derham_distances_sq(x, y)?;
        let mut v = c.beta1_sq * d1;
        if self.n >= 2 {
            v += c.beta2_sq()? * d2;
        }
        Ok(v.sqrt())
    }

    /// `−d²(x, x̄)/2σ² − ψ(η)`, up to the table's additive constant.
    pub fn log_density(&self, x: &SpdMatrix, mean: &SpdMatrix, sigma: f64) -> Result<f64> {
        self.check(x)?;
        self.check(mean)?;
        let psi = self.interp()?.psi(sigma)?;
        let d = affine_distance(x, mean)?;
        Ok(-d * d / (2.0 * sigma * sigma) - psi)
    }

    /// Log density split into the log-determinant Gaussian factor and the
    /// determinant-one factor.
    pub fn log_density_factors(&self, x: &SpdMatrix, mean: &SpdMatrix, sigma: f64) -> Result<(f64, f64)> {
        self.check(x)?;
        self.check(mean)?;
        let psi = self.interp()?.psi(sigma)?;
        let eta = eta_of_sigma(sigma);
        let psi1 = -0.5 * (-eta).ln();
        let (d1, d2) = derham_distances_sq(x, mean)?;
        let s2 = 2.0 * sigma * sigma;
        Ok((-d1 / s2 - psi1, -d2 / s2 - (psi - psi1)))
    }

    pub fn profile(&self) -> Result<RGaussProfile> {
        Ok(RGaussProfile { model: self.clone(), range: self.interp()?.sigma_range() })
    }
}

/// `β(σ) · d(x̄, ȳ)` for an irreducible base.
pub fn generic_mahalanobis(beta_sigma: f64, base_distance: f64) -> Result<f64> {
    if !(beta_sigma >= 0.0) || !(base_distance >= 0.0) {
        return Err(domain("Mahalanobis inputs must be nonnegative"));
    }
    Ok(beta_sigma * base_distance)
}

/// Warping functions of the Riemannian Gaussian metric in the σ coordinate:
/// `α = √ψ''/σ³`, `β₁ = 1/σ` and, for `n ≥ 2`, `β₂² = 2ψ₂'/((n²+n−2)σ⁴)`.
#[derive(Debug, Clone)]
pub struct RGaussProfile {
    model: RGaussModel,
    range: (f64, f64),
}

impl RGaussProfile {
    pub fn model(&self) -> &RGaussModel {
        &self.model
    }

    fn beta2_and_prime(&self, sigma: f64) -> Option<(f64, f64)> {
        let m = (self.model.n * self.model.n + self.model.n - 2) as f64;
        let (p2, dp2) = self.model.psi2_p(sigma).ok()?;
        let s4 = sigma.powi(4);
        let b2 = 2.0 * p2 / (m * s4);
        let db2 = 2.0 / m * (dp2 / s4 - 4.0 * p2 / (s4 * sigma));
        let b = b2.sqrt();
        Some((b, db2 / (2.0 * b)))
    }
}

impl WarpProfile for RGaussProfile {
    fn block_dims(&self) -> Vec<usize> {
        if self.model.n >= 2 {
            vec![1, self.model.sp_dim()]
        } else {
            vec![1]
        }
    }
    fn base_name(&self) -> String {
        format!("P_{}", self.model.n)
    }
    fn domain(&self) -> (f64, f64) {
        self.range
    }
    fn alpha(&self, sigma: f64) -> f64 {
        match self.model.interp().and_then(|i| i.psi_pp(sigma)) {
            Ok(v) => v.sqrt() / sigma.powi(3),
            Err(_) => f64::NAN,
        }
    }
    fn beta(&self, block: usize, sigma: f64) -> f64 {
        if block == 0 {
            1.0 / sigma
        } else {
            self.beta2_and_prime(sigma).map(|b| b.0).unwrap_or(f64::NAN)
        }
    }
    fn beta_prime(&self, block: usize, sigma: f64) -> Option<f64> {
        if block == 0 {
            Some(-1.0 / (sigma * sigma))
        } else {
            self.beta2_and_prime(sigma).map(|b| b.1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn n1_is_exact_gaussian() {
        let grid = eta_grid_from_sigma(0.1, 3.0, 6).unwrap();
        let t = tabulate_psi(1, &grid, 20_000, 3).unwrap();
        for k in 0..grid.len() {
            let exact = -0.5 / grid[k];
            assert!((t.psi_p[k] - exact).abs() < 4.0 * t.stderr_psi_p[k] + 1e-15);
            // Var of σ²χ²₁ is 2σ⁴.
            assert!((t.psi_pp[k] / (2.0 * exact * exact) - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let g = default_eta_grid();
        assert!(tabulate_psi(2, &g, 100, 1).is_err());
        assert!(tabulate_psi(2, &[0.5, 1.0], 20_000, 1).is_err());
        assert!(tabulate_psi(2, &[-1.0, -2.0], 20_000, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = eta_grid_from_sigma(0.2, 2.0, 5).unwrap();
        let t = tabulate_psi(2, &g, 10_000, 9).unwrap();
        let text = t.to_csv();
        assert!(text.starts_with(PsiTable::CSV_HEADER));
        let back = PsiTable::from_csv(2, &text).unwrap();
        assert_eq!(back.to_csv(), text);
        for k in 0..g.len() {
            assert_relative_eq!(back.psi_p[k], t.psi_p[k], max_relative = 1e-11);
        }
    }

    #[test]
    fn beta2_undefined_for_n1() {
        let g = eta_grid_from_sigma(0.5, 2.0, 4).unwrap();
        let m = RGaussModel::tabulated(1, &g, 10_000, 1).unwrap();
        assert!(m.coeffs(1.0).unwrap().beta2_sq().is_err());
        assert_relative_eq!(m.coeffs(1.0).unwrap().beta1_sq, 1.0);
    }

    #[test]
    fn out_of_table_is_an_error() {
        let g = eta_grid_from_sigma(0.5, 2.0, 4).unwrap();
        let m = RGaussModel::tabulated(2, &g, 10_000, 1).unwrap();
        let i = SpdMatrix::identity(2);
        assert!(matches!(m.generalized_mahalanobis(&i, &i, 3.0), Err(Error::OutOfRange { .. })));
        assert!(m.generalized_mahalanobis(&i, &i, 0.4).is_err());
        assert_eq!(m.generalized_mahalanobis(&i, &i, 1.0).unwrap(), 0.0);
    }
}
