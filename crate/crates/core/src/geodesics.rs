//! Geodesics of warped metrics by reduction to a one-dimensional
//! conservative system.
//!
//! Along a geodesic each base block keeps its initial direction and is
//! traversed at the rate `β_q²(σ₀)/β_q²(σ)`, while the vertical distance
//! obeys `r̈ = −½ dV/dr` with `V(σ) = Σ_q C_q / β_q²(σ)` and
//! `C_q = β_q⁴(σ₀) Q(u_q, u_q)`. The total energy `E = ṙ² + V` is conserved.
//!
//! The solver integrates `(σ, ṙ, F_1..F_r, r)` with an adaptive
//! Dormand-Prince scheme, where `F_q(t) = ∫₀ᵗ β_q²(σ₀)/β_q²(σ(s)) ds`, and
//! recovers the base point as `exp_x̄(Σ_q F_q(t) u_q)`.

use crate::error::{domain, Error, Result};
use crate::model_rgauss::RGaussModel;
use crate::model_rgauss::RGaussProfile;
use crate::model_vmf::{dot, VmfModel, VmfProfile};
use crate::ode::{self, OdeOptions};
use crate::quadrature;
use crate::spd::{self, SpdMatrix, SpdTangent};
use crate::warped::{
    self, check_sigma, fd_derivatives, metric_eval, IsoNormalProfile, TangentDecomposition,
    VerticalCoordinate, WarpProfile,
};
use nalgebra::DMatrix;

/// Integration stops when σ leaves `[ESCAPE_LOW, ESCAPE_HIGH]`.
pub const ESCAPE_LOW: f64 = 1e-8;
pub const ESCAPE_HIGH: f64 = 1e8;

/// A base manifold whose geodesics through a point are known in closed form,
/// split into the blocks of a multiply-warped metric.
pub trait BaseSpace: Send + Sync {
    type Point: Clone + std::fmt::Debug;
    type Tangent: Clone + std::fmt::Debug;

    fn num_blocks(&self) -> usize;
    /// `Q_x(v, v)`.
    fn norm_sq(&self, x: &Self::Point, v: &Self::Tangent) -> f64;
    fn scale(&self, v: &Self::Tangent, c: f64) -> Self::Tangent;
    /// `exp_x(Σ_q c_q u_q)`.
    fn exp_blocks(&self, x: &Self::Point, blocks: &[Self::Tangent], coeffs: &[f64]) -> Self::Point;
    /// `∂/∂c_q exp_x(Σ_q c_q u_q)` for each block, as tangents at the image point.
    fn block_velocities(&self, x: &Self::Point, blocks: &[Self::Tangent], coeffs: &[f64]) -> Vec<Self::Tangent>;
    /// Coordinates used for output and finite differences.
    fn flatten(&self, x: &Self::Point) -> Vec<f64>;
    fn coordinate_names(&self) -> Vec<String>;
    /// Block norms `Q_x(v_q, v_q)` of a velocity given in flattened coordinates.
    fn block_speeds_sq(&self, x: &Self::Point, velocity: &[f64]) -> Vec<f64>;
    /// Distances between the block components of two points.
    fn block_distances(&self, a: &Self::Point, b: &Self::Point) -> Vec<f64>;
    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64 {
        self.block_distances(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
    }
    /// The point reached by continuing a vertical geodesic through σ = 0, if
    /// the model chart extends there.
    fn antipode(&self, _x: &Self::Point) -> Option<Self::Point> {
        None
    }
}

/// Flat `Rᵈ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Euclidean {
    pub d: usize,
}

impl BaseSpace for Euclidean {
    type Point = Vec<f64>;
    type Tangent = Vec<f64>;

    fn num_blocks(&self) -> usize {
        1
    }
    fn norm_sq(&self, _x: &Vec<f64>, v: &Vec<f64>) -> f64 {
        dot(v, v)
    }
    fn scale(&self, v: &Vec<f64>, c: f64) -> Vec<f64> {
        v.iter().map(|x| x * c).collect()
    }
    fn exp_blocks(&self, x: &Vec<f64>, blocks: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
        x.iter().zip(&blocks[0]).map(|(a, u)| a + coeffs[0] * u).collect()
    }
    fn block_velocities(&self, _x: &Vec<f64>, blocks: &[Vec<f64>], _c: &[f64]) -> Vec<Vec<f64>> {
        vec![blocks[0].clone()]
    }
    fn flatten(&self, x: &Vec<f64>) -> Vec<f64> {
        x.clone()
    }
    fn coordinate_names(&self) -> Vec<String> {
        (0..self.d).map(|i| format!("x{i}")).collect()
    }
    fn block_speeds_sq(&self, _x: &Vec<f64>, v: &[f64]) -> Vec<f64> {
        vec![dot(v, v)]
    }
    fn block_distances(&self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        vec![a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()]
    }
}

/// Unit sphere `S^{n−1} ⊂ Rⁿ`; tangents are ambient vectors orthogonal to the point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub n: usize,
}

impl BaseSpace for Sphere {
    type Point = Vec<f64>;
    type Tangent = Vec<f64>;

    fn num_blocks(&self) -> usize {
        1
    }
    fn norm_sq(&self, _x: &Vec<f64>, v: &Vec<f64>) -> f64 {
        dot(v, v)
    }
    fn scale(&self, v: &Vec<f64>, c: f64) -> Vec<f64> {
        v.iter().map(|x| x * c).collect()
    }
    fn exp_blocks(&self, x: &Vec<f64>, blocks: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
        let u = &blocks[0];
        let nu = dot(u, u).sqrt();
        if nu == 0.0 {
            return x.clone();
        }
        let th = coeffs[0] * nu;
        let (s, c) = th.sin_cos();
        x.iter().zip(u).map(|(a, b)| c * a + s * b / nu).collect()
    }
    fn block_velocities(&self, x: &Vec<f64>, blocks: &[Vec<f64>], coeffs: &[f64]) -> Vec<Vec<f64>> {
        let u = &blocks[0];
        let nu = dot(u, u).sqrt();
        let th = coeffs[0] * nu;
        let (s, c) = th.sin_cos();
        vec![x.iter().zip(u).map(|(a, b)| -nu * s * a + c * b).collect()]
    }
    fn flatten(&self, x: &Vec<f64>) -> Vec<f64> {
        x.clone()
    }
    fn coordinate_names(&self) -> Vec<String> {
        (0..self.n).map(|i| format!("x{i}")).collect()
    }
    fn block_speeds_sq(&self, x: &Vec<f64>, v: &[f64]) -> Vec<f64> {
        let radial = dot(x, v);
        vec![(dot(v, v) - radial * radial).max(0.0)]
    }
    fn block_distances(&self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        let chord = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        vec![2.0 * (0.5 * chord).min(1.0).asin()]
    }
    fn antipode(&self, x: &Vec<f64>) -> Option<Vec<f64>> {
        Some(x.iter().map(|v| -v).collect())
    }
}

/// `P_n` with blocks (log-determinant line, determinant-one part); for `n = 1`
/// only the first block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdBase {
    pub n: usize,
}

impl SpdBase {
    fn whiten(x: &SpdMatrix, u: &SpdTangent) -> DMatrix<f64> {
        let w = x.inv_sqrt();
        &w * &u.0 * &w
    }
}

fn sym_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new((m + m.transpose()) * 0.5);
    let d = eig.eigenvalues.map(f64::exp);
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

impl BaseSpace for SpdBase {
    type Point = SpdMatrix;
    type Tangent = SpdTangent;

    fn num_blocks(&self) -> usize {
        if self.n >= 2 {
            2
        } else {
            1
        }
    }
    fn norm_sq(&self, x: &SpdMatrix, v: &SpdTangent) -> f64 {
        spd::affine_metric(x, v, v).unwrap_or(f64::NAN)
    }
    fn scale(&self, v: &SpdTangent, c: f64) -> SpdTangent {
        v.scale(c)
    }
    fn exp_blocks(&self, x: &SpdMatrix, blocks: &[SpdTangent], coeffs: &[f64]) -> SpdMatrix {
        let mut u = SpdTangent::zeros(self.n);
        for (b, c) in blocks.iter().zip(coeffs) {
            u = u.add(&b.scale(*c));
        }
        spd::spd_exp(x, &u).expect("exponential of a finite tangent is SPD")
    }
    fn block_velocities(&self, x: &SpdMatrix, blocks: &[SpdTangent], coeffs: &[f64]) -> Vec<SpdTangent> {
        // The log-determinant block is a multiple of the identity after
        // whitening, so it commutes with the other block.
        let ws: Vec<DMatrix<f64>> = blocks.iter().map(|b| Self::whiten(x, b)).collect();
        let mut w = DMatrix::zeros(self.n, self.n);
        for (wq, c) in ws.iter().zip(coeffs) {
            w += wq * *c;
        }
        let e = sym_exp(&w);
        let s = x.sqrt();
        ws.iter()
            .map(|wq| {
                let v = &s * wq * &e * &s;
                SpdTangent((&v + v.transpose()) * 0.5)
            })
            .collect()
    }
    fn flatten(&self, x: &SpdMatrix) -> Vec<f64> {
        let m = x.matrix();
        let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for i in 0..self.n {
            for j in i..self.n {
                out.push(m[(i, j)]);
            }
        }
        out
    }
    fn coordinate_names(&self) -> Vec<String> {
        let mut out = vec![];
        for i in 0..self.n {
            for j in i..self.n {
                out.push(format!("x{i}{j}"));
            }
        }
        out
    }
    fn block_speeds_sq(&self, x: &SpdMatrix, v: &[f64]) -> Vec<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        let mut k = 0;
        for i in 0..self.n {
            for j in i..self.n {
                m[(i, j)] = v[k];
                m[(j, i)] = v[k];
                k += 1;
            }
        }
        let split = spd::derham_split(x, &SpdTangent(m)).expect("valid base point");
        let q1 = self.norm_sq(x, &split.u1);
        if self.n >= 2 {
            vec![q1, self.norm_sq(x, &split.u2)]
        } else {
            vec![q1]
        }
    }
    fn block_distances(&self, a: &SpdMatrix, b: &SpdMatrix) -> Vec<f64> {
        let (d1, d2) = spd::derham_distances_sq(a, b).expect("valid SPD points");
        if self.n >= 2 {
            vec![d1.sqrt(), d2.sqrt()]
        } else {
            vec![d1.sqrt()]
        }
    }
}

/// Initial value problem for a geodesic of a warped metric.
#[derive(Debug, Clone)]
pub struct GeodesicProblem<P: WarpProfile, B: BaseSpace> {
    pub profile: P,
    pub base: B,
    pub x0: B::Point,
    pub sigma0: f64,
    pub u_sigma: f64,
    /// Block components `u_q` of the initial base velocity, based at `x0`.
    pub blocks: Vec<B::Tangent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservedQuantities {
    pub energy: f64,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GeodesicSample<T> {
    pub t: f64,
    pub sigma: f64,
    /// `r(t) − r(0)`.
    pub r: f64,
    /// `ṙ`.
    pub r_dot: f64,
    /// Accumulated block parameters `F_q(t)`.
    pub f: Vec<f64>,
    pub point: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    Escaped { t: f64, sigma: f64, reason: String },
}

/// Maximum relative deviations along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    /// `|ṙ² + V(σ) − E| / E` over all samples.
    pub energy_identity: f64,
    /// `E` recomputed from `ṙ` and finite-difference block speeds of the
    /// base trajectory, over interior samples.
    pub energy_fd: Option<f64>,
    /// `C_q = β_q⁴ Q(ẋ_q, ẋ_q)` recomputed the same way, relative to `E`-scaled
    /// magnitudes.
    pub c_fd: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct GeodesicPath<T> {
    pub samples: Vec<GeodesicSample<T>>,
    pub conserved: ConservedQuantities,
    pub drift: Drift,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlightTime {
    Finite(f64),
    Divergent,
}

impl FlightTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            FlightTime::Finite(t) => Some(t),
            FlightTime::Divergent => None,
        }
    }
}

fn beta_prime<P: WarpProfile + ?Sized>(p: &P, q: usize, s: f64) -> f64 {
    p.beta_prime(q, s)
        .unwrap_or_else(|| warped::profile_derivatives(p, q, s).0)
}

impl<P: WarpProfile, B: BaseSpace> GeodesicProblem<P, B> {
    pub fn new(profile: P, base: B, x0: B::Point, sigma0: f64, u_sigma: f64, blocks: Vec<B::Tangent>) -> Result<Self> {
        if blocks.len() != profile.num_blocks() || blocks.len() != base.num_blocks() {
            return Err(Error::BlockMismatch { profile: profile.num_blocks(), input: blocks.len() });
        }
        check_sigma(&profile, sigma0)?;
        if !u_sigma.is_finite() {
            return Err(domain("u_sigma must be finite"));
        }
        Ok(Self { profile, base, x0, sigma0, u_sigma, blocks })
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| self.base.norm_sq(&self.x0, b)).collect()
    }

    pub fn is_vertical(&self) -> bool {
        self.block_norms().iter().all(|&q| q == 0.0)
    }

    /// `E = I_z(U, U)` and `C_q = β_q⁴(σ₀) Q(u_q, u_q)`.
    pub fn conserved_quantities(&self) -> Result<ConservedQuantities> {
        let norms = self.block_norms();
        let energy = metric_eval(&self.profile, self.sigma0, &TangentDecomposition::new(self.u_sigma, norms.clone()))?;
        let c = norms
            .iter()
            .enumerate()
            .map(|(q, &n)| if n == 0.0 { 0.0 } else { self.profile.beta(q, self.sigma0).powi(4) * n })
            .collect();
        Ok(ConservedQuantities { energy, c })
    }

    /// `V(σ) = Σ_q C_q / β_q²(σ)`.
    pub fn potential(&self, c: &[f64], sigma: f64) -> f64 {
        c.iter()
            .enumerate()
            .filter(|(_, &cq)| cq != 0.0)
            .map(|(q, &cq)| cq / self.profile.beta(q, sigma).powi(2))
            .sum()
    }

    fn potential_derivative(&self, c: &[f64], sigma: f64) -> f64 {
        c.iter()
            .enumerate()
            .filter(|(_, &cq)| cq != 0.0)
            .map(|(q, &cq)| -2.0 * cq * beta_prime(&self.profile, q, sigma) / self.profile.beta(q, sigma).powi(3))
            .sum()
    }

    fn in_domain(&self, sigma: f64) -> bool {
        let (lo, hi) = self.profile.domain();
        sigma.is_finite() && sigma >= lo.max(ESCAPE_LOW) && sigma <= hi.min(ESCAPE_HIGH)
    }

    /// Samples the geodesic at `steps + 1` equally spaced times in `[0, t_end]`.
    ///
    /// If σ leaves the profile domain or `[1e-8, 1e8]` the path is truncated
    /// and the termination records an escape.
    pub fn solve(&self, t_end: f64, steps: usize) -> Result<GeodesicPath<B::Point>> {
        if !(t_end > 0.0) || steps == 0 {
            return Err(domain("t_end must be positive and steps >= 1"));
        }
        let conserved = self.conserved_quantities()?;
        let times: Vec<f64> = (0..=steps).map(|k| t_end * k as f64 / steps as f64).collect();
        let (samples, termination) = if self.is_vertical() && self.base.antipode(&self.x0).is_some() && self.profile.domain().0 == 0.0 {
            self.solve_vertical_through_origin(&times)?
        } else {
            self.solve_ode(&times, &conserved)?
        };
        let drift = self.drift(&samples, &conserved);
        Ok(GeodesicPath { samples, conserved, drift, termination })
    }

    fn sample(&self, t: f64, y: &[f64]) -> GeodesicSample<B::Point> {
        let nb = self.blocks.len();
        let f = y[2..2 + nb].to_vec();
        GeodesicSample {
            t,
            sigma: y[0],
            r: y[2 + nb],
            r_dot: y[1],
            point: self.base.exp_blocks(&self.x0, &self.blocks, &f),
            f,
        }
    }

    fn solve_ode(&self, times: &[f64], cons: &ConservedQuantities) -> Result<(Vec<GeodesicSample<B::Point>>, Termination)> {
        let nb = self.blocks.len();
        let beta0_sq: Vec<f64> = (0..nb).map(|q| self.profile.beta(q, self.sigma0).powi(2)).collect();
        let c = &cons.c;
        let mut y0 = vec![0.0; nb + 3];
        y0[0] = self.sigma0;
        y0[1] = self.profile.alpha(self.sigma0) * self.u_sigma;
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let s = y[0];
            if !self.in_domain(s) {
                return false;
            }
            let a = self.profile.alpha(s);
            dy[0] = y[1] / a;
            let mut acc = 0.0;
            for q in 0..nb {
                let b = self.profile.beta(q, s);
                if c[q] != 0.0 {
                    acc += c[q] * beta_prime(&self.profile, q, s) / (a * b * b * b);
                }
                dy[2 + q] = beta0_sq[q] / (b * b);
            }
            dy[1] = acc;
            dy[2 + nb] = y[1];
            dy.iter().all(|v| v.is_finite())
        };
        let out = ode::integrate(rhs, 0.0, &y0, times, OdeOptions::default(), |_, _| true)?;
        let samples = times.iter().zip(&out.states).map(|(&t, y)| self.sample(t, y)).collect();
        let termination = match out.stopped {
            Some((t, y)) if out.domain_exit => Termination::Escaped {
                t,
                sigma: y[0],
                reason: "sigma left the domain of the warped metric".into(),
            },
            _ => Termination::Completed,
        };
        Ok((samples, termination))
    }

    /// Vertical geodesics of a chart that extends through σ = 0 are straight
    /// lines through the origin: `r` stays affine and the base point flips to
    /// its antipode while `r` is negative.
    fn solve_vertical_through_origin(&self, times: &[f64]) -> Result<(Vec<GeodesicSample<B::Point>>, Termination)> {
        let speed = self.profile.alpha(self.sigma0) * self.u_sigma;
        let t_end = *times.last().unwrap();
        let mut hi = self.sigma0.max(1.0);
        let r0 = warped::vertical_distance(&self.profile, 0.0, self.sigma0)?;
        let reach = r0.max(0.0) + speed.abs() * t_end;
        while warped::vertical_distance(&self.profile, 0.0, hi)? < reach * (1.0 + 1e-9) + 1e-12 {
            hi *= 2.0;
            if hi > ESCAPE_HIGH {
                return Err(Error::Numerical("vertical geodesic leaves the representable range".into()));
            }
        }
        let vc = VerticalCoordinate::build(&self.profile, 0.0, hi, 64)?;
        let flipped = self.base.antipode(&self.x0).expect("checked by caller");
        let nb = self.blocks.len();
        let mut samples = Vec::with_capacity(times.len());
        for &t in times {
            let rp = r0 + speed * t;
            let sigma = vc.sigma(rp.abs().min(vc.r_range().1))?;
            let point = if rp < 0.0 { flipped.clone() } else { self.x0.clone() };
            samples.push(GeodesicSample {
                t,
                sigma,
                r: speed * t,
                r_dot: if rp < 0.0 { -speed } else { speed },
                f: vec![t; nb],
                point,
            });
        }
        Ok((samples, Termination::Completed))
    }

    fn drift(&self, samples: &[GeodesicSample<B::Point>], cons: &ConservedQuantities) -> Drift {
        let e = cons.energy;
        let scale = if e > 0.0 { e } else { 1.0 };
        let energy_identity = samples
            .iter()
            .map(|s| (s.r_dot * s.r_dot + self.potential(&cons.c, s.sigma) - e).abs() / scale)
            .fold(0.0, f64::max);
        if samples.len() < 7 {
            return Drift { energy_identity, energy_fd: None, c_fd: None };
        }
        let h = samples[1].t - samples[0].t;
        let flat: Vec<Vec<f64>> = samples.iter().map(|s| self.base.flatten(&s.point)).collect();
        let nb = self.blocks.len();
        let mut energy_fd: f64 = 0.0;
        let mut c_fd = vec![0.0f64; nb];
        for k in 3..samples.len() - 3 {
            let v: Vec<f64> = (0..flat[k].len())
                .map(|i| {
                    let d = |j: usize| flat[k + j][i] - flat[k - j][i];
                    (45.0 * d(1) - 9.0 * d(2) + d(3)) / (60.0 * h)
                })
                .collect();
            let speeds = self.base.block_speeds_sq(&samples[k].point, &v);
            let s = samples[k].sigma;
            let mut ek = samples[k].r_dot.powi(2);
            for q in 0..nb {
                let b2 = self.profile.beta(q, s).powi(2);
                ek += b2 * speeds[q];
                let cq = b2 * b2 * speeds[q];
                let denom = if cons.c[q] > 0.0 { cons.c[q] } else { scale };
                c_fd[q] = c_fd[q].max((cq - cons.c[q]).abs() / denom);
            }
            energy_fd = energy_fd.max((ek - e).abs() / scale);
        }
        Drift { energy_identity, energy_fd: Some(energy_fd), c_fd: Some(c_fd) }
    }

    /// The geodesic traversed backwards from the last sample of `path`.
    pub fn reversed(&self, path: &GeodesicPath<B::Point>) -> Result<Self>
    where
        P: Clone,
        B: Clone,
    {
        let end = path.samples.last().ok_or_else(|| domain("empty path"))?;
        if !matches!(path.termination, Termination::Completed) {
            return Err(domain("cannot reverse an escaped path"));
        }
        let vel = self.base.block_velocities(&self.x0, &self.blocks, &end.f);
        let blocks = vel
            .iter()
            .enumerate()
            .map(|(q, v)| {
                let rate = (self.profile.beta(q, self.sigma0) / self.profile.beta(q, end.sigma)).powi(2);
                self.base.scale(v, -rate)
            })
            .collect();
        let u_sigma = -end.r_dot / self.profile.alpha(end.sigma);
        Self::new(self.profile.clone(), self.base.clone(), end.point.clone(), end.sigma, u_sigma, blocks)
    }

    /// First time at which σ reaches `sigma_target`, by quadrature of
    /// `dt = α dσ / √(E − V(σ))`.
    ///
    /// `sigma_target` may be `0` or `+∞` to ask for the time to reach either
    /// end; the answer is then [`FlightTime::Divergent`] when the tail test
    /// says the integral diverges. Turning points are located by bisection
    /// and integrated with a square-root substitution.
    pub fn time_of_flight(&self, sigma_target: f64) -> Result<FlightTime> {
        let cons = self.conserved_quantities()?;
        let e = cons.energy;
        let s0 = self.sigma0;
        if sigma_target == s0 {
            return Ok(FlightTime::Finite(0.0));
        }
        if !(sigma_target >= 0.0) {
            return Err(domain("target sigma must be >= 0"));
        }
        let gap = |s: f64| e - self.potential(&cons.c, s);
        let start_is_turning = self.u_sigma == 0.0;
        let dir = if self.u_sigma != 0.0 {
            self.u_sigma.signum()
        } else {
            let force = -self.potential_derivative(&cons.c, s0);
            if force == 0.0 {
                return Ok(FlightTime::Divergent);
            }
            force.signum()
        };
        let (lo, hi) = self.profile.domain();
        let lo = lo.max(if lo == 0.0 { 0.0 } else { ESCAPE_LOW });
        let hi = hi.min(ESCAPE_HIGH);
        let target_dir = (sigma_target - s0).signum();

        if target_dir == dir {
            // Target ahead: no turning point may intervene.
            let end = sigma_target.clamp(lo, hi);
            if let Some(tp) = self.find_turning(&gap, s0, end, start_is_turning) {
                return Err(domain(format!(
                    "target sigma = {sigma_target} lies beyond the turning point at {tp}"
                )));
            }
            if sigma_target.is_infinite() || sigma_target == 0.0 || sigma_target != end {
                return self.flight_to_end(&cons, s0, end, start_is_turning, sigma_target);
            }
            Ok(FlightTime::Finite(self.leg(&cons, s0, end, start_is_turning, false)?))
        } else {
            let bound = if dir > 0.0 { hi } else { lo };
            let tp = self.find_turning(&gap, s0, bound, start_is_turning).ok_or_else(|| {
                domain(format!("target sigma = {sigma_target} is behind the motion and no turning point exists"))
            })?;
            let end = sigma_target.clamp(lo, hi);
            if self.find_turning(&gap, tp, end, true).is_some() {
                return Err(domain(format!("target sigma = {sigma_target} lies beyond a second turning point")));
            }
            let first = self.leg(&cons, s0, tp, start_is_turning, true)?;
            if sigma_target.is_infinite() || sigma_target == 0.0 || sigma_target != end {
                return Ok(match self.flight_to_end(&cons, tp, end, true, sigma_target)? {
                    FlightTime::Finite(t) => FlightTime::Finite(first + t),
                    FlightTime::Divergent => FlightTime::Divergent,
                });
            }
            Ok(FlightTime::Finite(first + self.leg(&cons, tp, end, true, false)?))
        }
    }

    /// Locates the first zero of `gap` strictly between `a` and `b`.
    fn find_turning(&self, gap: &impl Fn(f64) -> f64, a: f64, b: f64, skip_start: bool) -> Option<f64> {
        let m = 400;
        let geometric = a > 0.0 && b > 0.0 && (b / a > 4.0 || a / b > 4.0);
        let point = |i: usize| {
            let f = i as f64 / m as f64;
            if geometric {
                a * (b / a).powf(f)
            } else {
                a + (b - a) * f
            }
        };
        let mut prev = point(if skip_start { 1 } else { 0 });
        if gap(prev) < 0.0 {
            return Some(self.bisect(gap, a, prev));
        }
        for i in (if skip_start { 2 } else { 1 })..=m {
            let s = point(i);
            if gap(s) < 0.0 {
                return Some(self.bisect(gap, prev, s));
            }
            prev = s;
        }
        None
    }

    fn bisect(&self, gap: &impl Fn(f64) -> f64, mut good: f64, mut bad: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (good + bad);
            if mid == good || mid == bad {
                break;
            }
            if gap(mid) >= 0.0 {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    }

    /// `∫ α/√(E−V)` between `a` and `b` with square-root substitutions at
    /// endpoints that are turning points.
    fn leg(&self, cons: &ConservedQuantities, a: f64, b: f64, turn_a: bool, turn_b: bool) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        if turn_a && turn_b {
            let mid = 0.5 * (a + b);
            return Ok(self.leg(cons, a, mid, true, false)? + self.leg(cons, mid, b, false, true)?);
        }
        let e = cons.energy;
        let integrand = |s: f64| {
            let g = e - self.potential(&cons.c, s);
            self.profile.alpha(s) / g.max(0.0).sqrt()
        };
        let len = (b - a).abs();
        let sign = (b - a).signum();
        let tol = 1e-10;
        let value = if turn_a || turn_b {
            let (anchor, away) = if turn_b { (b, -sign) } else { (a, sign) };
            let dv = self.potential_derivative(&cons.c, anchor).abs();
            let limit = 2.0 * self.profile.alpha(anchor) / dv.sqrt();
            quadrature::integrate(
                |w| {
                    let s = anchor + away * w * w;
                    let g = e - self.potential(&cons.c, s);
                    if g <= 0.0 {
                        limit
                    } else {
                        2.0 * w * self.profile.alpha(s) / g.sqrt()
                    }
                },
                0.0,
                len.sqrt(),
                tol,
                1e-300,
            )?
            .value
        } else if a.min(b) > 0.0 && (b / a > 4.0 || a / b > 4.0) {
            quadrature::integrate(|u| {
                let s = u.exp();
                integrand(s) * s
            }, a.min(b).ln(), a.max(b).ln(), tol, 1e-300)?
            .value
        } else {
            quadrature::integrate(integrand, a.min(b), a.max(b), tol, 1e-300)?.value
        };
        Ok(value)
    }

    /// Time to reach an end of the domain (`0` or `∞`), or a σ beyond the
    /// profile's domain.
    fn flight_to_end(&self, cons: &ConservedQuantities, a: f64, end: f64, turn_a: bool, target: f64) -> Result<FlightTime> {
        let (lo, _) = self.profile.domain();
        if target == 0.0 && lo == 0.0 {
            return Ok(FlightTime::Finite(self.leg(cons, a, 0.0, turn_a, false)?));
        }
        if !(target == 0.0 || target.is_infinite()) {
            return Err(Error::OutOfRange { what: "sigma", value: target, lo, hi: self.profile.domain().1 });
        }
        let e = cons.energy;
        let g = |s: f64| self.profile.alpha(s) / (e - self.potential(&cons.c, s)).max(0.0).sqrt();
        let (t_lo, t_hi) = if target == 0.0 { (end, end * 100.0) } else { (end / 100.0, end) };
        let slope = {
            let m = 16;
            let pts: Vec<(f64, f64)> = (0..m)
                .map(|i| {
                    let s = t_lo * (t_hi / t_lo).powf(i as f64 / (m - 1) as f64);
                    (s.ln(), g(s).ln())
                })
                .collect();
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / m as f64;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / m as f64;
            pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
                / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
        };
        let diverging = if target == 0.0 { slope <= -1.0 + 0.05 } else { slope >= -1.0 - 0.05 };
        if diverging {
            return Ok(FlightTime::Divergent);
        }
        Ok(FlightTime::Finite(self.leg(cons, a, end, turn_a, false)?))
    }
}

/// Geodesic of the isotropic normal model on `Rᵈ`.
pub fn isonormal_problem(
    x0: Vec<f64>,
    sigma0: f64,
    u_sigma: f64,
    u: Vec<f64>,
) -> Result<GeodesicProblem<IsoNormalProfile, Euclidean>> {
    let d = x0.len();
    if u.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: u.len() });
    }
    GeodesicProblem::new(IsoNormalProfile::new(d)?, Euclidean { d }, x0, sigma0, u_sigma, vec![u])
}

/// Geodesic of the vMF model starting at natural parameter `z` with velocity `u`
/// in the chart `Rⁿ`. At `z = 0` the geodesic is the radial line along `u`.
pub fn vmf_problem(model: &VmfModel, z: &[f64], u: &[f64]) -> Result<GeodesicProblem<VmfProfile, Sphere>> {
    let n = model.n();
    if z.len() != n || u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: z.len().max(u.len()) });
    }
    let eta = dot(z, z).sqrt();
    let base = Sphere { n };
    if eta == 0.0 {
        let speed = dot(u, u).sqrt();
        if speed == 0.0 {
            return Err(domain("zero velocity at the origin has no direction"));
        }
        let x = u.iter().map(|v| v / speed).collect();
        return GeodesicProblem::new(model.profile(), base, x, 0.0, speed, vec![vec![0.0; n]]);
    }
    let x: Vec<f64> = z.iter().map(|v| v / eta).collect();
    let u_eta = dot(u, &x);
    let tangent = u.iter().zip(&x).map(|(a, b)| (a - u_eta * b) / eta).collect();
    GeodesicProblem::new(model.profile(), base, x, eta, u_eta, vec![tangent])
}

/// Geodesic of the Riemannian Gaussian model on `P_n` in the σ coordinate.
pub fn rgauss_problem(
    model: &RGaussModel,
    x0: SpdMatrix,
    sigma0: f64,
    u_sigma: f64,
    u: &SpdTangent,
) -> Result<GeodesicProblem<RGaussProfile, SpdBase>> {
    let n = model.n();
    let split = spd::derham_split(&x0, u)?;
    let blocks = if n >= 2 { vec![split.u1, split.u2] } else { vec![u.clone()] };
    GeodesicProblem::new(model.profile()?, SpdBase { n }, x0, sigma0, u_sigma, blocks)
}

fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

impl<T> GeodesicPath<T> {
    /// CSV with columns `t, sigma, r` followed by the base-point coordinates.
    pub fn to_csv<B: BaseSpace<Point = T>>(&self, base: &B) -> String {
        let mut out = String::from("t,sigma,r");
        for name in base.coordinate_names() {
            out.push(',');
            out.push_str(&name);
        }
        out.push('\n');
        for s in &self.samples {
            let mut row = vec![fmt12(s.t), fmt12(s.sigma), fmt12(s.r)];
            row.extend(base.flatten(&s.point).into_iter().map(fmt12));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// First derivative by Richardson-extrapolated central differences.
pub fn fd_first(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    fd_derivatives(f, x, h).0
}
