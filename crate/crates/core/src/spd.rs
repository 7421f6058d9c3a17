//! The cone of symmetric positive-definite matrices with its affine-invariant
//! geometry and the split into log-determinant and determinant-one parts.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// A symmetric positive-definite matrix together with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

/// A symmetric matrix used as a tangent vector to the SPD cone.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdTangent(pub DMatrix<f64>);

#[derive(Debug, Clone)]
pub struct DeRhamSplit {
    /// `log det x`.
    pub tau: f64,
    /// `exp(-tau / n) x`, the determinant-one part.
    pub s: SpdMatrix,
    /// `(1/n) tr(x^{-1} u) x`.
    pub u1: SpdTangent,
    /// `u - u1`, trace-free with respect to `x`.
    pub u2: SpdTangent,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_square(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    if m.nrows() == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    Ok(m.nrows())
}

impl SpdMatrix {
    /// Validates symmetry and strict positivity, caching the eigendecomposition.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        check_square(&mat)?;
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        let scale = mat.amax();
        let asym = (&mat - mat.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSpd(format!("asymmetry {asym:e} exceeds tolerance")));
        }
        Self::from_symmetric(symmetrize(&mat))
    }

    fn from_symmetric(mat: DMatrix<f64>) -> Result<Self> {
        let eig = SymmetricEigen::new(mat.clone());
        let trace: f64 = eig.eigenvalues.iter().sum();
        let min = eig.eigenvalues.min();
        if !(trace > 0.0) || min <= 1e-13 * trace {
            return Err(Error::NotSpd(format!("smallest eigenvalue {min:e} (trace {trace:e})")));
        }
        Ok(Self { mat, eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is SPD")
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `V f(Λ) Vᵗ` for a scalar function applied to the eigenvalues.
    pub fn map_eigen(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let d = self.eigenvalues.map(f);
        let v = &self.eigenvectors;
        symmetrize(&(v * DMatrix::from_diagonal(&d) * v.transpose()))
    }

    pub fn sqrt(&self) -> DMatrix<f64> {
        self.map_eigen(f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> DMatrix<f64> {
        self.map_eigen(|l| 1.0 / l.sqrt())
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.map_eigen(|l| 1.0 / l)
    }

    pub fn log_det(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln()).sum()
    }

    /// `g x gᵗ`.
    pub fn congruence(&self, g: &DMatrix<f64>) -> Result<Self> {
        if g.ncols() != self.dim() || g.nrows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: g.nrows() });
        }
        Self::from_symmetric(symmetrize(&(g * &self.mat * g.transpose())))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.mat * c)
    }
}

impl SpdTangent {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        check_square(&mat)?;
        let scale = mat.amax();
        if (&mat - mat.transpose()).amax() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Domain("tangent matrix must be symmetric".into()));
        }
        Ok(Self(symmetrize(&mat)))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `g u gᵗ`, the push-forward of `u` under the congruence by `g`.
    pub fn congruence(&self, g: &DMatrix<f64>) -> Self {
        Self(symmetrize(&(g * &self.0 * g.transpose())))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }
}

fn check_pair(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// `tr(x⁻¹ u x⁻¹ v)`.
pub fn affine_metric(x: &SpdMatrix, u: &SpdTangent, v: &SpdTangent) -> Result<f64> {
    check_pair(x.dim(), u.dim())?;
    check_pair(x.dim(), v.dim())?;
    // Whitening by x^{-1/2} keeps the product symmetric.
    let w = x.inv_sqrt();
    let a = &w * &u.0 * &w;
    let b = &w * &v.0 * &w;
    Ok(a.component_mul(&b).sum())
}

/// `L⁻¹ m L⁻ᵗ` for the Cholesky factor `L` of `x`. Similar to
/// `x^{-1/2} m x^{-1/2}` and more accurate when `x` is ill-conditioned.
fn whiten(x: &SpdMatrix, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = x
        .mat
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?
        .unpack();
    let left = l
        .solve_lower_triangular(m)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let both = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    Ok(symmetrize(&both))
}

/// Affine-invariant Riemannian distance.
pub fn affine_distance(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    check_pair(x.dim(), y.dim())?;
    if x.mat == y.mat {
        return Ok(0.0);
    }
    let sorted = |a: &SpdMatrix, b: &SpdMatrix| -> Result<Vec<f64>> {
        let mut v: Vec<f64> = SymmetricEigen::new(whiten(a, b.matrix())?).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    };
    // The eigensolver is accurate relative to the largest eigenvalue, so the
    // small end of the spectrum is read off the reciprocal pencil.
    let fwd = sorted(x, y)?;
    let rev = sorted(y, x)?;
    let n = fwd.len();
    if fwd[0] <= 0.0 || rev[0] <= 0.0 {
        return Err(Error::NotSpd("relative eigenvalue is not positive".into()));
    }
    let (lo, hi) = (fwd[0], fwd[n - 1]);
    let sum: f64 = (0..n)
        .map(|i| {
            let ln = if fwd[i] * fwd[i] >= lo * hi { fwd[i].ln() } else { -rev[n - 1 - i].ln() };
            ln * ln
        })
        .sum();
    Ok(sum.sqrt())
}

fn sym_fn(m: DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(&m));
    let d = eig.eigenvalues.map(f);
    symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()))
}

/// Riemannian exponential `x^{1/2} expm(x^{-1/2} u x^{-1/2}) x^{1/2}`.
pub fn spd_exp(x: &SpdMatrix, u: &SpdTangent) -> Result<SpdMatrix> {
    check_pair(x.dim(), u.dim())?;
    let s = x.sqrt();
    let w = x.inv_sqrt();
    let inner = sym_fn(&w * &u.0 * &w, f64::exp);
    SpdMatrix::new(symmetrize(&(&s * inner * &s)))
}

/// Riemannian logarithm, the inverse of [`spd_exp`].
pub fn spd_log(x: &SpdMatrix, y: &SpdMatrix) -> Result<SpdTangent> {
    check_pair(x.dim(), y.dim())?;
    let s = x.sqrt();
    let w = x.inv_sqrt();
    let inner = sym_fn(&w * y.matrix() * &w, f64::ln);
    Ok(SpdTangent(symmetrize(&(&s * inner * &s))))
}

pub fn derham_split(x: &SpdMatrix, u: &SpdTangent) -> Result<DeRhamSplit> {
    check_pair(x.dim(), u.dim())?;
    let n = x.dim() as f64;
    let tau = x.log_det();
    let s = SpdMatrix::new(x.matrix() * (-tau / n).exp())?;
    let trace = (x.inverse() * &u.0).trace();
    let u1 = SpdTangent(x.matrix() * (trace / n));
    let u2 = SpdTangent(&u.0 - &u1.0);
    Ok(DeRhamSplit { tau, s, u1, u2 })
}

/// Squared distances of the two De Rham factors, `((τx − τy)²/n, d²(sx, sy))`.
pub fn derham_distances_sq(x: &SpdMatrix, y: &SpdMatrix) -> Result<(f64, f64)> {
    check_pair(x.dim(), y.dim())?;
    let n = x.dim() as f64;
    let (tx, ty) = (x.log_det(), y.log_det());
    let sx = SpdMatrix::new(x.matrix() * (-tx / n).exp())?;
    let sy = SpdMatrix::new(y.matrix() * (-ty / n).exp())?;
    Ok(((tx - ty).powi(2) / n, affine_distance(&sx, &sy)?.powi(2)))
}

/// Random SPD matrix `B Bᵗ + 1e-3 I` with Gaussian `B`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SpdMatrix {
    let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = &b * b.transpose() + DMatrix::identity(n, n) * 1e-3;
    SpdMatrix::new(symmetrize(&a)).expect("B Bᵗ + εI is SPD")
}

/// Random symmetric matrix with Gaussian entries.
pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SpdTangent {
    let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    SpdTangent(symmetrize(&b))
}

/// Random invertible matrix with Gaussian entries and condition number <= 1e6.
pub fn random_gl<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    loop {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sv = g.singular_values();
        if sv.min() > 0.0 && sv.max() / sv.min() <= 1e6 {
            return g;
        }
    }
}
