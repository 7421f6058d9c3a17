//! Modified Bessel functions of the first kind and their ratios.
//!
//! Values are returned as [`Scaled`] numbers `mantissa * exp(log_scale)` so
//! that orders and arguments whose `I_nu(x)` overflows a double can still be
//! combined into finite ratios and logarithms.

use crate::error::{domain, Result};
use std::f64::consts::PI;

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAX_ITER: usize = 200_000;

/// A positive number stored as `mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl Scaled {
    pub fn new(mantissa: f64, log_scale: f64) -> Self {
        Self { mantissa, log_scale }.renormalized()
    }

    /// Folds the mantissa back into `[1e-100, 1e100]` when it drifts outside.
    pub fn renormalized(self) -> Self {
        let m = self.mantissa.abs();
        if m == 0.0 || !m.is_finite() || (1e-100..=1e100).contains(&m) {
            return self;
        }
        let shift = m.ln();
        Self {
            mantissa: self.mantissa / m,
            log_scale: self.log_scale + shift,
        }
    }

    /// The plain value; overflows to infinity when it does not fit a double.
    pub fn value(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }

    /// Natural log of the value (mantissa must be positive).
    pub fn ln(&self) -> f64 {
        self.mantissa.ln() + self.log_scale
    }
}

fn check_args(nu: f64, x: f64) -> Result<()> {
    if !nu.is_finite() || nu < 0.0 {
        return Err(domain(format!("Bessel order must be finite and >= 0, got {nu}")));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(domain(format!("Bessel argument must be finite and >= 0, got {x}")));
    }
    Ok(())
}

/// `I_nu(x)` in scaled form.
///
/// Uses the ascending series for `x <= max(10, 2 nu)` and the Steed/Temme
/// continued-fraction method for larger arguments.
pub fn bessel_i(nu: f64, x: f64) -> Result<Scaled> {
    check_args(nu, x)?;
    if x == 0.0 {
        let m = if nu == 0.0 { 1.0 } else { 0.0 };
        return Ok(Scaled { mantissa: m, log_scale: 0.0 });
    }
    if x <= f64::max(10.0, 2.0 * nu) {
        Ok(series(nu, x))
    } else {
        Ok(steed_temme(nu, x))
    }
}

/// `I_nu(x)` as a plain double (may overflow to infinity for large `x`).
pub fn bessel_i_value(nu: f64, x: f64) -> Result<f64> {
    Ok(bessel_i(nu, x)?.value())
}

/// `ln I_nu(x)` for `x > 0`.
pub fn ln_bessel_i(nu: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(domain(format!("ln I_nu needs x > 0, got {x}")));
    }
    Ok(bessel_i(nu, x)?.ln())
}

fn series(nu: f64, x: f64) -> Scaled {
    let q = 0.25 * x * x;
    let mut log_scale = nu * (0.5 * x).ln() - libm::lgamma(nu + 1.0);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + nu));
        sum += term;
        if term < EPS * sum {
            break;
        }
        if sum > 1e100 {
            log_scale += sum.ln();
            term /= sum;
            sum = 1.0;
        }
        k += 1.0;
    }
    Scaled::new(sum, log_scale)
}

// Numerical Recipes `bessik`, restricted to the x >= 2 branch and rewritten
// so that K carries a factor exp(x) and I a factor exp(-x).
fn steed_temme(nu: f64, x: f64) -> Scaled {
    let nl = (nu + 0.5).floor() as usize;
    let xmu = nu - nl as f64;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    // CF1: I'_nu / I_nu by modified Lentz.
    let mut h = (nu * xi).max(FPMIN);
    let mut b = xi2 * nu;
    let mut d = 0.0;
    let mut c = h;
    for _ in 0..MAX_ITER {
        b += xi2;
        d = 1.0 / (b + d);
        c = b + 1.0 / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }

    // Downward recurrence from nu to mu, keeping track of the ratio.
    let mut ril = 1e-30;
    let mut ripl = h * ril;
    let ril1 = ril;
    let mut fact = nu * xi;
    for _ in 0..nl {
        let ritemp = fact * ril + ripl;
        fact -= xi;
        ripl = fact * ritemp + ril;
        ril = ritemp;
    }
    let f = ripl / ril;

    // CF2 (Steed) for exp(x) K_mu and exp(x) K_{mu+1}.
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - xmu2;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let rkmu = (PI / (2.0 * x)).sqrt() / s;
    let rk1 = rkmu * (xmu + x + 0.5 - h) * xi;
    let rkmup = xmu * xi * rkmu - rk1;
    // Wronskian: I_mu (f K_mu - K'_mu) = 1/x.
    let rimu = xi / (f * rkmu - rkmup);
    Scaled::new(rimu * ril1 / ril, x)
}

/// `I_nu(x) / I_{nu-1}(x)` for `nu > 0`, `x > 0`, by the Gauss continued fraction.
pub fn bessel_ratio(nu: f64, x: f64) -> Result<f64> {
    if !nu.is_finite() || nu <= 0.0 {
        return Err(domain(format!("ratio order must be > 0, got {nu}")));
    }
    if !x.is_finite() || x <= 0.0 {
        return Err(domain(format!("ratio argument must be > 0, got {x}")));
    }
    // I_nu/I_{nu-1} = 1 / (2nu/x + 1 / (2(nu+1)/x + 1 / (...)))
    let mut f = FPMIN;
    let mut c = f;
    let mut d = 0.0;
    let mut k = 0.0;
    for _ in 0..MAX_ITER {
        let b = 2.0 * (nu + k) / x;
        d = b + d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + 1.0 / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = c * d;
        f *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(f);
        }
        k += 1.0;
    }
    Err(crate::Error::Numerical(format!(
        "Bessel ratio continued fraction did not converge (nu={nu}, x={x})"
    )))
}

/// The pair `(I_nu/I_{nu-1}, I_{nu+1}/I_{nu-1})` at `x > 0`.
///
/// The second entry is the product of two consecutive ratios, so it obeys
/// `I_{nu+1} = I_{nu-1} - (2 nu / x) I_nu` up to rounding without the
/// cancellation that the subtraction suffers at small `x`.
pub fn bessel_ratio_pair(nu: f64, x: f64) -> Result<(f64, f64)> {
    let r1 = bessel_ratio(nu, x)?;
    let r_next = bessel_ratio(nu + 1.0, x)?;
    Ok((r1, r1 * r_next))
}
