use infogeo::specfun::{bessel_i_value, bessel_ratio, bessel_ratio_pair, ln_bessel_i};
use infogeo::warped::fd_derivatives;

const ORDERS: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 3.0];
const ARGS: [f64; 8] = [0.05, 0.3, 1.0, 1.7, 2.5, 3.3, 4.2, 5.0];

/// Direct summation of the first `terms` terms of the ascending series.
fn series_oracle(nu: f64, x: f64, terms: usize) -> f64 {
    (0..terms)
        .map(|k| {
            let k = k as f64;
            ((2.0 * k + nu) * (0.5 * x).ln() - libm::lgamma(k + 1.0) - libm::lgamma(k + nu + 1.0)).exp()
        })
        .sum()
}

#[test]
fn matches_series_oracle() {
    for &nu in &ORDERS {
        for &x in &ARGS {
            let oracle = series_oracle(nu, x, 40);
            let v = bessel_i_value(nu, x).unwrap();
            assert!(((v - oracle) / oracle).abs() <= 1e-10, "nu={nu} x={x}: {v} vs {oracle}");
        }
    }
}

#[test]
fn three_term_recurrence() {
    for &nu in &ORDERS {
        for &x in &ARGS {
            let i0 = bessel_i_value(nu, x).unwrap();
            let i1 = bessel_i_value(nu + 1.0, x).unwrap();
            let i2 = bessel_i_value(nu + 2.0, x).unwrap();
            let res = (i0 - i2 - 2.0 * (nu + 1.0) / x * i1).abs() / i0;
            assert!(res <= 1e-10, "nu={nu} x={x}: {res}");
        }
    }
}

#[test]
fn derivative_relation() {
    for &nu in &ORDERS {
        for &x in &ARGS {
            let (d, _) = fd_derivatives(|t| bessel_i_value(nu, t).unwrap(), x, 1e-3 * x.max(0.1));
            let exact = bessel_i_value(nu + 1.0, x).unwrap() + nu / x * bessel_i_value(nu, x).unwrap();
            assert!((d - exact).abs() / exact.abs().max(1e-300) <= 1e-6, "nu={nu} x={x}");
        }
    }
}

#[test]
fn ratio_agrees_with_values_across_regimes() {
    for &nu in &[1.0, 1.5, 4.0, 32.0] {
        for &x in &[1e-4, 0.2, 3.0, 12.0, 80.0, 600.0] {
            let direct = (ln_bessel_i(nu, x).unwrap() - ln_bessel_i(nu - 1.0, x).unwrap()).exp();
            let r = bessel_ratio(nu, x).unwrap();
            assert!((r - direct).abs() <= 1e-11 * direct, "nu={nu} x={x}");
            assert!(r > 0.0 && r < 1.0);
        }
    }
}

#[test]
fn ratio_pair_satisfies_recurrence() {
    for &nu in &[0.5, 1.5, 3.0] {
        for &x in &[1e-3, 0.5, 5.0, 50.0] {
            let (r1, r2) = bessel_ratio_pair(nu, x).unwrap();
            // I_{ν+1} = I_{ν−1} − (2ν/x) I_ν
            let res = (r2 - (1.0 - 2.0 * nu / x * r1)).abs();
            assert!(res <= 1e-9 * (2.0 * nu / x * r1), "nu={nu} x={x}: {res}");
        }
    }
}
