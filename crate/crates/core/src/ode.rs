//! Dormand-Prince 5(4) integrator with step-size control.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_min: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 2_000_000, h_min: 1e-14 }
    }
}

/// Output of [`integrate`]: states at the requested times that were reached,
/// plus the stopping point if the observer halted the integration early.
#[derive(Debug, Clone)]
pub struct OdeOutput {
    pub states: Vec<Vec<f64>>,
    pub stopped: Option<(f64, Vec<f64>)>,
    /// Set when the step size underflowed while `rhs` kept rejecting stages,
    /// i.e. the solution ran into the boundary of its domain. `stopped` then
    /// holds the last accepted state.
    pub domain_exit: bool,
    pub accepted_steps: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order weights minus embedded 4th-order weights.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrates `y' = rhs(t, y)` from `t0` through the increasing output times
/// `t_out`, landing exactly on each of them.
///
/// `rhs` returns `false` when the state is outside its domain; the step is
/// then retried with a smaller size. `observer` is called after every
/// accepted step and may return `false` to stop.
pub fn integrate<F, G>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    t_out: &[f64],
    opts: OdeOptions,
    mut observer: G,
) -> Result<OdeOutput>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> bool,
    G: FnMut(f64, &[f64]) -> bool,
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut states = Vec::with_capacity(t_out.len());
    if !rhs(t, &y, &mut k[0]) {
        return Err(Error::Domain("initial state outside the ODE domain".into()));
    }
    let span = t_out.last().map(|&te| (te - t0).abs()).unwrap_or(0.0);
    let mut h = initial_step(&k[0], &y, span, opts);
    let mut steps = 0usize;

    for &target in t_out {
        if target < t {
            return Err(Error::Domain("output times must be increasing".into()));
        }
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::Numerical(format!("step budget exhausted at t = {t}")));
            }
            let last = t + h >= target;
            let h_try = if last { target - t } else { h };
            let mut ok = true;
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    tmp[i] = y[i] + h_try * acc;
                }
                if !rhs(t + C[s] * h_try, &tmp, &mut k[s]) {
                    ok = false;
                    break;
                }
            }
            if !ok {
                h = h_try * 0.25;
                if h < opts.h_min {
                    return Ok(OdeOutput { states, stopped: Some((t, y)), domain_exit: true, accepted_steps: steps });
                }
                continue;
            }
            // The last stage was evaluated at y_new (FSAL).
            y_new.copy_from_slice(&tmp);
            let mut err = 0.0;
            for i in 0..dim {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                err += (h_try * e / sc).powi(2);
            }
            let err = (err / dim as f64).sqrt();
            if !err.is_finite() {
                h = h_try * 0.25;
                if h < opts.h_min {
                    return Err(Error::Numerical(format!("non-finite error estimate at t = {t}")));
                }
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                steps += 1;
                t = if last { target } else { t + h_try };
                y.copy_from_slice(&y_new);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                if !last || factor < 1.0 {
                    h = h_try * factor;
                }
                if !observer(t, &y) {
                    return Ok(OdeOutput { states, stopped: Some((t, y)), domain_exit: false, accepted_steps: steps });
                }
            } else {
                h = h_try * factor.min(1.0);
                if h < opts.h_min {
                    return Err(Error::Numerical(format!("step size underflow at t = {t}")));
                }
            }
        }
        states.push(y.clone());
    }
    Ok(OdeOutput { states, stopped: None, domain_exit: false, accepted_steps: steps })
}

fn initial_step(f0: &[f64], y0: &[f64], span: f64, opts: OdeOptions) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y0.iter().zip(f0) {
        let sc = opts.atol + opts.rtol * yi.abs();
        d0 += (yi / sc).powi(2);
        d1 += (fi / sc).powi(2);
    }
    let h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * (d0 / d1).sqrt() };
    let cap = if span > 0.0 { 0.1 * span } else { 1e-3 };
    h.min(cap).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let times: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let out = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                true
            },
            0.0,
            &[1.0, 0.0],
            &times,
            OdeOptions::default(),
            |_, _| true,
        )
        .unwrap();
        for (t, y) in times.iter().zip(&out.states) {
            assert!((y[0] - t.cos()).abs() < 1e-8);
            assert!((y[0] * y[0] + y[1] * y[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn observer_can_stop() {
        let out = integrate(
            |_, _, dy| {
                dy[0] = 1.0;
                true
            },
            0.0,
            &[0.0],
            &[10.0],
            OdeOptions::default(),
            |_, y| y[0] < 2.0,
        )
        .unwrap();
        let (t, y) = out.stopped.unwrap();
        assert!(y[0] >= 2.0 && t < 10.0);
        assert!(out.states.is_empty());
    }

    #[test]
    fn exponential_decay() {
        let out = integrate(
            |_, y, dy| {
                dy[0] = -3.0 * y[0];
                true
            },
            0.0,
            &[1.0],
            &[0.5, 2.0],
            OdeOptions::default(),
            |_, _| true,
        )
        .unwrap();
        assert!((out.states[1][0] - (-6.0f64).exp()).abs() < 1e-12);
    }
}
