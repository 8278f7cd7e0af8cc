//! Independent propagator oracle: time-ordered integration of
//! `∂_t U = −i H(t) U` with adaptive Dormand–Prince 5(4) steps.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::floquet::ControlModel;
use crate::linalg::{identity, Operator, C64, I};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-13, atol: 1e-13, h_min: 1e-14, max_steps: 10_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn rhs(model: &ControlModel, t: f64, u: &Operator) -> Operator {
    model.hamiltonian(t).dot(u).mapv(|z| -I * z)
}

/// `U(t)` by direct integration from `U(0) = 1`.
pub fn ode_oracle(model: &ControlModel, t: f64) -> Result<Operator> {
    integrate(model, t, OdeOptions::default())
}

pub fn integrate(model: &ControlModel, t_end: f64, opts: OdeOptions) -> Result<Operator> {
    let d = model.dim();
    let mut u = identity(d);
    if t_end == 0.0 {
        return Ok(u);
    }
    let dir = t_end.signum();
    let span = t_end.abs();
    let scale = model.drift.iter().map(|z| z.norm()).sum::<f64>()
        + model.channels.iter().map(|c| c.amplitudes.iter().map(|a| a.abs()).sum::<f64>()).sum::<f64>();
    let mut h = (0.01 / scale.max(1.0)).min(span);
    let mut t = 0.0f64;
    let mut k: Vec<Operator> = vec![Array2::zeros((d, d)); 7];
    k[0] = rhs(model, 0.0, &u);
    let mut steps = 0usize;
    while t < span {
        if steps >= opts.max_steps {
            return Err(Error::StepSizeUnderflow { t: dir * t });
        }
        steps += 1;
        if t + h > span {
            h = span - t;
        }
        for s in 1..7 {
            let mut y = u.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    y.scaled_add(C64::new(dir * h * A[s][j], 0.0), kj);
                }
            }
            k[s] = rhs(model, dir * (t + C[s] * h), &y);
        }
        let mut next = u.clone();
        let mut err_vec = Array2::<C64>::zeros((d, d));
        for j in 0..7 {
            if B5[j] != 0.0 {
                next.scaled_add(C64::new(dir * h * B5[j], 0.0), &k[j]);
            }
            let e = B5[j] - B4[j];
            if e != 0.0 {
                err_vec.scaled_add(C64::new(dir * h * e, 0.0), &k[j]);
            }
        }
        let mut err: f64 = 0.0;
        for ((e, y0), y1) in err_vec.iter().zip(u.iter()).zip(next.iter()) {
            let sc = opts.atol + opts.rtol * y0.norm().max(y1.norm());
            err = err.max(e.norm() / sc);
        }
        if err <= 1.0 {
            t += h;
            u = next;
            // first-same-as-last: stage 7 is evaluated at the accepted point
            k[0] = k[6].clone();
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < opts.h_min && t < span {
            return Err(Error::StepSizeUnderflow { t: dir * t });
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet;
    use crate::linalg::{max_abs_diff, unitarity_defect};
    use crate::spinsys::{self, TwoSpinParams};
    use std::f64::consts::PI;

    fn model() -> ControlModel {
        let drift = spinsys::two_spin_hamiltonian(&TwoSpinParams { omega1: 0.3, omega2: 0.2, gx: 2.7, gy: 6.2 });
        ControlModel::new(drift, spinsys::xy_controls(2, &[1, 2]).unwrap(), 6, PI / 0.4).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        assert_eq!(ode_oracle(&model(), 0.0).unwrap(), identity(4));
    }

    #[test]
    fn drift_only_matches_exponential() {
        let m = model();
        for t in [0.05, 0.4, 1.1] {
            let u = ode_oracle(&m, t).unwrap();
            let exact = floquet::drift_propagator(&m, t).unwrap();
            assert!(max_abs_diff(&u, &exact) < 1e-10, "t = {t}");
            assert!(unitarity_defect(&u) < 1e-10);
        }
    }

    #[test]
    fn underflow_is_reported() {
        let m = model();
        let opts = OdeOptions { max_steps: 3, ..OdeOptions::default() };
        assert!(matches!(integrate(&m, 1.0, opts), Err(Error::StepSizeUnderflow { .. })));
    }
}
