//! Embedded Dormand-Prince 5(4) stepper with PI step-size control.
//!
//! Shared by the scalar linear-IVP tables and the radial Cauchy solver. The
//! caller drives the loop one accepted step at a time, which keeps custom
//! stopping logic (blow-up caps, phase switches, exact endpoint clipping) out
//! of the stepper.

/// One accepted step with endpoint derivatives, enough for cubic Hermite
/// dense output.
#[derive(Clone, Copy, Debug)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub y0: [f64; N],
    pub dy0: [f64; N],
    pub t1: f64,
    pub y1: [f64; N],
    pub dy1: [f64; N],
}

impl<const N: usize> Step<N> {
    /// Cubic Hermite interpolation of component `i` at `t` in `[t0, t1]`.
    pub fn interpolate(&self, i: usize, t: f64) -> f64 {
        hermite(
            self.t0, self.y0[i], self.dy0[i], self.t1, self.y1[i], self.dy1[i], t,
        )
    }
}

pub fn hermite(t0: f64, y0: f64, dy0: f64, t1: f64, y1: f64, dy1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return y0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * dy0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * dy1
}

#[derive(Debug, PartialEq, Eq, Clone, Copy)]
pub enum StepError {
    /// The controller drove the step below f64 resolution at the current `t`.
    StepSizeUnderflow,
    /// The right-hand side stayed non-finite even at the minimum step.
    NonFiniteRhs,
}

pub struct DormandPrince<const N: usize, F>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    rhs: F,
    pub t: f64,
    pub y: [f64; N],
    /// RHS at `(t, y)`; FSAL makes this free.
    pub dy: [f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
    inv_err_prev: f64,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// y5 - y4 weights (error estimator), including the FSAL stage.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

impl<const N: usize, F> DormandPrince<N, F>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(mut rhs: F, t0: f64, y0: [f64; N], h0: f64, rtol: f64, atol: f64) -> Self {
        let dy = rhs(t0, &y0);
        DormandPrince {
            rhs,
            t: t0,
            y: y0,
            dy,
            h: h0.abs().max(f64::MIN_POSITIVE),
            rtol,
            atol,
            inv_err_prev: 1.0,
        }
    }

    pub fn proposed_step(&self) -> f64 {
        self.h
    }

    fn min_step(&self) -> f64 {
        16.0 * f64::EPSILON * self.t.abs().max(1.0)
    }

    /// Advances by one accepted step, never stepping past `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<Step<N>, StepError> {
        let mut rejected_in_a_row = 0u32;
        loop {
            let span_left = t_limit - self.t;
            if span_left <= 0.0 {
                return Err(StepError::StepSizeUnderflow);
            }
            let h = self.h.min(span_left);
            if h < self.min_step() && span_left > 2.0 * self.min_step() {
                return Err(StepError::StepSizeUnderflow);
            }

            let mut k = [[0.0f64; N]; 7];
            k[0] = self.dy;
            let mut finite = true;
            for stage in 0..6 {
                let mut ys = self.y;
                for (i, y_i) in ys.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, k_j) in k.iter().enumerate().take(stage + 1) {
                        acc += A[stage][j] * k_j[i];
                    }
                    *y_i += h * acc;
                }
                k[stage + 1] = (self.rhs)(self.t + C[stage] * h, &ys);
                if k[stage + 1].iter().any(|v| !v.is_finite()) {
                    finite = false;
                    break;
                }
            }
            if !finite {
                // Overshot into non-representable territory; retreat.
                self.h = 0.25 * h;
                rejected_in_a_row += 1;
                if self.h < self.min_step() || rejected_in_a_row > 60 {
                    return Err(StepError::NonFiniteRhs);
                }
                continue;
            }

            // 5th order solution is stage row 6 (k[6] is FSAL at y1).
            let mut y1 = self.y;
            for (i, y_i) in y1.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, k_j) in k.iter().enumerate().take(6) {
                    acc += A[5][j] * k_j[i];
                }
                *y_i += h * acc;
            }
            if y1.iter().any(|v| !v.is_finite()) {
                self.h = 0.25 * h;
                rejected_in_a_row += 1;
                if self.h < self.min_step() || rejected_in_a_row > 60 {
                    return Err(StepError::NonFiniteRhs);
                }
                continue;
            }
            let dy1 = (self.rhs)(self.t + h, &y1);
            if dy1.iter().any(|v| !v.is_finite()) {
                self.h = 0.25 * h;
                rejected_in_a_row += 1;
                if self.h < self.min_step() || rejected_in_a_row > 60 {
                    return Err(StepError::NonFiniteRhs);
                }
                continue;
            }
            k[6] = dy1;

            let mut err_sq = 0.0;
            for i in 0..N {
                let mut e = 0.0;
                for (j, k_j) in k.iter().enumerate() {
                    e += E[j] * k_j[i];
                }
                e *= h;
                let scale = self.atol + self.rtol * self.y[i].abs().max(y1[i].abs());
                err_sq += (e / scale) * (e / scale);
            }
            let err = (err_sq / N as f64).sqrt();

            // PI controller (Hairer II.4): factor from current and previous
            // error, clamped harder after a rejection.
            let inv_err = 1.0 / err.max(1e-30);
            let mut factor = 0.9 * inv_err.powf(0.7 / 5.0) * (1.0 / self.inv_err_prev).powf(0.4 / 5.0);
            factor = factor.clamp(0.2, if rejected_in_a_row > 0 { 1.0 } else { 10.0 });

            if err <= 1.0 {
                let step = Step {
                    t0: self.t,
                    y0: self.y,
                    dy0: self.dy,
                    t1: self.t + h,
                    y1,
                    dy1,
                };
                self.t += h;
                self.y = y1;
                self.dy = dy1;
                self.h = h * factor;
                self.inv_err_prev = inv_err;
                return Ok(step);
            }

            rejected_in_a_row += 1;
            self.h = h * factor.min(0.9);
            if self.h < self.min_step() {
                return Err(StepError::StepSizeUnderflow);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_to_high_accuracy() {
        let mut solver =
            DormandPrince::new(|_t, y: &[f64; 1]| [y[0]], 0.0, [1.0], 1e-4, 1e-10, 1e-12);
        while solver.t < 5.0 {
            solver.step(5.0).unwrap();
        }
        let exact = 5f64.exp();
        assert!(((solver.y[0] - exact) / exact).abs() < 1e-9);
    }

    #[test]
    fn oscillator_dense_output() {
        // y'' = -y, y = sin(t)
        let mut solver = DormandPrince::new(
            |_t, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            1e-3,
            1e-10,
            1e-12,
        );
        let mut max_gap: f64 = 0.0;
        while solver.t < 10.0 {
            let step = solver.step(10.0).unwrap();
            for frac in [0.25, 0.5, 0.75] {
                let t = step.t0 + frac * (step.t1 - step.t0);
                max_gap = max_gap.max((step.interpolate(0, t) - t.sin()).abs());
            }
        }
        // dense output is one order lower than the step
        assert!(max_gap < 1e-7, "dense output error {max_gap}");
    }

    #[test]
    fn nonfinite_rhs_is_reported() {
        // Blows up at t = 1: y' = y^2, y(0) = 1.
        let mut solver = DormandPrince::new(
            |_t, y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            [1.0],
            1e-3,
            1e-9,
            1e-12,
        );
        let mut saw_end = false;
        for _ in 0..100_000 {
            match solver.step(2.0) {
                Ok(_) => {}
                Err(_) => {
                    saw_end = true;
                    break;
                }
            }
        }
        assert!(saw_end, "integration should not pass a blow-up");
        assert!(solver.t <= 1.0 + 1e-6);
        assert!(solver.y[0] > 1e10);
    }
}
