//! Refinable caches for `\int_a^t n(s) ds` and for the linear IVP
//! `y' + 2 h y = f`, both queried millions of times by the trajectory
//! bounds and the barrier quadratures.

use crate::quad::{self, IntegrandSpec, Integrand, Singularity};
use crate::rk::{hermite, DormandPrince};
use std::sync::{Arc, RwLock};

/// Cached antiderivative `t -> \int_base^t n(s) ds` of a nonnegative
/// integrand. Knots grow geometrically away from the base point; a query
/// integrates adaptively from the nearest cached knot. Once the integrand
/// (or the accumulated value) leaves the f64 range the table saturates to
/// `+inf`, which is the correct limit for nonnegative integrands.
pub struct CumulativeIntegral {
    integrand: Integrand,
    base: f64,
    right: RwLock<Vec<(f64, f64)>>,
    left: RwLock<Vec<(f64, f64)>>,
}

impl CumulativeIntegral {
    pub fn new(integrand: Integrand, base: f64) -> Self {
        CumulativeIntegral {
            integrand,
            base,
            right: RwLock::new(vec![(base, 0.0)]),
            left: RwLock::new(vec![(base, 0.0)]),
        }
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn integrand(&self) -> &Integrand {
        &self.integrand
    }

    /// `\int_base^t` (negative of the left-tail integral for `t < base`).
    pub fn value(&self, t: f64) -> f64 {
        if t == self.base {
            return 0.0;
        }
        if t > self.base {
            self.directed(t, true)
        } else {
            -self.directed(t, false)
        }
    }

    fn cell(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let spec = IntegrandSpec {
            f: self.integrand.clone(),
            singularity: Singularity::None,
        };
        match quad::integrate_finite(&spec, lo, hi) {
            Ok(q) => q.value,
            // Nonnegative integrand overflowing f64: the integral is +inf.
            Err(_) => f64::INFINITY,
        }
    }

    fn directed(&self, t: f64, rightward: bool) -> f64 {
        let lock = if rightward { &self.right } else { &self.left };
        let offset = (t - self.base).abs();
        {
            let knots = lock.read().expect("table lock");
            if let Some(v) = self.lookup(&knots, t, offset, rightward) {
                return v;
            }
        }
        let mut knots = lock.write().expect("table lock");
        while {
            let last = knots.last().expect("seeded");
            (last.0 - self.base).abs() < offset && last.1.is_finite()
        } {
            let last = *knots.last().expect("seeded");
            let next_off = ((last.0 - self.base).abs() * 2.0).max(1.0);
            let next_t = if rightward {
                self.base + next_off
            } else {
                self.base - next_off
            };
            let cell = if rightward {
                self.cell(last.0, next_t)
            } else {
                self.cell(next_t, last.0)
            };
            knots.push((next_t, last.1 + cell));
        }
        self.lookup(&knots, t, offset, rightward)
            .expect("extended past query point")
    }

    fn lookup(&self, knots: &[(f64, f64)], t: f64, offset: f64, rightward: bool) -> Option<f64> {
        let last = knots.last().expect("seeded");
        if (last.0 - self.base).abs() < offset && last.1.is_finite() {
            return None;
        }
        // Largest knot not past t (knots are ordered by |t - base|).
        let idx = knots.partition_point(|(k, _)| (k - self.base).abs() <= offset);
        let (kt, kv) = knots[idx - 1];
        if !kv.is_finite() {
            return Some(f64::INFINITY);
        }
        let tail = if rightward {
            self.cell(kt, t)
        } else {
            self.cell(t, kt)
        };
        Some(kv + tail)
    }
}

/// Node of a cached solution of `y'(t) = f(t) + k w(t) y(t)`, `y(base) = 0`.
#[derive(Clone, Copy, Debug)]
struct IvpNode {
    t: f64,
    y: f64,
    dy: f64,
}

/// Cached solution of the scalar linear IVP `y' = f + k w y` with `y(base)=0`.
///
/// With `k = -2` and `w = h` this is `psi_a(t) = \int_a^t e^{-2 \int_s^t h} f(s) ds`
/// — solving the IVP avoids the double integral. With `k > 0` and `w = g^+`
/// it yields the exponential-weight integrals of the `q = 2` estimates.
/// The solution is extended on demand and saturates to `+inf` once it leaves
/// the f64 range (all uses have `y` nondecreasing there).
pub struct LinearIvpTable {
    f: Integrand,
    w: Integrand,
    k: f64,
    base: f64,
    nodes: RwLock<Vec<IvpNode>>,
    saturated_from: RwLock<Option<f64>>,
}

impl LinearIvpTable {
    pub fn new(f: Integrand, w: Integrand, k: f64, base: f64) -> Self {
        let dy0 = f(base);
        LinearIvpTable {
            f,
            w,
            k,
            base,
            nodes: RwLock::new(vec![IvpNode {
                t: base,
                y: 0.0,
                dy: dy0,
            }]),
            saturated_from: RwLock::new(None),
        }
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    /// `y(t)` for `t >= base`.
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.base {
            return 0.0;
        }
        if let Some(s) = *self.saturated_from.read().expect("lock") {
            if t >= s {
                return f64::INFINITY;
            }
        }
        {
            let nodes = self.nodes.read().expect("lock");
            if nodes.last().map(|n| n.t >= t).unwrap_or(false) {
                return Self::interp(&nodes, t);
            }
        }
        self.extend_to(t);
        if let Some(s) = *self.saturated_from.read().expect("lock") {
            if t >= s {
                return f64::INFINITY;
            }
        }
        let nodes = self.nodes.read().expect("lock");
        Self::interp(&nodes, t)
    }

    fn extend_to(&self, t: f64) {
        let mut nodes = self.nodes.write().expect("lock");
        let last = *nodes.last().expect("seeded");
        if last.t >= t {
            return;
        }
        let f = self.f.clone();
        let w = self.w.clone();
        let k = self.k;
        let rhs = move |s: f64, y: &[f64; 1]| [f(s) + k * w(s) * y[0]];
        let atol = 1e-14 * (1.0 + last.dy.abs());
        let h0 = 1e-6 * (1.0 + last.t.abs());
        let mut solver = DormandPrince::new(rhs, last.t, [last.y], h0, 1e-10, atol);
        loop {
            match solver.step(t) {
                Ok(step) => {
                    nodes.push(IvpNode {
                        t: step.t1,
                        y: step.y1[0],
                        dy: step.dy1[0],
                    });
                    if step.y1[0] > 1e290 {
                        *self.saturated_from.write().expect("lock") = Some(step.t1);
                        return;
                    }
                    if step.t1 >= t {
                        return;
                    }
                }
                Err(_) => {
                    // Overflow of f, w, or y: saturate from here on.
                    *self.saturated_from.write().expect("lock") = Some(solver.t);
                    return;
                }
            }
        }
    }

    fn interp(nodes: &[IvpNode], t: f64) -> f64 {
        let idx = nodes.partition_point(|n| n.t <= t);
        if idx == 0 {
            return 0.0;
        }
        if idx >= nodes.len() {
            return nodes.last().expect("seeded").y;
        }
        let lo = nodes[idx - 1];
        let hi = nodes[idx];
        hermite(lo.t, lo.y, lo.dy, hi.t, hi.y, hi.dy, t)
    }
}

/// Shorthand for wrapping a plain function as a shareable integrand.
pub fn integrand_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Integrand {
    Arc::new(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antiderivative_of_constant_and_exp() {
        let table = CumulativeIntegral::new(integrand_fn(|_| 1.0), 0.0);
        assert!((table.value(5.0) - 5.0).abs() < 1e-9);
        assert!((table.value(-3.0) + 3.0).abs() < 1e-9);

        let table = CumulativeIntegral::new(integrand_fn(f64::exp), 0.0);
        assert!((table.value(1.0) - 1f64.exp_m1()).abs() < 1e-9);
        // saturates instead of returning NaN once exp overflows
        assert_eq!(table.value(800.0), f64::INFINITY);
    }

    #[test]
    fn positive_part_antiderivative() {
        let table = CumulativeIntegral::new(integrand_fn(|t: f64| t.max(0.0)), -2.0);
        assert!((table.value(3.0) - 4.5).abs() < 1e-9);
    }

    #[test]
    fn monotone_and_consistent_across_knots() {
        let table = CumulativeIntegral::new(integrand_fn(|t: f64| 1.0 / (1.0 + t * t)), 0.0);
        let mut prev = 0.0;
        for i in 1..200 {
            let t = i as f64 * 0.37;
            let v = table.value(t);
            assert!(v >= prev);
            let direct = (t).atan();
            assert!((v - direct).abs() < 1e-8, "at {t}: {v} vs {direct}");
            prev = v;
        }
    }

    #[test]
    fn linear_ivp_matches_closed_form() {
        // y' + 2y = 1, y(0) = 0 -> y = (1 - e^{-2t})/2
        let table = LinearIvpTable::new(integrand_fn(|_| 1.0), integrand_fn(|_| 1.0), -2.0, 0.0);
        for &t in &[0.1f64, 0.5, 1.0, 3.0, 10.0] {
            let exact = 0.5 * (1.0 - (-2.0 * t).exp());
            let got = table.value(t);
            assert!((got - exact).abs() < 1e-9, "t={t}: {got} vs {exact}");
        }
        assert_eq!(table.value(0.0), 0.0);
    }

    #[test]
    fn growing_ivp_saturates() {
        // y' = e^t + 2y grows super-exponentially; must saturate cleanly.
        let table = LinearIvpTable::new(integrand_fn(f64::exp), integrand_fn(|_| 1.0), 2.0, 0.0);
        assert!(table.value(1.0).is_finite());
        assert_eq!(table.value(500.0), f64::INFINITY);
    }
}
