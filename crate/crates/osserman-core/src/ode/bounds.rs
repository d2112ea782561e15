//! Shared evaluation kit for the trajectory estimates.
//!
//! The slope of a solution is sandwiched, in value space, between explicit
//! functionals of `\int_a^phi f`, `\int_a^phi g^{+/-}` and the weighted
//! integral `psi_a`; integrating the reciprocals gives the radius-space
//! bounds. The same denominators with `c` replaced by the dimension are the
//! barrier integrands, so the kit is shared by the solver checks, the
//! blow-up bracket, and the barrier builder.

use crate::nonlin::{
    antiderivative, psi_table, sign_parts, weight_h, CumulativeIntegral, LinearIvpTable, Limit,
    NonlinError, Nonlinearity, SignSplit, WeightH,
};
use std::sync::Arc;

pub struct EstimateKit {
    pub q: f64,
    pub c: f64,
    pub a: f64,
    pub f: Nonlinearity,
    pub g: Nonlinearity,
    pub split: SignSplit,
    pub h: WeightH,
    /// `\int_a^t f`
    pub big_f: Arc<CumulativeIntegral>,
    /// `\int_a^t g^+`
    pub big_gp: Arc<CumulativeIntegral>,
    /// `\int_a^t g^-`
    pub big_gm: Arc<CumulativeIntegral>,
    /// `psi_a`: solution of `y' + 2 h y = f`, `y(a) = 0`
    pub psi: Arc<LinearIvpTable>,
    /// `\int_a^t e^{2 \int_s^t g^+} f ds`: solution of `y' = f + 2 g^+ y`
    chi_full: Arc<LinearIvpTable>,
    /// same with weight `2/c`
    chi_c: Arc<LinearIvpTable>,
}

impl EstimateKit {
    pub fn new(
        f: &Nonlinearity,
        g: &Nonlinearity,
        q: f64,
        c: f64,
        a: f64,
    ) -> Result<Self, NonlinError> {
        let split = sign_parts(g)?;
        let h = weight_h(f, g, q)?;
        let big_f = Arc::new(antiderivative(f, a));
        let big_gp = Arc::new(antiderivative(&split.plus, a));
        let big_gm = Arc::new(antiderivative(&split.minus, a));
        let psi = Arc::new(psi_table(f, &h, a));
        let chi_full = Arc::new(LinearIvpTable::new(
            f.integrand(),
            split.plus.integrand(),
            2.0,
            a,
        ));
        let chi_c = Arc::new(LinearIvpTable::new(
            f.integrand(),
            split.plus.integrand(),
            2.0 / c,
            a,
        ));
        Ok(EstimateKit {
            q,
            c,
            a,
            f: f.clone(),
            g: g.clone(),
            split,
            h,
            big_f,
            big_gp,
            big_gm,
            psi,
            chi_full,
            chi_c,
        })
    }

    pub fn g_at_a_nonneg(&self) -> bool {
        self.g.eval(self.a) >= 0.0
    }

    /// Nondecreasing `g` is nonpositive everywhere iff its limit is <= 0.
    pub fn g_nonpositive(&self) -> bool {
        match self.g.limit_at_infinity() {
            Limit::Finite(l) => l <= 0.0,
            Limit::MinusInfinity => true,
            Limit::PlusInfinity => false,
        }
    }

    fn gp_power(&self, t: f64) -> f64 {
        let v = self.big_gp.value(t);
        if v == 0.0 {
            0.0
        } else {
            v.powf(1.0 / (2.0 - self.q))
        }
    }

    /// Upper slope bound valid under the standing hypotheses alone.
    pub fn ub_gplus(&self, x: f64) -> f64 {
        if self.q < 2.0 {
            let base = self.big_f.value(x).max(0.0).sqrt() + self.gp_power(x);
            (2f64).powf(2.0 / (2.0 - self.q)) * base
        } else {
            (2.0 * self.chi_full.value(x)).sqrt()
        }
    }

    /// Lower slope bound valid when `g(a) >= 0`.
    pub fn lb_gplus(&self, x: f64) -> f64 {
        if self.q < 2.0 {
            let base = self.big_f.value(x).max(0.0).sqrt() + self.gp_power(x);
            0.5 * ((2.0 - self.q) / self.c).powf(1.0 / (2.0 - self.q)) * base
        } else {
            ((2.0 / self.c) * self.chi_c.value(x)).sqrt()
        }
    }

    /// Lower slope bound valid without any sign assumption on `g`.
    pub fn lb_gminus(&self, x: f64) -> f64 {
        (self.q * self.c.powf(-2.0 / self.q) * self.psi.value(x)).sqrt()
    }

    /// Upper slope bound valid when `g <= 0` everywhere.
    pub fn ub_gminus(&self, x: f64) -> f64 {
        (2.0 * self.psi.value(x)).sqrt()
    }

    /// Denominator of the unconditional radius lower bound.
    pub fn denom_plus(&self, t: f64) -> f64 {
        if self.q < 2.0 {
            self.big_f.value(t).max(0.0).sqrt() + self.gp_power(t)
        } else {
            (2.0 * self.chi_full.value(t)).sqrt()
        }
    }

    /// Denominator of the radius upper bound for `g(a) >= 0` (differs from
    /// [`Self::denom_plus`] only at `q = 2`, where the weight carries `2/c`).
    pub fn denom_plus_c(&self, t: f64) -> f64 {
        if self.q < 2.0 {
            self.denom_plus(t)
        } else {
            self.chi_c.value(t).sqrt()
        }
    }

    /// `sqrt(psi_a)`, the denominator of both `g <= 0` radius bounds.
    pub fn denom_zero(&self, t: f64) -> f64 {
        self.psi.value(t).sqrt()
    }

    /// Best valid lower bound on the slope at value `t`, used to certify the
    /// tail of a blow-up.
    pub fn lower_velocity(&self, t: f64) -> f64 {
        let mut v = self.lb_gminus(t);
        if self.g_at_a_nonneg() {
            v = v.max(self.lb_gplus(t));
        }
        v
    }

    pub fn coef_lbrg_plus(&self) -> f64 {
        if self.q < 2.0 {
            (2f64).powf(-2.0 / (2.0 - self.q))
        } else {
            1.0
        }
    }

    pub fn coef_ubrg_plus(&self) -> f64 {
        if self.q < 2.0 {
            2.0 * (self.c / (2.0 - self.q)).powf(1.0 / (2.0 - self.q))
        } else {
            (self.c / 2.0).sqrt()
        }
    }

    pub fn coef_ubrg_minus(&self) -> f64 {
        self.c.powf(1.0 / self.q) / self.q.sqrt()
    }

    pub fn coef_lbrg_minus(&self) -> f64 {
        0.5f64.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::nonlin::GrowthClass;

    fn nl(expr: Expr, limit: Limit, growth: Option<GrowthClass>) -> Nonlinearity {
        Nonlinearity::auto(expr, limit, growth).unwrap()
    }

    #[test]
    fn exp_first_integral_is_sharp_for_q2_c1() {
        // f = exp, g = 0, c = 1, q = 2: both (lbg-) and (ubg-) reduce to
        // sqrt(2(e^x - e^a)), the exact first integral.
        let f = nl(
            Expr::exp(Expr::identity()),
            Limit::PlusInfinity,
            Some(GrowthClass::Exponential),
        );
        let g = nl(Expr::constant(0.0), Limit::Finite(0.0), Some(GrowthClass::Bounded));
        let kit = EstimateKit::new(&f, &g, 2.0, 1.0, 0.0).unwrap();
        for &x in &[0.5f64, 1.0, 3.0, 10.0] {
            let exact = (2.0 * x.exp_m1()).sqrt();
            let lb = kit.lb_gminus(x);
            let ub = kit.ub_gminus(x);
            assert!((lb - exact).abs() < 1e-7 * exact, "lb at {x}: {lb} vs {exact}");
            assert!((ub - exact).abs() < 1e-7 * exact, "ub at {x}: {ub} vs {exact}");
            assert!(kit.g_nonpositive());
        }
    }

    #[test]
    fn plus_bounds_order() {
        // Bounds must sandwich: lb_gplus <= ub_gplus pointwise.
        let f = nl(
            Expr::softplus_of(Expr::identity()),
            Limit::PlusInfinity,
            Some(GrowthClass::Power(1.0)),
        );
        let g = nl(Expr::constant(1.0), Limit::Finite(1.0), Some(GrowthClass::Bounded));
        for q in [0.5, 1.0, 1.7, 2.0] {
            let kit = EstimateKit::new(&f, &g, q, 3.0, 0.0).unwrap();
            for &x in &[0.2, 1.0, 5.0, 40.0] {
                assert!(kit.lb_gplus(x) <= kit.ub_gplus(x) * (1.0 + 1e-9));
                assert!(kit.lb_gminus(x) <= kit.ub_gplus(x) * (1.0 + 1e-9));
            }
        }
    }
}
