//! Verified nonlinearities and their derived weights.
//!
//! Everything downstream (solver, classifier, barrier) assumes `f` positive
//! and `f`, `g` nondecreasing. Those hypotheses are checked here once, at
//! construction: syntactic rules decide where the tree shape proves a
//! property, dense sampling refutes or corroborates the rest, and declared
//! asymptotics (`limit_at_infinity`, `growth_class`) are cross-checked
//! against tail evaluations in log space.

mod tables;

pub use tables::{integrand_fn, CumulativeIntegral, LinearIvpTable};

use crate::expr::{Expr, ExprError, Monotonicity};
use crate::logval::LogVal;
use crate::quad::Integrand;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Declared behavior of `|n(t)|` as `t -> +inf`. `Power(alpha)` with negative
/// `alpha` declares a power-law decay (used for `g^-` in the vanishing-`g`
/// regime).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GrowthClass {
    Power(f64),
    LogPower(f64),
    Exponential,
    Bounded,
}

/// `lim_{t -> +inf} n(t)` in the extended reals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Limit {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

impl Limit {
    pub fn sign(self) -> f64 {
        match self {
            Limit::Finite(l) => l.signum() * f64::from(l != 0.0),
            Limit::PlusInfinity => 1.0,
            Limit::MinusInfinity => -1.0,
        }
    }
}

/// Properties the caller claims; construction verifies every claimed one.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Claims {
    pub nondecreasing: bool,
    pub strictly_increasing: bool,
    pub positive: bool,
    pub nonnegative: bool,
    pub nonpositive: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum NonlinError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("claimed {property} fails at t = {t} (value {value})")]
    ClaimViolated {
        property: &'static str,
        t: f64,
        value: f64,
    },
    #[error("declared {what} is inconsistent with tail samples: {detail}")]
    TailMismatch { what: &'static str, detail: String },
    #[error("{0}")]
    Invalid(String),
}

/// A nonlinearity with verified claims and tail-checked asymptotics.
#[derive(Clone, Debug)]
pub struct Nonlinearity {
    expr: Arc<Expr>,
    claims: Claims,
    limit_at_infinity: Limit,
    growth_class: Option<GrowthClass>,
}

/// Hypothesis set to check: `Ode` is what the Cauchy analysis needs
/// (`f` positive, `f`, `g` nondecreasing); `Comparison` additionally needs
/// `f` strictly increasing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HypothesisProfile {
    Ode,
    Comparison,
}

/// Which role the nonlinearity plays in the inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    ZeroOrder,
    GradientCoefficient,
}

#[derive(Clone, Debug)]
pub struct PropertyCheck {
    pub property: &'static str,
    pub passed: bool,
    /// Sample (or sample pair start) witnessing a failure.
    pub witness: Option<(f64, f64)>,
    pub decided_by: &'static str,
}

#[derive(Clone, Debug)]
pub struct HypothesisReport {
    pub profile: HypothesisProfile,
    pub role: Role,
    pub checks: Vec<PropertyCheck>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const SAMPLE_LO: f64 = -100.0;
const SAMPLE_HI: f64 = 100.0;
const GRID_POINTS: usize = 10_000;
const RANDOM_POINTS: usize = 1_000;
const STRICT_MARGIN: f64 = 1e-12;

/// Deterministic verification grid: uniform plus seeded random points.
fn sample_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(GRID_POINTS + RANDOM_POINTS);
    let step = (SAMPLE_HI - SAMPLE_LO) / (GRID_POINTS - 1) as f64;
    for i in 0..GRID_POINTS {
        grid.push(SAMPLE_LO + step * i as f64);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0553_43AD);
    for _ in 0..RANDOM_POINTS {
        grid.push(rng.gen_range(SAMPLE_LO..SAMPLE_HI));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

impl Nonlinearity {
    /// Builds a nonlinearity and verifies every claimed property plus the
    /// declared asymptotics; any failure is a hard error.
    pub fn new(
        expr: Expr,
        claims: Claims,
        limit_at_infinity: Limit,
        growth_class: Option<GrowthClass>,
    ) -> Result<Self, NonlinError> {
        expr.validate()?;
        let n = Nonlinearity {
            expr: Arc::new(expr),
            claims,
            limit_at_infinity,
            growth_class,
        };
        n.verify_claims()?;
        n.verify_tail()?;
        Ok(n)
    }

    /// Builds with claims derived from the tree shape (never fails claim
    /// verification; asymptotics are still tail-checked).
    pub fn auto(
        expr: Expr,
        limit_at_infinity: Limit,
        growth_class: Option<GrowthClass>,
    ) -> Result<Self, NonlinError> {
        let s = expr.structure();
        let claims = Claims {
            nondecreasing: matches!(
                s.monotone,
                Monotonicity::Nondecreasing | Monotonicity::Constant
            ),
            strictly_increasing: s.strictly_increasing,
            positive: s.positive,
            nonnegative: s.nonnegative,
            nonpositive: s.nonpositive,
        };
        Nonlinearity::new(expr, claims, limit_at_infinity, growth_class)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn claims(&self) -> Claims {
        self.claims
    }

    pub fn limit_at_infinity(&self) -> Limit {
        self.limit_at_infinity
    }

    pub fn growth_class(&self) -> Option<GrowthClass> {
        self.growth_class
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.expr.eval(t)
    }

    pub fn eval_log(&self, t: LogVal) -> LogVal {
        self.expr.eval_log(t)
    }

    /// Shareable evaluation handle.
    pub fn integrand(&self) -> Integrand {
        let expr = self.expr.clone();
        Arc::new(move |t| expr.eval(t))
    }

    fn verify_claims(&self) -> Result<(), NonlinError> {
        let s = self.expr.structure();
        let needs_sampling = (self.claims.nondecreasing
            && !matches!(
                s.monotone,
                Monotonicity::Nondecreasing | Monotonicity::Constant
            ))
            || (self.claims.strictly_increasing && !s.strictly_increasing)
            || (self.claims.positive && !s.positive)
            || (self.claims.nonnegative && !s.nonnegative)
            || (self.claims.nonpositive && !s.nonpositive);
        if !needs_sampling {
            return Ok(());
        }
        let grid = sample_grid();
        let values: Vec<f64> = grid.iter().map(|&t| self.eval(t)).collect();
        for (i, (&t, &v)) in grid.iter().zip(&values).enumerate() {
            if self.claims.positive && !s.positive && v <= 0.0 {
                return Err(NonlinError::ClaimViolated {
                    property: "positive",
                    t,
                    value: v,
                });
            }
            if self.claims.nonnegative && !s.nonnegative && v < 0.0 {
                return Err(NonlinError::ClaimViolated {
                    property: "nonnegative",
                    t,
                    value: v,
                });
            }
            if self.claims.nonpositive && !s.nonpositive && v > 0.0 {
                return Err(NonlinError::ClaimViolated {
                    property: "nonpositive",
                    t,
                    value: v,
                });
            }
            if i > 0 {
                let (tp, vp) = (grid[i - 1], values[i - 1]);
                let slack = 4.0 * f64::EPSILON * (1.0 + vp.abs());
                if self.claims.nondecreasing
                    && !matches!(
                        s.monotone,
                        Monotonicity::Nondecreasing | Monotonicity::Constant
                    )
                    && v < vp - slack
                {
                    return Err(NonlinError::ClaimViolated {
                        property: "nondecreasing",
                        t: tp,
                        value: vp,
                    });
                }
                if self.claims.strictly_increasing
                    && !s.strictly_increasing
                    && t > tp
                    && v - vp <= STRICT_MARGIN
                {
                    return Err(NonlinError::ClaimViolated {
                        property: "strictly_increasing",
                        t: tp,
                        value: vp,
                    });
                }
            }
        }
        Ok(())
    }

    fn tail_value(&self, t: f64) -> LogVal {
        self.eval_log(LogVal::from_f64(t))
    }

    fn verify_tail(&self) -> Result<(), NonlinError> {
        let v2 = self.tail_value(1e2);
        let v3 = self.tail_value(1e3);
        let v4 = self.tail_value(1e4);
        match self.limit_at_infinity {
            Limit::Finite(l) => {
                let tol = 1e-3 * (1.0 + l.abs());
                let at4 = v4.to_f64();
                if !(at4 - l).abs().le(&tol) {
                    return Err(NonlinError::TailMismatch {
                        what: "limit_at_infinity",
                        detail: format!("declared {l}, sampled {at4} at t = 1e4"),
                    });
                }
            }
            Limit::PlusInfinity => {
                let lo = v2.to_f64();
                let hi = v4.to_f64();
                if !(hi > lo + 1e-3 * (1.0 + lo.abs()) || hi == f64::INFINITY) {
                    return Err(NonlinError::TailMismatch {
                        what: "limit_at_infinity",
                        detail: format!("declared +inf but tail is flat ({lo} .. {hi})"),
                    });
                }
            }
            Limit::MinusInfinity => {
                let lo = v2.to_f64();
                let hi = v4.to_f64();
                if !(hi < lo - 1e-3 * (1.0 + lo.abs()) || hi == f64::NEG_INFINITY) {
                    return Err(NonlinError::TailMismatch {
                        what: "limit_at_infinity",
                        detail: format!("declared -inf but tail is flat ({lo} .. {hi})"),
                    });
                }
            }
        }
        let Some(growth) = self.growth_class else {
            return Ok(());
        };
        let mismatch = |detail: String| NonlinError::TailMismatch {
            what: "growth_class",
            detail,
        };
        match growth {
            GrowthClass::Power(alpha) => {
                for (t, v) in [(1e3f64, v3), (1e4, v4)] {
                    if v.is_zero() {
                        return Err(mismatch(format!("value is 0 at t = {t}")));
                    }
                    let ratio = v.ln_abs / t.ln();
                    if (ratio - alpha).abs() > 0.25 {
                        return Err(mismatch(format!(
                            "declared t^{alpha}, sampled exponent {ratio:.3} at t = {t}"
                        )));
                    }
                }
            }
            GrowthClass::LogPower(alpha) => {
                for (t, v) in [(1e3f64, v3), (1e4, v4)] {
                    if v.is_zero() {
                        return Err(mismatch(format!("value is 0 at t = {t}")));
                    }
                    let ratio = v.ln_abs / t.ln().ln();
                    if (ratio - alpha).abs() > 0.35 {
                        return Err(mismatch(format!(
                            "declared (ln t)^{alpha}, sampled exponent {ratio:.3} at t = {t}"
                        )));
                    }
                }
            }
            GrowthClass::Exponential => {
                let r3 = v3.ln_abs / 1e3;
                let r4 = v4.ln_abs / 1e4;
                if !(r3 > 0.0 && r4 > 0.0 && (0.5..=2.0).contains(&(r4 / r3))) {
                    return Err(mismatch(format!(
                        "declared exponential, sampled rates {r3:.3e} and {r4:.3e}"
                    )));
                }
            }
            GrowthClass::Bounded => {
                let gap = (v4.to_f64() - v3.to_f64()).abs();
                if !gap.le(&(1e-3 * (1.0 + v3.to_f64().abs()))) {
                    return Err(mismatch(format!("declared bounded, tail still moves by {gap}")));
                }
            }
        }
        Ok(())
    }
}

/// Checks the hypothesis set of the given profile for a nonlinearity in the
/// given role, reporting per-property pass/fail with a witness on failure.
pub fn verify_hypotheses(
    n: &Nonlinearity,
    profile: HypothesisProfile,
    role: Role,
) -> HypothesisReport {
    let mut wanted: Vec<&'static str> = vec!["nondecreasing"];
    if role == Role::ZeroOrder {
        wanted.push("positive");
        if profile == HypothesisProfile::Comparison {
            wanted.push("strictly_increasing");
        }
    }
    let s = n.expr().structure();
    let mut grid_cache: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut ensure_grid = |n: &Nonlinearity| -> (Vec<f64>, Vec<f64>) {
        grid_cache
            .get_or_insert_with(|| {
                let grid = sample_grid();
                let values = grid.iter().map(|&t| n.eval(t)).collect();
                (grid, values)
            })
            .clone()
    };
    let mut checks = Vec::new();
    for property in wanted {
        let structural = match property {
            "nondecreasing" => matches!(
                s.monotone,
                Monotonicity::Nondecreasing | Monotonicity::Constant
            ),
            "positive" => s.positive,
            "strictly_increasing" => s.strictly_increasing,
            _ => unreachable!(),
        };
        if structural {
            checks.push(PropertyCheck {
                property,
                passed: true,
                witness: None,
                decided_by: "structural",
            });
            continue;
        }
        // Structurally refutable?
        let refuted = match property {
            "nondecreasing" => s.monotone == Monotonicity::Constant && false,
            "strictly_increasing" => s.monotone == Monotonicity::Constant,
            _ => false,
        };
        if refuted {
            checks.push(PropertyCheck {
                property,
                passed: false,
                witness: Some((0.0, n.eval(0.0))),
                decided_by: "structural",
            });
            continue;
        }
        let (grid, values) = ensure_grid(n);
        let mut witness = None;
        match property {
            "positive" => {
                for (&t, &v) in grid.iter().zip(&values) {
                    if v <= 0.0 {
                        witness = Some((t, v));
                        break;
                    }
                }
            }
            "nondecreasing" => {
                for i in 1..grid.len() {
                    let slack = 4.0 * f64::EPSILON * (1.0 + values[i - 1].abs());
                    if values[i] < values[i - 1] - slack {
                        witness = Some((grid[i - 1], values[i - 1]));
                        break;
                    }
                }
            }
            "strictly_increasing" => {
                for i in 1..grid.len() {
                    if grid[i] > grid[i - 1] && values[i] - values[i - 1] <= STRICT_MARGIN {
                        witness = Some((grid[i - 1], values[i - 1]));
                        break;
                    }
                }
            }
            _ => unreachable!(),
        }
        checks.push(PropertyCheck {
            property,
            passed: witness.is_none(),
            witness,
            decided_by: "sampled",
        });
    }
    HypothesisReport {
        profile,
        role,
        checks,
    }
}

/// `g = g^+ - g^-` as expression trees.
#[derive(Clone, Debug)]
pub struct SignSplit {
    pub plus: Nonlinearity,
    pub minus: Nonlinearity,
}

/// Splits `g` into positive and negative parts, with limits and growth
/// classes propagated from the declared asymptotics of `g`.
pub fn sign_parts(g: &Nonlinearity) -> Result<SignSplit, NonlinError> {
    let plus_expr = Expr::pos_part(g.expr().clone());
    let minus_expr = Expr::neg_part(g.expr().clone());
    let (plus_limit, plus_growth) = match g.limit_at_infinity() {
        Limit::PlusInfinity => (Limit::PlusInfinity, g.growth_class()),
        Limit::Finite(l) if l > 0.0 => (Limit::Finite(l), Some(GrowthClass::Bounded)),
        _ => (Limit::Finite(0.0), Some(GrowthClass::Bounded)),
    };
    let (minus_limit, minus_growth) = match g.limit_at_infinity() {
        Limit::MinusInfinity => (Limit::PlusInfinity, g.growth_class()),
        Limit::Finite(l) if l < 0.0 => (Limit::Finite(-l), Some(GrowthClass::Bounded)),
        Limit::Finite(l) if l == 0.0 => {
            // g^- decays to 0; its decay class is the declared class of |g|,
            // unless the tail is exactly 0 where no class applies.
            let tail = minus_expr.eval(1e4);
            let growth = if tail > 0.0 { g.growth_class() } else { None };
            (Limit::Finite(0.0), growth)
        }
        _ => (Limit::Finite(0.0), Some(GrowthClass::Bounded)),
    };
    Ok(SignSplit {
        plus: Nonlinearity::auto(plus_expr, plus_limit, plus_growth)?,
        minus: Nonlinearity::auto(minus_expr, minus_limit, minus_growth)?,
    })
}

/// Antiderivative cache `t -> \int_a^t n(s) ds`.
pub fn antiderivative(n: &Nonlinearity, a: f64) -> CumulativeIntegral {
    CumulativeIntegral::new(n.integrand(), a)
}

/// The weight `h(t) = (g^-(t)/f(t))^{2/q} f(t)`, identically 0 where
/// `g >= 0`, nonincreasing under the standing hypotheses.
#[derive(Clone)]
pub struct WeightH {
    q: f64,
    f: Nonlinearity,
    g: Nonlinearity,
}

pub fn weight_h(f: &Nonlinearity, g: &Nonlinearity, q: f64) -> Result<WeightH, NonlinError> {
    if !(q > 0.0 && q <= 2.0) {
        return Err(NonlinError::Invalid(format!("q = {q} must lie in (0, 2]")));
    }
    let h = WeightH {
        q,
        f: f.clone(),
        g: g.clone(),
    };
    // The standing hypotheses make h nonincreasing; a violation here means
    // the inputs do not satisfy them.
    let mut prev = f64::INFINITY;
    for i in 0..=400 {
        let t = -100.0 + 0.5 * i as f64;
        let v = h.value(t);
        if v > prev * (1.0 + 1e-9) + 1e-12 {
            return Err(NonlinError::Invalid(format!(
                "weight h increases near t = {t} ({prev} -> {v}); hypotheses violated"
            )));
        }
        prev = v;
    }
    Ok(h)
}

impl WeightH {
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn value(&self, t: f64) -> f64 {
        self.value_log(LogVal::from_f64(t)).to_f64()
    }

    /// `h = (g^-)^{2/q} * f^{1 - 2/q}`, computed in log space so that an
    /// overflowing `f` sends `h` to 0 (for `q < 2`) instead of NaN.
    pub fn value_log(&self, t: LogVal) -> LogVal {
        let g = self.g.eval_log(t);
        if g.sign >= 0 {
            return LogVal::ZERO;
        }
        let g_minus = g.neg();
        let f = self.f.eval_log(t);
        let p = 2.0 / self.q;
        g_minus.pow_clamped(p).mul(f.pow_clamped(1.0 - p))
    }

    pub fn integrand(&self) -> Integrand {
        let h = self.clone();
        Arc::new(move |t| h.value(t))
    }
}

/// Table for `psi_a(t) = \int_a^t e^{-2 \int_s^t h} f(s) ds`, the solution of
/// `psi' + 2 h psi = f`, `psi(a) = 0`.
pub fn psi_table(f: &Nonlinearity, h: &WeightH, a: f64) -> LinearIvpTable {
    LinearIvpTable::new(f.integrand(), h.integrand(), -2.0, a)
}

/// `psi_a(t)` for a one-off query.
pub fn weighted_cumulative(f: &Nonlinearity, h: &WeightH, a: f64, t: f64) -> f64 {
    debug_assert!(t >= a, "weighted_cumulative requires t >= a");
    psi_table(f, h, a).value(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_nl() -> Nonlinearity {
        Nonlinearity::auto(
            Expr::exp(Expr::identity()),
            Limit::PlusInfinity,
            Some(GrowthClass::Exponential),
        )
        .unwrap()
    }

    fn const_nl(k: f64) -> Nonlinearity {
        Nonlinearity::auto(Expr::constant(k), Limit::Finite(k), Some(GrowthClass::Bounded))
            .unwrap()
    }

    fn softplus_nl() -> Nonlinearity {
        Nonlinearity::auto(
            Expr::softplus_of(Expr::identity()),
            Limit::PlusInfinity,
            Some(GrowthClass::Power(1.0)),
        )
        .unwrap()
    }

    #[test]
    fn hypothesis_profiles() {
        let r = verify_hypotheses(&exp_nl(), HypothesisProfile::Ode, Role::ZeroOrder);
        assert!(r.passed());

        let r = verify_hypotheses(&const_nl(1.0), HypothesisProfile::Comparison, Role::ZeroOrder);
        assert!(!r.passed());
        let failed: Vec<_> = r.checks.iter().filter(|c| !c.passed).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].property, "strictly_increasing");

        // g(t) = -t is not nondecreasing
        let g = Nonlinearity::new(
            Expr::affine(-1.0, 0.0, Expr::identity()),
            Claims::default(),
            Limit::MinusInfinity,
            None,
        )
        .unwrap();
        let r = verify_hypotheses(&g, HypothesisProfile::Ode, Role::GradientCoefficient);
        assert!(!r.passed());
    }

    #[test]
    fn claim_verification_is_a_hard_error() {
        let bad = Nonlinearity::new(
            Expr::affine(-1.0, 0.0, Expr::identity()),
            Claims {
                nondecreasing: true,
                ..Claims::default()
            },
            Limit::MinusInfinity,
            None,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn tail_mismatch_is_a_hard_error() {
        let bad = Nonlinearity::auto(
            Expr::exp(Expr::identity()),
            Limit::Finite(1.0),
            None,
        );
        assert!(bad.is_err());
        let bad = Nonlinearity::auto(
            Expr::softplus_of(Expr::identity()),
            Limit::PlusInfinity,
            Some(GrowthClass::Power(2.0)),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn split_identities() {
        let g = Nonlinearity::auto(Expr::identity(), Limit::PlusInfinity, Some(GrowthClass::Power(1.0)))
            .unwrap();
        let split = sign_parts(&g).unwrap();
        assert_eq!(split.plus.eval(-3.0), 0.0);
        assert_eq!(split.minus.eval(-3.0), 3.0);
        for i in -40..=40 {
            let t = i as f64 * 2.5;
            let (p, m) = (split.plus.eval(t), split.minus.eval(t));
            assert_eq!(p - m, g.eval(t));
            assert_eq!(p * m, 0.0);
            assert!(p >= 0.0 && m >= 0.0);
        }

        let ones = sign_parts(&const_nl(1.0)).unwrap();
        assert_eq!(ones.plus.eval(7.0), 1.0);
        assert_eq!(ones.minus.eval(7.0), 0.0);
        let negs = sign_parts(&const_nl(-1.0)).unwrap();
        assert_eq!(negs.plus.eval(7.0), 0.0);
        assert_eq!(negs.minus.eval(7.0), 1.0);
    }

    #[test]
    fn antiderivative_examples() {
        assert!((antiderivative(&const_nl(1.0), 0.0).value(5.0) - 5.0).abs() < 1e-9);
        assert!((antiderivative(&exp_nl(), 0.0).value(1.0) - 1f64.exp_m1()).abs() < 1e-9);
        let pos = Nonlinearity::auto(
            Expr::pos_part(Expr::identity()),
            Limit::PlusInfinity,
            Some(GrowthClass::Power(1.0)),
        )
        .unwrap();
        assert!((antiderivative(&pos, -2.0).value(3.0) - 4.5).abs() < 1e-9);
    }

    #[test]
    fn weight_h_closed_forms() {
        // q = 2, g = -1, f = exp: h = (e^{-t}) * e^t = 1.
        let h = weight_h(&exp_nl(), &const_nl(-1.0), 2.0).unwrap();
        for &t in &[-5.0, 0.0, 3.0, 50.0] {
            assert!((h.value(t) - 1.0).abs() < 1e-12, "h({t}) = {}", h.value(t));
        }
        // g >= 0 everywhere: h = 0.
        let h0 = weight_h(&exp_nl(), &const_nl(2.0), 1.3).unwrap();
        assert_eq!(h0.value(0.0), 0.0);
        // q = 1, g = -1, f = 1: h = 1.
        let h1 = weight_h(&const_nl(1.0), &const_nl(-1.0), 1.0).unwrap();
        assert_eq!(h1.value(10.0), 1.0);
    }

    #[test]
    fn psi_closed_form_and_bounds() {
        // h = 1, f = 1: psi(t) = (1 - e^{-2t})/2.
        let f = const_nl(1.0);
        let h = weight_h(&f, &const_nl(-1.0), 2.0).unwrap();
        let psi = psi_table(&f, &h, 0.0);
        assert!((psi.value(1.0) - 0.432_332_358_381_693_65).abs() < 1e-9);
        assert_eq!(psi.value(0.0), 0.0);

        // 0 <= psi <= \int_a^t f and 2 h psi < f.
        let f = softplus_nl();
        let g = Nonlinearity::auto(
            Expr::affine(-1.0, 0.0, Expr::exp(Expr::affine(-1.0, 0.0, Expr::identity()))),
            Limit::Finite(0.0),
            None,
        )
        .unwrap();
        let h = weight_h(&f, &g, 1.5).unwrap();
        let psi = psi_table(&f, &h, -1.0);
        let anti = antiderivative(&f, -1.0);
        for i in 1..=60 {
            let t = -1.0 + 0.25 * i as f64;
            let p = psi.value(t);
            assert!(p >= 0.0);
            assert!(p <= anti.value(t) * (1.0 + 1e-9) + 1e-12);
            assert!(2.0 * h.value(t) * p < f.eval(t));
        }
    }

    #[test]
    fn psi_with_zero_weight_is_plain_antiderivative() {
        let f = exp_nl();
        let h = weight_h(&f, &const_nl(1.0), 1.0).unwrap();
        let psi = psi_table(&f, &h, 0.0);
        let anti = antiderivative(&f, 0.0);
        for &t in &[0.5, 1.0, 2.0, 5.0] {
            assert!((psi.value(t) - anti.value(t)).abs() < 1e-8 * (1.0 + anti.value(t)));
        }
    }
}
