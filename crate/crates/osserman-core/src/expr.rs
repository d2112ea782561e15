//! Expression trees for the nonlinearities `f` and `g`.
//!
//! The grammar is a closed catalog of shapes that are total on all of R and
//! whose monotonicity / sign structure can be decided syntactically. Trees
//! also evaluate in signed log space (see [`LogVal`]), which the solver needs
//! once trajectory values leave the f64 range.

use crate::logval::LogVal;
use serde_json::Value;
use std::fmt;
use std::sync::Arc;

/// Node of a nonlinearity expression. `Arc` children keep clones cheap; trees
/// are immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Constant `k`.
    Const(f64),
    /// The argument `t`.
    Identity,
    /// `mul * child + add`.
    Affine { mul: f64, add: f64, arg: Arc<Expr> },
    /// `exp(child)`.
    Exp(Arc<Expr>),
    /// `ln(1 + exp(child))`.
    Softplus(Arc<Expr>),
    /// `max(child, 0)^p`, `p >= 0`; the child must be structurally nonnegative.
    Power { exp: f64, arg: Arc<Expr> },
    /// `max(child, 0)`.
    PosPart(Arc<Expr>),
    /// `max(-child, 0)`.
    NegPart(Arc<Expr>),
    /// Sum of the children.
    Sum(Vec<Arc<Expr>>),
    /// `k * child`, `k >= 0`.
    Scale { k: f64, arg: Arc<Expr> },
    /// `ln(1 + max(child, 0))^p`, `p >= 0`.
    LogPower { exp: f64, arg: Arc<Expr> },
}

/// Monotone direction guaranteed by the tree shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    Nondecreasing,
    Nonincreasing,
    Constant,
    Unknown,
}

/// Properties provable from the tree shape alone (conservative: `false`
/// means "not guaranteed", not "violated").
#[derive(Clone, Copy, Debug)]
pub struct Structure {
    pub monotone: Monotonicity,
    pub strictly_increasing: bool,
    pub nonnegative: bool,
    pub positive: bool,
    pub nonpositive: bool,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExprError {
    #[error("non-finite constant in expression")]
    NonFiniteConstant,
    #[error("power/log-power exponent must be finite and >= 0")]
    NegativeExponent,
    #[error("scale factor must be finite and >= 0")]
    NegativeScale,
    #[error("power applied to a base that is not guaranteed nonnegative")]
    UnguardedPowerBase,
    #[error("expression exceeds depth limit {0}")]
    TooDeep(usize),
    #[error("empty sum")]
    EmptySum,
    #[error("malformed expression document: {0}")]
    Malformed(String),
}

pub const MAX_DEPTH: usize = 64;

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Expr {
    pub fn constant(k: f64) -> Expr {
        Expr::Const(k)
    }

    pub fn identity() -> Expr {
        Expr::Identity
    }

    pub fn affine(mul: f64, add: f64, arg: Expr) -> Expr {
        Expr::Affine {
            mul,
            add,
            arg: Arc::new(arg),
        }
    }

    pub fn exp(arg: Expr) -> Expr {
        Expr::Exp(Arc::new(arg))
    }

    pub fn softplus_of(arg: Expr) -> Expr {
        Expr::Softplus(Arc::new(arg))
    }

    pub fn power(arg: Expr, exp: f64) -> Expr {
        Expr::Power {
            exp,
            arg: Arc::new(arg),
        }
    }

    pub fn pos_part(arg: Expr) -> Expr {
        Expr::PosPart(Arc::new(arg))
    }

    pub fn neg_part(arg: Expr) -> Expr {
        Expr::NegPart(Arc::new(arg))
    }

    pub fn sum(terms: Vec<Expr>) -> Expr {
        Expr::Sum(terms.into_iter().map(Arc::new).collect())
    }

    pub fn scale(k: f64, arg: Expr) -> Expr {
        Expr::Scale {
            k,
            arg: Arc::new(arg),
        }
    }

    pub fn log_power(arg: Expr, exp: f64) -> Expr {
        Expr::LogPower {
            exp,
            arg: Arc::new(arg),
        }
    }

    /// Total evaluation; never panics, may return `±inf` on overflow.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Const(k) => *k,
            Expr::Identity => t,
            Expr::Affine { mul, add, arg } => mul * arg.eval(t) + add,
            Expr::Exp(arg) => arg.eval(t).exp(),
            Expr::Softplus(arg) => softplus(arg.eval(t)),
            Expr::Power { exp, arg } => arg.eval(t).max(0.0).powf(*exp),
            Expr::PosPart(arg) => arg.eval(t).max(0.0),
            Expr::NegPart(arg) => (-arg.eval(t)).max(0.0),
            Expr::Sum(terms) => terms.iter().map(|e| e.eval(t)).sum(),
            Expr::Scale { k, arg } => k * arg.eval(t),
            Expr::LogPower { exp, arg } => arg.eval(t).max(0.0).ln_1p().powf(*exp),
        }
    }

    /// Evaluation with both argument and result in signed log space.
    ///
    /// Agrees with [`Expr::eval`] wherever the plain evaluation stays finite,
    /// and extends it to arguments (or values) outside the f64 range.
    pub fn eval_log(&self, t: LogVal) -> LogVal {
        match self {
            Expr::Const(k) => LogVal::from_f64(*k),
            Expr::Identity => t,
            Expr::Affine { mul, add, arg } => LogVal::from_f64(*mul)
                .mul(arg.eval_log(t))
                .add(LogVal::from_f64(*add)),
            Expr::Exp(arg) => {
                let v = arg.eval_log(t).to_f64();
                if v == f64::NEG_INFINITY {
                    LogVal::ZERO
                } else {
                    LogVal::positive(v)
                }
            }
            Expr::Softplus(arg) => {
                let inner = arg.eval_log(t);
                let v = inner.to_f64();
                if v == f64::INFINITY {
                    // softplus(x) -> x from above; ln softplus -> ln x
                    inner
                } else if v < -30.0 {
                    // softplus(x) ~ e^x, so ln softplus ~ x
                    if v == f64::NEG_INFINITY {
                        LogVal::ZERO
                    } else {
                        LogVal::positive(v)
                    }
                } else {
                    LogVal::from_f64(softplus(v))
                }
            }
            Expr::Power { exp, arg } => arg.eval_log(t).pow_clamped(*exp),
            Expr::PosPart(arg) => {
                let v = arg.eval_log(t);
                if v.sign > 0 {
                    v
                } else {
                    LogVal::ZERO
                }
            }
            Expr::NegPart(arg) => {
                let v = arg.eval_log(t);
                if v.sign < 0 {
                    v.neg()
                } else {
                    LogVal::ZERO
                }
            }
            Expr::Sum(terms) => LogVal::sum(terms.iter().map(|e| e.eval_log(t))),
            Expr::Scale { k, arg } => {
                if *k == 0.0 {
                    LogVal::ZERO
                } else {
                    arg.eval_log(t).scale_ln(k.ln())
                }
            }
            Expr::LogPower { exp, arg } => {
                let v = arg.eval_log(t);
                if v.sign <= 0 {
                    return LogVal::from_f64(0f64.powf(*exp));
                }
                // w = ln(1 + v) evaluated without forming v when it is huge.
                let w = if v.ln_abs > 40.0 {
                    v.ln_abs
                } else {
                    v.to_f64().ln_1p()
                };
                if w <= 0.0 {
                    LogVal::from_f64(w.powf(*exp))
                } else {
                    LogVal::positive(*exp * w.ln())
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        1 + match self {
            Expr::Const(_) | Expr::Identity => 0,
            Expr::Affine { arg, .. }
            | Expr::Exp(arg)
            | Expr::Softplus(arg)
            | Expr::Power { arg, .. }
            | Expr::PosPart(arg)
            | Expr::NegPart(arg)
            | Expr::Scale { arg, .. }
            | Expr::LogPower { arg, .. } => arg.depth(),
            Expr::Sum(terms) => terms.iter().map(|e| e.depth()).max().unwrap_or(0),
        }
    }

    /// Checks the grammar-level invariants (finite constants, nonnegative
    /// exponents and scale factors, guarded power bases, depth cap).
    pub fn validate(&self) -> Result<(), ExprError> {
        if self.depth() > MAX_DEPTH {
            return Err(ExprError::TooDeep(MAX_DEPTH));
        }
        self.validate_inner()
    }

    fn validate_inner(&self) -> Result<(), ExprError> {
        match self {
            Expr::Const(k) => {
                if !k.is_finite() {
                    return Err(ExprError::NonFiniteConstant);
                }
            }
            Expr::Identity => {}
            Expr::Affine { mul, add, arg } => {
                if !mul.is_finite() || !add.is_finite() {
                    return Err(ExprError::NonFiniteConstant);
                }
                arg.validate_inner()?;
            }
            Expr::Exp(arg) | Expr::Softplus(arg) | Expr::PosPart(arg) | Expr::NegPart(arg) => {
                arg.validate_inner()?;
            }
            Expr::Power { exp, arg } => {
                if !exp.is_finite() || *exp < 0.0 {
                    return Err(ExprError::NegativeExponent);
                }
                if !arg.structure().nonnegative {
                    return Err(ExprError::UnguardedPowerBase);
                }
                arg.validate_inner()?;
            }
            Expr::Sum(terms) => {
                if terms.is_empty() {
                    return Err(ExprError::EmptySum);
                }
                for term in terms {
                    term.validate_inner()?;
                }
            }
            Expr::Scale { k, arg } => {
                if !k.is_finite() || *k < 0.0 {
                    return Err(ExprError::NegativeScale);
                }
                arg.validate_inner()?;
            }
            Expr::LogPower { exp, arg } => {
                if !exp.is_finite() || *exp < 0.0 {
                    return Err(ExprError::NegativeExponent);
                }
                arg.validate_inner()?;
            }
        }
        Ok(())
    }

    /// Syntactic monotonicity / sign analysis.
    pub fn structure(&self) -> Structure {
        use Monotonicity::*;
        match self {
            Expr::Const(k) => Structure {
                monotone: Constant,
                strictly_increasing: false,
                nonnegative: *k >= 0.0,
                positive: *k > 0.0,
                nonpositive: *k <= 0.0,
            },
            Expr::Identity => Structure {
                monotone: Nondecreasing,
                strictly_increasing: true,
                nonnegative: false,
                positive: false,
                nonpositive: false,
            },
            Expr::Affine { mul, add, arg } => {
                let c = arg.structure();
                let monotone = if *mul > 0.0 {
                    c.monotone
                } else if *mul == 0.0 {
                    Constant
                } else {
                    flip(c.monotone)
                };
                // sign of mul*x + add from the sign of x
                let term_nonneg = (*mul >= 0.0 && c.nonnegative) || (*mul <= 0.0 && c.nonpositive);
                let term_nonpos = (*mul >= 0.0 && c.nonpositive) || (*mul <= 0.0 && c.nonnegative);
                let term_positive = (*mul > 0.0 && c.positive) && *mul > 0.0;
                Structure {
                    monotone,
                    strictly_increasing: *mul > 0.0 && c.strictly_increasing,
                    nonnegative: term_nonneg && *add >= 0.0,
                    positive: (term_nonneg && *add > 0.0) || (term_positive && *add >= 0.0),
                    nonpositive: term_nonpos && *add <= 0.0,
                }
            }
            Expr::Exp(arg) | Expr::Softplus(arg) => {
                let c = arg.structure();
                Structure {
                    monotone: c.monotone,
                    strictly_increasing: c.strictly_increasing,
                    nonnegative: true,
                    positive: true,
                    nonpositive: false,
                }
            }
            Expr::Power { exp, arg } => {
                let c = arg.structure();
                Structure {
                    monotone: if *exp == 0.0 { Constant } else { c.monotone },
                    strictly_increasing: *exp > 0.0 && c.strictly_increasing && c.positive,
                    nonnegative: true,
                    positive: c.positive || *exp == 0.0,
                    nonpositive: false,
                }
            }
            Expr::PosPart(arg) => {
                let c = arg.structure();
                Structure {
                    monotone: c.monotone,
                    strictly_increasing: c.strictly_increasing && c.positive,
                    nonnegative: true,
                    positive: c.positive,
                    nonpositive: c.nonpositive,
                }
            }
            Expr::NegPart(arg) => {
                let c = arg.structure();
                Structure {
                    monotone: flip(c.monotone),
                    strictly_increasing: false,
                    nonnegative: true,
                    positive: false,
                    nonpositive: c.nonnegative,
                }
            }
            Expr::Sum(terms) => {
                let parts: Vec<Structure> = terms.iter().map(|e| e.structure()).collect();
                let monotone = parts
                    .iter()
                    .map(|p| p.monotone)
                    .fold(Constant, combine_directions);
                let nonnegative = parts.iter().all(|p| p.nonnegative);
                Structure {
                    monotone,
                    strictly_increasing: monotone == Nondecreasing
                        && parts.iter().any(|p| p.strictly_increasing),
                    nonnegative,
                    positive: nonnegative && parts.iter().any(|p| p.positive),
                    nonpositive: parts.iter().all(|p| p.nonpositive),
                }
            }
            Expr::Scale { k, arg } => {
                let c = arg.structure();
                if *k == 0.0 {
                    Structure {
                        monotone: Constant,
                        strictly_increasing: false,
                        nonnegative: true,
                        positive: false,
                        nonpositive: true,
                    }
                } else {
                    c
                }
            }
            Expr::LogPower { exp, arg } => {
                let c = arg.structure();
                Structure {
                    monotone: if *exp == 0.0 { Constant } else { c.monotone },
                    strictly_increasing: *exp > 0.0 && c.strictly_increasing && c.positive,
                    nonnegative: true,
                    positive: c.positive || *exp == 0.0,
                    nonpositive: false,
                }
            }
        }
    }

    /// Parses the JSON array form used by problem documents:
    /// a bare number, `"t"`, or `[tag, params..., child(ren)]` with tags
    /// `affine`, `exp`, `softplus`, `power`, `pospart`, `negpart`, `sum`,
    /// `scale`, `logpower`.
    pub fn from_value(value: &Value) -> Result<Expr, ExprError> {
        let expr = Self::from_value_depth(value, 0)?;
        expr.validate()?;
        Ok(expr)
    }

    fn from_value_depth(value: &Value, depth: usize) -> Result<Expr, ExprError> {
        if depth > MAX_DEPTH {
            return Err(ExprError::TooDeep(MAX_DEPTH));
        }
        match value {
            Value::Number(n) => {
                let k = n
                    .as_f64()
                    .ok_or_else(|| ExprError::Malformed("unrepresentable number".into()))?;
                Ok(Expr::Const(k))
            }
            Value::String(s) if s == "t" => Ok(Expr::Identity),
            Value::String(s) => Err(ExprError::Malformed(format!("unknown symbol {s:?}"))),
            Value::Array(items) => {
                let tag = items
                    .first()
                    .and_then(Value::as_str)
                    .ok_or_else(|| ExprError::Malformed("node must start with a tag".into()))?;
                let number = |i: usize| -> Result<f64, ExprError> {
                    items
                        .get(i)
                        .and_then(Value::as_f64)
                        .ok_or_else(|| ExprError::Malformed(format!("{tag}: argument {i} must be a number")))
                };
                let child = |i: usize| -> Result<Expr, ExprError> {
                    let v = items
                        .get(i)
                        .ok_or_else(|| ExprError::Malformed(format!("{tag}: missing child")))?;
                    Self::from_value_depth(v, depth + 1)
                };
                let arity = |n: usize| -> Result<(), ExprError> {
                    if items.len() != n + 1 {
                        Err(ExprError::Malformed(format!(
                            "{tag}: expected {n} arguments, got {}",
                            items.len() - 1
                        )))
                    } else {
                        Ok(())
                    }
                };
                match tag {
                    "affine" => {
                        arity(3)?;
                        Ok(Expr::affine(number(1)?, number(2)?, child(3)?))
                    }
                    "exp" => {
                        arity(1)?;
                        Ok(Expr::exp(child(1)?))
                    }
                    "softplus" => {
                        arity(1)?;
                        Ok(Expr::softplus_of(child(1)?))
                    }
                    "power" => {
                        arity(2)?;
                        Ok(Expr::power(child(2)?, number(1)?))
                    }
                    "pospart" => {
                        arity(1)?;
                        Ok(Expr::pos_part(child(1)?))
                    }
                    "negpart" => {
                        arity(1)?;
                        Ok(Expr::neg_part(child(1)?))
                    }
                    "sum" => {
                        if items.len() < 2 {
                            return Err(ExprError::EmptySum);
                        }
                        let mut terms = Vec::with_capacity(items.len() - 1);
                        for i in 1..items.len() {
                            terms.push(child(i)?);
                        }
                        Ok(Expr::sum(terms))
                    }
                    "scale" => {
                        arity(2)?;
                        Ok(Expr::scale(number(1)?, child(2)?))
                    }
                    "logpower" => {
                        arity(2)?;
                        Ok(Expr::log_power(child(2)?, number(1)?))
                    }
                    other => Err(ExprError::Malformed(format!("unknown tag {other:?}"))),
                }
            }
            other => Err(ExprError::Malformed(format!(
                "expected number, \"t\", or array, got {other}"
            ))),
        }
    }

    pub fn to_value(&self) -> Value {
        fn num(x: f64) -> Value {
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        match self {
            Expr::Const(k) => num(*k),
            Expr::Identity => Value::String("t".into()),
            Expr::Affine { mul, add, arg } => Value::Array(vec![
                Value::String("affine".into()),
                num(*mul),
                num(*add),
                arg.to_value(),
            ]),
            Expr::Exp(arg) => Value::Array(vec![Value::String("exp".into()), arg.to_value()]),
            Expr::Softplus(arg) => {
                Value::Array(vec![Value::String("softplus".into()), arg.to_value()])
            }
            Expr::Power { exp, arg } => Value::Array(vec![
                Value::String("power".into()),
                num(*exp),
                arg.to_value(),
            ]),
            Expr::PosPart(arg) => {
                Value::Array(vec![Value::String("pospart".into()), arg.to_value()])
            }
            Expr::NegPart(arg) => {
                Value::Array(vec![Value::String("negpart".into()), arg.to_value()])
            }
            Expr::Sum(terms) => {
                let mut items = vec![Value::String("sum".into())];
                items.extend(terms.iter().map(|e| e.to_value()));
                Value::Array(items)
            }
            Expr::Scale { k, arg } => Value::Array(vec![
                Value::String("scale".into()),
                num(*k),
                arg.to_value(),
            ]),
            Expr::LogPower { exp, arg } => Value::Array(vec![
                Value::String("logpower".into()),
                num(*exp),
                arg.to_value(),
            ]),
        }
    }
}

fn flip(m: Monotonicity) -> Monotonicity {
    match m {
        Monotonicity::Nondecreasing => Monotonicity::Nonincreasing,
        Monotonicity::Nonincreasing => Monotonicity::Nondecreasing,
        other => other,
    }
}

fn combine_directions(acc: Monotonicity, next: Monotonicity) -> Monotonicity {
    use Monotonicity::*;
    match (acc, next) {
        (Constant, x) | (x, Constant) => x,
        (Nondecreasing, Nondecreasing) => Nondecreasing,
        (Nonincreasing, Nonincreasing) => Nonincreasing,
        _ => Unknown,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_evaluations() {
        assert_eq!(Expr::exp(Expr::identity()).eval(0.0), 1.0);
        assert_eq!(Expr::pos_part(Expr::identity()).eval(-3.0), 0.0);
        let sp = Expr::softplus_of(Expr::identity());
        assert!((sp.eval(0.0) - 2f64.ln()).abs() < 1e-15);
        // softplus stays accurate in both tails
        assert!((sp.eval(50.0) - 50.0).abs() < 1e-12);
        assert!((sp.eval(-50.0) - (-50f64).exp()).abs() < 1e-60);
    }

    #[test]
    fn log_eval_matches_plain_eval() {
        let trees = [
            Expr::exp(Expr::identity()),
            Expr::softplus_of(Expr::identity()),
            Expr::power(Expr::softplus_of(Expr::identity()), 2.0),
            Expr::affine(2.0, 1.0, Expr::neg_part(Expr::identity())),
            Expr::sum(vec![
                Expr::constant(0.5),
                Expr::scale(3.0, Expr::pos_part(Expr::identity())),
            ]),
            Expr::log_power(Expr::pos_part(Expr::identity()), 1.5),
        ];
        for tree in &trees {
            for &t in &[-7.5, -0.3, 0.0, 0.4, 3.0, 123.0] {
                let plain = tree.eval(t);
                let logged = tree.eval_log(LogVal::from_f64(t)).to_f64();
                assert!(
                    (plain - logged).abs() <= 1e-9 * (1.0 + plain.abs()),
                    "{tree}: eval({t}) = {plain} vs log path {logged}"
                );
            }
        }
    }

    #[test]
    fn log_eval_beyond_f64_range() {
        // f(t) = softplus(t)^2 ~ t^2: at t = e^900 the value is e^1800.
        let f = Expr::power(Expr::softplus_of(Expr::identity()), 2.0);
        let v = f.eval_log(LogVal::positive(900.0));
        assert_eq!(v.sign, 1);
        assert!((v.ln_abs - 1800.0).abs() < 1e-9);
        // exp saturates cleanly instead of producing NaN.
        let e = Expr::exp(Expr::identity());
        assert_eq!(e.eval_log(LogVal::positive(900.0)).ln_abs, f64::INFINITY);
    }

    #[test]
    fn structure_analysis() {
        let f = Expr::exp(Expr::identity());
        let s = f.structure();
        assert!(s.positive && s.strictly_increasing);
        assert_eq!(s.monotone, Monotonicity::Nondecreasing);

        // g(t) = -t is nonincreasing
        let g = Expr::affine(-1.0, 0.0, Expr::identity());
        assert_eq!(g.structure().monotone, Monotonicity::Nonincreasing);

        // negpart flips direction and is nonnegative
        let np = Expr::neg_part(Expr::identity());
        let s = np.structure();
        assert_eq!(s.monotone, Monotonicity::Nonincreasing);
        assert!(s.nonnegative && !s.positive);

        // power over softplus keeps strictness
        let p = Expr::power(Expr::softplus_of(Expr::identity()), 2.0);
        assert!(p.structure().strictly_increasing);
    }

    #[test]
    fn validation_rejects_unguarded_power() {
        let bad = Expr::power(Expr::identity(), 2.0);
        assert_eq!(bad.validate(), Err(ExprError::UnguardedPowerBase));
        let good = Expr::power(Expr::pos_part(Expr::identity()), 2.0);
        assert!(good.validate().is_ok());
    }

    #[test]
    fn json_roundtrip() {
        let tree = Expr::sum(vec![
            Expr::affine(2.0, -1.0, Expr::exp(Expr::identity())),
            Expr::scale(0.5, Expr::log_power(Expr::pos_part(Expr::identity()), 2.0)),
        ]);
        let v = tree.to_value();
        let back = Expr::from_value(&v).unwrap();
        assert_eq!(tree, back);
    }

    #[test]
    fn parse_rejects_garbage() {
        for text in [
            "\"x\"",
            "[\"pow\", 2, \"t\"]",
            "[\"affine\", 1, \"t\"]",
            "[\"sum\"]",
            "[\"scale\", -1, \"t\"]",
            "null",
        ] {
            let v: Value = serde_json::from_str(text).unwrap();
            assert!(Expr::from_value(&v).is_err(), "{text} should not parse");
        }
    }
}
