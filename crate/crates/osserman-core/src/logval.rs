//! Signed log-domain scalars.
//!
//! Blow-up trajectories push `phi`, `phi'` and the nonlinearity values far
//! beyond the f64 range (for `f = exp` the slope passes 1e308 while `phi` is
//! still below 1500). The continuation phase of the solver and the tail
//! estimates therefore carry magnitudes as `sign * exp(ln)` pairs, which stay
//! representable until `ln` itself overflows.

/// A real number stored as `sign * exp(ln_abs)`.
///
/// Zero is `sign = 0, ln_abs = -inf`. `ln_abs = +inf` encodes an overflowed
/// magnitude of the given sign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogVal {
    pub sign: i8,
    pub ln_abs: f64,
}

impl LogVal {
    pub const ZERO: LogVal = LogVal {
        sign: 0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub fn from_f64(x: f64) -> LogVal {
        if x == 0.0 {
            LogVal::ZERO
        } else if x.is_nan() {
            LogVal {
                sign: 0,
                ln_abs: f64::NAN,
            }
        } else {
            LogVal {
                sign: if x > 0.0 { 1 } else { -1 },
                ln_abs: x.abs().ln(),
            }
        }
    }

    /// `sign * exp(ln)` with the usual saturation to `±inf` / `0`.
    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.ln_abs.exp(),
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn is_finite(self) -> bool {
        self.sign == 0 || self.ln_abs < f64::INFINITY
    }

    pub fn positive(ln_abs: f64) -> LogVal {
        LogVal { sign: 1, ln_abs }
    }

    pub fn neg(self) -> LogVal {
        LogVal {
            sign: -self.sign,
            ln_abs: self.ln_abs,
        }
    }

    pub fn scale_ln(self, dln: f64) -> LogVal {
        if self.sign == 0 {
            self
        } else {
            LogVal {
                sign: self.sign,
                ln_abs: self.ln_abs + dln,
            }
        }
    }

    pub fn mul(self, other: LogVal) -> LogVal {
        if self.sign == 0 || other.sign == 0 {
            return LogVal::ZERO;
        }
        LogVal {
            sign: self.sign * other.sign,
            ln_abs: self.ln_abs + other.ln_abs,
        }
    }

    /// Raise a nonnegative value to a power; negative bases are clamped to 0.
    pub fn pow_clamped(self, p: f64) -> LogVal {
        if self.sign <= 0 {
            if p == 0.0 {
                return LogVal::from_f64(1.0);
            }
            return LogVal::ZERO;
        }
        LogVal {
            sign: 1,
            ln_abs: p * self.ln_abs,
        }
    }

    /// Signed sum in log space (log-sum-exp with cancellation handling).
    pub fn add(self, other: LogVal) -> LogVal {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        // Order so |self| >= |other|.
        let (big, small) = if self.ln_abs >= other.ln_abs {
            (self, other)
        } else {
            (other, self)
        };
        let d = small.ln_abs - big.ln_abs; // <= 0
        if big.sign == small.sign {
            LogVal {
                sign: big.sign,
                ln_abs: big.ln_abs + d.exp().ln_1p(),
            }
        } else {
            // Cancellation: |big| - |small| = |big| * (1 - e^d).
            let rest = -d.exp_m1(); // 1 - e^d in [0, 1]
            if rest == 0.0 {
                LogVal::ZERO
            } else {
                LogVal {
                    sign: big.sign,
                    ln_abs: big.ln_abs + rest.ln(),
                }
            }
        }
    }

    pub fn sum(values: impl IntoIterator<Item = LogVal>) -> LogVal {
        values.into_iter().fold(LogVal::ZERO, LogVal::add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn roundtrip_and_arithmetic() {
        for &x in &[2.5, -3.0, 1e-200, -1e200, 0.0] {
            assert!(close(LogVal::from_f64(x).to_f64(), x));
        }
        let a = LogVal::from_f64(3.0);
        let b = LogVal::from_f64(-2.0);
        assert!(close(a.add(b).to_f64(), 1.0));
        assert!(close(a.mul(b).to_f64(), -6.0));
        assert!(close(a.pow_clamped(2.0).to_f64(), 9.0));
        assert!(b.pow_clamped(0.5).is_zero());
    }

    #[test]
    fn huge_magnitudes_stay_representable() {
        let big = LogVal::positive(1e6); // e^(1e6), not an f64
        let sum = big.add(LogVal::from_f64(1.0));
        assert_eq!(sum.sign, 1);
        assert!(close(sum.ln_abs, 1e6));
        assert!(big.to_f64().is_infinite());
    }

    #[test]
    fn cancellation_to_zero() {
        let a = LogVal::from_f64(5.0);
        assert!(a.add(a.neg()).is_zero());
    }
}
