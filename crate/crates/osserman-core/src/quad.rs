//! Adaptive quadrature and divergence probes.
//!
//! Everything the growth conditions need reduces to two primitives: a finite
//! integral of a positive integrand that may have an inverse-square-root
//! singularity at the left endpoint, and a verdict on whether an improper
//! integral over `(a, +inf)` diverges. Divergence of an improper integral is
//! not decidable from finitely many evaluations, so the probe returns a
//! three-valued verdict and callers with asymptotic knowledge pass a symbolic
//! decay hint that decides the borderline cases.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

pub type Integrand = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Singularity {
    None,
    /// Integrand behaves like `(t - a)^{-1/2}` near the left endpoint `a`.
    InverseSquareRoot,
}

#[derive(Clone)]
pub struct IntegrandSpec {
    pub f: Integrand,
    pub singularity: Singularity,
}

impl IntegrandSpec {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        IntegrandSpec {
            f: Arc::new(f),
            singularity: Singularity::None,
        }
    }

    pub fn with_sqrt_singularity(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        IntegrandSpec {
            f: Arc::new(f),
            singularity: Singularity::InverseSquareRoot,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: f64,
    pub abs_err: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum QuadError {
    #[error("integrand evaluated to a non-finite value at t = {t}")]
    NonFinite { t: f64 },
    #[error("symbolic rule says {symbolic} but numeric probe says {numeric}")]
    ConflictingEvidence {
        symbolic: &'static str,
        numeric: &'static str,
    },
}

/// Asymptotic class of a positive integrand near `+inf`, used as the
/// symbolic fast path for divergence decisions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntegrandDecay {
    /// `~ t^{-p} (ln t)^{-l}`: divergent iff `p < 1` or (`p == 1` and `l <= 1`).
    PowerLog { p: f64, l: f64 },
    /// Decays at least exponentially: convergent.
    Exponential,
    /// Bounded below by a positive constant: divergent.
    NoDecay,
}

impl IntegrandDecay {
    pub fn power(p: f64) -> Self {
        IntegrandDecay::PowerLog { p, l: 0.0 }
    }

    pub fn divergent(&self) -> bool {
        match *self {
            IntegrandDecay::PowerLog { p, l } => p < 1.0 || (p == 1.0 && l <= 1.0),
            IntegrandDecay::Exponential => false,
            IntegrandDecay::NoDecay => true,
        }
    }
}

#[derive(Clone, Debug)]
pub enum ProbeVerdict {
    Convergent { value: f64, abs_err: f64 },
    Divergent,
    Inconclusive,
}

impl ProbeVerdict {
    pub fn is_divergent(&self) -> bool {
        matches!(self, ProbeVerdict::Divergent)
    }

    pub fn is_convergent(&self) -> bool {
        matches!(self, ProbeVerdict::Convergent { .. })
    }

    pub fn is_conclusive(&self) -> bool {
        !matches!(self, ProbeVerdict::Inconclusive)
    }
}

/// Outcome of an improper-integral probe, with the partial integrals on the
/// doubling horizons kept for diagnostics.
#[derive(Clone, Debug)]
pub struct ProbeResult {
    pub verdict: ProbeVerdict,
    /// `(T_k, I(T_k))` pairs.
    pub partials: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug)]
pub struct ProbeOptions {
    /// First horizon is `a + delta`; horizon `k` is `a + delta * 2^k`.
    pub delta: f64,
    /// Number of doublings before giving up.
    pub max_doublings: u32,
    /// Tail tolerance for declaring convergence.
    pub tail_tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        // 64 doublings: the slowest convergent catalog integrands
        // (increments ~ 2^{-k/2}) need ~55 doublings to push increments
        // below the tail tolerance.
        ProbeOptions {
            delta: 1.0,
            max_doublings: 64,
            tail_tol: 1e-8,
        }
    }
}

// 7-15 Gauss-Kronrod pair (QUADPACK dqk15 nodes).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod evaluation on `[lo, hi]`. Returns `None` when the
/// integrand is non-finite at one of the (interior) nodes.
fn gk15(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut below = [0.0f64; 7];
    let mut above = [0.0f64; 7];
    for (j, &x) in XGK[..7].iter().enumerate() {
        below[j] = f(center - half * x);
        above[j] = f(center + half * x);
        if !below[j].is_finite() || !above[j].is_finite() {
            return None;
        }
    }
    let fc = f(center);
    if !fc.is_finite() {
        return None;
    }
    let mut kronrod = WGK[7] * fc;
    let mut resabs = WGK[7] * fc.abs();
    for j in 0..7 {
        kronrod += WGK[j] * (below[j] + above[j]);
        resabs += WGK[j] * (below[j].abs() + above[j].abs());
    }
    // The embedded 7-point Gauss rule uses the odd Kronrod nodes + center.
    let mut gauss = WG[3] * fc;
    for i in 0..3 {
        let j = 2 * i + 1;
        gauss += WG[i] * (below[j] + above[j]);
    }
    let value = kronrod * half;
    let err_raw = ((kronrod - gauss) * half).abs();
    // QUADPACK-style error sharpening.
    let resabs = resabs * half.abs();
    let err = if resabs > 0.0 && err_raw > 0.0 {
        (err_raw * (200.0 * err_raw / resabs).powf(1.5).min(1.0)).max(f64::EPSILON * 50.0 * resabs)
    } else {
        err_raw
    };
    Some((value, err))
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

const MAX_SEGMENTS: usize = 4096;

/// Adaptive Gauss-Kronrod on a finite interval without endpoint issues.
fn adaptive(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Result<Quadrature, QuadError> {
    if lo == hi {
        return Ok(Quadrature {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    let seed = gk15(f, lo, hi).ok_or(QuadError::NonFinite {
        t: 0.5 * (lo + hi),
    })?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        lo,
        hi,
        value: seed.0,
        err: seed.1,
    });
    let mut total = seed.0;
    let mut total_err = seed.1;
    while heap.len() < MAX_SEGMENTS {
        let target = (1e-10f64).max(1e-10 * total.abs());
        if total_err <= target {
            break;
        }
        let worst = heap.pop().expect("heap nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval at f64 resolution; keep as is
            heap.push(worst);
            break;
        }
        let left = gk15(f, worst.lo, mid).ok_or(QuadError::NonFinite {
            t: 0.5 * (worst.lo + mid),
        })?;
        let right = gk15(f, mid, worst.hi).ok_or(QuadError::NonFinite {
            t: 0.5 * (mid + worst.hi),
        })?;
        total += left.0 + right.0 - worst.value;
        total_err += left.1 + right.1 - worst.err;
        heap.push(Segment {
            lo: worst.lo,
            hi: mid,
            value: left.0,
            err: left.1,
        });
        heap.push(Segment {
            lo: mid,
            hi: worst.hi,
            value: right.0,
            err: right.1,
        });
    }
    Ok(Quadrature {
        value: total,
        abs_err: total_err.max(0.0),
    })
}

/// Integral over `(a, b)` with the hinted singularity handled by the
/// substitution `t = a + s^2` on the leading cell, which turns a
/// `(t-a)^{-1/2}` blow-up into a bounded transformed integrand.
pub fn integrate_finite(spec: &IntegrandSpec, a: f64, b: f64) -> Result<Quadrature, QuadError> {
    assert!(a < b, "integrate_finite requires a < b");
    match spec.singularity {
        Singularity::None => adaptive(spec.f.as_ref(), a, b),
        Singularity::InverseSquareRoot => {
            let cut = if b - a > 2.0 { a + 1.0 } else { b };
            let f = spec.f.clone();
            let transformed = move |s: f64| {
                if s == 0.0 {
                    0.0
                } else {
                    2.0 * s * f(a + s * s)
                }
            };
            let head = adaptive(&transformed, 0.0, (cut - a).sqrt())?;
            if cut >= b {
                return Ok(head);
            }
            let rest = adaptive(spec.f.as_ref(), cut, b)?;
            Ok(Quadrature {
                value: head.value + rest.value,
                abs_err: head.abs_err + rest.abs_err,
            })
        }
    }
}

/// Probe of `\int_a^\infty` on doubling horizons `T_k = a + delta * 2^k`.
///
/// Convergence is declared when three consecutive horizon increments fall
/// below the tail tolerance and the geometric tail extrapolation is itself
/// below tolerance; the extrapolated tail is folded into the reported value.
/// Divergence is declared when the increments grow or hold a positive floor.
pub fn integrate_to_infinity(spec: &IntegrandSpec, a: f64, opts: &ProbeOptions) -> ProbeResult {
    let mut partials = Vec::new();
    let mut increments: Vec<f64> = Vec::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut prev_t = a;

    for k in 0..=opts.max_doublings {
        let t_k = a + opts.delta * (2f64).powi(k as i32);
        let cell_spec = if k == 0 {
            spec.clone()
        } else {
            IntegrandSpec {
                f: spec.f.clone(),
                singularity: Singularity::None,
            }
        };
        let cell = match integrate_finite(&cell_spec, prev_t, t_k) {
            Ok(q) => q,
            Err(_) => {
                return ProbeResult {
                    verdict: ProbeVerdict::Inconclusive,
                    partials,
                };
            }
        };
        total += cell.value;
        total_err += cell.abs_err;
        partials.push((t_k, total));
        increments.push(cell.value);
        prev_t = t_k;

        // Convergence: three consecutive small increments plus a small
        // extrapolated geometric tail.
        let n = increments.len();
        if n >= 3 {
            let last3 = &increments[n - 3..];
            if last3.iter().all(|&d| d.abs() <= opts.tail_tol) {
                let ratio = estimate_ratio(&increments);
                if ratio < 0.95 {
                    let tail = increments[n - 1].max(0.0) * ratio / (1.0 - ratio);
                    if tail <= opts.tail_tol {
                        return ProbeResult {
                            verdict: ProbeVerdict::Convergent {
                                value: total + tail,
                                abs_err: (total_err + 0.5 * tail).max(1e-14 * total.abs()),
                            },
                            partials,
                        };
                    }
                }
            }
        }

        // Divergence: increments hold a positive floor or grow.
        if n >= 6 {
            let window = &increments[n - 5..];
            let floor_ok = window.iter().all(|&d| d >= 1e-4);
            let ratio = estimate_ratio(&increments);
            if floor_ok && ratio >= 0.999 {
                return ProbeResult {
                    verdict: ProbeVerdict::Divergent,
                    partials,
                };
            }
        }
    }

    ProbeResult {
        verdict: ProbeVerdict::Inconclusive,
        partials,
    }
}

/// Geometric-mean ratio of the last few increments; >= 1 means not decaying.
fn estimate_ratio(increments: &[f64]) -> f64 {
    let n = increments.len();
    let take = 4.min(n - 1);
    if take == 0 {
        return 1.0;
    }
    let mut log_sum = 0.0;
    let mut count = 0usize;
    for i in n - take..n {
        let prev = increments[i - 1];
        let cur = increments[i];
        if prev > 0.0 && cur > 0.0 {
            log_sum += (cur / prev).ln();
            count += 1;
        } else if prev > 0.0 && cur == 0.0 {
            return 0.0;
        }
    }
    if count == 0 {
        0.0
    } else {
        (log_sum / count as f64).exp()
    }
}

/// Divergence verdict with an optional symbolic fast path.
///
/// With a hint the symbolic rule decides and the numeric probe only
/// cross-checks (a conclusive disagreement is an error); without a hint the
/// numeric verdict is returned as is.
pub fn divergence_probe(
    spec: &IntegrandSpec,
    a: f64,
    hint: Option<IntegrandDecay>,
    opts: &ProbeOptions,
) -> Result<ProbeResult, QuadError> {
    let numeric = integrate_to_infinity(spec, a, opts);
    let Some(decay) = hint else {
        return Ok(numeric);
    };
    if decay.divergent() {
        if numeric.verdict.is_convergent() {
            return Err(QuadError::ConflictingEvidence {
                symbolic: "divergent",
                numeric: "convergent",
            });
        }
        Ok(ProbeResult {
            verdict: ProbeVerdict::Divergent,
            partials: numeric.partials,
        })
    } else {
        if numeric.verdict.is_divergent() {
            return Err(QuadError::ConflictingEvidence {
                symbolic: "convergent",
                numeric: "divergent",
            });
        }
        let verdict = match numeric.verdict {
            ProbeVerdict::Convergent { value, abs_err } => {
                ProbeVerdict::Convergent { value, abs_err }
            }
            // Symbolic convergence with an unresolved numeric tail: report
            // the best partial with an honest (large) error bar.
            _ => ProbeVerdict::Convergent {
                value: numeric.partials.last().map_or(f64::NAN, |p| p.1),
                abs_err: f64::INFINITY,
            },
        };
        Ok(ProbeResult {
            verdict,
            partials: numeric.partials,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn inverse_sqrt_endpoint() {
        let spec = IntegrandSpec::with_sqrt_singularity(|t: f64| 1.0 / t.sqrt());
        let q = integrate_finite(&spec, 0.0, 1.0).unwrap();
        assert!((q.value - 2.0).abs() < 1e-9, "got {}", q.value);
    }

    #[test]
    fn smooth_exponential() {
        let spec = IntegrandSpec::new(|t: f64| (-t).exp());
        let q = integrate_finite(&spec, 0.0, 1.0).unwrap();
        assert!((q.value - (1.0 - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn singular_exponential_matches_pi_oracle() {
        // \int_0^inf dt / sqrt(e^t - 1) = pi; the finite piece on (0, 10]
        // must land in (3.1, pi).
        let spec = IntegrandSpec::with_sqrt_singularity(|t: f64| 1.0 / t.exp_m1().sqrt());
        let q = integrate_finite(&spec, 0.0, 10.0).unwrap();
        assert!(q.value > 3.1 && q.value < PI, "got {}", q.value);
    }

    #[test]
    fn additivity() {
        let spec = IntegrandSpec::new(|t: f64| 1.0 / (1.0 + t * t));
        for &(a, b, c) in &[(0.0, 1.3, 4.0), (0.5, 2.0, 7.7), (1.0, 1.5, 2.0)] {
            let whole = integrate_finite(&spec, a, c).unwrap();
            let left = integrate_finite(&spec, a, b).unwrap();
            let right = integrate_finite(&spec, b, c).unwrap();
            let gap = (whole.value - left.value - right.value).abs();
            assert!(gap <= whole.abs_err + left.abs_err + right.abs_err + 1e-12);
        }
    }

    #[test]
    fn harmonic_tail_diverges() {
        let spec = IntegrandSpec::new(|t: f64| 1.0 / t);
        let probe = integrate_to_infinity(&spec, 1.0, &ProbeOptions::default());
        assert!(probe.verdict.is_divergent());
    }

    #[test]
    fn power_three_halves_converges_to_two() {
        let spec = IntegrandSpec::new(|t: f64| t.powf(-1.5));
        let probe = integrate_to_infinity(&spec, 1.0, &ProbeOptions::default());
        match probe.verdict {
            ProbeVerdict::Convergent { value, .. } => {
                assert!((value - 2.0).abs() < 1e-8, "got {value}");
            }
            other => panic!("expected convergence, got {other:?}"),
        }
    }

    #[test]
    fn exp_singularity_probe_hits_pi() {
        let spec = IntegrandSpec::with_sqrt_singularity(|t: f64| {
            let d = t.exp_m1();
            if d <= 0.0 {
                f64::INFINITY
            } else {
                1.0 / d.sqrt()
            }
        });
        let probe = integrate_to_infinity(&spec, 0.0, &ProbeOptions::default());
        match probe.verdict {
            ProbeVerdict::Convergent { value, .. } => {
                assert!((value - PI).abs() < 1e-6, "got {value}");
            }
            other => panic!("expected convergence, got {other:?}"),
        }
    }

    #[test]
    fn verdicts_stable_under_delta_doubling() {
        let cases: Vec<(IntegrandSpec, bool)> = vec![
            (IntegrandSpec::new(|t: f64| 1.0 / t), true),
            (IntegrandSpec::new(|t: f64| t.powf(-1.5)), false),
            (IntegrandSpec::new(|t: f64| (-t).exp()), false),
            (IntegrandSpec::new(|t: f64| t.powf(-0.5)), true),
        ];
        for (spec, want_divergent) in cases {
            for delta in [1.0, 2.0] {
                let opts = ProbeOptions {
                    delta,
                    ..Default::default()
                };
                let probe = integrate_to_infinity(&spec, 1.0, &opts);
                assert_eq!(
                    probe.verdict.is_divergent(),
                    want_divergent,
                    "delta {delta}"
                );
                assert!(probe.verdict.is_conclusive(), "delta {delta}");
            }
        }
    }

    #[test]
    fn symbolic_hint_decides() {
        // exponent 1/(2-q) with q = 0.5 gives t^{-2/3}: divergent.
        let spec = IntegrandSpec::new(|t: f64| t.powf(-2.0 / 3.0));
        let probe = divergence_probe(
            &spec,
            1.0,
            Some(IntegrandDecay::power(2.0 / 3.0)),
            &ProbeOptions::default(),
        )
        .unwrap();
        assert!(probe.verdict.is_divergent());
        assert!(probe.verdict.is_conclusive());

        // borderline log case the numeric probe cannot resolve
        let spec = IntegrandSpec::new(|t: f64| 1.0 / (t * t.ln().max(1e-12)));
        let probe = divergence_probe(
            &spec,
            2.0,
            Some(IntegrandDecay::PowerLog { p: 1.0, l: 1.0 }),
            &ProbeOptions::default(),
        )
        .unwrap();
        assert!(probe.verdict.is_divergent());
    }

    #[test]
    fn conflicting_evidence_is_reported() {
        // Integrand decays exponentially but the hint claims no decay.
        let spec = IntegrandSpec::new(|t: f64| (-t).exp());
        let err = divergence_probe(
            &spec,
            0.0,
            Some(IntegrandDecay::NoDecay),
            &ProbeOptions::default(),
        );
        assert!(err.is_err());
    }
}
