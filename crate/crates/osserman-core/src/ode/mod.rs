//! The radial Cauchy problem
//! `phi'' + (c-1)/r phi' = f(phi) + g(phi) |phi'|^q`,
//! `phi(0) = a`, `phi'(0) = 0`, with blow-up detection and bracketing.
//!
//! Integration proceeds in three phases. A Taylor step resolves the 0/0 of
//! the `(c-1) phi'/r` term at the origin (`c phi''(0) = f(a)`). An adaptive
//! Dormand-Prince phase integrates in `r` until the radius range is done or
//! the trajectory steepens beyond what f64 radius increments can resolve.
//! Blow-up runs then continue in log coordinates `s = ln phi`, `L = ln phi'`
//! with the right-hand side evaluated in signed log space, which carries the
//! trajectory to the blow-up cap even when `phi'` passes 1e308. A blow-up is
//! only declared with a certificate: the remaining radius is bounded by
//! integrating the reciprocal of the valid lower slope bound, and if that
//! tail diverges the run keeps going (such trajectories may still be global).

pub mod bounds;
pub mod checks;

use crate::logval::LogVal;
use crate::nonlin::{verify_hypotheses, HypothesisProfile, NonlinError, Nonlinearity, Role};
use crate::quad::{integrate_to_infinity, IntegrandSpec, ProbeOptions, ProbeVerdict};
use crate::rk::{DormandPrince, StepError};
use bounds::EstimateKit;
use std::io::{self, Write};
use std::sync::Arc;

/// Slope/value ratio beyond which the r-parametrization is abandoned.
const RATIO_SWITCH: f64 = 1e8;
/// Value cap for the linear phase; beyond this `phi` itself nears overflow.
const PHI_LINEAR_CAP: f64 = 1e250;
/// Cap on `ln phi'` in the log phase.
const LN_SLOPE_CAP: f64 = 1e7;
/// Bracket safety margin in units of the relative step tolerance.
const BRACKET_MARGIN_FACTOR: f64 = 1e3;
/// Samples kept before decimation kicks in.
const MAX_SAMPLES: usize = 240_000;

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub step_rel: f64,
    pub phi_cap: f64,
    pub r_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            step_rel: 1e-9,
            phi_cap: 1e12,
            r_max: 1e3,
        }
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub f: Nonlinearity,
    pub g: Nonlinearity,
    pub q: f64,
    pub c: f64,
    pub a: f64,
    pub tol: Tolerances,
}

#[derive(Debug, thiserror::Error)]
pub enum OdeError {
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinError),
    #[error("solver violated a structural guarantee at r = {r}: {what}")]
    HypothesisViolation { what: String, r: f64 },
    #[error("step size collapsed at r = {r} (phi = {phi}) before any stopping condition")]
    StepUnderflow { r: f64, phi: f64 },
}

impl ProblemSpec {
    pub fn new(f: Nonlinearity, g: Nonlinearity, q: f64, c: f64, a: f64) -> Result<Self, OdeError> {
        let spec = ProblemSpec {
            f,
            g,
            q,
            c,
            a,
            tol: Tolerances::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        if !(self.q > 0.0 && self.q <= 2.0) {
            return Err(OdeError::InvalidSpec(format!(
                "q = {} must lie in (0, 2]",
                self.q
            )));
        }
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(OdeError::InvalidSpec(format!("c = {} must be >= 1", self.c)));
        }
        if !self.a.is_finite() {
            return Err(OdeError::InvalidSpec("initial value a must be finite".into()));
        }
        if !(self.tol.phi_cap > self.a.abs().max(1.0)) {
            return Err(OdeError::InvalidSpec(
                "phi_cap must exceed max(|a|, 1)".into(),
            ));
        }
        let rf = verify_hypotheses(&self.f, HypothesisProfile::Ode, Role::ZeroOrder);
        if !rf.passed() {
            return Err(OdeError::InvalidSpec(format!(
                "f fails the standing hypotheses: {:?}",
                rf.checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.property)
                    .collect::<Vec<_>>()
            )));
        }
        let rg = verify_hypotheses(&self.g, HypothesisProfile::Ode, Role::GradientCoefficient);
        if !rg.passed() {
            return Err(OdeError::InvalidSpec(
                "g fails the standing hypotheses (nondecreasing)".into(),
            ));
        }
        Ok(())
    }

    /// `phi''` from the equation at `r > 0`.
    pub fn second_derivative(&self, r: f64, phi: f64, dphi: f64) -> f64 {
        self.f.eval(phi) + self.g.eval(phi) * dphi.abs().powf(self.q)
            - (self.c - 1.0) * dphi / r
    }

    /// Start offset: small, and kept below the slow manifold
    /// `phi' = (f/g^-)^{1/q}` when the gradient term is absorbing at `a`.
    pub fn default_h0(&self) -> f64 {
        let base = 1e-6 * self.a.abs().max(1.0);
        let g_a = self.g.eval(self.a);
        if g_a < 0.0 {
            let f_a = self.f.eval(self.a);
            let v_star = (f_a / -g_a).powf(1.0 / self.q);
            let cap = 0.01 * self.c * v_star / f_a;
            base.min(cap).max(1e-12 * self.a.abs().max(1.0))
        } else {
            base
        }
    }
}

/// Second-order start consistent with `phi'(0) = 0`, `c phi''(0) = f(a)`.
pub fn taylor_start(spec: &ProblemSpec, h0: f64) -> (f64, f64, f64) {
    let f_a = spec.f.eval(spec.a);
    (
        h0,
        spec.a + f_a * h0 * h0 / (2.0 * spec.c),
        f_a * h0 / spec.c,
    )
}

/// One trajectory sample. For samples produced by the log phase the plain
/// fields saturate to `inf`; the log fields stay exact.
#[derive(Clone, Copy, Debug)]
pub struct Sample {
    pub r: f64,
    pub phi: f64,
    pub dphi: f64,
    pub ddphi: f64,
    pub phi_log: LogVal,
    pub dphi_log: LogVal,
}

/// Node of the log phase: `r` and `L = ln phi'` as functions of `s = ln phi`.
#[derive(Clone, Copy, Debug)]
struct LogNode {
    s: f64,
    r: f64,
    l: f64,
    dr_ds: f64,
    dl_ds: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// `f(a)/c`, curvature of the analytic start region.
    kappa: f64,
    h0: f64,
    a: f64,
    /// index of the first log-phase sample in `samples`
    linear_len: usize,
    log_nodes: Vec<LogNode>,
}

impl Trajectory {
    pub fn max_r(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.r)
    }

    /// Dense output `(phi, phi')` anywhere on the computed range.
    pub fn eval(&self, r: f64) -> Option<(f64, f64)> {
        if !(0.0..=self.max_r()).contains(&r) {
            return None;
        }
        if r <= self.h0 {
            return Some((self.a + 0.5 * self.kappa * r * r, self.kappa * r));
        }
        let linear = &self.samples[..self.linear_len];
        let last_linear_r = linear.last().map_or(0.0, |s| s.r);
        if r <= last_linear_r {
            let idx = linear.partition_point(|s| s.r <= r);
            let lo = &linear[idx - 1];
            if idx == linear.len() {
                return Some((lo.phi, lo.dphi));
            }
            let hi = &linear[idx];
            let phi = crate::rk::hermite(lo.r, lo.phi, lo.dphi, hi.r, hi.phi, hi.dphi, r);
            let dphi = crate::rk::hermite(lo.r, lo.dphi, lo.ddphi, hi.r, hi.dphi, hi.ddphi, r);
            return Some((phi, dphi));
        }
        // Log phase: invert the monotone map s -> r by bisection on the
        // Hermite interpolant, then read off phi and phi'.
        let idx = self.log_nodes.partition_point(|n| n.r <= r);
        if idx == 0 || idx >= self.log_nodes.len() {
            let n = self.log_nodes.last()?;
            return Some((n.s.exp(), n.l.exp()));
        }
        let lo = self.log_nodes[idx - 1];
        let hi = self.log_nodes[idx];
        let r_of_s =
            |s: f64| crate::rk::hermite(lo.s, lo.r, lo.dr_ds, hi.s, hi.r, hi.dr_ds, s);
        let (mut sl, mut sh) = (lo.s, hi.s);
        for _ in 0..80 {
            let mid = 0.5 * (sl + sh);
            if r_of_s(mid) < r {
                sl = mid;
            } else {
                sh = mid;
            }
        }
        let s = 0.5 * (sl + sh);
        let l = crate::rk::hermite(lo.s, lo.l, lo.dl_ds, hi.s, hi.l, hi.dl_ds, s);
        Some((s.exp(), l.exp()))
    }
}

/// Certified enclosure of the maximal radius.
#[derive(Clone, Debug)]
pub struct BlowupBracket {
    pub low: f64,
    pub high: f64,
    pub method: &'static str,
}

#[derive(Clone, Debug)]
pub enum Status {
    /// Integrated to the radius cap without blow-up.
    GlobalUpTo(f64),
    Blowup(BlowupBracket),
}

impl Status {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Status::Blowup(_))
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: Status,
    pub trajectory: Trajectory,
}

/// Tail bound on the remaining radius past `state`, from the valid lower
/// slope bounds. `high = +inf` when the tail probe cannot certify
/// convergence.
pub fn blowup_bracket(spec: &ProblemSpec, state: (f64, f64, f64)) -> Result<BlowupBracket, OdeError> {
    let kit = Arc::new(EstimateKit::new(&spec.f, &spec.g, spec.q, spec.c, spec.a)?);
    let margin = BRACKET_MARGIN_FACTOR * spec.tol.step_rel;
    Ok(certify(&kit, state.0, state.1, margin).unwrap_or(BlowupBracket {
        low: state.0 * (1.0 - margin),
        high: f64::INFINITY,
        method: "slope lower-bound tail divergent or inconclusive",
    }))
}

fn certify(kit: &Arc<EstimateKit>, r: f64, phi_stop: f64, margin: f64) -> Option<BlowupBracket> {
    if !phi_stop.is_finite() {
        return None;
    }
    let k = kit.clone();
    let integrand = IntegrandSpec::new(move |t: f64| {
        let v = k.lower_velocity(t);
        if v > 0.0 {
            1.0 / v
        } else {
            f64::INFINITY
        }
    });
    let probe = integrate_to_infinity(&integrand, phi_stop, &ProbeOptions::default());
    match probe.verdict {
        ProbeVerdict::Convergent { value, .. } => Some(BlowupBracket {
            low: r * (1.0 - margin),
            high: (r + value) * (1.0 + margin),
            method: "slope lower-bound tail",
        }),
        _ => None,
    }
}

struct SampleSink {
    samples: Vec<Sample>,
    log_nodes: Vec<LogNode>,
    stride: usize,
    pending: usize,
    linear_len: usize,
}

impl SampleSink {
    fn new() -> Self {
        SampleSink {
            samples: Vec::new(),
            log_nodes: Vec::new(),
            stride: 1,
            pending: 0,
            linear_len: 0,
        }
    }

    fn push(&mut self, sample: Sample, node: Option<LogNode>) {
        self.pending += 1;
        if self.pending < self.stride {
            return;
        }
        self.pending = 0;
        self.samples.push(sample);
        if let Some(n) = node {
            self.log_nodes.push(n);
        } else {
            self.linear_len = self.samples.len();
        }
        if self.samples.len() > MAX_SAMPLES {
            let mut keep = 0;
            let before_c = self.linear_len;
            self.samples.retain(|_| {
                keep += 1;
                (keep - 1) % 2 == 0
            });
            self.linear_len = before_c.div_ceil(2);
            self.stride *= 2;
        }
    }
}

/// Integrates the Cauchy problem. Returns `GlobalUpTo(r_max)` when the
/// radius cap is reached, or a certified (where possible) blow-up bracket.
pub fn solve_radial(spec: &ProblemSpec) -> Result<SolveOutcome, OdeError> {
    spec.validate()?;
    let kit = Arc::new(EstimateKit::new(
        &spec.f, &spec.g, spec.q, spec.c, spec.a,
    )?);
    let margin = BRACKET_MARGIN_FACTOR * spec.tol.step_rel;
    let r_max = spec.tol.r_max;
    let f_a = spec.f.eval(spec.a);
    if !(f_a > 0.0) {
        return Err(OdeError::InvalidSpec(format!(
            "f(a) = {f_a} must be positive"
        )));
    }

    let h0 = spec.default_h0();
    let (r0, phi0, dphi0) = taylor_start(spec, h0);
    let kappa = f_a / spec.c;

    let mut sink = SampleSink::new();
    sink.push(
        Sample {
            r: 0.0,
            phi: spec.a,
            dphi: 0.0,
            ddphi: kappa,
            phi_log: LogVal::from_f64(spec.a),
            dphi_log: LogVal::ZERO,
        },
        None,
    );
    sink.push(
        Sample {
            r: r0,
            phi: phi0,
            dphi: dphi0,
            ddphi: spec.second_derivative(r0, phi0, dphi0),
            phi_log: LogVal::from_f64(phi0),
            dphi_log: LogVal::from_f64(dphi0),
        },
        None,
    );

    let trajectory_of = |sink: SampleSink| Trajectory {
        samples: sink.samples,
        kappa,
        h0,
        a: spec.a,
        linear_len: sink.linear_len,
        log_nodes: sink.log_nodes,
    };

    // Linear phase: integrate in r.
    let (f_l, g_l, q, c) = (spec.f.clone(), spec.g.clone(), spec.q, spec.c);
    let rhs_linear = move |r: f64, y: &[f64; 2]| {
        let (phi, dphi) = (y[0], y[1]);
        [
            dphi,
            f_l.eval(phi) + g_l.eval(phi) * dphi.abs().powf(q) - (c - 1.0) * dphi / r,
        ]
    };
    let mut solver = DormandPrince::new(
        rhs_linear,
        r0,
        [phi0, dphi0],
        h0,
        spec.tol.step_rel,
        1e-12 * spec.a.abs().max(1.0),
    );

    let mut certify_attempted = false;
    let switch_state: (f64, f64, f64); // (r, phi, dphi)
    loop {
        let phi = solver.y[0];
        let dphi = solver.y[1];
        if phi >= PHI_LINEAR_CAP || (phi >= 1.0 && dphi >= RATIO_SWITCH * phi.max(1.0)) {
            switch_state = (solver.t, phi, dphi);
            break;
        }
        match solver.step(r_max) {
            Ok(step) => {
                let ddphi = step.dy1[1];
                sink.push(
                    Sample {
                        r: step.t1,
                        phi: step.y1[0],
                        dphi: step.y1[1],
                        ddphi,
                        phi_log: LogVal::from_f64(step.y1[0]),
                        dphi_log: LogVal::from_f64(step.y1[1]),
                    },
                    None,
                );
                // Lemma-level guarantees double as solver sanity checks.
                if step.y1[1] < -1e-9 * (1.0 + step.y1[1].abs()) {
                    return Err(OdeError::HypothesisViolation {
                        what: format!("phi' went negative ({})", step.y1[1]),
                        r: step.t1,
                    });
                }
                if ddphi < -1e-6 * (1.0 + spec.f.eval(step.y1[0]).abs()) {
                    return Err(OdeError::HypothesisViolation {
                        what: format!("convexity lost (phi'' = {ddphi})"),
                        r: step.t1,
                    });
                }
                if step.t1 >= r_max {
                    return Ok(SolveOutcome {
                        status: Status::GlobalUpTo(r_max),
                        trajectory: trajectory_of(sink),
                    });
                }
                if step.y1[0] >= spec.tol.phi_cap && !certify_attempted {
                    certify_attempted = true;
                    if let Some(bracket) = certify(&kit, step.t1, step.y1[0], margin) {
                        return Ok(SolveOutcome {
                            status: Status::Blowup(bracket),
                            trajectory: trajectory_of(sink),
                        });
                    }
                }
            }
            Err(_) if phi >= 1.0 && dphi >= 100.0 * phi.max(1.0) => {
                // Radius increments fell below f64 resolution on a steep
                // trajectory: continue in log coordinates.
                switch_state = (solver.t, phi, dphi);
                break;
            }
            Err(StepError::StepSizeUnderflow) | Err(StepError::NonFiniteRhs) => {
                return Err(OdeError::StepUnderflow {
                    r: solver.t,
                    phi,
                });
            }
        }
    }

    // Log phase: s = ln phi is the independent variable, state (r, L = ln phi').
    let (r_c, phi_c, dphi_c) = switch_state;
    let s0 = phi_c.ln();
    let l0 = dphi_c.ln();
    let s_cap = spec.tol.phi_cap.ln();
    let s_hard = 3.5 * r_max + 100.0;
    let (f_c, g_c) = (spec.f.clone(), spec.g.clone());
    let (q, c) = (spec.q, spec.c);
    let rhs_log = move |s: f64, y: &[f64; 2]| {
        let (r, l) = (y[0], y[1]);
        let phi_lv = LogVal::positive(s);
        let term_f = f_c.eval_log(phi_lv).scale_ln(s - 2.0 * l);
        let term_g = g_c.eval_log(phi_lv).scale_ln(s + (q - 2.0) * l);
        let term_r = LogVal::from_f64(-(c - 1.0) / r).scale_ln(s - l);
        [(s - l).exp(), term_f.add(term_g).add(term_r).to_f64()]
    };
    let mut log_solver = DormandPrince::new(
        rhs_log,
        s0,
        [r_c, l0],
        1e-4 * (1.0 + s0.abs()),
        spec.tol.step_rel,
        1e-12,
    );
    {
        let dy = rhs_log_probe(&spec.f, &spec.g, q, c, s0, r_c, l0);
        sink.push(
            Sample {
                r: r_c,
                phi: phi_c,
                dphi: dphi_c,
                ddphi: spec.second_derivative(r_c, phi_c, dphi_c),
                phi_log: LogVal::positive(s0),
                dphi_log: LogVal::positive(l0),
            },
            Some(LogNode {
                s: s0,
                r: r_c,
                l: l0,
                dr_ds: dy.0,
                dl_ds: dy.1,
            }),
        );
    }

    loop {
        match log_solver.step(s_hard) {
            Ok(step) => {
                let s = step.t1;
                let (r, l) = (step.y1[0], step.y1[1]);
                let phi = s.exp();
                let dphi = l.exp();
                // phi'' = (dL/ds) phi'^2 / phi
                let ddphi = step.dy1[1] * (2.0 * l - s).exp();
                sink.push(
                    Sample {
                        r,
                        phi,
                        dphi,
                        ddphi,
                        phi_log: LogVal::positive(s),
                        dphi_log: LogVal::positive(l),
                    },
                    Some(LogNode {
                        s,
                        r,
                        l,
                        dr_ds: step.dy1[0],
                        dl_ds: step.dy1[1],
                    }),
                );
                if r >= r_max {
                    return Ok(SolveOutcome {
                        status: Status::GlobalUpTo(r_max),
                        trajectory: trajectory_of(sink),
                    });
                }
                if s >= s_cap && !certify_attempted {
                    certify_attempted = true;
                    if s <= 700.0 {
                        if let Some(bracket) = certify(&kit, r, phi, margin) {
                            return Ok(SolveOutcome {
                                status: Status::Blowup(bracket),
                                trajectory: trajectory_of(sink),
                            });
                        }
                    }
                }
                if l >= LN_SLOPE_CAP || s >= s_hard {
                    let bracket = (s <= 700.0)
                        .then(|| certify(&kit, r, phi, margin))
                        .flatten()
                        .unwrap_or(BlowupBracket {
                            low: r * (1.0 - margin),
                            high: f64::INFINITY,
                            method: "slope cap reached; tail uncertified",
                        });
                    return Ok(SolveOutcome {
                        status: Status::Blowup(bracket),
                        trajectory: trajectory_of(sink),
                    });
                }
            }
            Err(_) => {
                let s = log_solver.t;
                let (r, l) = (log_solver.y[0], log_solver.y[1]);
                if s >= s_cap || l >= 100.0 {
                    let bracket = (s <= 700.0)
                        .then(|| certify(&kit, r, s.exp(), margin))
                        .flatten()
                        .unwrap_or(BlowupBracket {
                            low: r * (1.0 - margin),
                            high: f64::INFINITY,
                            method: "log-phase step floor; tail uncertified",
                        });
                    return Ok(SolveOutcome {
                        status: Status::Blowup(bracket),
                        trajectory: trajectory_of(sink),
                    });
                }
                return Err(OdeError::StepUnderflow { r, phi: s.exp() });
            }
        }
    }
}

fn rhs_log_probe(
    f: &Nonlinearity,
    g: &Nonlinearity,
    q: f64,
    c: f64,
    s: f64,
    r: f64,
    l: f64,
) -> (f64, f64) {
    let phi_lv = LogVal::positive(s);
    let term_f = f.eval_log(phi_lv).scale_ln(s - 2.0 * l);
    let term_g = g.eval_log(phi_lv).scale_ln(s + (q - 2.0) * l);
    let term_r = LogVal::from_f64(-(c - 1.0) / r).scale_ln(s - l);
    ((s - l).exp(), term_f.add(term_g).add(term_r).to_f64())
}

/// Residual of the equation at a sample (0 at `r = 0` means the start
/// condition `c phi''(0) = f(a)` holds).
pub fn residual(spec: &ProblemSpec, sample: &Sample) -> f64 {
    let gradient_term = spec.g.eval(sample.phi) * sample.dphi.abs().powf(spec.q);
    if sample.r == 0.0 {
        spec.c * sample.ddphi - spec.f.eval(sample.phi) - gradient_term
    } else {
        sample.ddphi + (spec.c - 1.0) * sample.dphi / sample.r
            - spec.f.eval(sample.phi)
            - gradient_term
    }
}

/// CSV export: `r,phi,dphi,ddphi,residual`, 17 significant digits.
pub fn write_trajectory_csv(
    outcome: &SolveOutcome,
    spec: &ProblemSpec,
    w: &mut impl Write,
) -> io::Result<()> {
    writeln!(w, "r,phi,dphi,ddphi,residual")?;
    for sample in &outcome.trajectory.samples {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            sample.r,
            sample.phi,
            sample.dphi,
            sample.ddphi,
            residual(spec, sample)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::nonlin::{GrowthClass, Limit};
    use std::f64::consts::PI;

    fn nl(expr: Expr, limit: Limit, growth: Option<GrowthClass>) -> Nonlinearity {
        Nonlinearity::auto(expr, limit, growth).unwrap()
    }

    fn exp_f() -> Nonlinearity {
        nl(
            Expr::exp(Expr::identity()),
            Limit::PlusInfinity,
            Some(GrowthClass::Exponential),
        )
    }

    fn zero_g() -> Nonlinearity {
        nl(Expr::constant(0.0), Limit::Finite(0.0), Some(GrowthClass::Bounded))
    }

    #[test]
    fn taylor_start_formulas() {
        let spec = ProblemSpec::new(
            nl(Expr::constant(1.0), Limit::Finite(1.0), None),
            zero_g(),
            1.0,
            3.0,
            0.0,
        )
        .unwrap();
        let (r, phi, dphi) = taylor_start(&spec, 0.01);
        assert!((phi - 1.6666666666666667e-5).abs() < 1e-20);
        assert!((dphi - 3.3333333333333335e-3).abs() < 1e-18);
        assert_eq!(r, 0.01);

        let spec = ProblemSpec::new(exp_f(), zero_g(), 1.0, 1.0, 0.0).unwrap();
        let (_, _, dphi) = taylor_start(&spec, 1e-3);
        assert!((dphi - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn constant_f_has_exact_parabola() {
        // f = 1, g = 0, c = 3: phi = a + r^2 / 6.
        let spec = ProblemSpec::new(
            nl(Expr::constant(1.0), Limit::Finite(1.0), None),
            zero_g(),
            1.0,
            3.0,
            0.0,
        )
        .unwrap()
        .with_tolerances(Tolerances {
            r_max: 10.0,
            ..Default::default()
        });
        let out = solve_radial(&spec).unwrap();
        assert!(matches!(out.status, Status::GlobalUpTo(_)));
        let (phi1, _) = out.trajectory.eval(1.0).unwrap();
        assert!(
            (phi1 - 1.0 / 6.0).abs() < 1e-9,
            "phi(1) = {phi1} vs 1/6"
        );
        for i in 1..=100 {
            let r = 0.1 * i as f64;
            let (phi, dphi) = out.trajectory.eval(r).unwrap();
            let exact = r * r / 6.0;
            assert!(
                (phi - exact).abs() <= 1e-8 * exact.max(1.0),
                "phi({r}) = {phi} vs {exact}"
            );
            assert!((dphi - r / 3.0).abs() <= 1e-8 * (r / 3.0).max(1.0));
        }
    }

    #[test]
    fn exp_blowup_bracket_contains_first_integral_radius() {
        // f = exp, g = 0, c = 1: R(a) = (pi/sqrt(2)) e^{-a/2}.
        for &(a, q) in &[(0.0, 2.0), (0.0, 1.0), (2.0, 1.0), (-1.0, 2.0)] {
            let spec = ProblemSpec::new(exp_f(), zero_g(), q, 1.0, a).unwrap();
            let out = solve_radial(&spec).unwrap();
            let oracle = PI / 2f64.sqrt() * (-a / 2.0).exp();
            match &out.status {
                Status::Blowup(b) => {
                    assert!(
                        b.low <= oracle && oracle <= b.high,
                        "a={a} q={q}: oracle {oracle} outside [{}, {}]",
                        b.low,
                        b.high
                    );
                    assert!(b.high - b.low <= 1e-3, "width {}", b.high - b.low);
                }
                other => panic!("expected blow-up, got {other:?}"),
            }
        }
    }

    #[test]
    fn power_growth_global_run_reaches_r_max() {
        // f = softplus (~ t), g = 0: the classical condition diverges, the
        // solution is entire and grows like e^{r/sqrt(c)}.
        let spec = ProblemSpec::new(
            nl(
                Expr::softplus_of(Expr::identity()),
                Limit::PlusInfinity,
                Some(GrowthClass::Power(1.0)),
            ),
            zero_g(),
            1.0,
            3.0,
            0.0,
        )
        .unwrap()
        .with_tolerances(Tolerances {
            r_max: 1000.0,
            ..Default::default()
        });
        let out = solve_radial(&spec).unwrap();
        assert!(
            matches!(out.status, Status::GlobalUpTo(r) if r == 1000.0),
            "{:?}",
            out.status
        );
        assert!(out.trajectory.max_r() >= 1000.0 * (1.0 - 1e-12));
    }

    #[test]
    fn monotone_bracket_in_initial_datum() {
        // Lemma-level monotonicity: larger a blows up no later.
        let mut prev_high = f64::INFINITY;
        for a in [-1.0, 0.0, 1.0, 2.0] {
            let spec = ProblemSpec::new(exp_f(), zero_g(), 2.0, 1.0, a).unwrap();
            let out = solve_radial(&spec).unwrap();
            let Status::Blowup(b) = &out.status else {
                panic!("expected blow-up")
            };
            assert!(
                b.low <= prev_high * (1.0 + 1e-9),
                "bracket should not increase with a"
            );
            prev_high = b.high;
        }
    }

    #[test]
    fn residual_small_along_trajectory() {
        let spec = ProblemSpec::new(exp_f(), zero_g(), 1.0, 2.0, 0.0).unwrap();
        let out = solve_radial(&spec).unwrap();
        for sample in out
            .trajectory
            .samples
            .iter()
            .filter(|s| s.phi.is_finite() && s.dphi.is_finite() && s.ddphi.is_finite())
        {
            let res = residual(&spec, sample);
            let scale = 1.0 + spec.f.eval(sample.phi).abs() + sample.ddphi.abs();
            assert!(
                res.abs() <= 1e-9 * scale,
                "residual {res} at r = {}",
                sample.r
            );
        }
    }
}
