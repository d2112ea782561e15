//! Pointwise verification of the structural guarantees (strict increase,
//! convexity, slope cap, supporting-cone inequality) and of the two-sided
//! slope/radius estimates along a computed trajectory.
//!
//! Every inequality is scored as a signed relative violation
//! `(lhs - rhs) / (1 + |rhs|)` (sign arranged so that positive = violated);
//! a report passes at slack `eps` when every applicable worst score is
//! below `eps`.

use super::bounds::EstimateKit;
use super::{OdeError, ProblemSpec, Sample, SolveOutcome};
use crate::quad::{self, IntegrandSpec, Singularity};
use std::sync::Arc;

pub const DEFAULT_SLACK: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct CheckEntry {
    pub name: &'static str,
    pub applicable: bool,
    pub samples_checked: usize,
    /// Worst signed relative violation (<= 0 means satisfied with margin).
    pub worst_violation: f64,
    pub worst_at_r: f64,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub entries: Vec<CheckEntry>,
}

impl CheckReport {
    pub fn passed(&self, slack: f64) -> bool {
        self.entries
            .iter()
            .filter(|e| e.applicable)
            .all(|e| e.worst_violation <= slack)
    }

    pub fn worst(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.applicable)
            .map(|e| e.worst_violation)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Scorer {
    name: &'static str,
    applicable: bool,
    checked: usize,
    worst: f64,
    worst_at: f64,
}

impl Scorer {
    fn new(name: &'static str, applicable: bool) -> Self {
        Scorer {
            name,
            applicable,
            checked: 0,
            worst: f64::NEG_INFINITY,
            worst_at: f64::NAN,
        }
    }

    /// `lhs <= rhs`
    fn le(&mut self, lhs: f64, rhs: f64, at_r: f64) {
        if lhs.is_nan() || rhs.is_nan() {
            return;
        }
        if lhs.is_infinite() && rhs.is_infinite() && lhs == rhs {
            return; // both beyond range; nothing to compare
        }
        let viol = (lhs - rhs) / (1.0 + rhs.abs());
        self.checked += 1;
        if viol > self.worst {
            self.worst = viol;
            self.worst_at = at_r;
        }
    }

    /// `lhs >= rhs`
    fn ge(&mut self, lhs: f64, rhs: f64, at_r: f64) {
        if lhs.is_infinite() && rhs.is_infinite() && lhs == rhs {
            return;
        }
        self.le(rhs, lhs, at_r);
    }

    fn entry(self) -> CheckEntry {
        CheckEntry {
            name: self.name,
            applicable: self.applicable && self.checked > 0,
            samples_checked: self.checked,
            worst_violation: if self.worst == f64::NEG_INFINITY {
                0.0
            } else {
                self.worst
            },
            worst_at_r: self.worst_at,
        }
    }
}

fn thin(samples: &[Sample], keep: usize) -> Vec<Sample> {
    if samples.len() <= keep {
        return samples.to_vec();
    }
    let stride = samples.len().div_ceil(keep);
    let mut out: Vec<Sample> = samples.iter().copied().step_by(stride).collect();
    if let Some(last) = samples.last() {
        if out.last().map(|s| s.r) != Some(last.r) {
            out.push(*last);
        }
    }
    out
}

/// Strict increase, convexity, the slope cap where `g < 0`, and the
/// supporting-cone inequality where `g >= 0`.
pub fn structural_check(outcome: &SolveOutcome, spec: &ProblemSpec) -> CheckReport {
    let samples = thin(&outcome.trajectory.samples, 4000);
    let g_nonneg = spec.g.claims().nonnegative || spec.g.expr().structure().nonnegative;

    let mut increase = Scorer::new("strict_increase", true);
    let mut convexity = Scorer::new("convexity", true);
    let mut slope_cap = Scorer::new("slope_cap_g_negative", true);
    let mut cone = Scorer::new("supporting_cone", g_nonneg);

    for s in &samples {
        if s.r > 0.0 && s.dphi.is_finite() {
            increase.ge(s.dphi, 0.0, s.r);
        }
        if s.ddphi.is_finite() {
            convexity.ge(s.ddphi, 0.0, s.r);
        }
        // slope cap phi' <= (f/g^-)^{1/q}, active where g(phi) < 0;
        // compared through logs to survive huge magnitudes
        let g_val = spec.g.eval_log(s.phi_log);
        if g_val.sign < 0 {
            let f_val = spec.f.eval_log(s.phi_log);
            let cap_ln = (f_val.ln_abs - g_val.ln_abs) / spec.q;
            if s.dphi_log.sign > 0 {
                slope_cap.le((s.dphi_log.ln_abs - cap_ln).exp_m1(), 0.0, s.r);
            }
        }
        if g_nonneg && s.r > 0.0 && s.ddphi.is_finite() && s.dphi.is_finite() {
            cone.ge(s.r * s.ddphi, s.dphi, s.r);
        }
    }
    CheckReport {
        entries: vec![
            increase.entry(),
            convexity.entry(),
            slope_cap.entry(),
            cone.entry(),
        ],
    }
}

/// The four slope bounds at every sample and the four radius bounds via
/// incremental quadrature of the reciprocal denominators.
pub fn sandwich_check(outcome: &SolveOutcome, spec: &ProblemSpec) -> Result<CheckReport, OdeError> {
    let kit = Arc::new(EstimateKit::new(
        &spec.f, &spec.g, spec.q, spec.c, spec.a,
    )?);
    let g_at_a = kit.g_at_a_nonneg();
    let g_nonpos = kit.g_nonpositive();
    let samples = thin(&outcome.trajectory.samples, 700);

    let mut ub_plus = Scorer::new("slope_ub_gplus", true);
    let mut lb_plus = Scorer::new("slope_lb_gplus", g_at_a);
    let mut lb_minus = Scorer::new("slope_lb_gminus", true);
    let mut ub_minus = Scorer::new("slope_ub_gminus", g_nonpos);
    let mut r_lb_plus = Scorer::new("radius_lb_gplus", true);
    let mut r_ub_plus = Scorer::new("radius_ub_gplus", g_at_a);
    let mut r_ub_minus = Scorer::new("radius_ub_gminus", true);
    let mut r_lb_minus = Scorer::new("radius_lb_gminus", g_nonpos);

    // Value-space bounds.
    for s in &samples {
        if !s.phi.is_finite() {
            continue;
        }
        ub_plus.le(s.dphi, kit.ub_gplus(s.phi), s.r);
        if g_at_a {
            lb_plus.ge(s.dphi, kit.lb_gplus(s.phi), s.r);
        }
        lb_minus.ge(s.dphi, kit.lb_gminus(s.phi), s.r);
        if g_nonpos {
            ub_minus.le(s.dphi, kit.ub_gminus(s.phi), s.r);
        }
    }

    // Radius-space bounds: running integrals of the reciprocal denominators
    // over the sampled values of phi.
    let k1 = kit.clone();
    let inv_plus = move |t: f64| {
        let d = k1.denom_plus(t);
        if d > 0.0 {
            1.0 / d
        } else {
            f64::INFINITY
        }
    };
    let k2 = kit.clone();
    let inv_plus_c = move |t: f64| {
        let d = k2.denom_plus_c(t);
        if d > 0.0 {
            1.0 / d
        } else {
            f64::INFINITY
        }
    };
    let k3 = kit.clone();
    let inv_zero = move |t: f64| {
        let d = k3.denom_zero(t);
        if d > 0.0 {
            1.0 / d
        } else {
            f64::INFINITY
        }
    };
    let needs_j2 = spec.q == 2.0 && g_at_a;
    let mut j1 = 0.0f64;
    let mut j2 = 0.0f64;
    let mut j3 = 0.0f64;
    let mut prev_phi = spec.a;
    for s in &samples {
        if !s.phi.is_finite() {
            break;
        }
        if s.phi > prev_phi {
            let hint = if prev_phi == spec.a {
                Singularity::InverseSquareRoot
            } else {
                Singularity::None
            };
            j1 += cell(&inv_plus, hint, prev_phi, s.phi)?;
            if needs_j2 {
                j2 += cell(&inv_plus_c, hint, prev_phi, s.phi)?;
            }
            j3 += cell(&inv_zero, hint, prev_phi, s.phi)?;
            prev_phi = s.phi;
        }
        r_lb_plus.ge(s.r, kit.coef_lbrg_plus() * j1, s.r);
        if g_at_a {
            let bound = if spec.q < 2.0 {
                kit.coef_ubrg_plus() * j1
            } else {
                kit.coef_ubrg_plus() * j2
            };
            r_ub_plus.le(s.r, bound, s.r);
        }
        r_ub_minus.le(s.r, kit.coef_ubrg_minus() * j3, s.r);
        if g_nonpos {
            r_lb_minus.ge(s.r, kit.coef_lbrg_minus() * j3, s.r);
        }
    }

    Ok(CheckReport {
        entries: vec![
            ub_plus.entry(),
            lb_plus.entry(),
            lb_minus.entry(),
            ub_minus.entry(),
            r_lb_plus.entry(),
            r_ub_plus.entry(),
            r_ub_minus.entry(),
            r_lb_minus.entry(),
        ],
    })
}

fn cell(
    f: &(impl Fn(f64) -> f64 + Send + Sync + Clone + 'static),
    hint: Singularity,
    lo: f64,
    hi: f64,
) -> Result<f64, OdeError> {
    let spec = IntegrandSpec {
        f: Arc::new(f.clone()),
        singularity: hint,
    };
    quad::integrate_finite(&spec, lo, hi)
        .map(|q| q.value)
        .map_err(|e| OdeError::InvalidSpec(format!("bound quadrature failed: {e}")))
}
