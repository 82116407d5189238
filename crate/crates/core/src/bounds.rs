//! The `L_p` tail bound and the admissibility conditions built on it.
//!
//! Conventions: `δ` enters every formula exactly as the threshold on
//! `∫₀ᵀ |X − X_N|^p dt`, so the certified event is
//! `P{∫|X − X_N|^p > δ} ≤ α`, i.e. `P{‖X − X_N‖_p > δ^{1/p}} ≤ α`. The first
//! condition is non-strict (`c_N ≤ …`), the second strict.

use serde::{Deserialize, Serialize};

use crate::numeric::bisect_boundary;
use crate::orlicz::{OrliczFamily, OrliczSpec};
use crate::{Error, Result};

/// The modelling goal: exponent `p`, accuracy `δ`, reliability `1 − α` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTarget {
    pub p: f64,
    pub delta: f64,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
}

impl AccuracyTarget {
    pub fn new(p: f64, delta: f64, alpha: f64, t_end: f64) -> Result<Self> {
        let target = Self { p, delta, alpha, t_end };
        target.validate()?;
        Ok(target)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::Domain(format!("p must be >= 1, got {}", self.p)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Domain(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Domain(format!("T must be positive, got {}", self.t_end)));
        }
        Ok(())
    }

    /// `ln(2/α)`, the conjugate level the first condition inverts.
    pub fn log_level(&self) -> f64 {
        (2.0 / self.alpha).ln()
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }
}

/// Both admissibility conditions evaluated at one `c_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    #[serde(rename = "c_N")]
    pub c_n: f64,
    pub bound_eq1: f64,
    pub eq1_ok: bool,
    pub eq2_ok: bool,
    pub tail_bound: f64,
    pub margin: f64,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.eq1_ok && self.eq2_ok
    }
}

/// `min(1, 2 exp(−φ*((δ/c)^{1/p})))`; zero for a perfect model (`c = 0`).
pub fn tail_probability_bound(c: f64, target: &AccuracyTarget, spec: &OrliczSpec) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let x = (target.delta / c).powf(1.0 / target.p);
    (2.0 * (-spec.phi_conjugate(x)).exp()).min(1.0)
}

/// Validity range of the tail bound: `δ > c · f(c^{1/p} p / δ^{1/p})^p`.
pub fn tail_bound_valid(c: f64, target: &AccuracyTarget, spec: &OrliczSpec) -> Result<bool> {
    if c <= 0.0 {
        return Ok(true);
    }
    let p = target.p;
    match spec.family() {
        // algebraically identical, and exact at the boundary
        OrliczFamily::PowerGamma { gamma } | OrliczFamily::PiecewiseGamma { gamma } => {
            Ok(c < target.delta / p.powf(p * (1.0 - 1.0 / gamma)))
        }
        OrliczFamily::NumericTable(_) => density_form(c, target, spec),
    }
}

fn density_form(c: f64, target: &AccuracyTarget, spec: &OrliczSpec) -> Result<bool> {
    let p = target.p;
    let u = c.powf(1.0 / p) * p / target.delta.powf(1.0 / p);
    Ok(target.delta > c * spec.phi_density(u)?.powf(p))
}

fn report(c_n: f64, bound_eq1: f64, eq2_ok: bool, tail_bound: f64) -> ConditionReport {
    ConditionReport {
        c_n,
        bound_eq1,
        eq1_ok: c_n <= bound_eq1,
        eq2_ok,
        tail_bound,
        margin: bound_eq1 - c_n,
    }
}

/// Conditions through the numeric conjugate inverse, valid for any φ.
pub fn check_conditions_generic(c_n: f64, target: &AccuracyTarget, spec: &OrliczSpec) -> Result<ConditionReport> {
    if !(c_n >= 0.0) {
        return Err(Error::Domain(format!("c_N must be non-negative, got {c_n}")));
    }
    let level = spec.phi_conjugate_inverse(target.log_level())?;
    let bound_eq1 = target.delta / level.powf(target.p);
    let eq2_ok = tail_bound_valid(c_n, target, spec)?;
    Ok(report(c_n, bound_eq1, eq2_ok, tail_probability_bound(c_n, target, spec)))
}

fn closed_form(c_n: f64, target: &AccuracyTarget, gamma: f64, spec: &OrliczSpec) -> Result<ConditionReport> {
    if !(c_n >= 0.0) {
        return Err(Error::Domain(format!("c_N must be non-negative, got {c_n}")));
    }
    let beta = gamma / (gamma - 1.0);
    let p = target.p;
    let bound_eq1 = target.delta / (beta * target.log_level()).powf(p / beta);
    let eq2_ok = c_n < target.delta / p.powf(p * (1.0 - 1.0 / gamma));
    Ok(report(c_n, bound_eq1, eq2_ok, tail_probability_bound(c_n, target, spec)))
}

/// Closed-form conditions for `φ = |x|^γ/γ`, `1 < γ ≤ 2`:
/// `c_N ≤ δ/(β ln(2/α))^{p/β}` and `c_N < δ/p^{p(1−1/γ)}`.
pub fn check_conditions_power(c_n: f64, target: &AccuracyTarget, gamma: f64) -> Result<ConditionReport> {
    let spec = OrliczSpec::power(gamma)?;
    closed_form(c_n, target, gamma, &spec)
}

/// Closed-form checker for the piecewise family together with whether its
/// closed form applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseReport {
    pub report: ConditionReport,
    /// False when `φ*⁻¹(ln(2/α)) < 1`: the first condition then lies outside
    /// the proven `x^β/β` branch and the generic checker is authoritative.
    pub closed_form_branch: bool,
}

/// The same algebraic conditions for the piecewise family, `γ > 2`.
pub fn check_conditions_piecewise(c_n: f64, target: &AccuracyTarget, gamma: f64) -> Result<PiecewiseReport> {
    let spec = OrliczSpec::piecewise(gamma)?;
    let beta = gamma / (gamma - 1.0);
    Ok(PiecewiseReport {
        report: closed_form(c_n, target, gamma, &spec)?,
        closed_form_branch: target.log_level() >= 1.0 / beta,
    })
}

/// Generic check plus the family-specific closed form when one applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub generic: ConditionReport,
    pub family: Option<ConditionReport>,
}

impl Admissibility {
    pub fn passed(&self) -> bool {
        self.generic.passed() && self.family.is_none_or(|r| r.passed())
    }
}

pub fn check_admissible(c_n: f64, target: &AccuracyTarget, spec: &OrliczSpec) -> Result<Admissibility> {
    let generic = check_conditions_generic(c_n, target, spec)?;
    let family = match spec.family() {
        OrliczFamily::PowerGamma { gamma } => Some(check_conditions_power(c_n, target, *gamma)?),
        OrliczFamily::PiecewiseGamma { gamma } => {
            let pw = check_conditions_piecewise(c_n, target, *gamma)?;
            pw.closed_form_branch.then_some(pw.report)
        }
        OrliczFamily::NumericTable(_) => None,
    };
    Ok(Admissibility { generic, family })
}

/// Tolerance for the inverse solves below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-9, max_iter: 200 }
    }
}

/// Largest `c` passing both generic conditions.
pub fn max_admissible_cn(target: &AccuracyTarget, spec: &OrliczSpec) -> Result<f64> {
    max_admissible_cn_with(target, spec, InverseOptions::default())
}

pub fn max_admissible_cn_with(target: &AccuracyTarget, spec: &OrliczSpec, opts: InverseOptions) -> Result<f64> {
    target.validate()?;
    let bound_eq1 = check_conditions_generic(0.0, target, spec)?.bound_eq1;

    // the second condition is monotone in c; bracket its boundary
    let mut eq2_err = None;
    let mut eq2 = |c: f64| match tail_bound_valid(c, target, spec) {
        Ok(ok) => ok,
        Err(e) => {
            eq2_err = Some(e);
            false
        }
    };
    let mut hi = bound_eq1.max(target.delta);
    let mut doublings = 0;
    while eq2(hi) {
        hi *= 2.0;
        doublings += 1;
        if doublings > opts.max_iter {
            return Ok(bound_eq1);
        }
    }
    let (lo, _) = bisect_boundary(&mut eq2, 0.0, hi, opts.rel_tol, opts.max_iter);
    if let Some(e) = eq2_err {
        return Err(e);
    }
    Ok(bound_eq1.min(lo))
}

/// Smallest `δ` for which `c_N` passes every admissibility check.
pub fn min_certified_delta(c_n: f64, alpha: f64, p: f64, spec: &OrliczSpec) -> Result<f64> {
    min_certified_delta_with(c_n, alpha, p, spec, InverseOptions::default())
}

pub fn min_certified_delta_with(
    c_n: f64,
    alpha: f64,
    p: f64,
    spec: &OrliczSpec,
    opts: InverseOptions,
) -> Result<f64> {
    if !(c_n >= 0.0) {
        return Err(Error::Domain(format!("c_N must be non-negative, got {c_n}")));
    }
    if c_n == 0.0 {
        return Ok(0.0);
    }
    let probe = AccuracyTarget::new(p, 1.0, alpha, 1.0)?;
    let level = spec.phi_conjugate_inverse(probe.log_level())?;
    let delta_eq1 = c_n * level.powf(p);

    let passes_eq2 = |d: f64| tail_bound_valid(c_n, &probe.with_delta(d), spec).unwrap_or(false);
    let mut hi = c_n;
    let mut doublings = 0;
    while !passes_eq2(hi) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 {
            return Err(Error::Range(format!("no delta satisfies the validity condition for c_N = {c_n}")));
        }
    }
    // predicate "fails eq2" is true below the boundary
    let (_, delta_eq2) = bisect_boundary(|d| !passes_eq2(d), 0.0, hi, opts.rel_tol, opts.max_iter);

    let mut delta = delta_eq1.max(delta_eq2);
    for _ in 0..64 {
        let t = probe.with_delta(delta);
        if check_admissible(c_n, &t, spec)?.passed() {
            return Ok(delta);
        }
        delta *= 1.0 + 4.0 * f64::EPSILON;
    }
    Err(Error::Range(format!("could not certify any delta for c_N = {c_n}")))
}
