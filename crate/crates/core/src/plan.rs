//! Planning outcomes shared by the series and Karhunen-Loève routes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::{check_admissible, min_certified_delta, AccuracyTarget, ConditionReport};
use crate::orlicz::OrliczSpec;
use crate::Result;

/// Which `c_N` formula certifies the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Generic series, `s = 2` sum inequality.
    Series7,
    /// Generic series, `s = γ` sum inequality for the power family.
    Series8,
    /// KL model with a supplied (analytic or Mercer) tail.
    Theorem9,
    /// KL model, tail closed through the Mercer identity.
    Theorem10,
    /// KL model under the power family, `s = γ`.
    Theorem11,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Series7 => "series7",
            Route::Series8 => "series8",
            Route::Theorem9 => "theorem9",
            Route::Theorem10 => "theorem10",
            Route::Theorem11 => "theorem11",
        })
    }
}

/// Evaluation mode for the KL formulas whose displayed form is internally
/// inconsistent; see [`crate::karhunen_loeve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum EvalMode {
    #[default]
    #[serde(rename = "consistent")]
    Consistent,
    #[serde(rename = "paper-literal")]
    PaperLiteral,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Consistent => "consistent",
            EvalMode::PaperLiteral => "paper-literal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "c_N")]
    pub c_n: f64,
}

/// A certified model: the truncation level and everything that certifies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPlan {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "c_N")]
    pub c_n: f64,
    pub report: ConditionReport,
    /// Family-specific closed-form check, when one applies.
    pub family_report: Option<ConditionReport>,
    pub route: Route,
    pub mode: EvalMode,
    pub target: AccuracyTarget,
    /// Smallest δ this `c_N` would still certify at the same α.
    pub certified_delta: f64,
    pub trace: Vec<TraceEntry>,
}

/// No truncation level up to the limit passed both conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infeasible {
    pub best_n: usize,
    pub best_c_n: f64,
    pub bound_eq1: f64,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Planned<T> {
    Feasible(T),
    Unachievable(Infeasible),
}

impl<T> Planned<T> {
    pub fn feasible(self) -> Option<T> {
        match self {
            Planned::Feasible(t) => Some(t),
            Planned::Unachievable(_) => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Planned<U> {
        match self {
            Planned::Feasible(t) => Planned::Feasible(f(t)),
            Planned::Unachievable(i) => Planned::Unachievable(i),
        }
    }
}

/// Linear scan `N = 1, 2, …, n_max` for the first admissible `c_N`.
pub fn scan_truncation<F>(
    n_max: usize,
    target: &AccuracyTarget,
    spec: &OrliczSpec,
    route: Route,
    mode: EvalMode,
    mut c_n_at: F,
) -> Result<Planned<ModelPlan>>
where
    F: FnMut(usize) -> Result<f64>,
{
    let mut trace = Vec::new();
    let mut best: Option<TraceEntry> = None;
    let mut bound_eq1 = f64::NAN;
    for n in 1..=n_max {
        let c_n = c_n_at(n)?;
        let entry = TraceEntry { n, c_n };
        trace.push(entry);
        if best.is_none_or(|b| c_n < b.c_n) {
            best = Some(entry);
        }
        let adm = check_admissible(c_n, target, spec)?;
        bound_eq1 = adm.generic.bound_eq1;
        if adm.passed() {
            let certified_delta = min_certified_delta(c_n, target.alpha, target.p, spec)?;
            return Ok(Planned::Feasible(ModelPlan {
                n,
                c_n,
                report: adm.generic,
                family_report: adm.family,
                route,
                mode,
                target: *target,
                certified_delta,
                trace,
            }));
        }
    }
    let best = best.unwrap_or(TraceEntry { n: 0, c_n: f64::INFINITY });
    Ok(Planned::Unachievable(Infeasible { best_n: best.n, best_c_n: best.c_n, bound_eq1, trace }))
}
