//! Series models `X(t) = Σ ξ_k a_k(t)` with approximate coefficient functions.
//!
//! The model keeps the first `N` terms with approximations `â_k`; its residual
//! is `Σ_{k≤N} ξ_k (a_k − â_k) + Σ_{k>N} ξ_k a_k`. Through the sum inequality for
//! independent summands, the pointwise standard of the residual is bounded by
//! `S_s(t)^{1/s}` with
//!
//! ```text
//! S_s(t) = Σ_{k≤N} τ_k^s δ_k(t)^s + Σ_{k>N} τ_k^s |a_k(t)|^s
//! ```
//!
//! and `c_N = ∫₀ᵀ S_s(t)^{p/s} dt`. The `s = 2` form serves any φ for which
//! `φ(|x|^{1/2})` is convex; the power family with `γ < 2` uses `s = γ`.

use std::fmt;
use std::sync::Arc;

use crate::bounds::AccuracyTarget;
use crate::orlicz::{OrliczFamily, OrliczSpec};
use crate::plan::{scan_truncation, EvalMode, ModelPlan, Planned, Route};
use crate::quadrature::QuadratureGrid;
use crate::{Error, Result};

/// One term of the expansion, sampled on the decomposition grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTerm {
    pub a_hat: Vec<f64>,
    /// Pointwise bound on `|a_k − â_k|`.
    pub delta: Vec<f64>,
    pub tau: f64,
}

impl CoefficientTerm {
    pub fn new(a_hat: Vec<f64>, delta: Vec<f64>, tau: f64) -> Result<Self> {
        if a_hat.len() != delta.len() {
            return Err(Error::Argument("a_hat and delta grids differ".into()));
        }
        if let Some(d) = delta.iter().find(|d| !(**d >= 0.0)) {
            return Err(Error::Domain(format!("coefficient error bounds must be non-negative, got {d}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("term standard must be positive, got {tau}")));
        }
        Ok(Self { a_hat, delta, tau })
    }

    /// An exactly known term.
    pub fn exact(a: Vec<f64>, tau: f64) -> Result<Self> {
        let zeros = vec![0.0; a.len()];
        Self::new(a, zeros, tau)
    }
}

/// `(n, t, s) ↦ Σ_{k>n} τ_k^s |a_k(t)|^s`.
pub type ClosedFormTail = Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>;
/// `(n, s) ↦` an upper envelope of the same sum on every grid node.
pub type EnvelopeTail = Arc<dyn Fn(usize, f64) -> Vec<f64> + Send + Sync>;

/// What is known about the terms that are not modelled.
#[derive(Clone)]
pub enum SeriesTail {
    ClosedForm(ClosedFormTail),
    UniformBound(EnvelopeTail),
    /// The listed terms are the whole series; beyond `N` the tail is the
    /// remaining listed terms, bounded through `|â_k| + δ_k`.
    FiniteTerms,
    /// Nothing is known; no `c_N` can be certified.
    None,
}

impl fmt::Debug for SeriesTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesTail::ClosedForm(_) => "ClosedForm(..)",
            SeriesTail::UniformBound(_) => "UniformBound(..)",
            SeriesTail::FiniteTerms => "FiniteTerms",
            SeriesTail::None => "None",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SeriesDecomposition {
    pub grid: QuadratureGrid,
    pub terms: Vec<CoefficientTerm>,
    pub tail: SeriesTail,
}

impl SeriesDecomposition {
    pub fn new(grid: QuadratureGrid, terms: Vec<CoefficientTerm>, tail: SeriesTail) -> Result<Self> {
        if let Some((k, _)) = terms.iter().enumerate().find(|(_, t)| t.a_hat.len() != grid.len()) {
            return Err(Error::Argument(format!(
                "term {} has {} samples, grid has {}",
                k + 1,
                terms[k].a_hat.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, terms, tail })
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n > self.terms.len() {
            return Err(Error::Argument(format!("N = {n} exceeds the {} available terms", self.terms.len())));
        }
        Ok(())
    }

    /// `Σ_{k>n} τ_k^s |a_k|^s` on the grid.
    pub fn tail_on_grid(&self, n: usize, s: f64) -> Result<Vec<f64>> {
        self.check_n(n)?;
        let values = match &self.tail {
            SeriesTail::ClosedForm(f) => self.grid.nodes.iter().map(|&t| f(n, t, s)).collect(),
            SeriesTail::UniformBound(f) => {
                let v = f(n, s);
                if v.len() != self.grid.len() {
                    return Err(Error::Argument(format!(
                        "tail envelope has {} values, grid has {}",
                        v.len(),
                        self.grid.len()
                    )));
                }
                v
            }
            SeriesTail::FiniteTerms => {
                let mut acc = vec![0.0; self.grid.len()];
                for term in &self.terms[n..] {
                    for (i, a) in acc.iter_mut().enumerate() {
                        *a += (term.tau * (term.a_hat[i].abs() + term.delta[i])).powf(s);
                    }
                }
                acc
            }
            SeriesTail::None => {
                return Err(Error::Capability("series tail is unknown, c_N cannot be certified".into()))
            }
        };
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Argument(format!("tail values must be finite and non-negative, got {v}")));
        }
        Ok(values)
    }

    /// `S_s(t_i)` on the grid.
    pub fn power_sum(&self, n: usize, s: f64) -> Result<Vec<f64>> {
        let mut acc = self.tail_on_grid(n, s)?;
        for term in &self.terms[..n] {
            for (i, a) in acc.iter_mut().enumerate() {
                *a += (term.tau * term.delta[i]).powf(s);
            }
        }
        Ok(acc)
    }

    fn cn_power_route(&self, n: usize, p: f64, s: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("p must be >= 1, got {p}")));
        }
        let sum = self.power_sum(n, s)?;
        let integrand: Vec<f64> = sum.iter().map(|v| v.powf(p / s)).collect();
        Ok(self.grid.integrate(&integrand))
    }
}

/// `c_N = ∫ (Σ_{k≤N} τ_k² δ_k² + Σ_{k>N} τ_k² a_k²)^{p/2} dt`.
pub fn cn_theorem7(dec: &SeriesDecomposition, n: usize, p: f64) -> Result<f64> {
    dec.cn_power_route(n, p, 2.0)
}

/// `c_N = ∫ (Σ_{k≤N} τ_k^γ δ_k^γ + Σ_{k>N} τ_k^γ |a_k|^γ)^{p/γ} dt`, `1 < γ < 2`.
pub fn cn_theorem8(dec: &SeriesDecomposition, n: usize, p: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0 && gamma < 2.0) {
        return Err(Error::Domain(format!("gamma must lie in (1, 2), got {gamma}")));
    }
    dec.cn_power_route(n, p, gamma)
}

/// Bound on the standard of the residual at grid node `t_index`: `S_s(t)^{1/s}`.
pub fn residual_tau_bound(dec: &SeriesDecomposition, n: usize, t_index: usize, s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 2.0) {
        return Err(Error::Domain(format!("s must lie in (0, 2], got {s}")));
    }
    let sum = dec.power_sum(n, s)?;
    let v = sum
        .get(t_index)
        .ok_or_else(|| Error::Argument(format!("grid index {t_index} out of range")))?;
    Ok(v.powf(1.0 / s))
}

/// The series route and exponent `s` appropriate for `spec`.
pub fn series_route(spec: &OrliczSpec) -> Result<(Route, f64)> {
    match spec.family() {
        OrliczFamily::PowerGamma { gamma } if *gamma < 2.0 => Ok((Route::Series8, *gamma)),
        _ if spec.check_power_convexity(2.0) => Ok((Route::Series7, 2.0)),
        _ => Err(Error::Route("phi(|x|^(1/2)) is not convex; no series route applies".into())),
    }
}

/// Smallest `N ≤ n_max` whose `c_N` passes the admissibility conditions.
pub fn choose_n(
    dec: &SeriesDecomposition,
    target: &AccuracyTarget,
    spec: &OrliczSpec,
    n_max: usize,
) -> Result<Planned<ModelPlan>> {
    target.validate()?;
    if dec.terms.is_empty() {
        return Err(Error::Argument("decomposition has no terms".into()));
    }
    dec.check_n(n_max)?;
    if (dec.grid.t_end - target.t_end).abs() > 1e-12 * target.t_end {
        return Err(Error::Argument(format!(
            "grid covers [0, {}] but the target interval is [0, {}]",
            dec.grid.t_end, target.t_end
        )));
    }
    let (route, s) = series_route(spec)?;
    scan_truncation(n_max, target, spec, route, EvalMode::Consistent, |n| dec.cn_power_route(n, target.p, s))
}

/// `X_N(t_i) = Σ_{k≤N} ξ_k â_k(t_i)` on the decomposition grid.
pub fn evaluate_model(dec: &SeriesDecomposition, n: usize, xi: &[f64]) -> Result<Vec<f64>> {
    dec.check_n(n)?;
    if xi.len() < n {
        return Err(Error::Argument(format!("{} draws supplied for N = {n}", xi.len())));
    }
    let mut path = vec![0.0; dec.grid.len()];
    for (term, x) in dec.terms[..n].iter().zip(xi) {
        for (v, a) in path.iter_mut().zip(&term.a_hat) {
            *v += x * a;
        }
    }
    Ok(path)
}
