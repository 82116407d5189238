//! `c_N` for the KL model `X_N(t) = Σ_{k≤N} ξ_k â_k(t)/√λ̂_k`.
//!
//! For a retained mode the coefficient error `a_k/√λ_k − â_k/√λ̂_k` is bounded
//! by two pieces,
//!
//! ```text
//! d_k(t) = δ_k(t)/√(λ̂_k − η_k)
//! e_k(t) = |â_k(t)|·(√λ̂_k − √(λ̂_k − η_k))/√(λ̂_k(λ̂_k − η_k))
//! ```
//!
//! which enter the `s`-sum as `τ_k^s (d_k^s + e_k^s)`. Combining them this way
//! omits the cross term of `(d_k + e_k)^s`; the bound is kept in that form.

use std::sync::Arc;

use super::kernel::AnalyticEigen;
use super::nystrom::EigenSystem;
use crate::plan::EvalMode;
use crate::{Error, Result};

/// `(n, t, s) ↦ Σ_{k>n} τ_k^s |a_k(t)|^s / λ_k^{s/2}` with the standards included.
pub type KlTailFn = Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>;

/// Knowledge of the unmodelled modes.
#[derive(Clone)]
pub enum KlTail {
    /// Closed-form eigendata with a common standard `tau`.
    Analytic { eigen: AnalyticEigen, tau: f64 },
    ClosedForm(KlTailFn),
    /// Kernel diagonal on the grid; the `s = 2` tail is closed through
    /// `B(t,t) = Σ_k a_k(t)²/λ_k`. Needs a common standard `tau`.
    Mercer { tau: f64, diagonal: Vec<f64> },
}

impl std::fmt::Debug for KlTail {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KlTail::Analytic { eigen, tau } => write!(f, "Analytic {{ eigen: {eigen:?}, tau: {tau} }}"),
            KlTail::ClosedForm(_) => f.write_str("ClosedForm(..)"),
            KlTail::Mercer { tau, .. } => write!(f, "Mercer {{ tau: {tau}, .. }}"),
        }
    }
}

fn check_inputs(eig: &EigenSystem, taus: &[f64], n: usize, p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be >= 1, got {p}")));
    }
    if n > eig.modes() {
        return Err(Error::Argument(format!("N = {n} exceeds the {} computed modes", eig.modes())));
    }
    if taus.len() < n {
        return Err(Error::Argument(format!("{} standards supplied for N = {n}", taus.len())));
    }
    for k in 0..n {
        let (eta, lambda) = (eig.eta[k], eig.lambda_hat[k]);
        if !(eta < lambda) {
            return Err(Error::EigenvalueError { mode: k + 1, eta, lambda });
        }
    }
    Ok(())
}

/// `(d_k(t_i), e_k(t_i))` for mode `k` (0-based).
fn pieces(eig: &EigenSystem, k: usize, i: usize) -> (f64, f64) {
    let (l, eta) = (eig.lambda_hat[k], eig.eta[k]);
    let lo = l - eta;
    let d = eig.delta_fun[k][i] / lo.sqrt();
    let e = eig.a_hat[k][i].abs() * (l.sqrt() - lo.sqrt()) / (l * lo).sqrt();
    (d, e)
}

/// `max(0, B(t,t) − Σ_{k≤N} (|â_k| − δ_k)₊²/(λ̂_k + η_k))` on the grid.
fn mercer_bracket(eig: &EigenSystem, n: usize, diagonal: &[f64], mode: EvalMode) -> Vec<f64> {
    (0..eig.grid.len())
        .map(|i| {
            let explained: f64 = (0..n)
                .map(|k| {
                    let (a, d) = (eig.a_hat[k][i], eig.delta_fun[k][i]);
                    let lower = match mode {
                        EvalMode::Consistent => (a.abs() - d).max(0.0),
                        EvalMode::PaperLiteral => a - d,
                    };
                    lower * lower / (eig.lambda_hat[k] + eig.eta[k])
                })
                .sum();
            (diagonal[i] - explained).max(0.0)
        })
        .collect()
}

fn common_tau(taus: &[f64], tau: f64) -> Result<()> {
    if taus.iter().any(|t| (t - tau).abs() > 1e-12 * tau) {
        return Err(Error::Route("the Mercer tail needs the same standard for every mode".into()));
    }
    Ok(())
}

fn tail_values(eig: &EigenSystem, taus: &[f64], n: usize, s: f64, tail: &KlTail) -> Result<Vec<f64>> {
    let nodes = &eig.grid.nodes;
    Ok(match tail {
        KlTail::Analytic { eigen, tau } => nodes.iter().map(|&t| tau.powf(s) * eigen.tail_sum(n, t, s)).collect(),
        KlTail::ClosedForm(f) => nodes.iter().map(|&t| f(n, t, s)).collect(),
        KlTail::Mercer { tau, diagonal } => {
            if s != 2.0 {
                return Err(Error::Route("the Mercer tail applies only to the s = 2 sum".into()));
            }
            if diagonal.len() != nodes.len() {
                return Err(Error::Argument("kernel diagonal must be sampled on the eigen grid".into()));
            }
            common_tau(&taus[..n], *tau)?;
            mercer_bracket(eig, n, diagonal, EvalMode::Consistent).into_iter().map(|v| tau * tau * v).collect()
        }
    })
}

/// `c_N = ∫ (Σ_{k≤N} τ_k²(d_k² + e_k²) + Σ_{k>N} τ_k² a_k²/λ_k)^{p/2} dt`.
pub fn cn_theorem9(eig: &EigenSystem, taus: &[f64], n: usize, p: f64, tail: &KlTail) -> Result<f64> {
    check_inputs(eig, taus, n, p)?;
    let mut sum = tail_values(eig, taus, n, 2.0, tail)?;
    for (i, v) in sum.iter_mut().enumerate() {
        for (k, tau) in taus[..n].iter().enumerate() {
            let (d, e) = pieces(eig, k, i);
            *v += tau * tau * (d * d + e * e);
        }
    }
    let integrand: Vec<f64> = sum.iter().map(|v| v.powf(p / 2.0)).collect();
    Ok(eig.grid.integrate(&integrand))
}

/// Constant-standard `c_N` with the tail closed through the kernel diagonal:
/// `τ^p ∫ (max(0, B(t,t) − Σ (|â_k| − δ_k)₊²/(λ̂_k + η_k)) + Σ (d_k² + e_k²))^{p/2} dt`.
///
/// `PaperLiteral` uses `(â_k − δ_k)²` and the prefactor `τ^{p/2}`.
pub fn cn_theorem10(eig: &EigenSystem, tau: f64, n: usize, p: f64, diagonal: &[f64], mode: EvalMode) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("standard must be positive, got {tau}")));
    }
    check_inputs(eig, &vec![tau; n], n, p)?;
    if diagonal.len() != eig.grid.len() {
        return Err(Error::Argument("kernel diagonal must be sampled on the eigen grid".into()));
    }
    let bracket = mercer_bracket(eig, n, diagonal, mode);
    let integrand: Vec<f64> = bracket
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let corr: f64 = (0..n)
                .map(|k| {
                    let (d, e) = pieces(eig, k, i);
                    d * d + e * e
                })
                .sum();
            (b + corr).powf(p / 2.0)
        })
        .collect();
    let prefactor = match mode {
        EvalMode::Consistent => tau.powf(p),
        EvalMode::PaperLiteral => tau.powf(p / 2.0),
    };
    Ok(prefactor * eig.grid.integrate(&integrand))
}

/// Power-family `c_N` through the `s = γ` sum:
/// `∫ (Σ_{k≤N} τ_k^γ(d_k^γ + e_k^γ) + Σ_{k>N} τ_k^γ |a_k|^γ/λ_k^{γ/2})^{p/γ} dt`, `1 < γ < 2`.
///
/// `PaperLiteral` uses `δ_k^γ/(λ̂_k − η_k)^γ + |â_k|^γ(√λ̂_k − √(λ̂_k − η_k))^γ/(λ̂_k(λ̂_k − η_k))^γ`
/// for retained modes and `τ^γ |a_k|^{2γ}/λ_k^γ` for the tail, which requires
/// closed-form eigendata.
pub fn cn_theorem11(
    eig: &EigenSystem,
    taus: &[f64],
    n: usize,
    p: f64,
    gamma: f64,
    tail: &KlTail,
    mode: EvalMode,
) -> Result<f64> {
    if !(gamma > 1.0 && gamma < 2.0) {
        return Err(Error::Domain(format!("gamma must lie in (1, 2), got {gamma}")));
    }
    check_inputs(eig, taus, n, p)?;
    let mut sum = match mode {
        EvalMode::Consistent => tail_values(eig, taus, n, gamma, tail)?,
        EvalMode::PaperLiteral => match tail {
            KlTail::Analytic { eigen, tau } => eig
                .grid
                .nodes
                .iter()
                .map(|&t| tau.powf(gamma) * eigen.tail_sum(n, t, 2.0 * gamma))
                .collect(),
            _ => {
                return Err(Error::Capability(
                    "the literal tail form needs closed-form eigendata".into(),
                ))
            }
        },
    };
    for (i, v) in sum.iter_mut().enumerate() {
        for (k, tau) in taus[..n].iter().enumerate() {
            let tg = tau.powf(gamma);
            *v += match mode {
                EvalMode::Consistent => {
                    let (d, e) = pieces(eig, k, i);
                    tg * (d.powf(gamma) + e.powf(gamma))
                }
                EvalMode::PaperLiteral => {
                    let (l, eta) = (eig.lambda_hat[k], eig.eta[k]);
                    let lo = l - eta;
                    let first = eig.delta_fun[k][i].powf(gamma) / lo.powf(gamma);
                    let second = (eig.a_hat[k][i].abs() * (l.sqrt() - lo.sqrt())).powf(gamma) / (l * lo).powf(gamma);
                    tg * (first + second)
                }
            };
        }
    }
    let integrand: Vec<f64> = sum.iter().map(|v| v.powf(p / gamma)).collect();
    Ok(eig.grid.integrate(&integrand))
}
