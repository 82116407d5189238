//! Sub-Gaussian standards τ_φ of concrete random-variable families.
//!
//! `τ_φ(ξ) = inf { a > 0 : ln E exp(λξ) ≤ φ(λa) for all λ }`. For the built-in
//! symmetric families the log moment generating function `L(λ)` is known in
//! closed form, so τ_φ is the supremum over λ of `φ⁻¹(L(λ))/λ`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::numeric::golden_max;
use crate::orlicz::OrliczSpec;
use crate::{Error, Result};

/// A user-supplied sampler for [`SourceKind::Explicit`].
#[derive(Clone)]
pub struct ExplicitSampler(pub Arc<dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync>);

impl fmt::Debug for ExplicitSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExplicitSampler(..)")
    }
}

#[derive(Debug, Clone)]
pub enum SourceKind {
    Gaussian { sigma: f64 },
    Rademacher,
    /// Uniform on `[-b, b]`.
    UniformSymmetric { b: f64 },
    /// A variable whose standard is known a priori.
    Explicit { tau: f64, sampler: Option<ExplicitSampler> },
}

impl SourceKind {
    /// `ln E exp(λξ)`, or `None` when no closed form is known.
    pub fn log_mgf(&self, lambda: f64) -> Option<f64> {
        let l = lambda.abs();
        match self {
            SourceKind::Gaussian { sigma } => Some(0.5 * sigma * sigma * l * l),
            SourceKind::Rademacher => Some(ln_cosh(l)),
            SourceKind::UniformSymmetric { b } => Some(ln_sinhc(b * l)),
            SourceKind::Explicit { .. } => None,
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match self {
            SourceKind::Gaussian { sigma } => Some(sigma * sigma),
            SourceKind::Rademacher => Some(1.0),
            SourceKind::UniformSymmetric { b } => Some(b * b / 3.0),
            SourceKind::Explicit { .. } => None,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, SourceKind::Gaussian { .. })
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Domain(format!("{what} must be positive and finite, got {v}")));
        match *self {
            SourceKind::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => bad("sigma", sigma),
            SourceKind::UniformSymmetric { b } if !(b > 0.0 && b.is_finite()) => bad("b", b),
            SourceKind::Explicit { tau, .. } if !(tau > 0.0 && tau.is_finite()) => bad("tau", tau),
            _ => Ok(()),
        }
    }
}

/// `ln cosh x` without cancellation at either end.
fn ln_cosh(x: f64) -> f64 {
    if x < 1.0 {
        let s = (0.5 * x).sinh();
        (2.0 * s * s).ln_1p()
    } else {
        x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
    }
}

/// `ln (sinh x / x)`, the log-MGF of a uniform variable on `[-1, 1]` at `x`.
fn ln_sinhc(x: f64) -> f64 {
    if x < 0.1 {
        let x2 = x * x;
        (x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0 * (1.0 + x2 / 72.0)))).ln_1p()
    } else if x < 20.0 {
        (x.sinh() / x).ln()
    } else {
        x - std::f64::consts::LN_2 - x.ln() + (-(-2.0 * x).exp()).ln_1p()
    }
}

/// λ-grid parameters for [`tau_of`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauGrid {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
}

impl Default for TauGrid {
    fn default() -> Self {
        Self { lambda_min: 1e-4, lambda_max: 1e4, points: 400 }
    }
}

/// Sub-Gaussian standard of `kind` under `spec`, with the default λ-grid.
pub fn tau_of(kind: &SourceKind, spec: &OrliczSpec) -> Result<f64> {
    tau_of_with(kind, spec, TauGrid::default())
}

/// Sub-Gaussian standard of `kind` under `spec`.
///
/// The per-λ minimal `a` is maximised over a log-spaced grid, refined once by
/// golden-section search around the grid argmax. When φ is exactly quadratic
/// near zero the λ → 0 limit `sqrt(Var/(2c))` joins the supremum, since for
/// symmetric laws the per-λ ratio often peaks there.
pub fn tau_of_with(kind: &SourceKind, spec: &OrliczSpec, grid: TauGrid) -> Result<f64> {
    kind.validate()?;
    if let SourceKind::Explicit { tau, .. } = kind {
        return Ok(*tau);
    }
    let ratio = |lambda: f64| -> Result<f64> {
        let l = kind
            .log_mgf(lambda)
            .ok_or_else(|| Error::Capability("source has no closed-form log-MGF".into()))?;
        if !l.is_finite() {
            return Err(Error::Capability(format!("log-MGF is unbounded at lambda = {lambda}")));
        }
        Ok(spec.phi_inverse(l)? / lambda)
    };
    let (a, b) = (grid.lambda_min.ln(), grid.lambda_max.ln());
    let n = grid.points.max(3);
    let lambdas: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    let values = lambdas.iter().map(|&l| ratio(l)).collect::<Result<Vec<f64>>>()?;

    let (j, &vmax) = values
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .expect("grid is non-empty");
    let last = values[n - 1];
    if last >= vmax * (1.0 - 1e-12) && last > values[n - 2] * (1.0 + 1e-9) {
        return Err(Error::Capability(format!(
            "source is not in Sub_phi for this phi: ln E exp(lambda xi) / phi(lambda a) is still growing at lambda = {}",
            grid.lambda_max
        )));
    }

    let lo = lambdas[j.saturating_sub(1)].ln();
    let hi = lambdas[(j + 1).min(n - 1)].ln();
    let (_, refined) = golden_max(|u| ratio(u.exp()).unwrap_or(f64::NEG_INFINITY), lo, hi, 1e-12, 200);

    let mut tau = vmax.max(refined);
    if let (Some(c), Some(var)) = (spec.exact_quadratic_limit(), kind.variance()) {
        tau = tau.max((var / (2.0 * c)).sqrt());
    }
    Ok(tau)
}

/// A zero-mean source together with its standard under a fixed φ.
#[derive(Debug, Clone)]
pub struct SubGaussianSource {
    pub kind: SourceKind,
    pub tau: f64,
}

impl SubGaussianSource {
    pub fn new(kind: SourceKind, spec: &OrliczSpec) -> Result<Self> {
        let tau = tau_of(&kind, spec)?;
        Ok(Self { kind, tau })
    }

    /// One draw; fully determined by the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        sample(&self.kind, rng)
    }
}

/// One draw from `kind`.
pub fn sample<R: Rng + ?Sized>(kind: &SourceKind, rng: &mut R) -> Result<f64> {
    Ok(match kind {
        SourceKind::Gaussian { sigma } => {
            let z: f64 = rng.sample(StandardNormal);
            sigma * z
        }
        SourceKind::Rademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        SourceKind::UniformSymmetric { b } => rng.random_range(-*b..=*b),
        SourceKind::Explicit { sampler: Some(s), .. } => {
            (s.0)(&mut RngAdapter(rng))
        }
        SourceKind::Explicit { sampler: None, .. } => {
            return Err(Error::Capability("explicit source has no registered sampler".into()))
        }
    })
}

struct RngAdapter<'a, R: ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Upper bound `(Σ |c_k|^s τ_k^s)^{1/s}` for the standard of `Σ c_k ξ_k` with
/// independent ξ_k, valid when `x ↦ φ(|x|^{1/s})` is convex.
pub fn tau_sum_bound(taus: &[f64], coefficients: &[f64], s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 2.0) {
        return Err(Error::Domain(format!("s must lie in (0, 2], got {s}")));
    }
    if taus.len() != coefficients.len() {
        return Err(Error::Argument(format!(
            "{} standards but {} coefficients",
            taus.len(),
            coefficients.len()
        )));
    }
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Domain(format!("standards must be positive, got {t}")));
    }
    let sum: f64 = taus.iter().zip(coefficients).map(|(t, c)| (c.abs() * t).powf(s)).sum();
    Ok(sum.powf(1.0 / s))
}
