use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::quadrature::QuadratureGrid;
use crate::{Error, Result};

pub type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelKind {
    /// `B(t, s) = min(t, s)`.
    BrownianMin,
    /// `B(t, s) = exp(−θ|t − s|)`.
    ExponentialOU { theta: f64 },
    Custom(KernelFn),
}

impl fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::BrownianMin => f.write_str("BrownianMin"),
            KernelKind::ExponentialOU { theta } => write!(f, "ExponentialOU {{ theta: {theta} }}"),
            KernelKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A covariance kernel on `[0, T]²`.
///
/// The kernel fixes the eigenfunctions `a_k` and eigenvalues `λ_k` of
/// `a = λ ∫ B a`; the process covariance is `Var(ξ)·B`.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub t_end: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, t_end: f64) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Domain(format!("interval length must be positive, got {t_end}")));
        }
        if let KernelKind::ExponentialOU { theta } = kind {
            if !(theta > 0.0 && theta.is_finite()) {
                return Err(Error::Domain(format!("theta must be positive, got {theta}")));
            }
        }
        Ok(Self { kind, t_end })
    }

    pub fn brownian(t_end: f64) -> Result<Self> {
        Self::new(KernelKind::BrownianMin, t_end)
    }

    pub fn ou(theta: f64, t_end: f64) -> Result<Self> {
        Self::new(KernelKind::ExponentialOU { theta }, t_end)
    }

    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, t_end: f64) -> Result<Self> {
        Self::new(KernelKind::Custom(Arc::new(f)), t_end)
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match &self.kind {
            KernelKind::BrownianMin => t.min(s),
            KernelKind::ExponentialOU { theta } => (-theta * (t - s).abs()).exp(),
            KernelKind::Custom(f) => f(t, s),
        }
    }

    pub fn diagonal(&self, t: f64) -> f64 {
        self.eval(t, t)
    }

    /// Closed-form eigendata, when known.
    pub fn analytic(&self) -> Option<AnalyticEigen> {
        match self.kind {
            KernelKind::BrownianMin => Some(AnalyticEigen::Brownian { t_end: self.t_end }),
            _ => None,
        }
    }

    /// Largest relative asymmetry `|B(t,s) − B(s,t)|` over pairs of grid nodes.
    pub fn asymmetry(&self, grid: &QuadratureGrid) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (i, &t) in grid.nodes.iter().enumerate() {
            for &s in &grid.nodes[i..] {
                let (a, b) = (self.eval(t, s), self.eval(s, t));
                worst = worst.max((a - b).abs());
                scale = scale.max(a.abs()).max(b.abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    pub fn check_symmetric(&self, grid: &QuadratureGrid) -> Result<()> {
        let asym = self.asymmetry(grid);
        if !(asym <= 1e-12) {
            return Err(Error::Kernel(format!("kernel is not symmetric: relative asymmetry {asym:.3e}")));
        }
        Ok(())
    }
}

/// Closed-form eigenpairs, with `k` counted from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticEigen {
    /// `λ_k = ((k − ½)π/T)²`, `a_k(t) = √(2/T) sin((k − ½)πt/T)`.
    Brownian { t_end: f64 },
}

impl AnalyticEigen {
    pub fn lambda(&self, k: usize) -> f64 {
        match *self {
            AnalyticEigen::Brownian { t_end } => ((k as f64 - 0.5) * PI / t_end).powi(2),
        }
    }

    pub fn eigenfunction(&self, k: usize, t: f64) -> f64 {
        match *self {
            AnalyticEigen::Brownian { t_end } => {
                (2.0 / t_end).sqrt() * ((k as f64 - 0.5) * PI * t / t_end).sin()
            }
        }
    }

    /// Upper bound on `Σ_{k>n} |a_k(t)|^s / λ_k^{s/2}`, `s > 1`.
    ///
    /// Exact for `s = 2` through the trace of the kernel; otherwise a partial
    /// sum plus a bound on the remainder.
    pub fn tail_sum(&self, n: usize, t: f64, s: f64) -> f64 {
        match *self {
            AnalyticEigen::Brownian { t_end } => {
                if s == 2.0 {
                    let head: f64 = (1..=n).map(|k| self.eigenfunction(k, t).powi(2) / self.lambda(k)).sum();
                    return (t.min(t_end) - head).max(0.0);
                }
                let k_max = n + 16384;
                let head: f64 = ((n + 1)..=k_max)
                    .map(|k| (self.eigenfunction(k, t).abs() / self.lambda(k).sqrt()).powf(s))
                    .sum();
                // |a_k|/√λ_k ≤ √(2/T)·T/((k − ½)π), summed beyond k_max by an integral
                let rest = (2.0 / t_end).powf(s / 2.0) * (t_end / PI).powf(s) * (k_max as f64 - 0.5).powf(1.0 - s)
                    / (s - 1.0);
                head + rest
            }
        }
    }

    /// `Σ_{k>n} 1/λ_k`, the integrated `s = 2` tail.
    pub fn trace_tail(&self, n: usize) -> f64 {
        match *self {
            AnalyticEigen::Brownian { t_end } => {
                0.5 * t_end * t_end - (1..=n).map(|k| 1.0 / self.lambda(k)).sum::<f64>()
            }
        }
    }
}
