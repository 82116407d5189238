use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cn::{cn_theorem10, cn_theorem11, cn_theorem9, KlTail};
use super::kernel::KernelSpec;
use super::nystrom::{estimate_errors, EigenSystem};
use crate::bounds::AccuracyTarget;
use crate::orlicz::{OrliczFamily, OrliczSpec};
use crate::plan::{scan_truncation, EvalMode, ModelPlan, Planned, Route};
use crate::rng::substream;
use crate::subgaussian::{sample, tau_of, SourceKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlOptions {
    pub n_nodes: usize,
    /// Quadrature nodes per panel.
    pub order: usize,
    /// Modes computed; the largest `N` considered.
    pub modes: usize,
    pub safety: f64,
    /// `None` picks the route from φ and the kernel.
    pub route: Option<Route>,
    pub mode: EvalMode,
}

impl Default for KlOptions {
    fn default() -> Self {
        Self { n_nodes: 64, order: 8, modes: 16, safety: 2.0, route: None, mode: EvalMode::Consistent }
    }
}

/// A certified KL model with the eigendata it was built from.
#[derive(Debug, Clone)]
pub struct KlModel {
    pub plan: ModelPlan,
    pub eigen: EigenSystem,
    pub kernel: KernelSpec,
    pub spec: OrliczSpec,
    pub source: SourceKind,
    pub tau: f64,
    /// `c_N` at the chosen `N` in the other evaluation mode, where one exists.
    pub alternate_c_n: Option<f64>,
}

/// Check that `route` can certify a KL model for `spec` and `kernel`.
pub fn check_route(route: Route, spec: &OrliczSpec, kernel: &KernelSpec) -> Result<()> {
    match route {
        Route::Series7 | Route::Series8 => {
            Err(Error::Route(format!("{route} certifies series decompositions, not kernels")))
        }
        Route::Theorem11 => match spec.family() {
            OrliczFamily::PowerGamma { gamma } if *gamma < 2.0 => {
                if kernel.analytic().is_none() {
                    Err(Error::Route("theorem11 needs closed-form eigendata for its tail".into()))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::Route("theorem11 needs phi = |x|^gamma/gamma with 1 < gamma < 2".into())),
        },
        Route::Theorem9 | Route::Theorem10 => {
            if spec.check_power_convexity(2.0) {
                Ok(())
            } else {
                Err(Error::Route(format!("{route} needs phi(|x|^(1/2)) convex")))
            }
        }
    }
}

/// The route used when none is requested.
pub fn default_route(spec: &OrliczSpec, kernel: &KernelSpec) -> Result<Route> {
    let route = match spec.family() {
        OrliczFamily::PowerGamma { gamma } if *gamma < 2.0 => Route::Theorem11,
        _ if kernel.analytic().is_some() => Route::Theorem9,
        _ => Route::Theorem10,
    };
    check_route(route, spec, kernel)?;
    Ok(route)
}

/// Eigendata with error bounds at the options' resolution; drops trailing
/// modes that are unresolvable or cannot be matched between the two grids.
pub fn eigen_with_errors(kernel: &KernelSpec, opts: &KlOptions) -> Result<EigenSystem> {
    let mut modes = opts.modes;
    loop {
        match estimate_errors(kernel, opts.n_nodes, opts.order, modes, opts.safety) {
            Err(Error::Rank { resolvable, .. }) if resolvable > 0 && resolvable < modes => modes = resolvable,
            Err(Error::Degeneracy { mode, .. }) if mode > 1 => modes = mode - 1,
            other => return other,
        }
    }
}

fn route_cn(
    route: Route,
    mode: EvalMode,
    eig: &EigenSystem,
    kernel: &KernelSpec,
    spec: &OrliczSpec,
    tau: f64,
    n: usize,
    p: f64,
) -> Result<f64> {
    let taus = vec![tau; eig.modes()];
    let diagonal = || eig.grid.nodes.iter().map(|&t| kernel.diagonal(t)).collect::<Vec<_>>();
    match route {
        Route::Theorem9 => {
            let tail = match kernel.analytic() {
                Some(eigen) => KlTail::Analytic { eigen, tau },
                None => KlTail::Mercer { tau, diagonal: diagonal() },
            };
            cn_theorem9(eig, &taus, n, p, &tail)
        }
        Route::Theorem10 => cn_theorem10(eig, tau, n, p, &diagonal(), mode),
        Route::Theorem11 => {
            let gamma = spec.gamma().ok_or_else(|| Error::Route("theorem11 needs the power family".into()))?;
            let eigen = kernel
                .analytic()
                .ok_or_else(|| Error::Route("theorem11 needs closed-form eigendata".into()))?;
            cn_theorem11(eig, &taus, n, p, gamma, &KlTail::Analytic { eigen, tau }, mode)
        }
        Route::Series7 | Route::Series8 => Err(Error::Route(format!("{route} does not apply to kernels"))),
    }
}

/// Solve the eigenproblem, estimate its errors and pick the smallest certified `N`.
pub fn build_kl_model(
    kernel: &KernelSpec,
    spec: &OrliczSpec,
    source: &SourceKind,
    target: &AccuracyTarget,
    opts: &KlOptions,
) -> Result<Planned<KlModel>> {
    target.validate()?;
    if (kernel.t_end - target.t_end).abs() > 1e-12 * target.t_end {
        return Err(Error::Argument(format!(
            "kernel lives on [0, {}] but the target interval is [0, {}]",
            kernel.t_end, target.t_end
        )));
    }
    let route = match opts.route {
        Some(r) => {
            check_route(r, spec, kernel)?;
            r
        }
        None => default_route(spec, kernel)?,
    };
    let tau = tau_of(source, spec)?;
    let eig = eigen_with_errors(kernel, opts)?;
    let planned = scan_truncation(eig.modes(), target, spec, route, opts.mode, |n| {
        route_cn(route, opts.mode, &eig, kernel, spec, tau, n, target.p)
    })?;
    Ok(planned.map(|plan| {
        let other = match opts.mode {
            EvalMode::Consistent => EvalMode::PaperLiteral,
            EvalMode::PaperLiteral => EvalMode::Consistent,
        };
        let alternate_c_n = matches!(route, Route::Theorem10 | Route::Theorem11)
            .then(|| route_cn(route, other, &eig, kernel, spec, tau, plan.n, target.p).ok())
            .flatten();
        KlModel { plan, eigen: eig, kernel: kernel.clone(), spec: spec.clone(), source: source.clone(), tau, alternate_c_n }
    }))
}

/// `X_N(t_i) = Σ_{k≤N} ξ_k â_k(t_i)/√λ̂_k`.
pub fn kl_path(eig: &EigenSystem, n: usize, xi: &[f64]) -> Vec<f64> {
    let mut path = vec![0.0; eig.grid.len()];
    for k in 0..n.min(xi.len()) {
        let c = xi[k] / eig.lambda_hat[k].sqrt();
        for (v, a) in path.iter_mut().zip(&eig.a_hat[k]) {
            *v += c * a;
        }
    }
    path
}

/// The first `n` mode draws of path `index`.
pub fn mode_draws(source: &SourceKind, n: usize, seed: u64, index: u64) -> Result<Vec<f64>> {
    let mut rng = substream(seed, index);
    (0..n).map(|_| sample(source, &mut rng)).collect()
}

/// `n_paths` model paths on the eigen grid; path `i` uses substream `i` of `seed`.
pub fn simulate_kl(model: &KlModel, n_paths: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = model.plan.n;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| Ok(kl_path(&model.eigen, n, &mode_draws(&model.source, n, seed, i)?)))
        .collect()
}
