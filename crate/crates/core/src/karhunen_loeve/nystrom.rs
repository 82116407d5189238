use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use crate::quadrature::QuadratureGrid;
use crate::{Error, Result};

/// Negative eigenvalues beyond this fraction of the largest mark the kernel as indefinite.
const PSD_TOL: f64 = 1e-9;
/// Eigenvalues below this fraction of the largest are treated as numerically zero.
const RANK_TOL: f64 = 1e-12;
const SIGN_TOL: f64 = 1e-8;
const MIN_OVERLAP: f64 = 0.9;

/// Approximate eigendata of `a = λ ∫ B a` on a quadrature grid.
///
/// `lambda_hat` ascends; `a_hat[k]` is L₂-orthonormal under the grid weights
/// and positive at its first node of magnitude above `1e−8`. `eta` and
/// `delta_fun` bound the errors of `lambda_hat` and `a_hat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub grid: QuadratureGrid,
    pub lambda_hat: Vec<f64>,
    pub a_hat: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub delta_fun: Vec<Vec<f64>>,
}

impl EigenSystem {
    pub fn modes(&self) -> usize {
        self.lambda_hat.len()
    }

    /// Replace the error bounds; lengths must match the modes and grid.
    pub fn with_errors(mut self, eta: Vec<f64>, delta_fun: Vec<Vec<f64>>) -> Result<Self> {
        if eta.len() != self.modes() || delta_fun.len() != self.modes() {
            return Err(Error::Argument("error bounds must cover every mode".into()));
        }
        if delta_fun.iter().any(|d| d.len() != self.grid.len()) {
            return Err(Error::Argument("eigenfunction error bounds must be sampled on the grid".into()));
        }
        if eta.iter().chain(delta_fun.iter().flatten()).any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain("error bounds must be non-negative".into()));
        }
        self.eta = eta;
        self.delta_fun = delta_fun;
        Ok(self)
    }

    /// Keep the first `m` modes.
    pub fn truncated(&self, m: usize) -> Self {
        let m = m.min(self.modes());
        Self {
            grid: self.grid.clone(),
            lambda_hat: self.lambda_hat[..m].to_vec(),
            a_hat: self.a_hat[..m].to_vec(),
            eta: self.eta[..m].to_vec(),
            delta_fun: self.delta_fun[..m].to_vec(),
        }
    }

    /// Gram matrix of `a_hat` under the grid weights.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.a_hat
            .iter()
            .map(|a| self.a_hat.iter().map(|b| inner(&self.grid.weights, a, b)).collect())
            .collect()
    }

    /// Nyström extension of mode `k` (0-based) to arbitrary points:
    /// `â(t) = λ̂ Σ_j w_j B(t, s_j) â(s_j)`.
    pub fn extend(&self, kernel: &KernelSpec, k: usize, points: &[f64]) -> Vec<f64> {
        let (lambda, a) = (self.lambda_hat[k], &self.a_hat[k]);
        points
            .iter()
            .map(|&t| {
                lambda
                    * self
                        .grid
                        .nodes
                        .iter()
                        .zip(&self.grid.weights)
                        .zip(a)
                        .map(|((&s, w), v)| w * kernel.eval(t, s) * v)
                        .sum::<f64>()
            })
            .collect()
    }
}

fn inner(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
}

fn fix_sign(a: &mut [f64]) {
    if let Some(first) = a.iter().find(|v| v.abs() > SIGN_TOL) {
        if *first < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// The `modes` smallest eigenvalues `λ̂_k` of `a = λ ∫ B a` on a composite
/// Gauss-Legendre grid with `n_nodes` nodes of `order` per panel.
///
/// Error bounds are left at zero; see [`estimate_errors`].
pub fn nystrom_eigensystem(kernel: &KernelSpec, n_nodes: usize, order: usize, modes: usize) -> Result<EigenSystem> {
    if modes == 0 || modes > n_nodes {
        return Err(Error::Argument(format!("need 1 <= modes <= n_nodes, got modes = {modes}, n_nodes = {n_nodes}")));
    }
    let grid = QuadratureGrid::with_nodes(kernel.t_end, n_nodes, order)?;
    kernel.check_symmetric(&grid)?;
    let n = grid.len();
    let sw: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let mat = DMatrix::from_fn(n, n, |i, j| sw[i] * kernel.eval(grid.nodes[i], grid.nodes[j]) * sw[j]);
    let eig = SymmetricEigen::new(mat);

    let mut order_idx: Vec<usize> = (0..n).collect();
    order_idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let nu_max = eig.eigenvalues[order_idx[0]];
    let nu_min = eig.eigenvalues[order_idx[n - 1]];
    if !(nu_max > 0.0) {
        return Err(Error::Kernel("discretized kernel has no positive eigenvalue".into()));
    }
    if nu_min < -PSD_TOL * nu_max {
        return Err(Error::Kernel(format!(
            "discretized kernel is not positive semidefinite: eigenvalue {nu_min:.3e} against largest {nu_max:.3e}"
        )));
    }
    let resolvable = order_idx.iter().take_while(|&&i| eig.eigenvalues[i] > RANK_TOL * nu_max).count();
    if modes > resolvable {
        return Err(Error::Rank { requested: modes, resolvable });
    }

    let mut lambda_hat = Vec::with_capacity(modes);
    let mut a_hat = Vec::with_capacity(modes);
    for &i in &order_idx[..modes] {
        lambda_hat.push(1.0 / eig.eigenvalues[i]);
        let v = eig.eigenvectors.column(i);
        let mut a: Vec<f64> = v.iter().zip(&sw).map(|(x, s)| x / s).collect();
        let norm = inner(&grid.weights, &a, &a).sqrt();
        a.iter_mut().for_each(|x| *x /= norm);
        fix_sign(&mut a);
        a_hat.push(a);
    }
    Ok(EigenSystem {
        eta: vec![0.0; modes],
        delta_fun: vec![vec![0.0; n]; modes],
        grid,
        lambda_hat,
        a_hat,
    })
}

/// Error bounds for `coarse` from a second solution `fine` of the same kernel:
/// `η_k = safety·|λ̂_k − λ̂_k'|` and `δ_k(t) = safety·|â_k(t) − â_k'(t)|` on the
/// coarse nodes, with the fine eigenfunctions Nyström-extended and sign-aligned.
pub fn compare_systems(
    kernel: &KernelSpec,
    coarse: &EigenSystem,
    fine: &EigenSystem,
    safety: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if !(safety >= 1.0 && safety.is_finite()) {
        return Err(Error::Domain(format!("safety factor must be >= 1, got {safety}")));
    }
    if fine.modes() < coarse.modes() {
        return Err(Error::Argument("fine system has fewer modes than the coarse one".into()));
    }
    let same_grid = fine.grid == coarse.grid;
    let mut eta = Vec::with_capacity(coarse.modes());
    let mut delta = Vec::with_capacity(coarse.modes());
    for k in 0..coarse.modes() {
        let mut other = if same_grid { fine.a_hat[k].clone() } else { fine.extend(kernel, k, &coarse.grid.nodes) };
        let overlap = inner(&coarse.grid.weights, &coarse.a_hat[k], &other);
        if overlap < 0.0 {
            other.iter_mut().for_each(|v| *v = -*v);
        }
        if overlap.abs() < MIN_OVERLAP {
            return Err(Error::Degeneracy { mode: k + 1, overlap: overlap.abs() });
        }
        eta.push(safety * (coarse.lambda_hat[k] - fine.lambda_hat[k]).abs());
        delta.push(coarse.a_hat[k].iter().zip(&other).map(|(a, b)| safety * (a - b).abs()).collect());
    }
    Ok((eta, delta))
}

/// Solve at `n_nodes` and `2·n_nodes` and attach two-grid error bounds to the
/// coarse solution.
pub fn estimate_errors(
    kernel: &KernelSpec,
    n_nodes: usize,
    order: usize,
    modes: usize,
    safety: f64,
) -> Result<EigenSystem> {
    let coarse = nystrom_eigensystem(kernel, n_nodes, order, modes)?;
    let fine = nystrom_eigensystem(kernel, 2 * n_nodes, order, modes)?;
    let (eta, delta) = compare_systems(kernel, &coarse, &fine, safety)?;
    coarse.with_errors(eta, delta)
}
