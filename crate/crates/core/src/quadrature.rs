//! Composite Gauss-Legendre quadrature on `[0, T]`.
//!
//! The node set of a [`QuadratureGrid`] doubles as the evaluation grid for
//! every function-on-grid in the crate (coefficient functions, eigenfunctions,
//! simulated paths), so integrals of pointwise expressions are plain weighted
//! sums.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes in ascending order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A composite Gauss-Legendre rule: `panels` equal panels on `[0, T]`, each
/// carrying `order` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub t_end: f64,
    pub panels: usize,
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn composite(t_end: f64, panels: usize, order: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Domain(format!("interval length must be positive, got {t_end}")));
        }
        if panels == 0 || order == 0 {
            return Err(Error::Argument("panels and order must be at least 1".into()));
        }
        let (ref_nodes, ref_weights) = gauss_legendre(order);
        let h = t_end / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = p as f64 * h;
            for (x, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(a + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        Ok(Self { t_end, panels, order, nodes, weights })
    }

    /// A grid with `n_nodes` total nodes, `order` per panel.
    pub fn with_nodes(t_end: f64, n_nodes: usize, order: usize) -> Result<Self> {
        if order == 0 || n_nodes == 0 || n_nodes % order != 0 {
            return Err(Error::Argument(format!(
                "node count {n_nodes} must be a positive multiple of the panel order {order}"
            )));
        }
        Self::composite(t_end, n_nodes / order, order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum of values given on the nodes.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_fn<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, w)| w * f(t)).sum()
    }
}

impl Default for QuadratureGrid {
    /// 64 panels of 8 nodes on `[0, 1]`.
    fn default() -> Self {
        Self::composite(1.0, 64, 8).expect("default grid parameters are valid")
    }
}
