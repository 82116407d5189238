//! Empirical check of `P{∫₀ᵀ |X − X_N|^p dt > δ} ≤ α` for a built KL model.
//!
//! Every path draws the model's mode variables first and then whatever the
//! reference process needs from the same substream. In coupled mode the
//! reference reuses the model's draws for its first `N` modes, so the
//! measured error is that of the model and not of two independent processes.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::tail_probability_bound;
use crate::karhunen_loeve::{kl_path, AnalyticEigen, KernelSpec, KlModel};
use crate::quadrature::QuadratureGrid;
use crate::rng::{substream, PathRng};
use crate::subgaussian::{sample, SourceKind};
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// `(Σ w_i |v_i|^p)^{1/p}`.
pub fn lp_norm(values: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::Argument(format!("{} values for {} weights", values.len(), weights.len())));
    }
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be >= 1, got {p}")));
    }
    Ok(weighted_power(values, weights, p).powf(1.0 / p))
}

fn weighted_power(values: &[f64], weights: &[f64], p: f64) -> f64 {
    values.iter().zip(weights).map(|(v, w)| w * v.abs().powf(p)).sum()
}

/// Upper end of the Wilson score interval for `k` successes in `n` trials.
pub fn wilson_upper(k: usize, n: usize, z: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (nf, p) = (n as f64, k as f64 / n as f64);
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = p + z2 / (2.0 * nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((centre + half) / denom).min(1.0)
}

/// Symmetric square root of a PSD matrix with negative eigenvalues clipped;
/// returns the factor and the largest clipped magnitude.
fn psd_sqrt(c: DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let eig = SymmetricEigen::new(c);
    let mut clipped: f64 = 0.0;
    let roots = eig.eigenvalues.map(|l| {
        if l < 0.0 {
            clipped = clipped.max(-l);
        }
        l.max(0.0).sqrt()
    });
    let v = &eig.eigenvectors;
    (v * DMatrix::from_diagonal(&roots) * v.transpose(), clipped)
}

/// Draws of the reference process `X` on a grid.
#[derive(Debug, Clone)]
pub struct ReferenceSampler {
    source: SourceKind,
    /// `a_k/√λ_k` on the grid for the modes drawn explicitly.
    modes: Vec<Vec<f64>>,
    /// Number of leading modes whose draws are supplied by the caller.
    shared: usize,
    /// Square root of the Gaussian residual covariance.
    residual: Option<DMatrix<f64>>,
    /// Largest negative eigenvalue clipped from the residual covariance.
    pub clipped: f64,
    /// `∫ Var` of the modes beyond the explicit KL truncation, when truncated.
    pub truncation_remainder: Option<f64>,
}

/// Modes drawn for non-Gaussian references.
pub const N_REF: usize = 256;

impl ReferenceSampler {
    /// A sampler whose first `shared` modes come from the caller.
    ///
    /// Gaussian sources sample the residual exactly from its covariance;
    /// other sources use closed-form eigendata truncated at [`N_REF`] modes.
    pub fn new(kernel: &KernelSpec, source: &SourceKind, grid: &QuadratureGrid, shared: usize) -> Result<Self> {
        let analytic = kernel.analytic();
        if shared > 0 && analytic.is_none() {
            return Err(Error::Capability("coupled reference draws need closed-form eigendata".into()));
        }
        let mode_values = |eigen: AnalyticEigen, count: usize| -> Vec<Vec<f64>> {
            (1..=count)
                .map(|k| {
                    let s = eigen.lambda(k).sqrt();
                    grid.nodes.iter().map(|&t| eigen.eigenfunction(k, t) / s).collect()
                })
                .collect()
        };
        match source {
            SourceKind::Gaussian { sigma } => {
                let modes = analytic.map(|e| mode_values(e, shared)).unwrap_or_default();
                let n = grid.len();
                let cov = DMatrix::from_fn(n, n, |i, j| {
                    let explained: f64 = modes.iter().map(|m| m[i] * m[j]).sum();
                    sigma * sigma * (kernel.eval(grid.nodes[i], grid.nodes[j]) - explained)
                });
                let (root, clipped) = psd_sqrt(cov);
                Ok(Self {
                    source: source.clone(),
                    modes,
                    shared,
                    residual: Some(root),
                    clipped,
                    truncation_remainder: None,
                })
            }
            _ => {
                let eigen = analytic.ok_or_else(|| {
                    Error::Capability("non-Gaussian reference paths need closed-form eigendata".into())
                })?;
                let var = source
                    .variance()
                    .ok_or_else(|| Error::Capability("reference sampling needs a source with known variance".into()))?;
                let count = N_REF.max(shared);
                Ok(Self {
                    source: source.clone(),
                    modes: mode_values(eigen, count),
                    shared,
                    residual: None,
                    clipped: 0.0,
                    truncation_remainder: Some(var * eigen.trace_tail(count)),
                })
            }
        }
    }

    /// One path; `shared` must hold the caller's draws of the leading modes.
    pub fn path(&self, rng: &mut PathRng, shared: &[f64]) -> Result<Vec<f64>> {
        if shared.len() != self.shared {
            return Err(Error::Argument(format!("{} shared draws for {} shared modes", shared.len(), self.shared)));
        }
        let n = self.modes.first().map_or_else(|| self.residual.as_ref().map_or(0, |r| r.nrows()), |m| m.len());
        let mut x = vec![0.0; n];
        let mut add = |xi: f64, m: &[f64]| x.iter_mut().zip(m).for_each(|(v, a)| *v += xi * a);
        for (xi, m) in shared.iter().zip(&self.modes) {
            add(*xi, m);
        }
        match &self.residual {
            Some(root) => {
                let z: Vec<f64> = (0..root.ncols()).map(|_| rng.sample(StandardNormal)).collect();
                for (i, v) in x.iter_mut().enumerate() {
                    *v += root.row(i).iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            None => {
                for m in &self.modes[self.shared..] {
                    add(sample(&self.source, rng)?, m);
                }
            }
        }
        Ok(x)
    }
}

/// A single draw of `X` on `grid`.
pub fn reference_path(kernel: &KernelSpec, source: &SourceKind, grid: &QuadratureGrid, seed: u64) -> Result<Vec<f64>> {
    ReferenceSampler::new(kernel, source, grid, 0)?.path(&mut substream(seed, 0), &[])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// Reference and model share the first `N` mode draws.
    Coupled,
    /// Reference drawn independently of the model.
    Uncoupled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub n_paths: usize,
    pub seed: u64,
    /// `None` couples whenever closed-form eigendata exist.
    pub coupling: Option<Coupling>,
    /// Threshold to test instead of the planned one.
    pub delta: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { n_paths: 20_000, seed: 0, coupling: None, delta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub n_paths: usize,
    pub exceed_count: usize,
    pub p_hat: f64,
    pub wilson_upper: f64,
    pub alpha: f64,
    pub delta: f64,
    pub p: f64,
    /// Certified `P{∫|X − X_N|^p > δ}` for the plan's `c_N`.
    pub theoretical_bound: f64,
    pub pass: bool,
    pub coupling: Coupling,
    pub seed: u64,
    pub covariance_clip: f64,
    pub truncation_remainder: Option<f64>,
    /// `(∫|X − X_N|^p)^{1/p}` per path.
    #[serde(skip)]
    pub norms: Vec<f64>,
}

pub fn verify_plan(model: &KlModel, n_paths: usize, seed: u64) -> Result<VerificationReport> {
    verify_plan_with(model, &VerifyOptions { n_paths, seed, ..VerifyOptions::default() })
}

pub fn verify_plan_with(model: &KlModel, opts: &VerifyOptions) -> Result<VerificationReport> {
    if opts.n_paths == 0 {
        return Err(Error::Argument("at least one path is required".into()));
    }
    let target = model.plan.target.with_delta(opts.delta.unwrap_or(model.plan.target.delta));
    if !(target.delta >= 0.0) {
        return Err(Error::Domain(format!("delta must be non-negative, got {}", target.delta)));
    }
    let coupling = opts.coupling.unwrap_or(if model.kernel.analytic().is_some() {
        Coupling::Coupled
    } else {
        Coupling::Uncoupled
    });
    let n = model.plan.n;
    let grid = &model.eigen.grid;
    let shared = if coupling == Coupling::Coupled { n } else { 0 };
    let reference = ReferenceSampler::new(&model.kernel, &model.source, grid, shared)?;

    let outcomes: Vec<(f64, bool)> = (0..opts.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(opts.seed, i);
            let xi = (0..n).map(|_| sample(&model.source, &mut rng)).collect::<Result<Vec<_>>>()?;
            let approx = kl_path(&model.eigen, n, &xi);
            let x = reference.path(&mut rng, &xi[..shared])?;
            let diff: Vec<f64> = x.iter().zip(&approx).map(|(a, b)| a - b).collect();
            let integral = weighted_power(&diff, &grid.weights, target.p);
            Ok((integral.powf(1.0 / target.p), integral > target.delta))
        })
        .collect::<Result<_>>()?;

    let exceed_count = outcomes.iter().filter(|o| o.1).count();
    let wilson = wilson_upper(exceed_count, opts.n_paths, Z95);
    Ok(VerificationReport {
        n_paths: opts.n_paths,
        exceed_count,
        p_hat: exceed_count as f64 / opts.n_paths as f64,
        wilson_upper: wilson,
        alpha: target.alpha,
        delta: target.delta,
        p: target.p,
        theoretical_bound: tail_probability_bound(model.plan.c_n, &target, &model.spec),
        pass: wilson <= target.alpha,
        coupling,
        seed: opts.seed,
        covariance_clip: reference.clipped,
        truncation_remainder: reference.truncation_remainder,
        norms: outcomes.into_iter().map(|o| o.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::AccuracyTarget;
    use crate::karhunen_loeve::{build_kl_model, KlOptions};
    use crate::orlicz::OrliczSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_grid() -> QuadratureGrid {
        QuadratureGrid::composite(1.0, 8, 8).unwrap()
    }

    #[test]
    fn lp_norm_examples() {
        let g = unit_grid();
        assert_relative_eq!(lp_norm(&vec![1.0; g.len()], &g.weights, 2.0).unwrap(), 1.0, max_relative = 1e-14);
        let t = g.nodes.clone();
        assert!((lp_norm(&t, &g.weights, 2.0).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-10);
        assert!(lp_norm(&t, &g.weights[1..], 2.0).is_err());
        assert!(lp_norm(&t, &g.weights, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn lp_norm_is_a_norm(
            v in prop::collection::vec(-5.0f64..5.0, 64),
            u in prop::collection::vec(-5.0f64..5.0, 64),
            c in -4.0f64..4.0,
            p in 1.0f64..6.0,
        ) {
            let g = unit_grid();
            let w = &g.weights;
            let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
            let nv = lp_norm(&v, w, p).unwrap();
            prop_assert!((lp_norm(&scaled, w, p).unwrap() - c.abs() * nv).abs() <= 1e-12 * (1.0 + nv));
            let sum: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a + b).collect();
            prop_assert!(lp_norm(&sum, w, p).unwrap() <= nv + lp_norm(&u, w, p).unwrap() + 1e-12);
        }
    }

    #[test]
    fn wilson_examples() {
        // zero successes: z²/(n + z²)
        let n = 20_000;
        assert_relative_eq!(wilson_upper(0, n, Z95), Z95 * Z95 / (n as f64 + Z95 * Z95), max_relative = 1e-12);
        assert_eq!(wilson_upper(n, n, Z95), 1.0);
        assert!(wilson_upper(50, 1000, Z95) > 0.05);
        assert_relative_eq!(wilson_upper(50, 1000, Z95), 0.065_313_820_244_250_8, max_relative = 1e-9);
    }

    #[test]
    fn reference_brownian_variance() {
        let k = KernelSpec::brownian(1.0).unwrap();
        let g = unit_grid();
        let sampler = ReferenceSampler::new(&k, &SourceKind::Gaussian { sigma: 1.0 }, &g, 0).unwrap();
        let n = 100_000;
        let paths: Vec<Vec<f64>> = (0..n as u64)
            .into_par_iter()
            .map(|i| sampler.path(&mut substream(3, i), &[]).unwrap())
            .collect();
        for i in [3, 30, 63] {
            let var = paths.iter().map(|p| p[i] * p[i]).sum::<f64>() / n as f64;
            // Var of a χ²-type mean: 2t²/n
            let se = (2.0f64 / n as f64).sqrt() * g.nodes[i];
            assert!((var - g.nodes[i]).abs() < 3.0 * se, "t={}: {var}", g.nodes[i]);
        }
    }

    #[test]
    fn reference_basics() {
        let k = KernelSpec::brownian(1.0).unwrap();
        let g = unit_grid();
        let a = reference_path(&k, &SourceKind::Gaussian { sigma: 1.0 }, &g, 9).unwrap();
        assert_eq!(a, reference_path(&k, &SourceKind::Gaussian { sigma: 1.0 }, &g, 9).unwrap());
        // non-Gaussian references report what their truncation leaves out
        let s = ReferenceSampler::new(&k, &SourceKind::Rademacher, &g, 3).unwrap();
        assert!(s.truncation_remainder.unwrap() < 1e-3);
        let ou = KernelSpec::ou(1.0, 1.0).unwrap();
        assert!(matches!(
            reference_path(&ou, &SourceKind::Rademacher, &g, 1),
            Err(Error::Capability(_))
        ));
        assert!(reference_path(&ou, &SourceKind::Gaussian { sigma: 2.0 }, &g, 1).is_ok());
    }

    #[test]
    fn zero_normals_give_zero_path() {
        let k = KernelSpec::brownian(1.0).unwrap();
        let g = unit_grid();
        let s = ReferenceSampler::new(&k, &SourceKind::Gaussian { sigma: 1.0 }, &g, 0).unwrap();
        let root = s.residual.as_ref().unwrap();
        let z = vec![0.0; root.ncols()];
        let x: Vec<f64> = (0..root.nrows()).map(|i| root.row(i).iter().zip(&z).map(|(a, b)| a * b).sum()).collect();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    fn brownian_model() -> KlModel {
        let k = KernelSpec::brownian(1.0).unwrap();
        let t = AccuracyTarget::new(2.0, 0.35, 0.05, 1.0).unwrap();
        build_kl_model(&k, &OrliczSpec::gaussian(), &SourceKind::Gaussian { sigma: 1.0 }, &t, &KlOptions::default())
            .unwrap()
            .feasible()
            .unwrap()
    }

    #[test]
    fn brownian_plan_verifies() {
        let m = brownian_model();
        let r = verify_plan(&m, 20_000, 42).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.p_hat < 0.01);
        assert_eq!(r.coupling, Coupling::Coupled);
        let se = (r.p_hat * (1.0 - r.p_hat) / r.n_paths as f64).sqrt();
        assert!(r.theoretical_bound >= r.p_hat - 3.0 * se);
        assert_eq!(r, verify_plan(&m, 20_000, 42).unwrap());
    }

    #[test]
    fn threshold_extremes() {
        let m = brownian_model();
        let easy = verify_plan_with(&m, &VerifyOptions { n_paths: 2000, seed: 1, delta: Some(3.5), ..Default::default() })
            .unwrap();
        assert_eq!(easy.exceed_count, 0);
        let zero = verify_plan_with(&m, &VerifyOptions { n_paths: 2000, seed: 1, delta: Some(0.0), ..Default::default() })
            .unwrap();
        assert_eq!(zero.p_hat, 1.0);
        assert!(!zero.pass);
    }

    #[test]
    fn coupling_reduces_exceedance() {
        let m = brownian_model();
        for delta in [0.005, 0.01, 0.02] {
            let run = |coupling| {
                verify_plan_with(
                    &m,
                    &VerifyOptions { n_paths: 4000, seed: 5, coupling: Some(coupling), delta: Some(delta) },
                )
                .unwrap()
            };
            let (c, u) = (run(Coupling::Coupled), run(Coupling::Uncoupled));
            assert!(c.exceed_count <= u.exceed_count, "delta={delta}: {} > {}", c.exceed_count, u.exceed_count);
        }
    }

    #[test]
    fn non_gaussian_reference() {
        let k = KernelSpec::brownian(1.0).unwrap();
        let t = AccuracyTarget::new(2.0, 0.35, 0.05, 1.0).unwrap();
        let m = build_kl_model(&k, &OrliczSpec::gaussian(), &SourceKind::Rademacher, &t, &KlOptions::default())
            .unwrap()
            .feasible()
            .unwrap();
        let r = verify_plan(&m, 2000, 3).unwrap();
        assert!(r.truncation_remainder.is_some());
        assert!(r.pass, "{r:?}");
    }
}
