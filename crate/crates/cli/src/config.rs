//! Run configuration: one TOML file with `orlicz`, `source`, `kernel` or
//! `series`, `target` and `numerics` sections plus an optional top-level `route`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use subphi::bounds::AccuracyTarget;
use subphi::karhunen_loeve::{KernelSpec, KlOptions};
use subphi::orlicz::OrliczSpec;
use subphi::plan::{EvalMode, Route};
use subphi::subgaussian::SourceKind;

use crate::inputs;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub route: Option<Route>,
    pub orlicz: OrliczBlock,
    pub source: SourceBlock,
    #[serde(default)]
    pub kernel: Option<KernelBlock>,
    #[serde(default)]
    pub series: Option<SeriesBlock>,
    pub target: TargetBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Power,
    Piecewise,
    Table,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrliczBlock {
    pub family: Family,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub xs: Option<Vec<f64>>,
    #[serde(default)]
    pub phis: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceChoice {
    Gaussian,
    Rademacher,
    Uniform,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceBlock {
    pub kind: SourceChoice,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Brownian,
    Ou,
    Custom,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBlock {
    pub kind: KernelChoice,
    #[serde(default)]
    pub theta: Option<f64>,
    /// Square CSV matrix of `B(t_i, t_j)` on a uniform grid over `[0, T]`.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default = "default_n_nodes")]
    pub n_nodes: usize,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesBlock {
    /// Manifest listing the coefficient files.
    pub bundle: PathBuf,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBlock {
    pub p: f64,
    pub delta: f64,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    #[serde(default = "default_order")]
    pub order: usize,
    /// Quadrature panels for series decompositions.
    #[serde(default = "default_panels")]
    pub panels: usize,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: EvalMode,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        Self { order: default_order(), panels: default_panels(), n_paths: default_paths(), seed: 0, mode: EvalMode::default() }
    }
}

fn default_n_nodes() -> usize {
    64
}
fn default_modes() -> usize {
    16
}
fn default_safety() -> f64 {
    2.0
}
fn default_order() -> usize {
    8
}
fn default_panels() -> usize {
    64
}
fn default_paths() -> usize {
    20_000
}

/// A parsed configuration together with where it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let config: RunConfig = toml::from_str(&text).with_context(|| format!("malformed config {}", path.display()))?;
    if config.kernel.is_some() == config.series.is_some() {
        bail!("config must contain exactly one of [kernel] or [series]");
    }
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, dir })
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    /// SHA-256 over every field that affects the plan plus the bytes of any
    /// referenced data file. Seed and path count are excluded.
    pub fn hash(&self) -> Result<String> {
        let mut view = self.config.clone();
        view.numerics.seed = 0;
        view.numerics.n_paths = 0;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&view)?);
        let mut files = Vec::new();
        if let Some(f) = self.config.kernel.as_ref().and_then(|k| k.file.as_ref()) {
            files.push(self.resolve(f));
        }
        if let Some(s) = &self.config.series {
            let manifest = self.resolve(&s.bundle);
            files.extend(inputs::bundle_files(&manifest)?);
            files.push(manifest);
        }
        for f in files {
            let bytes = fs::read(&f).with_context(|| format!("cannot read {}", f.display()))?;
            h.update(Sha256::digest(&bytes));
        }
        Ok(hex::encode(h.finalize()))
    }

    pub fn orlicz(&self) -> Result<OrliczSpec> {
        let o = &self.config.orlicz;
        let gamma = || o.gamma.context("orlicz.gamma is required for this family");
        Ok(match o.family {
            Family::Power => OrliczSpec::power(gamma()?)?,
            Family::Piecewise => OrliczSpec::piecewise(gamma()?)?,
            Family::Table => OrliczSpec::table(
                o.xs.clone().context("orlicz.xs is required for a table")?,
                o.phis.clone().context("orlicz.phis is required for a table")?,
            )?,
        })
    }

    pub fn source(&self) -> Result<SourceKind> {
        let s = &self.config.source;
        Ok(match s.kind {
            SourceChoice::Gaussian => SourceKind::Gaussian { sigma: s.sigma.unwrap_or(1.0) },
            SourceChoice::Rademacher => SourceKind::Rademacher,
            SourceChoice::Uniform => SourceKind::UniformSymmetric { b: s.b.context("source.b is required for uniform")? },
            SourceChoice::Explicit => {
                SourceKind::Explicit { tau: s.tau.context("source.tau is required for explicit")?, sampler: None }
            }
        })
    }

    pub fn target(&self) -> Result<AccuracyTarget> {
        let t = self.config.target;
        Ok(AccuracyTarget::new(t.p, t.delta, t.alpha, t.t_end)?)
    }

    pub fn kernel(&self) -> Result<Option<KernelSpec>> {
        let Some(k) = &self.config.kernel else { return Ok(None) };
        let t_end = self.config.target.t_end;
        Ok(Some(match k.kind {
            KernelChoice::Brownian => KernelSpec::brownian(t_end)?,
            KernelChoice::Ou => KernelSpec::ou(k.theta.context("kernel.theta is required for ou")?, t_end)?,
            KernelChoice::Custom => {
                let file = self.resolve(k.file.as_ref().context("kernel.file is required for custom")?);
                inputs::matrix_kernel(&file, t_end)?
            }
        }))
    }

    pub fn kl_options(&self) -> Option<KlOptions> {
        self.config.kernel.as_ref().map(|k| KlOptions {
            n_nodes: k.n_nodes,
            order: self.config.numerics.order,
            modes: k.modes,
            safety: k.safety,
            route: self.config.route,
            mode: self.config.numerics.mode,
        })
    }
}
