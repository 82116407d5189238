//! Data files referenced from a config: tabulated kernels and series bundles.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;

use subphi::karhunen_loeve::KernelSpec;
use subphi::quadrature::QuadratureGrid;
use subphi::series::{CoefficientTerm, SeriesDecomposition, SeriesTail};

fn read_rows(path: &Path, has_headers: bool) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: bad record {}", path.display(), i + 1))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().with_context(|| format!("{}: row {}: not a number: {f:?}", path.display(), i + 1)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Square matrix `B(t_i, t_j)` with `t_i = i·T/(n − 1)`.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let rows = read_rows(path, false)?;
    let n = rows.len();
    ensure!(n >= 2, "{}: kernel matrix needs at least 2 rows", path.display());
    ensure!(rows.iter().all(|r| r.len() == n), "{}: kernel matrix must be square", path.display());
    Ok(rows)
}

/// Largest `|B_ij − B_ji|` relative to the largest entry.
pub fn matrix_asymmetry(m: &[Vec<f64>]) -> f64 {
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..m.len() {
        for j in 0..i {
            worst = worst.max((m[i][j] - m[j][i]).abs());
        }
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// A kernel bilinearly interpolated from a tabulated matrix.
pub fn matrix_kernel(path: &Path, t_end: f64) -> Result<KernelSpec> {
    let m = read_matrix(path)?;
    let h = t_end / (m.len() - 1) as f64;
    let last = m.len() - 1;
    let locate = move |t: f64| {
        let x = (t / h).clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last - 1);
        (i, x - i as f64)
    };
    Ok(KernelSpec::custom(
        move |t, s| {
            let ((i, u), (j, v)) = (locate(t), locate(s));
            (1.0 - u) * (1.0 - v) * m[i][j]
                + u * (1.0 - v) * m[i + 1][j]
                + (1.0 - u) * v * m[i][j + 1]
                + u * v * m[i + 1][j + 1]
        },
        t_end,
    )?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    schema_version: u32,
    tail: TailChoice,
    term: Vec<TermEntry>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum TailChoice {
    Finite,
    None,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermEntry {
    /// CSV with header `t,a_hat,delta`.
    file: PathBuf,
    #[serde(default)]
    tau: Option<f64>,
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read bundle {}", path.display()))?;
    let m: Manifest = toml::from_str(&text).with_context(|| format!("malformed bundle {}", path.display()))?;
    ensure!(m.schema_version == 1, "{}: unsupported schema_version {}", path.display(), m.schema_version);
    ensure!(!m.term.is_empty(), "{}: bundle lists no terms", path.display());
    Ok(m)
}

fn resolve(manifest: &Path, f: &Path) -> PathBuf {
    if f.is_absolute() {
        f.to_path_buf()
    } else {
        manifest.parent().map(|d| d.join(f)).unwrap_or_else(|| f.to_path_buf())
    }
}

pub fn bundle_files(manifest: &Path) -> Result<Vec<PathBuf>> {
    Ok(read_manifest(manifest)?.term.iter().map(|t| resolve(manifest, &t.file)).collect())
}

fn interpolate(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let j = ts.partition_point(|x| *x <= t).clamp(1, ts.len() - 1);
    let (t0, t1) = (ts[j - 1], ts[j]);
    let u = (t - t0) / (t1 - t0);
    (1.0 - u) * vs[j - 1] + u * vs[j]
}

/// Load a bundle onto `grid`; terms without a standard use `default_tau`.
pub fn load_bundle(manifest: &Path, grid: &QuadratureGrid, default_tau: f64) -> Result<SeriesDecomposition> {
    let m = read_manifest(manifest)?;
    let mut terms = Vec::with_capacity(m.term.len());
    for entry in &m.term {
        let file = resolve(manifest, &entry.file);
        let rows = read_rows(&file, true)?;
        ensure!(rows.len() >= 2, "{}: a term needs at least two samples", file.display());
        ensure!(rows.iter().all(|r| r.len() == 3), "{}: expected columns t,a_hat,delta", file.display());
        let ts: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        ensure!(ts.windows(2).all(|w| w[1] > w[0]), "{}: t must increase", file.display());
        if ts[0] > 0.0 || ts[ts.len() - 1] < grid.t_end {
            bail!("{}: samples must cover [0, {}]", file.display(), grid.t_end);
        }
        let col = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<_>>();
        let (a, d) = (col(1), col(2));
        let a_hat = grid.nodes.iter().map(|&t| interpolate(&ts, &a, t)).collect();
        let delta = grid.nodes.iter().map(|&t| interpolate(&ts, &d, t)).collect();
        terms.push(
            CoefficientTerm::new(a_hat, delta, entry.tau.unwrap_or(default_tau))
                .with_context(|| format!("{}", file.display()))?,
        );
    }
    let tail = match m.tail {
        TailChoice::Finite => SeriesTail::FiniteTerms,
        TailChoice::None => SeriesTail::None,
    };
    Ok(SeriesDecomposition::new(grid.clone(), terms, tail)?)
}
