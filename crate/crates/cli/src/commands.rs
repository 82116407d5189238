use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use subphi::bounds::ConditionReport;
use subphi::karhunen_loeve::{
    build_kl_model, check_route, default_route, eigen_with_errors, mode_draws, nystrom_eigensystem,
    EigenSystem, KlModel,
};
use subphi::montecarlo::{verify_plan_with, VerificationReport, VerifyOptions};
use subphi::orlicz::{OrliczFamily, OrliczSpec};
use subphi::plan::{EvalMode, Infeasible, ModelPlan, Planned, Route, TraceEntry};
use subphi::quadrature::QuadratureGrid;
use subphi::series::{choose_n, evaluate_model, series_route, SeriesDecomposition};
use subphi::subgaussian::{tau_of, SourceKind};

use crate::config::{Loaded, SCHEMA_VERSION};
use crate::inputs;

/// How a command ended when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
    Infeasible,
}

/// Flags shared by every command.
#[derive(Debug, Clone)]
pub struct Run {
    pub loaded: Loaded,
    pub out: PathBuf,
    pub seed: u64,
    pub paths: Option<usize>,
    pub plan_path: Option<PathBuf>,
}

impl Run {
    fn plan_file(&self) -> PathBuf {
        self.plan_path.clone().unwrap_or_else(|| self.out.join("plan.json"))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(text)
}

fn print(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, result: Result<String>) -> Check {
    match result {
        Ok(detail) => Check { name: name.into(), passed: true, detail },
        Err(e) => Check { name: name.into(), passed: false, detail: format!("{e:#}") },
    }
}

/// Exponent `s` of the sum inequality a route relies on.
fn route_exponent(route: Route, spec: &OrliczSpec) -> f64 {
    match route {
        Route::Series8 | Route::Theorem11 => spec.gamma().unwrap_or(2.0),
        _ => 2.0,
    }
}

/// The route a config resolves to, or why it cannot.
fn resolve_route(run: &Run, spec: &OrliczSpec) -> Result<Route> {
    let requested = run.loaded.config.route;
    if let Some(kernel) = run.loaded.kernel()? {
        return Ok(match requested {
            Some(r) => {
                check_route(r, spec, &kernel)?;
                r
            }
            None => default_route(spec, &kernel)?,
        });
    }
    let (route, _) = series_route(spec)?;
    match requested {
        Some(r) if r != route => bail!("route {r} is incompatible with this phi; series decompositions use {route}"),
        _ => Ok(route),
    }
}

pub fn validate_checks(run: &Run) -> Vec<Check> {
    let l = &run.loaded;
    let mut checks = Vec::new();
    checks.push(check("target", l.target().map(|t| format!("p = {}, delta = {}, alpha = {}, T = {}", t.p, t.delta, t.alpha, t.t_end))));
    let spec = match l.orlicz() {
        Ok(s) => s,
        Err(e) => {
            checks.push(check("orlicz", Err(e)));
            return checks;
        }
    };
    for c in spec.validate() {
        checks.push(Check { name: format!("orlicz: {}", c.name), passed: c.passed, detail: c.detail });
    }
    checks.push(check(
        "source is sub-phi",
        l.source().and_then(|s| Ok(tau_of(&s, &spec)?)).map(|tau| format!("tau = {tau}")),
    ));
    match resolve_route(run, &spec) {
        Ok(route) => {
            checks.push(Check { name: "route".into(), passed: true, detail: route.to_string() });
            let s = route_exponent(route, &spec);
            let convex = spec.check_power_convexity(s);
            checks.push(Check {
                name: "phi(|x|^(1/s)) convex".into(),
                passed: convex,
                detail: format!("s = {s}"),
            });
        }
        Err(e) => checks.push(check("route", Err(e))),
    }
    if let Some(k) = &l.config.kernel {
        if let Some(f) = &k.file {
            checks.push(check(
                "kernel symmetric",
                inputs::read_matrix(&l.resolve(f)).and_then(|m| {
                    let a = inputs::matrix_asymmetry(&m);
                    if a <= 1e-12 {
                        Ok(format!("{0}x{0} matrix", m.len()))
                    } else {
                        bail!("kernel symmetry failure: relative asymmetry {a:.3e}")
                    }
                }),
            ));
        }
        checks.push(check(
            "kernel positive semidefinite",
            l.kernel().and_then(|kernel| {
                let kernel = kernel.context("no kernel")?;
                nystrom_eigensystem(&kernel, k.n_nodes, l.config.numerics.order, 1)?;
                Ok(format!("{} nodes", k.n_nodes))
            }),
        ));
    }
    if let Some(s) = &l.config.series {
        checks.push(check(
            "series bundle",
            series_grid(l).and_then(|g| {
                let dec = inputs::load_bundle(&l.resolve(&s.bundle), &g, 1.0)?;
                Ok(format!("{} terms, tail {:?}", dec.terms.len(), dec.tail))
            }),
        ));
    }
    checks
}

pub fn validate(run: &Run) -> Result<Outcome> {
    let checks = validate_checks(run);
    let mut text = String::new();
    for c in &checks {
        text += &format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    print(&text)?;
    if checks.iter().all(|c| c.passed) {
        Ok(Outcome::Success)
    } else {
        bail!("validation failed")
    }
}

fn require_valid(run: &Run) -> Result<()> {
    let failed: Vec<String> =
        validate_checks(run).into_iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        bail!("validation failed:\n  {}", failed.join("\n  "))
    }
}

fn series_grid(l: &Loaded) -> Result<QuadratureGrid> {
    Ok(QuadratureGrid::composite(l.config.target.t_end, l.config.numerics.panels, l.config.numerics.order)?)
}

/// A certified model of either kind.
enum Built {
    Kl(Box<KlModel>),
    Series { dec: SeriesDecomposition, plan: ModelPlan, source: SourceKind, tau: f64 },
}

impl Built {
    fn plan(&self) -> &ModelPlan {
        match self {
            Built::Kl(m) => &m.plan,
            Built::Series { plan, .. } => plan,
        }
    }

    fn grid(&self) -> &QuadratureGrid {
        match self {
            Built::Kl(m) => &m.eigen.grid,
            Built::Series { dec, .. } => &dec.grid,
        }
    }
}

fn build(run: &Run) -> Result<Planned<Built>> {
    let l = &run.loaded;
    let spec = l.orlicz()?;
    let source = l.source()?;
    let target = l.target()?;
    if let (Some(kernel), Some(opts)) = (l.kernel()?, l.kl_options()) {
        return Ok(build_kl_model(&kernel, &spec, &source, &target, &opts)?.map(|m| Built::Kl(Box::new(m))));
    }
    let bundle = l.config.series.as_ref().context("no [series] section")?;
    let tau = tau_of(&source, &spec)?;
    let dec = inputs::load_bundle(&l.resolve(&bundle.bundle), &series_grid(l)?, tau)?;
    let n_max = dec.terms.len();
    Ok(choose_n(&dec, &target, &spec, n_max)?.map(|plan| Built::Series { dec, plan, source, tau }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanDoc {
    pub schema_version: u32,
    pub config_hash: String,
    pub status: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "c_N")]
    pub c_n: f64,
    pub bound_eq1: f64,
    pub eq1_ok: bool,
    pub eq2_ok: bool,
    pub margin: f64,
    pub tail_bound: f64,
    pub route: Route,
    pub mode: EvalMode,
    pub family_check: Option<ConditionReport>,
    pub certified_delta: f64,
    #[serde(rename = "alternate_c_N")]
    pub alternate_c_n: Option<f64>,
    pub tau: f64,
    pub p: f64,
    pub delta: f64,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub grid_nodes: usize,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Serialize)]
struct InfeasibleDoc {
    schema_version: u32,
    config_hash: String,
    status: &'static str,
    reason: String,
    #[serde(flatten)]
    detail: Option<Infeasible>,
}

fn plan_doc(hash: &str, built: &Built) -> PlanDoc {
    let plan = built.plan();
    let (tau, alternate) = match built {
        Built::Kl(m) => (m.tau, m.alternate_c_n),
        Built::Series { tau, .. } => (*tau, None),
    };
    PlanDoc {
        schema_version: SCHEMA_VERSION,
        config_hash: hash.into(),
        status: "feasible".into(),
        n: plan.n,
        c_n: plan.c_n,
        bound_eq1: plan.report.bound_eq1,
        eq1_ok: plan.report.eq1_ok,
        eq2_ok: plan.report.eq2_ok,
        margin: plan.report.margin,
        tail_bound: plan.report.tail_bound,
        route: plan.route,
        mode: plan.mode,
        family_check: plan.family_report,
        certified_delta: plan.certified_delta,
        alternate_c_n: alternate,
        tau,
        p: plan.target.p,
        delta: plan.target.delta,
        alpha: plan.target.alpha,
        t_end: plan.target.t_end,
        grid_nodes: built.grid().len(),
        trace: plan.trace.clone(),
    }
}

fn csv_header(hash: &str, extra: &str) -> String {
    format!("# schema_version={SCHEMA_VERSION},config_hash={hash}{extra}\n")
}

fn write_eigen(out: &Path, hash: &str, eig: &EigenSystem) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut table = csv_header(hash, "");
    table += "t";
    for k in 1..=eig.modes() {
        table += &format!(",a_{k}");
    }
    table += "\n";
    for (i, t) in eig.grid.nodes.iter().enumerate() {
        table += &t.to_string();
        for a in &eig.a_hat {
            table += &format!(",{}", a[i]);
        }
        table += "\n";
    }
    fs::write(out.join("eigen.csv"), table)?;
    let mut manifest = csv_header(hash, "");
    manifest += "k,lambda_hat,eta\n";
    for k in 0..eig.modes() {
        manifest += &format!("{},{},{}\n", k + 1, eig.lambda_hat[k], eig.eta[k]);
    }
    fs::write(out.join("eigen_manifest.csv"), manifest)?;
    Ok(())
}

pub fn plan(run: &Run) -> Result<Outcome> {
    let hash = run.loaded.hash()?;
    if run.loaded.config.target.delta == 0.0 {
        let doc = InfeasibleDoc {
            schema_version: SCHEMA_VERSION,
            config_hash: hash,
            status: "infeasible",
            reason: "no model certifies delta = 0".into(),
            detail: None,
        };
        print(&(serde_json::to_string_pretty(&doc)? + "\n"))?;
        return Ok(Outcome::Infeasible);
    }
    require_valid(run)?;
    match build(run)? {
        Planned::Feasible(built) => {
            let text = write_json(&run.plan_file(), &plan_doc(&hash, &built))?;
            if let Built::Kl(m) = &built {
                write_eigen(&run.out, &hash, &m.eigen)?;
            }
            print(&text)?;
            Ok(Outcome::Success)
        }
        Planned::Unachievable(inf) => {
            let doc = InfeasibleDoc {
                schema_version: SCHEMA_VERSION,
                config_hash: hash,
                status: "infeasible",
                reason: format!("no N up to {} meets both conditions", inf.trace.len()),
                detail: Some(inf),
            };
            print(&(serde_json::to_string_pretty(&doc)? + "\n"))?;
            Ok(Outcome::Infeasible)
        }
    }
}

pub fn eigen(run: &Run) -> Result<Outcome> {
    let l = &run.loaded;
    let hash = l.hash()?;
    let (kernel, opts) = match (l.kernel()?, l.kl_options()) {
        (Some(k), Some(o)) => (k, o),
        _ => bail!("eigen needs a [kernel] section"),
    };
    let eig = eigen_with_errors(&kernel, &opts)?;
    write_eigen(&run.out, &hash, &eig)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        schema_version: u32,
        config_hash: &'a str,
        modes: usize,
        grid_nodes: usize,
        lambda_hat: &'a [f64],
        eta: &'a [f64],
    }
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        config_hash: &hash,
        modes: eig.modes(),
        grid_nodes: eig.grid.len(),
        lambda_hat: &eig.lambda_hat,
        eta: &eig.eta,
    };
    print(&(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(Outcome::Success)
}

fn read_plan(path: &Path) -> Result<PlanDoc> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read plan {}", path.display()))?;
    let doc: PlanDoc = serde_json::from_str(&text).with_context(|| format!("malformed plan {}", path.display()))?;
    if doc.schema_version != SCHEMA_VERSION {
        bail!("plan {} has schema_version {}, expected {SCHEMA_VERSION}", path.display(), doc.schema_version);
    }
    Ok(doc)
}

/// Rebuild the model and confirm the stored plan still describes it.
fn current_model(run: &Run) -> Result<(String, Built)> {
    let hash = run.loaded.hash()?;
    let doc = read_plan(&run.plan_file())?;
    if doc.config_hash != hash {
        bail!(
            "stale plan: {} was made for config {} but the current config hashes to {}; re-run plan",
            run.plan_file().display(),
            doc.config_hash,
            hash
        );
    }
    let built = build(run)?.feasible().context("the config no longer yields a feasible plan; re-run plan")?;
    if built.plan().n != doc.n {
        bail!("stale plan: stored N = {} but the config yields N = {}", doc.n, built.plan().n);
    }
    Ok((hash, built))
}

/// Default path count for `simulate`.
const SIMULATE_PATHS: usize = 100;

pub fn simulate(run: &Run) -> Result<Outcome> {
    let (hash, built) = current_model(run)?;
    let n_paths = run.paths.unwrap_or(SIMULATE_PATHS);
    let n = built.plan().n;
    let paths: Vec<Vec<f64>> = match &built {
        Built::Kl(m) => subphi::karhunen_loeve::simulate_kl(m, n_paths, run.seed)?,
        Built::Series { dec, source, .. } => (0..n_paths as u64)
            .map(|i| Ok(evaluate_model(dec, n, &mode_draws(source, n, run.seed, i)?)?))
            .collect::<Result<_>>()?,
    };
    let grid = built.grid();
    let mut text = csv_header(&hash, &format!(",seed={},paths={n_paths}", run.seed));
    text += &grid.nodes.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",");
    text += "\n";
    for p in &paths {
        text += &p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        text += "\n";
    }
    fs::create_dir_all(&run.out)?;
    let file = run.out.join("paths.csv");
    fs::write(&file, text).with_context(|| format!("cannot write {}", file.display()))?;

    #[derive(Serialize)]
    struct Summary {
        schema_version: u32,
        config_hash: String,
        file: String,
        seed: u64,
        paths: usize,
        columns: usize,
    }
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        config_hash: hash,
        file: "paths.csv".into(),
        seed: run.seed,
        paths: n_paths,
        columns: grid.len(),
    };
    print(&(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(Outcome::Success)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyDoc {
    pub schema_version: u32,
    pub config_hash: String,
    #[serde(flatten)]
    pub report: VerificationReport,
}

pub fn verify(run: &Run, delta: Option<f64>, norms: bool) -> Result<Outcome> {
    let (hash, built) = current_model(run)?;
    let Built::Kl(model) = built else {
        bail!("capability error: series decompositions carry no reference process to verify against");
    };
    let opts = VerifyOptions {
        n_paths: run.paths.unwrap_or(run.loaded.config.numerics.n_paths),
        seed: run.seed,
        coupling: None,
        delta,
    };
    let report = verify_plan_with(&model, &opts)?;
    let trace: f64 = model.eigen.grid.nodes.iter().map(|&t| model.kernel.diagonal(t)).sum();
    if report.covariance_clip > 1e-8 * trace {
        eprintln!("warning: clipped a negative covariance eigenvalue of magnitude {:.3e}", report.covariance_clip);
    }
    if norms {
        let mut text = csv_header(&hash, &format!(",seed={}", run.seed));
        text += "path,norm\n";
        for (i, v) in report.norms.iter().enumerate() {
            text += &format!("{i},{v}\n");
        }
        fs::create_dir_all(&run.out)?;
        fs::write(run.out.join("norms.csv"), text)?;
    }
    let pass = report.pass;
    let text = write_json(&run.out.join("verify.json"), &VerifyDoc { schema_version: SCHEMA_VERSION, config_hash: hash, report })?;
    print(&text)?;
    Ok(if pass { Outcome::Success } else { Outcome::VerificationFailed })
}

pub fn report(run: &Run) -> Result<Outcome> {
    let hash = run.loaded.hash()?;
    let plan = read_plan(&run.plan_file())?;
    if plan.config_hash != hash {
        bail!("stale plan: {} does not match the current config; re-run plan", run.plan_file().display());
    }
    let verify_file = run.out.join("verify.json");
    let verification: Option<VerifyDoc> = if verify_file.exists() {
        let doc: VerifyDoc = serde_json::from_str(&fs::read_to_string(&verify_file)?)
            .with_context(|| format!("malformed {}", verify_file.display()))?;
        if doc.config_hash != hash {
            bail!("stale verification: {} does not match the current config; re-run verify", verify_file.display());
        }
        Some(doc)
    } else {
        None
    };
    let spec = run.loaded.orlicz()?;
    let family = match spec.family() {
        OrliczFamily::PowerGamma { gamma } => format!("|x|^{gamma}/{gamma}"),
        OrliczFamily::PiecewiseGamma { gamma } => format!("piecewise, gamma = {gamma}"),
        OrliczFamily::NumericTable(_) => "tabulated".into(),
    };

    let mut text = String::new();
    text += &format!("config   {hash}\n");
    text += &format!("phi      {family}\n");
    text += &format!("target   p = {}, delta = {}, alpha = {}, T = {}\n", plan.p, plan.delta, plan.alpha, plan.t_end);
    text += &format!("route    {} ({})\n", plan.route, plan.mode);
    text += &format!("model    N = {}, c_N = {:.6e}\n", plan.n, plan.c_n);
    text += &format!("bound    c_N <= {:.6e} ({}), tail condition {}\n", plan.bound_eq1, ok(plan.eq1_ok), ok(plan.eq2_ok));
    text += &format!("certified P <= {:.6e}; smallest certified delta {:.6e}\n", plan.tail_bound, plan.certified_delta);
    if let Some(v) = &verification {
        let r = &v.report;
        text += &format!(
            "verified {} of {} paths exceeded delta = {} ({}); p_hat = {:.4e}, upper 95% = {:.4e} -> {}\n",
            r.exceed_count,
            r.n_paths,
            r.delta,
            serde_json::to_value(r.coupling)?.as_str().unwrap_or_default(),
            r.p_hat,
            r.wilson_upper,
            if r.pass { "PASS" } else { "FAIL" }
        );
    } else {
        text += "verified (not run)\n";
    }

    #[derive(Serialize)]
    struct ReportDoc<'a> {
        schema_version: u32,
        config_hash: &'a str,
        plan: &'a PlanDoc,
        verification: Option<&'a VerificationReport>,
    }
    write_json(
        &run.out.join("report.json"),
        &ReportDoc {
            schema_version: SCHEMA_VERSION,
            config_hash: &hash,
            plan: &plan,
            verification: verification.as_ref().map(|v| &v.report),
        },
    )?;
    print(&text)?;
    Ok(match verification {
        Some(v) if !v.report.pass => Outcome::VerificationFailed,
        _ => Outcome::Success,
    })
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "violated"
    }
}
