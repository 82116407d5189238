//! Orlicz functions φ and their convex-duality calculus.
//!
//! Three families are supported: the power family `|x|^γ/γ` for `1 < γ ≤ 2`,
//! the piecewise family (`x²/γ` below one, `|x|^γ/γ` above) for `γ > 2`, and
//! a tabulated φ with linear interpolation. For each we evaluate φ, its density
//! `f = φ'`, the Young-Fenchel conjugate `φ*(x) = sup_y (xy − φ(y))` and the
//! inverse conjugate `φ*⁻¹`.

use crate::numeric::{bisect_boundary, golden_max};
use crate::{Error, Result};

/// Numerical tolerances used by the conjugate machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericOptions {
    /// Relative bracket width at which golden-section search stops.
    pub golden_rel_tol: f64,
    pub golden_max_iter: usize,
    /// Relative bracket width at which the inverse-conjugate bisection stops.
    pub bisection_rel_tol: f64,
    pub bisection_max_iter: usize,
    /// Slack allowed in discrete convexity tests.
    pub convexity_tol: f64,
}

impl Default for NumericOptions {
    fn default() -> Self {
        Self {
            golden_rel_tol: 1e-15,
            golden_max_iter: 300,
            bisection_rel_tol: 1e-15,
            bisection_max_iter: 400,
            convexity_tol: 1e-12,
        }
    }
}

/// A tabulated φ on `x ≥ 0`, linearly interpolated, extended evenly.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiTable {
    xs: Vec<f64>,
    phis: Vec<f64>,
}

impl PhiTable {
    /// Builds a table from `(x, φ(x))` pairs. A leading `(0, 0)` is inserted
    /// when the first abscissa is positive.
    pub fn new(mut xs: Vec<f64>, mut phis: Vec<f64>) -> Result<Self> {
        if xs.len() != phis.len() {
            return Err(Error::Argument("table columns differ in length".into()));
        }
        if xs.is_empty() {
            return Err(Error::Argument("table is empty".into()));
        }
        if xs.iter().chain(&phis).any(|v| !v.is_finite()) {
            return Err(Error::Argument("table contains non-finite values".into()));
        }
        if xs[0] < 0.0 {
            return Err(Error::Domain("table abscissae must be non-negative".into()));
        }
        if xs[0] > 0.0 {
            xs.insert(0, 0.0);
            phis.insert(0, 0.0);
        } else if phis[0] != 0.0 {
            return Err(Error::Domain(format!("table requires phi(0) = 0, got {}", phis[0])));
        }
        if xs.len() < 3 {
            return Err(Error::Argument("table needs at least two positive abscissae".into()));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Argument("table abscissae must be strictly increasing".into()));
        }
        if !phis.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Domain("table phi must be strictly increasing for x > 0".into()));
        }
        Ok(Self { xs, phis })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    fn phi_max(&self) -> f64 {
        *self.phis.last().unwrap()
    }

    fn segment(&self, u: f64) -> usize {
        // index i with xs[i] <= u < xs[i+1], clamped to the last segment
        let i = self.xs.partition_point(|&x| x <= u);
        i.saturating_sub(1).min(self.xs.len() - 2)
    }

    fn slope_of(&self, i: usize) -> f64 {
        (self.phis[i + 1] - self.phis[i]) / (self.xs[i + 1] - self.xs[i])
    }

    fn eval(&self, x: f64) -> Result<f64> {
        let u = x.abs();
        if u > self.x_max() * (1.0 + 1e-12) {
            return Err(Error::Range(format!("phi table covers |x| <= {}, got {x}", self.x_max())));
        }
        let u = u.min(self.x_max());
        let i = self.segment(u);
        Ok(self.phis[i] + self.slope_of(i) * (u - self.xs[i]))
    }

    fn forward_slope(&self, u: f64) -> Result<f64> {
        if u > self.x_max() * (1.0 + 1e-12) {
            return Err(Error::Range(format!("phi table covers u <= {}, got {u}", self.x_max())));
        }
        Ok(self.slope_of(self.segment(u)))
    }

    fn inverse(&self, y: f64) -> Result<f64> {
        if y > self.phi_max() * (1.0 + 1e-12) {
            return Err(Error::Range(format!(
                "phi table reaches {}, cannot invert {y}",
                self.phi_max()
            )));
        }
        let i = self.phis.partition_point(|&p| p <= y).saturating_sub(1).min(self.xs.len() - 2);
        Ok(self.xs[i] + (y - self.phis[i]) / self.slope_of(i))
    }

    fn last_slope(&self) -> f64 {
        self.slope_of(self.xs.len() - 2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrliczFamily {
    /// `φ(x) = |x|^γ/γ`, `1 < γ ≤ 2`.
    PowerGamma { gamma: f64 },
    /// `φ(x) = x²/γ` for `|x| < 1`, `|x|^γ/γ` otherwise, `γ > 2`.
    PiecewiseGamma { gamma: f64 },
    NumericTable(PhiTable),
}

/// A validated Orlicz function with its numeric options.
#[derive(Debug, Clone, PartialEq)]
pub struct OrliczSpec {
    family: OrliczFamily,
    pub options: NumericOptions,
}

/// Outcome of one structural check on a φ.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl OrliczSpec {
    pub fn new(family: OrliczFamily) -> Result<Self> {
        match &family {
            OrliczFamily::PowerGamma { gamma } => {
                if !(*gamma > 1.0 && *gamma <= 2.0) {
                    return Err(Error::Domain(format!("power family needs 1 < gamma <= 2, got {gamma}")));
                }
            }
            OrliczFamily::PiecewiseGamma { gamma } => {
                if !(*gamma > 2.0 && gamma.is_finite()) {
                    return Err(Error::Domain(format!("piecewise family needs gamma > 2, got {gamma}")));
                }
            }
            OrliczFamily::NumericTable(_) => {}
        }
        Ok(Self { family, options: NumericOptions::default() })
    }

    pub fn power(gamma: f64) -> Result<Self> {
        Self::new(OrliczFamily::PowerGamma { gamma })
    }

    pub fn piecewise(gamma: f64) -> Result<Self> {
        Self::new(OrliczFamily::PiecewiseGamma { gamma })
    }

    pub fn table(xs: Vec<f64>, phis: Vec<f64>) -> Result<Self> {
        Self::new(OrliczFamily::NumericTable(PhiTable::new(xs, phis)?))
    }

    /// `φ(x) = x²/2`, the sub-Gaussian case.
    pub fn gaussian() -> Self {
        Self::power(2.0).expect("gamma = 2 is in range")
    }

    pub fn with_options(mut self, options: NumericOptions) -> Self {
        self.options = options;
        self
    }

    pub fn family(&self) -> &OrliczFamily {
        &self.family
    }

    /// The parametric γ, if any.
    pub fn gamma(&self) -> Option<f64> {
        match self.family {
            OrliczFamily::PowerGamma { gamma } | OrliczFamily::PiecewiseGamma { gamma } => Some(gamma),
            OrliczFamily::NumericTable(_) => None,
        }
    }

    /// Conjugate exponent β with `1/β + 1/γ = 1`.
    pub fn beta(&self) -> Option<f64> {
        self.gamma().map(|g| g / (g - 1.0))
    }

    pub fn phi_eval(&self, x: f64) -> Result<f64> {
        let u = x.abs();
        Ok(match &self.family {
            OrliczFamily::PowerGamma { gamma } => u.powf(*gamma) / gamma,
            OrliczFamily::PiecewiseGamma { gamma } => {
                if u < 1.0 {
                    u * u / gamma
                } else {
                    u.powf(*gamma) / gamma
                }
            }
            OrliczFamily::NumericTable(t) => t.eval(u)?,
        })
    }

    /// Density `f` with `φ(u) = ∫₀ᵘ f`.
    pub fn phi_density(&self, u: f64) -> Result<f64> {
        if u < 0.0 || u.is_nan() {
            return Err(Error::Domain(format!("density needs u >= 0, got {u}")));
        }
        Ok(match &self.family {
            OrliczFamily::PowerGamma { gamma } => u.powf(gamma - 1.0),
            OrliczFamily::PiecewiseGamma { gamma } => {
                if u < 1.0 {
                    2.0 * u / gamma
                } else {
                    u.powf(gamma - 1.0)
                }
            }
            OrliczFamily::NumericTable(t) => t.forward_slope(u)?,
        })
    }

    /// Inverse of φ on `[0, ∞)`.
    pub fn phi_inverse(&self, y: f64) -> Result<f64> {
        if y < 0.0 || y.is_nan() {
            return Err(Error::Domain(format!("phi inverse needs y >= 0, got {y}")));
        }
        Ok(match &self.family {
            OrliczFamily::PowerGamma { gamma } => (gamma * y).powf(1.0 / gamma),
            OrliczFamily::PiecewiseGamma { gamma } => {
                if y < 1.0 / gamma {
                    (gamma * y).sqrt()
                } else {
                    (gamma * y).powf(1.0 / gamma)
                }
            }
            OrliczFamily::NumericTable(t) => t.inverse(y)?,
        })
    }

    /// Young-Fenchel conjugate φ*(x).
    ///
    /// Closed form `x^β/β` for the power family everywhere and for the
    /// piecewise family on `x ≥ 1`; numeric supremum otherwise.
    pub fn phi_conjugate(&self, x: f64) -> f64 {
        let u = x.abs();
        match &self.family {
            OrliczFamily::PowerGamma { .. } => {
                let beta = self.beta().unwrap();
                u.powf(beta) / beta
            }
            OrliczFamily::PiecewiseGamma { .. } if u >= 1.0 => {
                let beta = self.beta().unwrap();
                u.powf(beta) / beta
            }
            _ => self.numeric_conjugate(u),
        }
    }

    /// `sup_y (xy − φ(y))` by grid bracketing and golden-section search,
    /// regardless of family.
    ///
    /// For tables the supremum runs over the tabulated range only.
    pub fn numeric_conjugate(&self, x: f64) -> f64 {
        let x = x.abs();
        if x == 0.0 {
            return 0.0;
        }
        let opts = self.options;
        let g = |y: f64| x * y - self.phi_eval(y).unwrap_or(f64::INFINITY);
        let (lo, hi) = match &self.family {
            OrliczFamily::NumericTable(t) => {
                let xs = t.xs();
                let j = (0..xs.len())
                    .max_by(|&a, &b| g(xs[a]).total_cmp(&g(xs[b])))
                    .unwrap();
                (xs[j.saturating_sub(1)], xs[(j + 1).min(xs.len() - 1)])
            }
            _ => {
                // geometric walk towards the maximiser; g is concave so the
                // sequence g(2^j) is unimodal in j
                let mut y = 1.0_f64;
                if g(2.0) > g(1.0) {
                    for _ in 0..2100 {
                        if g(2.0 * y) > g(y) {
                            y *= 2.0;
                        } else {
                            break;
                        }
                    }
                } else {
                    for _ in 0..2100 {
                        if g(0.5 * y) >= g(y) && y > f64::MIN_POSITIVE {
                            y *= 0.5;
                        } else {
                            break;
                        }
                    }
                }
                (0.5 * y, 2.0 * y)
            }
        };
        let (_, best) = golden_max(g, lo, hi, opts.golden_rel_tol, opts.golden_max_iter);
        best.max(0.0)
    }

    /// The unique `x ≥ 0` with `φ*(x) = y`.
    pub fn phi_conjugate_inverse(&self, y: f64) -> Result<f64> {
        if y < 0.0 || y.is_nan() {
            return Err(Error::Domain(format!("conjugate inverse needs y >= 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            OrliczFamily::PowerGamma { .. } => {
                let beta = self.beta().unwrap();
                Ok((beta * y).powf(1.0 / beta))
            }
            OrliczFamily::PiecewiseGamma { .. } => {
                let beta = self.beta().unwrap();
                if y >= 1.0 / beta {
                    Ok((beta * y).powf(1.0 / beta))
                } else {
                    Ok(self.bisect_conjugate(y, 0.0, 1.0))
                }
            }
            OrliczFamily::NumericTable(t) => {
                // beyond the last slope the maximiser sits on the table edge
                // and the tabulated conjugate no longer represents φ*
                let cap = t.last_slope();
                let reachable = self.phi_conjugate(cap);
                if y > reachable * (1.0 + 1e-12) {
                    return Err(Error::Range(format!(
                        "phi table supports conjugate values up to {reachable}, got {y}"
                    )));
                }
                let mut hi = 1.0_f64.min(cap);
                while self.phi_conjugate(hi) < y && hi < cap {
                    hi = (2.0 * hi).min(cap);
                }
                Ok(self.bisect_conjugate(y, 0.0, hi))
            }
        }
    }

    fn bisect_conjugate(&self, y: f64, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = bisect_boundary(
            |x| self.phi_conjugate(x) < y,
            lo,
            hi,
            self.options.bisection_rel_tol,
            self.options.bisection_max_iter,
        );
        0.5 * (lo + hi)
    }

    /// Whether `x ↦ φ(|x|^{1/s})` is convex.
    pub fn check_power_convexity(&self, s: f64) -> bool {
        if !(s > 0.0 && s <= 2.0) {
            return false;
        }
        match &self.family {
            OrliczFamily::PowerGamma { gamma } => s <= *gamma,
            OrliczFamily::PiecewiseGamma { .. } => s <= 2.0,
            OrliczFamily::NumericTable(t) => {
                let us: Vec<f64> = t.xs().iter().map(|x| x.powf(s)).collect();
                let slopes: Vec<f64> = us
                    .windows(2)
                    .zip(t.phis().windows(2))
                    .map(|(u, p)| (p[1] - p[0]) / (u[1] - u[0]))
                    .collect();
                slopes
                    .windows(2)
                    .all(|w| w[1] - w[0] >= -self.options.convexity_tol * w[0].abs().max(1.0))
            }
        }
    }

    /// `liminf_{x→0} φ(x)/x²`, infinite when φ is sub-quadratic at zero.
    ///
    /// For tables this is estimated from the smallest positive abscissa.
    pub fn quadratic_constant_at_zero(&self) -> f64 {
        match &self.family {
            OrliczFamily::PowerGamma { gamma } if *gamma < 2.0 => f64::INFINITY,
            OrliczFamily::PowerGamma { .. } => 0.5,
            OrliczFamily::PiecewiseGamma { gamma } => 1.0 / gamma,
            OrliczFamily::NumericTable(t) => t.xs()[1..]
                .iter()
                .zip(&t.phis()[1..])
                .take(3)
                .map(|(x, p)| p / (x * x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Limit of φ(x)/x² as x → 0 when φ is exactly quadratic near zero.
    pub(crate) fn exact_quadratic_limit(&self) -> Option<f64> {
        match &self.family {
            OrliczFamily::PowerGamma { gamma } if *gamma == 2.0 => Some(0.5),
            OrliczFamily::PiecewiseGamma { gamma } => Some(1.0 / gamma),
            _ => None,
        }
    }

    /// Structural checks: φ(0) = 0, monotone and convex on a probe grid,
    /// N-function limits, and the quadratic lower bound at zero.
    pub fn validate(&self) -> Vec<Check> {
        let probe: Vec<f64> = match &self.family {
            OrliczFamily::NumericTable(t) => t.xs().to_vec(),
            _ => (0..=400).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 400.0)).collect(),
        };
        let vals: Vec<f64> = probe.iter().map(|&x| self.phi_eval(x).unwrap_or(f64::NAN)).collect();
        let mut checks = Vec::new();

        let at_zero = self.phi_eval(0.0).unwrap_or(f64::NAN);
        checks.push(Check {
            name: "phi(0) = 0",
            passed: at_zero == 0.0,
            detail: format!("phi(0) = {at_zero}"),
        });

        let increasing = probe
            .windows(2)
            .zip(vals.windows(2))
            .all(|(_, v)| v[1] > v[0]);
        checks.push(Check {
            name: "increasing on x > 0",
            passed: increasing,
            detail: format!("{} probe points", probe.len()),
        });

        let convex = probe.windows(3).zip(vals.windows(3)).all(|(x, v)| {
            let s1 = (v[1] - v[0]) / (x[1] - x[0]);
            let s2 = (v[2] - v[1]) / (x[2] - x[1]);
            s2 - s1 >= -1e-9 * s1.abs().max(1e-300)
        });
        checks.push(Check { name: "convex", passed: convex, detail: "slopes non-decreasing".into() });

        let (first, last) = (1, probe.len() - 1);
        let small_ratio = vals[first] / probe[first];
        let large_ratio = vals[last] / probe[last];
        let n_function = match &self.family {
            OrliczFamily::NumericTable(_) => small_ratio < large_ratio,
            _ => probe[1..]
                .iter()
                .zip(&vals[1..])
                .map(|(x, v)| v / x)
                .collect::<Vec<_>>()
                .windows(2)
                .all(|r| r[1] > r[0]),
        };
        checks.push(Check {
            name: "N-function limits",
            passed: n_function,
            detail: format!("phi(x)/x = {small_ratio:.3e} near 0, {large_ratio:.3e} at the far end"),
        });

        let c = self.quadratic_constant_at_zero();
        checks.push(Check {
            name: "liminf phi(x)/x^2 > 0",
            passed: c > 0.0,
            detail: format!("liminf = {c}"),
        });
        checks
    }
}
