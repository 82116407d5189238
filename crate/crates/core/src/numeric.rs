//! Scalar root-finding and maximisation helpers shared across modules.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximisation of a unimodal `f` on `[lo, hi]`.
///
/// Returns the best abscissa and value seen over every evaluation, so the
/// result is always an attained value (a lower bound for the true maximum).
pub(crate) fn golden_max<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let mut best = (lo, f(lo));
    let fh = f(hi);
    if fh > best.1 {
        best = (hi, fh);
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if f1 > best.1 {
            best = (x1, f1);
        }
        if f2 > best.1 {
            best = (x2, f2);
        }
        if hi - lo <= rel_tol * (lo.abs() + hi.abs()) || hi - lo <= f64::MIN_POSITIVE {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    best
}

/// Bisection for the boundary of a monotone predicate.
///
/// `pred(lo)` must be true and `pred(hi)` false; the returned pair keeps
/// that property while shrinking the bracket to the relative tolerance.
pub(crate) fn bisect_boundary<P: FnMut(f64) -> bool>(
    mut pred: P,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    for _ in 0..max_iter {
        if hi - lo <= rel_tol * hi.abs().max(lo.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, 0.0, 1.0, 1e-14, 200);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bisection_brackets_sqrt_two() {
        let (lo, hi) = bisect_boundary(|x| x * x < 2.0, 0.0, 2.0, 1e-15, 200);
        assert!(lo * lo < 2.0 && hi * hi >= 2.0);
        assert!((lo - std::f64::consts::SQRT_2).abs() < 1e-14);
    }
}
