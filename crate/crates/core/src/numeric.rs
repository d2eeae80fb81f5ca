//! One-dimensional search routines.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..400 {
        if (b - a).abs() <= tol * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

/// Bisection for the smallest `x` in `[lo, hi]` with `pred(x)` true, for a
/// predicate that is monotone (false then true).
pub fn bisect_threshold(pred: &dyn Fn(f64) -> bool, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..2000 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
