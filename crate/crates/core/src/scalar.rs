//! One-dimensional maximization: coarse grid bracketing followed by
//! golden-section refinement.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Stops when the bracket width falls below `rel_tol·|x|` (or `rel_tol`
/// absolute near zero). Returns `(x_max, f_max)`.
pub fn golden_section_max<F>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64, max_iter: usize) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rel_tol * mid.abs().max(1.0) {
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
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Scans `n` evenly spaced points of `[lo, hi]` and returns the neighbours of
/// the best interior grid point as a bracket `(left, best, right)`.
///
/// A maximum on either endpoint means the objective is not bracketed.
pub fn bracket_max_on_grid<F>(f: F, lo: f64, hi: f64, n: usize) -> Result<(f64, f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if n < 3 || !(hi > lo) {
        return Err(Error::Numeric(format!(
            "bracketing grid needs n >= 3 and hi > lo (n = {n}, [{lo}, {hi}])"
        )));
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..n {
        let v = f(lo + step * i as f64);
        if v.is_nan() {
            return Err(Error::Numeric(format!("objective is NaN at {}", lo + step * i as f64)));
        }
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    if best == 0 || best == n - 1 {
        return Err(Error::Numeric(format!(
            "maximum not bracketed: best grid point {} lies on the boundary of [{lo}, {hi}]",
            lo + step * best as f64
        )));
    }
    Ok((
        lo + step * (best - 1) as f64,
        lo + step * best as f64,
        lo + step * (best + 1) as f64,
    ))
}
