//! Golden-section search for a one-dimensional maximum.

/// The bracket did not contain an interior maximum: the best point sits on
/// (or within `x_tol` of) a boundary.
#[derive(Debug, Clone, Copy, thiserror::Error)]
#[error("no interior maximum in [{lo:.6e}, {hi:.6e}]; best point {best:.6e} is on the boundary")]
pub struct NoInteriorMaximum {
    pub lo: f64,
    pub hi: f64,
    pub best: f64,
}

/// Maximize `f` on `[lo, hi]` to within `x_tol`; returns `(x_max, f_max)`.
pub fn maximize<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    x_tol: f64,
) -> Result<(f64, f64), NoInteriorMaximum> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a) > x_tol {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let (x, fx) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    // Reject maxima pinned to the original bracket edges.
    if x - lo < 2.0 * x_tol && f(lo + 2.0 * x_tol) <= f(lo) {
        return Err(NoInteriorMaximum { lo, hi, best: x });
    }
    if hi - x < 2.0 * x_tol && f(hi - 2.0 * x_tol) <= f(hi) {
        return Err(NoInteriorMaximum { lo, hi, best: x });
    }
    Ok((x, fx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_peak() {
        let (x, fx) = maximize(|x| -(x - 3.2) * (x - 3.2) + 7.0, 0.0, 10.0, 1e-9).unwrap();
        assert!((x - 3.2).abs() < 1e-7);
        assert!((fx - 7.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_maximum_is_an_error() {
        let res = maximize(|x| x, 0.0, 1.0, 1e-9);
        assert!(res.is_err());
    }
}
