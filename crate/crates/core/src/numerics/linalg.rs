//! Dense linear algebra for the small systems appearing in the fits
//! (normal equations up to 5x5). Matrices are row-major `Vec<f64>`.

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` if the matrix is numerically singular.
pub fn solve(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if m[row * n + col].abs() > m[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if m[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            rhs.swap(col, pivot);
        }
        let diag = m[col * n + col];
        for row in col + 1..n {
            let factor = m[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= factor * m[col * n + k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= m[row * n + k] * x[k];
        }
        let d = m[row * n + row];
        if d.abs() < 1e-300 {
            return None;
        }
        x[row] = s / d;
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Invert a (symmetric) matrix by solving against unit vectors.
pub fn invert(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for col in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[col] = 1.0;
        let x = solve(n, a, &e)?;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Some(inv)
}

/// Invert a symmetric matrix that is positive definite up to rounding,
/// already scaled to unit diagonal. Escalating Tikhonov jitter is added
/// until the inverse has a strictly positive diagonal (a near-degenerate
/// direction otherwise flips sign under Gauss-Jordan rounding); the
/// jitter caps the reported variance along that direction and leaves the
/// well-constrained ones untouched.
pub fn invert_unit_spd(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    for jitter in [0.0, 1e-14, 1e-12, 1e-10, 1e-8, 1e-6] {
        let mut m = a.to_vec();
        for k in 0..n {
            m[k * n + k] += jitter;
        }
        if let Some(inv) = invert(n, &m) {
            if (0..n).all(|k| inv[k * n + k] > 0.0) {
                return Some(inv);
            }
        }
    }
    None
}

/// Symmetrize in place: B = (A + A^T) / 2.
pub fn symmetrize(n: usize, a: &mut [f64]) {
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = avg;
            a[j * n + i] = avg;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_system() {
        // [2 1; 1 3] x = [5; 10] -> x = [1, 3]
        let a = [2.0, 1.0, 1.0, 3.0];
        let x = solve(2, &a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let inv = invert(3, &a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a[i * 3 + k] * inv[k * 3 + j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_returns_none() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(solve(2, &a, &[1.0, 2.0]).is_none());
    }
}
