//! Adaptive tensor-product quadrature over 3D boxes.
//!
//! Each box is evaluated with the 15-point Kronrod rule along every axis;
//! the embedded 7-point Gauss rule along one axis at a time provides a
//! per-axis error indicator, which also picks the split direction. The
//! caller seeds the initial partition (geometry-aware seeding matters for
//! integrands concentrated in a small corner of the domain).

use std::collections::BinaryHeap;

use super::quad::{QuadError, QuadOptions, QuadResult};

const XGK: [f64; 7] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

/// 15 Kronrod nodes on [-1, 1] with Kronrod and (zero-padded) Gauss weights.
fn rule() -> ([f64; 15], [f64; 15], [f64; 15]) {
    let mut xs = [0.0; 15];
    let mut wk = [0.0; 15];
    let mut wg = [0.0; 15];
    for (n, x) in xs.iter_mut().enumerate() {
        let o = n as i32 - 7;
        if o == 0 {
            *x = 0.0;
            wk[n] = WGK[7];
            wg[n] = WG[3];
        } else {
            let i = (7 - o.abs()) as usize;
            *x = XGK[i].copysign(o as f64);
            wk[n] = WGK[i];
            if i % 2 == 1 {
                wg[n] = WG[(i - 1) / 2];
            }
        }
    }
    (xs, wk, wg)
}

/// Axis-aligned box `[lo, hi]` per dimension.
pub type Box3 = [[f64; 2]; 3];

struct Cell {
    bounds: Box3,
    value: f64,
    error: f64,
    split_dim: usize,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

fn eval_cell<F: Fn(f64, f64, f64) -> f64>(f: &F, bounds: &Box3) -> Result<Cell, QuadError> {
    let (xs, wk, wg) = rule();
    let c: Vec<f64> = bounds.iter().map(|b| 0.5 * (b[0] + b[1])).collect();
    let h: Vec<f64> = bounds.iter().map(|b| 0.5 * (b[1] - b[0])).collect();

    let mut grid = [[[0.0f64; 15]; 15]; 15];
    for (i, &xi) in xs.iter().enumerate() {
        let x = c[0] + h[0] * xi;
        for (j, &xj) in xs.iter().enumerate() {
            let y = c[1] + h[1] * xj;
            for (k, &xk) in xs.iter().enumerate() {
                let z = c[2] + h[2] * xk;
                let v = f(x, y, z);
                if !v.is_finite() {
                    return Err(QuadError::NonFinite { x });
                }
                grid[i][j][k] = v;
            }
        }
    }

    let mut kkk = 0.0;
    let mut gkk = 0.0;
    let mut kgk = 0.0;
    let mut kkg = 0.0;
    for i in 0..15 {
        for j in 0..15 {
            for k in 0..15 {
                let v = grid[i][j][k];
                kkk += wk[i] * wk[j] * wk[k] * v;
                gkk += wg[i] * wk[j] * wk[k] * v;
                kgk += wk[i] * wg[j] * wk[k] * v;
                kkg += wk[i] * wk[j] * wg[k] * v;
            }
        }
    }
    let scale = h[0] * h[1] * h[2];
    let errs = [
        (kkk - gkk).abs() * scale,
        (kkk - kgk).abs() * scale,
        (kkk - kkg).abs() * scale,
    ];
    let mut split_dim = 0;
    for d in 1..3 {
        if errs[d] > errs[split_dim] {
            split_dim = d;
        }
    }
    // A dimension already thinner than machine resolution cannot be split.
    let widths: Vec<f64> = bounds.iter().map(|b| b[1] - b[0]).collect();
    if widths[split_dim] <= f64::EPSILON * (c[split_dim].abs() + 1.0) {
        split_dim = (0..3)
            .max_by(|&a, &b| widths[a].partial_cmp(&widths[b]).unwrap())
            .unwrap();
    }
    Ok(Cell {
        bounds: *bounds,
        value: kkk * scale,
        error: errs.iter().sum(),
        split_dim,
    })
}

/// Adaptively integrate `f` over the union of `seed` boxes.
pub fn integrate_3d<F: Fn(f64, f64, f64) -> f64>(
    f: F,
    seed: &[Box3],
    opts: &QuadOptions,
) -> Result<QuadResult, QuadError> {
    const EVALS_PER_CELL: u64 = 15 * 15 * 15;
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evals: u64 = 0;
    for b in seed {
        let cell = eval_cell(&f, b)?;
        evals += EVALS_PER_CELL;
        total += cell.value;
        total_err += cell.error;
        heap.push(cell);
    }

    let tolerance = |v: f64| opts.abs_tol.max(opts.rel_tol * v.abs());

    while total_err > tolerance(total) {
        if evals + 2 * EVALS_PER_CELL > opts.max_evals {
            return Err(QuadError::NotConverged {
                value: total,
                error: total_err,
                evaluations: evals,
            });
        }
        let worst = match heap.pop() {
            Some(c) => c,
            None => break,
        };
        let d = worst.split_dim;
        let mid = 0.5 * (worst.bounds[d][0] + worst.bounds[d][1]);
        if mid <= worst.bounds[d][0] || mid >= worst.bounds[d][1] {
            return Err(QuadError::NotConverged {
                value: total,
                error: total_err,
                evaluations: evals,
            });
        }
        total -= worst.value;
        total_err -= worst.error;
        let mut lo = worst.bounds;
        let mut hi = worst.bounds;
        lo[d][1] = mid;
        hi[d][0] = mid;
        for b in [lo, hi] {
            let cell = eval_cell(&f, &b)?;
            evals += EVALS_PER_CELL;
            total += cell.value;
            total_err += cell.error;
            heap.push(cell);
        }
    }

    Ok(QuadResult {
        value: total,
        error: total_err,
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn separable_gaussian() {
        let seed = [[[-6.0, 6.0], [-6.0, 6.0], [-6.0, 6.0]]];
        let opts = QuadOptions {
            rel_tol: 1e-9,
            ..Default::default()
        };
        let r = integrate_3d(|x, y, z| (-(x * x + y * y + z * z)).exp(), &seed, &opts).unwrap();
        assert!((r.value - PI.powf(1.5)).abs() / PI.powf(1.5) < 1e-8);
    }

    #[test]
    fn polynomial_moment() {
        // \int_box x^2 y z^0 over [0,1]^3 = 1/3 * 1/2
        let seed = [[[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]];
        let r = integrate_3d(|x, y, _| x * x * y, &seed, &QuadOptions::default()).unwrap();
        assert!((r.value - 1.0 / 6.0).abs() < 1e-13);
    }

    #[test]
    fn localized_bump_with_seeding() {
        // Narrow Gaussian at a corner; a single huge box would hide it,
        // seeding a box around the bump resolves it.
        let w = 1e-3;
        let g = move |x: f64, y: f64, z: f64| {
            (-((x - 0.9) * (x - 0.9) + y * y + z * z) / (w * w)).exp()
        };
        let seed = [
            [[0.9 - 6.0 * w, 0.9 + 6.0 * w], [-6.0 * w, 6.0 * w], [-6.0 * w, 6.0 * w]],
        ];
        let opts = QuadOptions {
            rel_tol: 1e-8,
            ..Default::default()
        };
        let r = integrate_3d(g, &seed, &opts).unwrap();
        let exact = PI.powf(1.5) * w * w * w;
        assert!((r.value - exact).abs() / exact < 1e-7);
    }
}
