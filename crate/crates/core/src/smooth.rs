//! Truncated Gaussian smoothing renormalized over the nodes that carry data.

use rayon::prelude::*;

use crate::field::{Field, SENTINEL};
use crate::sample::solve3;

/// Discrete Gaussian weights for offsets `-r..=r` with `r = ceil(3 width / h)`.
fn kernel(width: f64, h: f64) -> Vec<f64> {
    let r = (3.0 * width / h).ceil() as isize;
    (-r..=r)
        .map(|k| {
            let d = k as f64 * h;
            (-d * d / (2.0 * width * width)).exp()
        })
        .collect()
}

/// Separable pass along one axis: `out[k] = sum_o w[o] * src[k + o]`.
fn convolve_axis(src: &[f64], n: usize, w: &[f64], along_x: bool) -> Vec<f64> {
    let r = (w.len() / 2) as isize;
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        for (i, slot) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (o, &wk) in w.iter().enumerate() {
                let off = o as isize - r;
                let (ii, jj) = if along_x {
                    (i as isize + off, j as isize)
                } else {
                    (i as isize, j as isize + off)
                };
                if ii < 0 || jj < 0 || ii >= n as isize || jj >= n as isize {
                    continue;
                }
                acc += wk * src[jj as usize * n + ii as usize];
            }
            *slot = acc;
        }
    });
    out
}

fn convolve2(src: &[f64], n: usize, wx: &[f64], wy: &[f64]) -> Vec<f64> {
    convolve_axis(&convolve_axis(src, n, wx, true), n, wy, false)
}

/// Gaussian smoothing with standard deviation `width` (a length).
///
/// Nodes without data neither contribute nor receive values, and the kernel is
/// renormalized over the contributing nodes so constants are preserved up to the
/// edge of the data. `width == 0` returns the input unchanged.
pub fn gaussian_smooth(f: &Field, width: f64) -> Field {
    assert!(width >= 0.0, "smoothing width must be non-negative");
    let g = f.grid();
    if width == 0.0 || width < 1e-3 * g.h() {
        return f.clone();
    }
    let n = g.n();
    let w = kernel(width, g.h());
    let valid: Vec<f64> = f.values().iter().map(|v| if v.is_finite() { 1.0 } else { 0.0 }).collect();
    let weighted: Vec<f64> = f
        .values()
        .iter()
        .map(|&v| if v.is_finite() { v } else { 0.0 })
        .collect();
    let num = convolve2(&weighted, n, &w, &w);
    let den = convolve2(&valid, n, &w, &w);
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| if v.is_finite() { num[k] / den[k] } else { SENTINEL })
        .collect();
    Field::from_values(g, values).expect("same grid")
}

/// Gaussian-weighted local linear regression: at every node with data, the
/// value at the node of the plane fitted to the surrounding data with weights
/// `exp(-d^2 / (2 width^2))`.
///
/// Unlike [`gaussian_smooth`] this reproduces linear functions exactly, also
/// where the kernel is cut off by missing data, so it does not bend fields
/// near the edge of their support. Falls back to the plain weighted mean where
/// the neighbourhood is too thin for a plane.
pub fn local_linear_smooth(f: &Field, width: f64) -> Field {
    assert!(width >= 0.0, "smoothing width must be non-negative");
    let g = f.grid();
    if width == 0.0 || width < 1e-3 * g.h() {
        return f.clone();
    }
    let n = g.n();
    let w0 = kernel(width, g.h());
    let r = (w0.len() / 2) as isize;
    // Kernels weighted by the offset in grid units.
    let moment = |p: i32| -> Vec<f64> {
        w0.iter()
            .enumerate()
            .map(|(o, &wk)| wk * ((o as isize - r) as f64).powi(p))
            .collect()
    };
    let (w1, w2) = (moment(1), moment(2));
    let m: Vec<f64> = f.values().iter().map(|v| if v.is_finite() { 1.0 } else { 0.0 }).collect();
    let mf: Vec<f64> = f.values().iter().map(|&v| if v.is_finite() { v } else { 0.0 }).collect();
    let s00 = convolve2(&m, n, &w0, &w0);
    let s10 = convolve2(&m, n, &w1, &w0);
    let s01 = convolve2(&m, n, &w0, &w1);
    let s20 = convolve2(&m, n, &w2, &w0);
    let s11 = convolve2(&m, n, &w1, &w1);
    let s02 = convolve2(&m, n, &w0, &w2);
    let f00 = convolve2(&mf, n, &w0, &w0);
    let f10 = convolve2(&mf, n, &w1, &w0);
    let f01 = convolve2(&mf, n, &w0, &w1);
    let values = (0..g.len())
        .into_par_iter()
        .map(|k| {
            if !f.has(k) {
                return SENTINEL;
            }
            let a = [
                [s00[k], s10[k], s01[k]],
                [s10[k], s20[k], s11[k]],
                [s01[k], s11[k], s02[k]],
            ];
            match solve3(a, [f00[k], f10[k], f01[k]]) {
                Some(c) => c[0],
                None => f00[k] / s00[k],
            }
        })
        .collect();
    Field::from_values(g, values).expect("same grid")
}

/// Value and derivatives of a local quadratic fit, one field each.
#[derive(Debug, Clone)]
pub struct QuadraticFit {
    pub value: Field,
    pub dx: Field,
    pub dy: Field,
    pub dxx: Field,
    pub dxy: Field,
    pub dyy: Field,
}

impl QuadraticFit {
    pub fn laplacian(&self) -> Field {
        self.dxx.zip_map(&self.dyy, |a, b| a + b)
    }
}

/// Weighted least-squares fit of `c0 + c1 X + c2 Y + c3 X^2 + c4 XY + c5 Y^2`
/// around every node with data, weights `exp(-d^2 / (2 width^2))`.
///
/// Quadratics are reproduced exactly wherever the fit is determined, including
/// next to missing data, so derivatives stay unbiased at the edge of the
/// support. Nodes whose neighbourhood cannot determine a quadratic get the
/// sentinel.
pub fn local_quadratic_fit(f: &Field, width: f64) -> QuadraticFit {
    local_quadratic_fit_anchored(f, width, &[], 0.0)
}

/// Exact off-grid sample used by [`local_quadratic_fit_anchored`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// [`local_quadratic_fit`] with extra samples at arbitrary points, each
/// weighted like a node at the same offset times `anchor_weight`.
/// Only nodes that already have a value get a fit.
pub fn local_quadratic_fit_anchored(f: &Field, width: f64, anchors: &[Anchor], anchor_weight: f64) -> QuadraticFit {
    assert!(width > 0.0, "fit width must be positive");
    let g = f.grid();
    let (n, h) = (g.n(), g.h());
    let wd = width.max(h);
    let w0 = kernel(wd, h);
    let r = (w0.len() / 2) as isize;
    let reach = (r as f64 + 1.5) * h;
    let axis = |p: i32| -> Vec<f64> {
        w0.iter()
            .enumerate()
            .map(|(o, &wk)| wk * ((o as isize - r) as f64).powi(p))
            .collect()
    };
    let wp: Vec<Vec<f64>> = (0..=4).map(axis).collect();
    let m: Vec<f64> = f.values().iter().map(|v| if v.is_finite() { 1.0 } else { 0.0 }).collect();
    let mf: Vec<f64> = f.values().iter().map(|&v| if v.is_finite() { v } else { 0.0 }).collect();
    // Exponents of the basis functions X^a Y^b.
    const BASIS: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for a in 0..=4 {
        for b in 0..=(4 - a) {
            pairs.push((a, b));
        }
    }
    let moments: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(a, b)| convolve2(&m, n, &wp[a], &wp[b]))
        .collect();
    let slot = |a: usize, b: usize| pairs.iter().position(|&p| p == (a, b)).expect("moment listed");
    let data: Vec<Vec<f64>> = BASIS
        .par_iter()
        .map(|&(a, b)| convolve2(&mf, n, &wp[a], &wp[b]))
        .collect();
    let index: Vec<Vec<usize>> = BASIS
        .iter()
        .map(|&(a1, b1)| BASIS.iter().map(|&(a2, b2)| slot(a1 + a2, b1 + b2)).collect())
        .collect();
    let coeffs: Vec<Option<[f64; 6]>> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            if !f.has(k) {
                return None;
            }
            let mut a = [[0.0; 6]; 6];
            let mut rhs = [0.0; 6];
            for i in 0..6 {
                for j in 0..6 {
                    a[i][j] = moments[index[i][j]][k];
                }
                rhs[i] = data[i][k];
            }
            if anchor_weight > 0.0 && g.depth(k) < reach {
                let (x0, y0) = g.coords(k);
                for p in anchors {
                    let (dx, dy) = ((p.x - x0) / h, (p.y - y0) / h);
                    if dx.abs() > r as f64 || dy.abs() > r as f64 {
                        continue;
                    }
                    let wk = anchor_weight * (-(dx * dx + dy * dy) * h * h / (2.0 * wd * wd)).exp();
                    let basis = [1.0, dx, dy, dx * dx, dx * dy, dy * dy];
                    for i in 0..6 {
                        for j in 0..6 {
                            a[i][j] += wk * basis[i] * basis[j];
                        }
                        rhs[i] += wk * basis[i] * p.value;
                    }
                }
            }
            solve6(a, rhs)
        })
        .collect();
    let field = |f: &dyn Fn(&[f64; 6]) -> f64| {
        let values = coeffs.iter().map(|c| c.as_ref().map_or(SENTINEL, f)).collect();
        Field::from_values(g, values).expect("same grid")
    };
    QuadraticFit {
        value: field(&|c| c[0]),
        dx: field(&|c| c[1] / h),
        dy: field(&|c| c[2] / h),
        dxx: field(&|c| 2.0 * c[3] / (h * h)),
        dxy: field(&|c| c[4] / (h * h)),
        dyy: field(&|c| 2.0 * c[5] / (h * h)),
    }
}

/// Gaussian elimination with partial pivoting; `None` for a (near-)singular matrix.
fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> Option<[f64; 6]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..6 {
        let piv = (col..6).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..6 {
            let l = a[row][col] / a[col][col];
            for c in col..6 {
                a[row][c] -= l * a[col][c];
            }
            b[row] -= l * b[col];
        }
    }
    let mut x = [0.0; 6];
    for row in (0..6).rev() {
        let mut acc = b[row];
        for c in row + 1..6 {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
