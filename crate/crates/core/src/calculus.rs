//! Finite-difference calculus on disc grids.
//!
//! Central differences wherever both axis neighbours carry data, second-order
//! one-sided differences otherwise, and the sentinel where no stencil fits.

use rayon::prelude::*;

use crate::field::{Field, VectorField2, SENTINEL};
use crate::grid::{BoundaryData, Dir};

/// First derivative along the axis `(plus, minus)` at node `k`.
#[inline]
fn axis_derivative(f: &Field, k: usize, plus: Dir, minus: Dir) -> f64 {
    let g = f.grid();
    let h = g.h();
    let f0 = f.get(k);
    if !f0.is_finite() {
        return SENTINEL;
    }
    let val = |d: Dir, s: usize| g.step(k, d, s).map(|i| f.get(i)).filter(|v| v.is_finite());
    match (val(plus, 1), val(minus, 1)) {
        (Some(p), Some(m)) => (p - m) / (2.0 * h),
        _ => {
            if let (Some(p1), Some(p2)) = (val(plus, 1), val(plus, 2)) {
                (-3.0 * f0 + 4.0 * p1 - p2) / (2.0 * h)
            } else if let (Some(m1), Some(m2)) = (val(minus, 1), val(minus, 2)) {
                (3.0 * f0 - 4.0 * m1 + m2) / (2.0 * h)
            } else {
                SENTINEL
            }
        }
    }
}

fn derivative_field(f: &Field, plus: Dir, minus: Dir) -> Field {
    let g = f.grid();
    let values: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            if g.is_exterior(k) {
                SENTINEL
            } else {
                axis_derivative(f, k, plus, minus)
            }
        })
        .collect();
    Field::from_values(g, values).expect("same grid")
}

pub fn gradient(f: &Field) -> VectorField2 {
    let dx = derivative_field(f, Dir::East, Dir::West);
    let dy = derivative_field(f, Dir::North, Dir::South);
    VectorField2::new(dx, dy).expect("same grid")
}

pub fn divergence(v: &VectorField2) -> Field {
    let dx = derivative_field(&v.x, Dir::East, Dir::West);
    let dy = derivative_field(&v.y, Dir::North, Dir::South);
    dx.zip_map(&dy, |a, b| a + b)
}

/// One arm of a second-difference stencil: distance in units of `h` and value.
#[inline]
fn arm(f: &Field, k: usize, d: Dir, boundary: Option<&BoundaryData>) -> Option<(f64, f64)> {
    let g = f.grid();
    if let Some(nb) = g.neighbour(k, d) {
        let v = f.get(nb);
        if v.is_finite() {
            return Some((1.0, v));
        }
    }
    let b = boundary?;
    let cut = g.cuts(k)[d.slot()]?;
    Some((cut.fraction, b.get(cut.point)))
}

#[inline]
fn second_difference(f0: f64, plus: (f64, f64), minus: (f64, f64), h: f64) -> f64 {
    let (tp, vp) = plus;
    let (tm, vm) = minus;
    if tp == 1.0 && tm == 1.0 {
        (vp - 2.0 * f0 + vm) / (h * h)
    } else {
        2.0 / (h * h) * (vp / (tp * (tp + tm)) + vm / (tm * (tp + tm)) - f0 / (tp * tm))
    }
}

/// Five-point Laplacian; Shortley–Weller arms at circle crossings when
/// `boundary` values are supplied, sentinel otherwise.
pub fn laplacian(f: &Field, boundary: Option<&BoundaryData>) -> Field {
    let g = f.grid();
    let h = g.h();
    let values: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let f0 = f.get(k);
            if g.is_exterior(k) || !f0.is_finite() {
                return SENTINEL;
            }
            let axis = |p: Dir, m: Dir| -> Option<f64> {
                Some(second_difference(
                    f0,
                    arm(f, k, p, boundary)?,
                    arm(f, k, m, boundary)?,
                    h,
                ))
            };
            match (axis(Dir::East, Dir::West), axis(Dir::North, Dir::South)) {
                (Some(a), Some(b)) => a + b,
                _ => SENTINEL,
            }
        })
        .collect();
    Field::from_values(g, values).expect("same grid")
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::grid::{DiscGrid, NodeClass};

    fn grid(n: usize) -> Arc<DiscGrid> {
        Arc::new(DiscGrid::new(n, 1.0).unwrap())
    }

    fn max_err_interior(f: &Field, exact: impl Fn(f64, f64) -> f64) -> f64 {
        let g = f.grid();
        (0..g.len())
            .filter(|&k| g.class(k) == NodeClass::Interior)
            .map(|k| {
                let (x, y) = g.coords(k);
                (f.get(k) - exact(x, y)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradient_of_linear_and_quadratic_is_exact() {
        let g = grid(65);
        let gx = gradient(&Field::from_fn(&g, |x, _| x));
        assert!(max_err_interior(&gx.x, |_, _| 1.0) <= 1e-10);
        assert!(max_err_interior(&gx.y, |_, _| 0.0) <= 1e-10);
        let gq = gradient(&Field::from_fn(&g, |x, y| x * x + y * y));
        assert!(max_err_interior(&gq.x, |x, _| 2.0 * x) <= 1e-10);
        assert!(max_err_interior(&gq.y, |_, y| 2.0 * y) <= 1e-10);
        // One-sided stencils are exact for quadratics too.
        for k in g.non_exterior() {
            if let Some((a, b)) = gq.get(k) {
                let (x, y) = g.coords(k);
                assert!((a - 2.0 * x).abs() < 1e-9 && (b - 2.0 * y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gradient_converges_at_second_order() {
        let err = |n| {
            let g = grid(n);
            let d = gradient(&Field::from_fn(&g, |x, y| (PI * x).sin() * (PI * y).cos()));
            max_err_interior(&d.x, |x, y| PI * (PI * x).cos() * (PI * y).cos())
        };
        let ratio = err(129) / err(257);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn divergence_examples() {
        let g = grid(65);
        let d = divergence(&VectorField2::from_fn(&g, |x, y| (x, y)));
        assert!(max_err_interior(&d, |_, _| 2.0) <= 1e-10);
        let r = divergence(&VectorField2::from_fn(&g, |x, y| (-y, x)));
        assert!(max_err_interior(&r, |_, _| 0.0) <= 1e-10);
    }

    #[test]
    fn laplacian_examples() {
        let g = grid(65);
        let q = laplacian(&Field::from_fn(&g, |x, y| x * x + y * y), None);
        assert!(max_err_interior(&q, |_, _| 4.0) <= 1e-10);
        let c = laplacian(&Field::constant(&g, 3.5), None);
        assert!(max_err_interior(&c, |_, _| 0.0) <= 1e-12);
        // Without boundary data, nodes missing an arm get the sentinel.
        for k in g.non_exterior() {
            if g.class(k) == NodeClass::BoundaryAdjacent {
                assert!(c.get(k).is_nan());
            }
        }
    }

    #[test]
    fn shortley_weller_is_exact_for_quadratics() {
        let g = grid(64);
        let bd = BoundaryData::from_fn(&g, |p| p.x * p.x + 2.0 * p.y * p.y);
        let f = Field::from_fn(&g, |x, y| x * x + 2.0 * y * y);
        let l = laplacian(&f, Some(&bd));
        for k in g.non_exterior() {
            if g.on_circle(k).is_none() {
                assert!((l.get(k) - 6.0).abs() < 1e-6, "{}", l.get(k));
            }
        }
    }

    #[test]
    fn laplacian_of_cubic_is_exact_inside() {
        let g = grid(129);
        let l = laplacian(&Field::from_fn(&g, |x, _| x * x * x), None);
        assert!(max_err_interior(&l, |x, _| 6.0 * x) <= 1e-9);
    }

    #[test]
    fn div_grad_matches_laplacian_at_second_order() {
        let f = |x: f64, y: f64| (PI * x).sin() * (PI * y).cos();
        let gap = |n| {
            let g = grid(n);
            let u = Field::from_fn(&g, f);
            let dg = divergence(&gradient(&u));
            let l = laplacian(&u, None);
            let mut m: f64 = 0.0;
            for k in g.non_exterior() {
                if g.class(k) != NodeClass::Interior || g.depth(k) < 4.0 * g.h() {
                    continue;
                }
                m = m.max((dg.get(k) - l.get(k)).abs());
            }
            m
        };
        let ratio = gap(129) / gap(257);
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn laplacian_converges_at_second_order() {
        let f = |x: f64, y: f64| (PI * x).sin() * (PI * y).cos();
        let err = |n| {
            let g = grid(n);
            let l = laplacian(&Field::from_fn(&g, f), None);
            max_err_interior(&l, |x, y| -2.0 * PI * PI * f(x, y))
        };
        let ratio = err(129) / err(257);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn operators_are_deterministic() {
        let g = grid(65);
        let u = Field::from_fn(&g, |x, y| (x * 3.0).sin() + y * y);
        assert_eq!(laplacian(&u, None), laplacian(&u, None));
        assert_eq!(gradient(&u), gradient(&u));
    }
}
