//! Line integrals of grid vector fields along straight segments.

use crate::error::{QpatError, Result};
use crate::field::VectorField2;
use crate::sample::bilinear_strict;

#[derive(Debug, Clone, Copy)]
pub struct PathOptions {
    /// Trapezoid step as a fraction of the grid spacing.
    pub step: f64,
    /// Depth below the circle, in units of `h`, within which leading samples
    /// without data are filled by linear extrapolation from the first samples
    /// that have data. Covers the strip between the circle and the nodes where
    /// derivatives are available.
    pub head_gap: f64,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            step: 0.5,
            head_gap: 2.0,
        }
    }
}

/// Trapezoid-rule line integral of `v · dl` from `start` to `target`.
pub fn path_integrate(v: &VectorField2, start: (f64, f64), target: (f64, f64)) -> Result<f64> {
    path_integrate_with(v, start, target, &PathOptions::default())
}

pub fn path_integrate_with(
    v: &VectorField2,
    start: (f64, f64),
    target: (f64, f64),
    opts: &PathOptions,
) -> Result<f64> {
    let h = v.grid().h();
    let (dx, dy) = (target.0 - start.0, target.1 - start.1);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return Ok(0.0);
    }
    let (ux, uy) = (dx / len, dy / len);
    let m = ((len / (opts.step * h)).ceil() as usize).max(1);
    let dt = len / m as f64;
    let point = |k: usize| (start.0 + ux * dt * k as f64, start.1 + uy * dt * k as f64);

    let mut samples: Vec<Option<f64>> = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let (x, y) = point(k);
        let s = match (bilinear_strict(&v.x, x, y), bilinear_strict(&v.y, x, y)) {
            (Some(a), Some(b)) => Some(a * ux + b * uy),
            _ => None,
        };
        samples.push(s);
    }

    // Leading samples close to the circle may lack data; everything after must have it.
    let radius = v.grid().radius();
    let head = (0..=m)
        .take_while(|&k| {
            let (x, y) = point(k);
            radius - x.hypot(y) <= opts.head_gap * h + 1e-12
        })
        .count();
    if let Some(gap) = samples[head..].iter().position(Option::is_none) {
        let (x, y) = point(head + gap);
        return Err(QpatError::PathLeavesData { x, y });
    }
    let valid: Vec<(usize, f64)> = samples
        .iter()
        .enumerate()
        .filter_map(|(k, s)| s.map(|s| (k, s)))
        .collect();
    if valid.is_empty() {
        return Err(QpatError::PathLeavesData {
            x: start.0,
            y: start.1,
        });
    }
    let value = |k: usize| -> f64 {
        if let Some(s) = samples[k] {
            return s;
        }
        let after = valid.partition_point(|&(j, _)| j < k);
        let (a, b) = if after > 0 && after < valid.len() {
            (valid[after - 1], valid[after])
        } else if after + 1 < valid.len() {
            (valid[after], valid[after + 1])
        } else {
            return valid[valid.len() - 1].1;
        };
        let t = (k as f64 - a.0 as f64) / (b.0 as f64 - a.0 as f64);
        a.1 + t * (b.1 - a.1)
    };

    let mut acc = 0.5 * (value(0) + value(m));
    for k in 1..m {
        acc += value(k);
    }
    Ok(acc * dt)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::{Field, SENTINEL};
    use crate::grid::DiscGrid;

    fn grid(n: usize) -> Arc<DiscGrid> {
        Arc::new(DiscGrid::new(n, 1.0).unwrap())
    }

    #[test]
    fn gradient_field_of_xy() {
        let g = grid(129);
        let v = VectorField2::from_fn(&g, |x, y| (y, x));
        let s = path_integrate(&v, (1.0, 0.0), (0.2, 0.5)).unwrap();
        assert!((s - 0.1).abs() < 1e-3, "{s}");
    }

    #[test]
    fn zero_field_integrates_to_zero() {
        let g = grid(65);
        let v = VectorField2::from_fn(&g, |_, _| (0.0, 0.0));
        assert_eq!(path_integrate(&v, (0.0, -1.0), (0.3, 0.4)).unwrap(), 0.0);
    }

    #[test]
    fn log_sigma_potential() {
        // sigma = exp(x + 2y): grad ln sigma = (1, 2).
        let g = grid(129);
        let v = VectorField2::from_fn(&g, |_, _| (1.0, 2.0));
        let s = path_integrate(&v, (0.0, -1.0), (0.3, 0.4)).unwrap();
        assert!((s - 3.1).abs() < 1e-9, "{s}");
    }

    #[test]
    fn closed_polyline_of_gradient_vanishes() {
        let g = grid(257);
        let v = VectorField2::from_fn(&g, |x, y| (2.0 * x * y + 1.0, x * x - 3.0 * y * y));
        let pts = [(0.1, 0.1), (0.6, -0.2), (0.3, 0.7), (-0.5, 0.2), (0.1, 0.1)];
        let total: f64 = pts
            .windows(2)
            .map(|w| path_integrate(&v, w[0], w[1]).unwrap())
            .sum();
        assert!(total.abs() < 1e-4, "{total}");
    }

    #[test]
    fn missing_data_on_the_way_is_an_error() {
        let g = grid(65);
        let hole = Field::from_fn(&g, |x, y| if x.hypot(y) < 0.2 { SENTINEL } else { 1.0 });
        let v = VectorField2::new(hole.clone(), hole).unwrap();
        let r = path_integrate(&v, (-1.0, 0.0), (0.8, 0.0));
        assert!(matches!(r, Err(QpatError::PathLeavesData { .. })));
        assert!(path_integrate(&v, (0.0, 1.0), (0.0, 0.5)).is_ok());
    }
}
