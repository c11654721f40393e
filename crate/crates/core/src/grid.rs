//! Uniform Cartesian grid over the square `[-R, R]^2`, masked to the disc `|x| <= R`.
//!
//! Nodes are stored row-major: index `j * n + i` sits at `x = -R + i h`, `y = -R + j h`.
//! Every non-exterior node whose axis neighbour lies outside the disc records the
//! fraction of `h` at which the segment towards that neighbour crosses the circle,
//! together with the crossing point. Nodes lying on the circle (to rounding) carry
//! their own boundary point and are treated as Dirichlet nodes by the solvers.

use std::f64::consts::TAU;

use crate::error::{QpatError, Result};

/// Smallest admissible number of nodes per axis.
pub const MIN_NODES: usize = 16;

/// Relative tolerance used to decide that a node lies on the circle.
const ON_CIRCLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Interior,
    BoundaryAdjacent,
    Exterior,
}

/// Axis directions, in the order used by [`DiscGrid::cuts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    East,
    West,
    North,
    South,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::East, Dir::West, Dir::North, Dir::South];

    pub fn offset(self) -> (isize, isize) {
        match self {
            Dir::East => (1, 0),
            Dir::West => (-1, 0),
            Dir::North => (0, 1),
            Dir::South => (0, -1),
        }
    }

    pub fn slot(self) -> usize {
        self as usize
    }
}

/// Intersection of a grid line with the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    /// Polar angle in `[0, 2π)`.
    pub angle: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cut {
    /// Fraction of `h` from the node to the circle, in `(0, 1]`.
    pub fraction: f64,
    /// Index into [`DiscGrid::boundary_points`].
    pub point: usize,
}

#[derive(Debug, Clone)]
pub struct DiscGrid {
    n: usize,
    h: f64,
    radius: f64,
    class: Vec<NodeClass>,
    on_circle: Vec<Option<usize>>,
    cuts: Vec<[Option<Cut>; 4]>,
    boundary_points: Vec<BoundaryPoint>,
}

/// Classifies the nodes of an `n x n` grid over `[-R, R]^2`.
///
/// Unlike [`DiscGrid::new`] this accepts any `n >= 2`, which makes it usable for
/// checking the classification rule on tiny grids.
pub fn classify_nodes(n: usize, radius: f64) -> Vec<NodeClass> {
    assert!(n >= 2 && radius > 0.0);
    let h = 2.0 * radius / (n - 1) as f64;
    let inside = |i: isize, j: isize| -> bool {
        if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
            return false;
        }
        let x = -radius + i as f64 * h;
        let y = -radius + j as f64 * h;
        x * x + y * y <= radius * radius * (1.0 + ON_CIRCLE_TOL)
    };
    let mut class = vec![NodeClass::Exterior; n * n];
    for j in 0..n as isize {
        for i in 0..n as isize {
            if !inside(i, j) {
                continue;
            }
            let full = Dir::ALL.iter().all(|d| {
                let (di, dj) = d.offset();
                inside(i + di, j + dj)
            });
            class[j as usize * n + i as usize] = if full {
                NodeClass::Interior
            } else {
                NodeClass::BoundaryAdjacent
            };
        }
    }
    class
}

impl DiscGrid {
    pub fn new(n: usize, radius: f64) -> Result<Self> {
        if n < MIN_NODES {
            return Err(QpatError::config(format!(
                "grid needs at least {MIN_NODES} nodes per axis, got {n}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(QpatError::config(format!("radius must be positive, got {radius}")));
        }
        let h = 2.0 * radius / (n - 1) as f64;
        let class = classify_nodes(n, radius);
        let r2 = radius * radius;

        // Crossing points first, in node order; sorted by angle afterwards.
        let mut raw_points: Vec<BoundaryPoint> = Vec::new();
        let mut on_circle_raw = vec![None; n * n];
        let mut cuts_raw: Vec<[Option<(f64, usize)>; 4]> = vec![[None; 4]; n * n];

        for j in 0..n {
            for i in 0..n {
                let idx = j * n + i;
                if class[idx] != NodeClass::BoundaryAdjacent {
                    continue;
                }
                let x = -radius + i as f64 * h;
                let y = -radius + j as f64 * h;
                if ((x * x + y * y) - r2).abs() <= ON_CIRCLE_TOL * r2 {
                    on_circle_raw[idx] = Some(raw_points.len());
                    raw_points.push(make_point(x, y, radius));
                    continue;
                }
                for d in Dir::ALL {
                    let (di, dj) = d.offset();
                    let ni = i as isize + di;
                    let nj = j as isize + dj;
                    let neighbour_inside = ni >= 0
                        && nj >= 0
                        && (ni as usize) < n
                        && (nj as usize) < n
                        && class[nj as usize * n + ni as usize] != NodeClass::Exterior;
                    if neighbour_inside {
                        continue;
                    }
                    let (t, px, py) = match d {
                        Dir::East => {
                            let xc = (r2 - y * y).max(0.0).sqrt();
                            ((xc - x) / h, xc, y)
                        }
                        Dir::West => {
                            let xc = -(r2 - y * y).max(0.0).sqrt();
                            ((x - xc) / h, xc, y)
                        }
                        Dir::North => {
                            let yc = (r2 - x * x).max(0.0).sqrt();
                            ((yc - y) / h, x, yc)
                        }
                        Dir::South => {
                            let yc = -(r2 - x * x).max(0.0).sqrt();
                            ((y - yc) / h, x, yc)
                        }
                    };
                    let t = t.clamp(f64::MIN_POSITIVE, 1.0);
                    cuts_raw[idx][d.slot()] = Some((t, raw_points.len()));
                    raw_points.push(make_point(px, py, radius));
                }
            }
        }

        let mut order: Vec<usize> = (0..raw_points.len()).collect();
        order.sort_by(|&a, &b| raw_points[a].angle.total_cmp(&raw_points[b].angle));
        let mut rank = vec![0usize; raw_points.len()];
        for (k, &o) in order.iter().enumerate() {
            rank[o] = k;
        }
        let boundary_points: Vec<BoundaryPoint> = order.iter().map(|&o| raw_points[o]).collect();
        let on_circle = on_circle_raw.into_iter().map(|p| p.map(|p| rank[p])).collect();
        let cuts = cuts_raw
            .into_iter()
            .map(|c| {
                c.map(|slot| {
                    slot.map(|(fraction, p)| Cut {
                        fraction,
                        point: rank[p],
                    })
                })
            })
            .collect();

        Ok(DiscGrid {
            n,
            h,
            radius,
            class,
            on_circle,
            cuts,
            boundary_points,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (
            -self.radius + i as f64 * self.h,
            -self.radius + j as f64 * self.h,
        )
    }

    /// Neighbour index in direction `d`, if it lies on the grid.
    #[inline]
    pub fn neighbour(&self, idx: usize, d: Dir) -> Option<usize> {
        let (i, j) = self.ij(idx);
        let (di, dj) = d.offset();
        let ni = i as isize + di;
        let nj = j as isize + dj;
        if ni < 0 || nj < 0 || ni >= self.n as isize || nj >= self.n as isize {
            None
        } else {
            Some(nj as usize * self.n + ni as usize)
        }
    }

    /// Node `k` steps away along `d`, if on the grid.
    #[inline]
    pub fn step(&self, idx: usize, d: Dir, k: usize) -> Option<usize> {
        let (i, j) = self.ij(idx);
        let (di, dj) = d.offset();
        let ni = i as isize + di * k as isize;
        let nj = j as isize + dj * k as isize;
        if ni < 0 || nj < 0 || ni >= self.n as isize || nj >= self.n as isize {
            None
        } else {
            Some(nj as usize * self.n + ni as usize)
        }
    }

    #[inline]
    pub fn class(&self, idx: usize) -> NodeClass {
        self.class[idx]
    }

    #[inline]
    pub fn is_exterior(&self, idx: usize) -> bool {
        self.class[idx] == NodeClass::Exterior
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.class
    }

    /// Boundary point index for nodes lying on the circle itself.
    #[inline]
    pub fn on_circle(&self, idx: usize) -> Option<usize> {
        self.on_circle[idx]
    }

    /// Circle crossings towards each axis neighbour, indexed by [`Dir::slot`].
    #[inline]
    pub fn cuts(&self, idx: usize) -> &[Option<Cut>; 4] {
        &self.cuts[idx]
    }

    /// Fractions of `h` to the circle per direction (1 where no crossing).
    pub fn cut_fractions(&self, idx: usize) -> [f64; 4] {
        self.cuts[idx].map(|c| c.map_or(1.0, |c| c.fraction))
    }

    pub fn boundary_points(&self) -> &[BoundaryPoint] {
        &self.boundary_points
    }

    /// Distance from node `idx` to the circle (positive inside).
    pub fn depth(&self, idx: usize) -> f64 {
        let (x, y) = self.coords(idx);
        self.radius - (x * x + y * y).sqrt()
    }

    pub fn non_exterior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| !self.is_exterior(k))
    }

    /// Continuous cell lookup: lower-left node `(i, j)` and local offsets in `[0, 1]`.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize, f64, f64)> {
        let fx = (x + self.radius) / self.h;
        let fy = (y + self.radius) / self.h;
        let last = (self.n - 1) as f64;
        let eps = 1e-9;
        if fx < -eps || fy < -eps || fx > last + eps || fy > last + eps {
            return None;
        }
        let fx = fx.clamp(0.0, last);
        let fy = fy.clamp(0.0, last);
        let i = (fx.floor() as usize).min(self.n - 2);
        let j = (fy.floor() as usize).min(self.n - 2);
        Some((i, j, fx - i as f64, fy - j as f64))
    }

    /// Same node count and radius.
    pub fn same_shape(&self, other: &DiscGrid) -> bool {
        self.n == other.n && self.radius == other.radius
    }
}

impl PartialEq for DiscGrid {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other)
    }
}

fn make_point(x: f64, y: f64, _radius: f64) -> BoundaryPoint {
    let mut angle = y.atan2(x);
    if angle < 0.0 {
        angle += TAU;
    }
    if angle >= TAU {
        angle -= TAU;
    }
    BoundaryPoint { angle, x, y }
}

/// Values attached to the boundary points of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    values: Vec<f64>,
}

impl BoundaryData {
    pub fn from_fn(grid: &DiscGrid, mut f: impl FnMut(&BoundaryPoint) -> f64) -> Self {
        BoundaryData {
            values: grid.boundary_points().iter().map(&mut f).collect(),
        }
    }

    pub fn constant(grid: &DiscGrid, value: f64) -> Self {
        BoundaryData {
            values: vec![value; grid.boundary_points().len()],
        }
    }

    pub fn from_values(grid: &DiscGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.boundary_points().len() {
            return Err(QpatError::config(format!(
                "boundary data has {} values, grid has {} boundary points",
                values.len(),
                grid.boundary_points().len()
            )));
        }
        Ok(BoundaryData { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, point: usize) -> f64 {
        self.values[point]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        BoundaryData {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Periodic piecewise-linear interpolation of samples `(angle, value)` sorted by angle.
pub fn interpolate_periodic(samples: &[(f64, f64)], angle: f64) -> f64 {
    assert!(!samples.is_empty());
    if samples.len() == 1 {
        return samples[0].1;
    }
    let a = angle.rem_euclid(TAU);
    let k = samples.partition_point(|s| s.0 <= a);
    let (lo, hi) = if k == 0 || k == samples.len() {
        let lo = samples[samples.len() - 1];
        let hi = samples[0];
        (lo, (hi.0 + TAU, hi.1))
    } else {
        (samples[k - 1], samples[k])
    };
    let a = if a < lo.0 { a + TAU } else { a };
    let span = hi.0 - lo.0;
    if span <= 0.0 {
        return lo.1;
    }
    let t = (a - lo.0) / span;
    lo.1 + t * (hi.1 - lo.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_by_three_corners_are_exterior() {
        let c = classify_nodes(3, 1.0);
        for corner in [0, 2, 6, 8] {
            assert_eq!(c[corner], NodeClass::Exterior);
        }
        assert_ne!(c[4], NodeClass::Exterior);
    }

    #[test]
    fn five_by_five_matches_enumeration() {
        let c = classify_nodes(5, 1.0);
        // Oracle: enumerate the 25 nodes of the 0.5-spaced grid.
        let coords = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut inside = 0;
        for y in coords {
            for x in coords {
                if x * x + y * y <= 1.0 {
                    inside += 1;
                }
            }
        }
        let non_ext = c.iter().filter(|&&k| k != NodeClass::Exterior).count();
        assert_eq!(non_ext, inside);
        assert_eq!(inside, 13);
        // (0,0),(±.5,0),(0,±.5) have all neighbours inside; (±.5,±.5) too:
        // their neighbours (±1,±.5) fail. So only the plus-shaped centre 5 are full.
        let interior = c.iter().filter(|&&k| k == NodeClass::Interior).count();
        assert_eq!(interior, 5);
    }

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(matches!(DiscGrid::new(15, 1.0), Err(QpatError::Config(_))));
        assert!(matches!(DiscGrid::new(32, 0.0), Err(QpatError::Config(_))));
        assert!(matches!(DiscGrid::new(32, -1.0), Err(QpatError::Config(_))));
    }

    #[test]
    fn area_fraction_approaches_quarter_pi() {
        let g = DiscGrid::new(101, 1.0).unwrap();
        let frac = g.non_exterior().count() as f64 / g.len() as f64;
        assert!((frac - std::f64::consts::FRAC_PI_4).abs() < 0.02, "{frac}");
    }

    #[test]
    fn cuts_lie_on_circle_and_angles_increase() {
        for (n, r) in [(33, 1.0), (64, 2.5), (101, 1.0)] {
            let g = DiscGrid::new(n, r).unwrap();
            for k in g.non_exterior() {
                for (slot, cut) in g.cuts(k).iter().enumerate() {
                    let Some(cut) = cut else { continue };
                    assert!(cut.fraction > 0.0 && cut.fraction <= 1.0);
                    let (x, y) = g.coords(k);
                    let (dx, dy) = Dir::ALL[slot].offset();
                    let px = x + dx as f64 * cut.fraction * g.h();
                    let py = y + dy as f64 * cut.fraction * g.h();
                    assert!(((px * px + py * py).sqrt() - r).abs() < 1e-12 * r);
                    let bp = g.boundary_points()[cut.point];
                    assert!((bp.x - px).abs() < 1e-12 && (bp.y - py).abs() < 1e-12);
                }
            }
            let pts = g.boundary_points();
            assert!(pts.windows(2).all(|w| w[0].angle < w[1].angle));
            assert!(pts.iter().all(|p| p.angle >= 0.0 && p.angle < TAU));
        }
    }

    #[test]
    fn interior_nodes_have_non_exterior_neighbours() {
        let g = DiscGrid::new(65, 1.0).unwrap();
        for k in 0..g.len() {
            if g.class(k) == NodeClass::Interior {
                for d in Dir::ALL {
                    let nb = g.neighbour(k, d).unwrap();
                    assert!(!g.is_exterior(nb));
                }
            }
        }
    }

    #[test]
    fn odd_grids_put_nodes_on_circle() {
        let g = DiscGrid::new(33, 1.0).unwrap();
        let top = g.index(16, 32);
        assert!(g.on_circle(top).is_some());
        let p = g.boundary_points()[g.on_circle(top).unwrap()];
        assert!((p.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn periodic_interpolation_wraps() {
        let s = [(0.5, 1.0), (3.0, 2.0), (6.0, 3.0)];
        let v = interpolate_periodic(&s, 0.0);
        // between 6.0 (3.0) and 0.5+2π (1.0)
        let t = (TAU - 6.0) / (0.5 + TAU - 6.0);
        assert!((v - (3.0 + t * (1.0 - 3.0))).abs() < 1e-12);
        assert!((interpolate_periodic(&s, 3.0) - 2.0).abs() < 1e-12);
    }
}
