//! Scalar and vector fields on a [`DiscGrid`]. Missing values are `NaN`.

use std::sync::Arc;

use crate::error::{QpatError, Result};
use crate::grid::DiscGrid;

/// Marker for "no value at this node".
pub const SENTINEL: f64 = f64::NAN;

#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<DiscGrid>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    /// Bitwise comparison of values; NaN sentinels compare equal to each other.
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_shape(&other.grid)
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }
}

impl Field {
    /// Field with `NaN` everywhere.
    pub fn empty(grid: &Arc<DiscGrid>) -> Self {
        Field {
            grid: Arc::clone(grid),
            values: vec![SENTINEL; grid.len()],
        }
    }

    pub fn constant(grid: &Arc<DiscGrid>, c: f64) -> Self {
        Self::from_fn(grid, |_, _| c)
    }

    /// Evaluates `f(x, y)` on every non-exterior node.
    pub fn from_fn(grid: &Arc<DiscGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                if grid.is_exterior(k) {
                    SENTINEL
                } else {
                    let (x, y) = grid.coords(k);
                    f(x, y)
                }
            })
            .collect();
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// Wraps raw node values. Exterior nodes are forced to the sentinel.
    pub fn from_values(grid: &Arc<DiscGrid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(QpatError::config(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        for (k, v) in values.iter_mut().enumerate() {
            if grid.is_exterior(k) {
                *v = SENTINEL;
            }
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn has(&self, idx: usize) -> bool {
        self.values[idx].is_finite()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .map(|&v| if v.is_nan() { SENTINEL } else { f(v) })
                .collect(),
        }
    }

    /// Node-wise combination; sentinel wherever either input is missing.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert!(self.grid.same_shape(&other.grid));
        Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| {
                    if a.is_nan() || b.is_nan() {
                        SENTINEL
                    } else {
                        f(a, b)
                    }
                })
                .collect(),
        }
    }

    /// Copy with sentinel outside `mask`.
    pub fn masked(&self, mask: &Mask) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(mask.bits())
                .map(|(&v, &m)| if m { v } else { SENTINEL })
                .collect(),
        }
    }

    /// Nodes carrying a finite value.
    pub fn coverage(&self) -> Mask {
        Mask::from_fn(&self.grid, |k| self.values[k].is_finite())
    }

    /// Finite values as an iterator of `(index, value)`.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(k, &v)| (k, v))
    }

    pub fn max(&self) -> f64 {
        self.iter_valid().map(|(_, v)| v).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.iter_valid().map(|(_, v)| v).fold(f64::INFINITY, f64::min)
    }

    /// Mean over finite values inside `mask` (all finite values when `None`).
    pub fn mean(&self, mask: Option<&Mask>) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (k, v) in self.iter_valid() {
            if mask.is_none_or(|m| m.get(k)) {
                sum += v;
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    }

    /// Discrete l2 norm over finite values.
    pub fn norm_l2(&self) -> f64 {
        self.iter_valid().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    pub x: Field,
    pub y: Field,
}

impl VectorField2 {
    pub fn new(x: Field, y: Field) -> Result<Self> {
        if !x.grid().same_shape(y.grid()) {
            return Err(QpatError::config("vector components live on different grids"));
        }
        // Shared sentinel pattern.
        let mut x = x;
        let mut y = y;
        for k in 0..x.values.len() {
            if x.values[k].is_nan() || y.values[k].is_nan() {
                x.values[k] = SENTINEL;
                y.values[k] = SENTINEL;
            }
        }
        Ok(VectorField2 { x, y })
    }

    pub fn from_fn(grid: &Arc<DiscGrid>, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let x = Field::from_fn(grid, |a, b| f(a, b).0);
        let y = Field::from_fn(grid, |a, b| f(a, b).1);
        VectorField2 { x, y }
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        self.x.grid()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> Option<(f64, f64)> {
        let a = self.x.get(idx);
        let b = self.y.get(idx);
        (a.is_finite() && b.is_finite()).then_some((a, b))
    }

    pub fn masked(&self, mask: &Mask) -> Self {
        VectorField2 {
            x: self.x.masked(mask),
            y: self.y.masked(mask),
        }
    }

    pub fn coverage(&self) -> Mask {
        Mask::from_fn(self.grid(), |k| self.get(k).is_some())
    }

    /// Squared Euclidean norm per node.
    pub fn norm_squared(&self) -> Field {
        self.x.zip_map(&self.y, |a, b| a * a + b * b)
    }
}

/// Per-node boolean flags on one grid.
#[derive(Debug, Clone)]
pub struct Mask {
    grid: Arc<DiscGrid>,
    bits: Vec<bool>,
}

impl PartialEq for Mask {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_shape(&other.grid) && self.bits == other.bits
    }
}

impl Eq for Mask {}

impl Mask {
    pub fn from_fn(grid: &Arc<DiscGrid>, f: impl Fn(usize) -> bool) -> Self {
        Mask {
            grid: Arc::clone(grid),
            bits: (0..grid.len()).map(|k| !grid.is_exterior(k) && f(k)).collect(),
        }
    }

    /// All non-exterior nodes.
    pub fn full(grid: &Arc<DiscGrid>) -> Self {
        Self::from_fn(grid, |_| true)
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn set(&mut self, idx: usize, v: bool) {
        self.bits[idx] = v && !self.grid.is_exterior(idx);
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| k)
    }

    pub fn and(&self, other: &Mask) -> Mask {
        Mask {
            grid: Arc::clone(&self.grid),
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Removes nodes within `layers` 4-neighbour steps of a node outside the mask.
    pub fn eroded(&self, layers: usize) -> Mask {
        let g = &self.grid;
        let mut bits = self.bits.clone();
        for _ in 0..layers {
            let prev = bits.clone();
            for k in 0..g.len() {
                if !prev[k] {
                    continue;
                }
                let keep = crate::grid::Dir::ALL
                    .iter()
                    .all(|&d| g.neighbour(k, d).is_some_and(|nb| prev[nb]));
                bits[k] = keep;
            }
        }
        Mask {
            grid: Arc::clone(g),
            bits,
        }
    }

    /// Connected components (4-connectivity), each as a list of node indices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let g = &self.grid;
        let mut seen = vec![false; g.len()];
        let mut out = Vec::new();
        for start in self.indices() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut head = 0;
            while head < comp.len() {
                let k = comp[head];
                head += 1;
                for d in crate::grid::Dir::ALL {
                    if let Some(nb) = g.neighbour(k, d) {
                        if self.bits[nb] && !seen[nb] {
                            seen[nb] = true;
                            comp.push(nb);
                        }
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// 0/1 field, sentinel on exterior nodes.
    pub fn to_field(&self) -> Field {
        Field::from_values(
            &self.grid,
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("mask and grid sizes agree")
    }

    pub fn from_field(field: &Field) -> Mask {
        Mask::from_fn(field.grid(), |k| field.get(k) > 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<DiscGrid> {
        Arc::new(DiscGrid::new(33, 1.0).unwrap())
    }

    #[test]
    fn sentinel_exactly_on_exterior() {
        let g = grid();
        let f = Field::from_fn(&g, |x, y| x + y);
        for k in 0..g.len() {
            assert_eq!(g.is_exterior(k), f.get(k).is_nan());
        }
    }

    #[test]
    fn vector_components_share_sentinels() {
        let g = grid();
        let mut x = Field::constant(&g, 1.0);
        let y = Field::constant(&g, 2.0);
        let k = g.index(16, 16);
        x.values_mut()[k] = SENTINEL;
        let v = VectorField2::new(x, y).unwrap();
        assert!(v.y.get(k).is_nan());
        assert_eq!(v.x.coverage(), v.y.coverage());
    }

    #[test]
    fn components_split_disjoint_blobs() {
        let g = grid();
        let m = Mask::from_fn(&g, |k| {
            let (x, _) = g.coords(k);
            x.abs() > 0.5
        });
        assert_eq!(m.components().len(), 2);
        assert!(m.eroded(1).is_subset_of(&m));
    }
}
