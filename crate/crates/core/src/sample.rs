//! Point sampling of grid fields and transfer between grids.

use std::sync::Arc;

use crate::error::{QpatError, Result};
use crate::field::{Field, SENTINEL};
use crate::grid::DiscGrid;

/// Corner nodes of the cell containing a point, with bilinear weights.
pub(crate) fn cell_weights(grid: &DiscGrid, x: f64, y: f64) -> Option<[(usize, f64); 4]> {
    let (i, j, tx, ty) = grid.locate(x, y)?;
    Some([
        (grid.index(i, j), (1.0 - tx) * (1.0 - ty)),
        (grid.index(i + 1, j), tx * (1.0 - ty)),
        (grid.index(i, j + 1), (1.0 - tx) * ty),
        (grid.index(i + 1, j + 1), tx * ty),
    ])
}

/// Bilinear value if every corner with non-zero weight carries data.
pub fn bilinear_strict(f: &Field, x: f64, y: f64) -> Option<f64> {
    let w = cell_weights(f.grid(), x, y)?;
    let mut acc = 0.0;
    for (k, wk) in w {
        if wk <= 1e-14 {
            continue;
        }
        let v = f.get(k);
        if !v.is_finite() {
            return None;
        }
        acc += wk * v;
    }
    Some(acc)
}

/// Bilinear value; near missing data falls back to a least-squares plane
/// through the valid nodes of the surrounding 4x4 block.
pub fn bilinear_tolerant(f: &Field, x: f64, y: f64) -> Option<f64> {
    if let Some(v) = bilinear_strict(f, x, y) {
        return Some(v);
    }
    let g = f.grid();
    let (i, j, _, _) = g.locate(x, y)?;
    let n = g.n() as isize;
    // Normal equations of v ~ c0 + c1 dx + c2 dy, coordinates scaled by h.
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    let mut count = 0;
    for dj in -1..=2isize {
        for di in -1..=2isize {
            let ii = i as isize + di;
            let jj = j as isize + dj;
            if ii < 0 || jj < 0 || ii >= n || jj >= n {
                continue;
            }
            let k = g.index(ii as usize, jj as usize);
            let v = f.get(k);
            if !v.is_finite() {
                continue;
            }
            let (px, py) = g.coords(k);
            let row = [1.0, (px - x) / g.h(), (py - y) / g.h()];
            for a in 0..3 {
                for b in 0..3 {
                    ata[a][b] += row[a] * row[b];
                }
                atb[a] += row[a] * v;
            }
            count += 1;
        }
    }
    if count == 0 {
        return None;
    }
    if count >= 3 {
        if let Some(c) = solve3(ata, atb) {
            return Some(c[0]);
        }
    }
    // Degenerate layout: plain average.
    Some(atb[0] / ata[0][0])
}

pub(crate) fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    let scale = a[0][0].abs().max(1.0).powi(3);
    if d.abs() < 1e-10 * scale {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *o = det(&m) / d;
    }
    Some(out)
}

/// Samples a field given on a finer grid at the nodes of `coarse`.
pub fn restrict(fine: &Field, coarse: &Arc<DiscGrid>) -> Result<Field> {
    let fg = fine.grid();
    if fg.radius() != coarse.radius() {
        return Err(QpatError::config(format!(
            "cannot restrict between radii {} and {}",
            fg.radius(),
            coarse.radius()
        )));
    }
    if fg.h() >= coarse.h() {
        return Err(QpatError::config(format!(
            "restriction needs a finer source grid (n={} onto n={})",
            fg.n(),
            coarse.n()
        )));
    }
    resample(fine, coarse)
}

/// Bilinear resampling onto any grid of the same radius.
pub fn resample(src: &Field, target: &Arc<DiscGrid>) -> Result<Field> {
    let values = (0..target.len())
        .map(|k| {
            if target.is_exterior(k) {
                return SENTINEL;
            }
            let (x, y) = target.coords(k);
            bilinear_tolerant(src, x, y).unwrap_or(SENTINEL)
        })
        .collect();
    Field::from_values(target, values)
}
