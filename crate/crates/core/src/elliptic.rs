//! Dirichlet problems `-div(a grad u) + b u = f` on the disc.
//!
//! Flux-form five-point stencil with harmonic face averages of `a`. Faces cut by
//! the circle use the unequal arm `θh` to the crossing point, where the boundary
//! value is folded into the right-hand side. Each arm contributes `a/(θ h²)` to
//! the row without rescaling by the local mean arm length, which keeps the matrix
//! symmetric and the solution second-order accurate.

use std::fmt;
use std::sync::Arc;

use crate::error::{QpatError, Result};
use crate::field::{Field, SENTINEL};
use crate::grid::{BoundaryData, DiscGrid, Dir};

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 20_000;

/// Row-compressed operator over the unknown (non-exterior, off-circle) nodes.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    grid: Arc<DiscGrid>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    node_of: Vec<usize>,
    unknown_of: Vec<Option<usize>>,
    dirichlet: Vec<(usize, f64)>,
    rhs_boundary: Vec<f64>,
}

impl SparseOperator {
    pub fn dimension(&self) -> usize {
        self.node_of.len()
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    /// `(column, coefficient)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Boundary values folded into the right-hand side.
    pub fn rhs_boundary_contribution(&self) -> &[f64] {
        &self.rhs_boundary
    }

    pub fn unknown_of(&self, node: usize) -> Option<usize> {
        self.unknown_of[node]
    }

    pub fn node_of(&self, unknown: usize) -> usize {
        self.node_of[unknown]
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            *out = acc;
        }
    }

    /// Coefficient at `(r, c)`, zero if not stored.
    pub fn coefficient(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    /// Values of unknowns scattered to a field; circle nodes get their Dirichlet value.
    pub fn scatter(&self, x: &[f64]) -> Field {
        let mut values = vec![SENTINEL; self.grid.len()];
        for (u, &node) in self.node_of.iter().enumerate() {
            values[node] = x[u];
        }
        for &(node, v) in &self.dirichlet {
            values[node] = v;
        }
        Field::from_values(&self.grid, values).expect("same grid")
    }

    /// Unknown vector gathered from a field.
    pub fn gather(&self, f: &Field) -> Vec<f64> {
        self.node_of.iter().map(|&k| f.get(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ConjugateGradient,
    BiCgStab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative l2 residual `|b - Ax| / |b|`.
    pub residual_norm: f64,
    pub converged: bool,
    pub method: Method,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} iterations={} residual={:.3e} converged={}",
            self.method, self.iterations, self.residual_norm, self.converged
        )
    }
}

#[inline]
fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Assembles `-div(a grad u) + b u = f` with `u = g` on the circle.
///
/// `b` may take either sign; only `a` is required to be positive.
pub fn assemble(a: &Field, b: &Field, g: &BoundaryData, f: &Field) -> Result<(SparseOperator, Vec<f64>)> {
    let grid = Arc::clone(a.grid());
    if !(grid.same_shape(b.grid()) && grid.same_shape(f.grid())) {
        return Err(QpatError::config("coefficient fields live on different grids"));
    }
    if g.values().len() != grid.boundary_points().len() {
        return Err(QpatError::config("boundary data does not match grid"));
    }
    let h2 = grid.h() * grid.h();

    for k in grid.non_exterior() {
        let ak = a.get(k);
        if !(ak > 0.0 && ak.is_finite()) {
            let (x, y) = grid.coords(k);
            return Err(QpatError::Coefficient(format!(
                "diffusion coefficient must be positive, got {ak} at ({x:.4}, {y:.4})"
            )));
        }
    }

    let mut node_of = Vec::new();
    let mut unknown_of = vec![None; grid.len()];
    let mut dirichlet = Vec::new();
    for k in grid.non_exterior() {
        match grid.on_circle(k) {
            Some(p) => dirichlet.push((k, g.get(p))),
            None => {
                unknown_of[k] = Some(node_of.len());
                node_of.push(k);
            }
        }
    }
    let dim = node_of.len();

    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::with_capacity(5 * dim);
    let mut vals = Vec::with_capacity(5 * dim);
    let mut diag_vals = Vec::with_capacity(dim);
    let mut rhs = vec![0.0; dim];
    let mut rhs_boundary = vec![0.0; dim];
    row_ptr.push(0);

    for (r, &k) in node_of.iter().enumerate() {
        let ak = a.get(k);
        let bk = b.get(k);
        let fk = f.get(k);
        if !bk.is_finite() || !fk.is_finite() {
            let (x, y) = grid.coords(k);
            return Err(QpatError::Coefficient(format!(
                "missing reaction or source value at ({x:.4}, {y:.4})"
            )));
        }
        let mut diag = bk;
        let mut off: Vec<(usize, f64)> = Vec::with_capacity(4);
        let mut folded = 0.0;
        for d in Dir::ALL {
            let nb = grid.neighbour(k, d).filter(|&nb| !grid.is_exterior(nb));
            match nb {
                Some(nb) => {
                    let c = harmonic(ak, a.get(nb)) / h2;
                    diag += c;
                    match unknown_of[nb] {
                        Some(col) => off.push((col, -c)),
                        None => {
                            let p = grid.on_circle(nb).expect("non-unknown interior node lies on circle");
                            folded += c * g.get(p);
                        }
                    }
                }
                None => {
                    let cut = grid.cuts(k)[d.slot()].expect("boundary-adjacent node has a cut");
                    let c = ak / (cut.fraction * h2);
                    diag += c;
                    folded += c * g.get(cut.point);
                }
            }
        }
        off.push((r, diag));
        off.sort_by_key(|e| e.0);
        for (c, v) in off {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
        diag_vals.push(diag);
        rhs_boundary[r] = folded;
        rhs[r] = fk + folded;
    }

    Ok((
        SparseOperator {
            grid,
            row_ptr,
            cols,
            vals,
            diag: diag_vals,
            node_of,
            unknown_of,
            dirichlet,
            rhs_boundary,
        },
        rhs,
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

enum Outcome {
    Done(Vec<f64>, SolveReport),
    Breakdown,
}

fn pcg(op: &SparseOperator, rhs: &[f64], tol: f64, max_iter: usize) -> Outcome {
    let n = op.dimension();
    let bnorm = norm(rhs);
    let inv_diag: Vec<f64> = op.diag.iter().map(|d| 1.0 / d).collect();
    if op.diag.iter().any(|&d| d <= 0.0) {
        return Outcome::Breakdown;
    }
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    for it in 0..max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Outcome::Breakdown;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / bnorm;
        if res <= tol {
            return Outcome::Done(
                x,
                SolveReport {
                    iterations: it + 1,
                    residual_norm: res,
                    converged: true,
                    method: Method::ConjugateGradient,
                },
            );
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Outcome::Done(
        x,
        SolveReport {
            iterations: max_iter,
            residual_norm: res,
            converged: false,
            method: Method::ConjugateGradient,
        },
    )
}

fn bicgstab(op: &SparseOperator, rhs: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, SolveReport) {
    let n = op.dimension();
    let bnorm = norm(rhs);
    let inv_diag: Vec<f64> = op
        .diag
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precond = |v: &[f64], out: &mut [f64]| {
        for i in 0..v.len() {
            out[i] = v[i] * inv_diag[i];
        }
    };
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zz = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut best = (f64::INFINITY, x.clone());
    let mut res = 1.0;
    for it in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut y);
        op.apply(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            break;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return (
                x,
                SolveReport {
                    iterations: it + 1,
                    residual_norm: norm(&s) / bnorm,
                    converged: true,
                    method: Method::BiCgStab,
                },
            );
        }
        precond(&s, &mut zz);
        op.apply(&zz, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zz[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(&r) / bnorm;
        if res < best.0 {
            best = (res, x.clone());
        }
        if res <= tol {
            return (
                x,
                SolveReport {
                    iterations: it + 1,
                    residual_norm: res,
                    converged: true,
                    method: Method::BiCgStab,
                },
            );
        }
    }
    let _ = res;
    (
        best.1,
        SolveReport {
            iterations: max_iter,
            residual_norm: best.0,
            converged: false,
            method: Method::BiCgStab,
        },
    )
}

/// Solves the assembled system. Jacobi-preconditioned conjugate gradients;
/// stabilized bi-conjugate gradients when the operator is not positive definite.
pub fn solve(op: &SparseOperator, rhs: &[f64], tol: f64, max_iter: usize) -> Result<(Field, SolveReport)> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(QpatError::config(format!("solver tolerance must lie in (0, 1e-2], got {tol}")));
    }
    if rhs.len() != op.dimension() {
        return Err(QpatError::config("right-hand side length does not match operator"));
    }
    if norm(rhs) == 0.0 {
        let report = SolveReport {
            iterations: 0,
            residual_norm: 0.0,
            converged: true,
            method: Method::ConjugateGradient,
        };
        return Ok((op.scatter(&vec![0.0; op.dimension()]), report));
    }
    let (x, report) = match pcg(op, rhs, tol, max_iter) {
        Outcome::Done(x, report) => (x, report),
        Outcome::Breakdown => bicgstab(op, rhs, tol, max_iter),
    };
    let field = op.scatter(&x);
    if !report.converged {
        return Err(QpatError::NotConverged {
            report,
            best: Box::new(field),
        });
    }
    Ok((field, report))
}

/// Assemble and solve with default tolerances.
pub fn solve_dirichlet(a: &Field, b: &Field, g: &BoundaryData, f: &Field) -> Result<(Field, SolveReport)> {
    let (op, rhs) = assemble(a, b, g, f)?;
    solve(&op, &rhs, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NodeClass;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Arc<DiscGrid> {
        Arc::new(DiscGrid::new(n, 1.0).unwrap())
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let g = grid(33);
        let one = Field::constant(&g, 1.0);
        let zero = Field::constant(&g, 0.0);
        let bd = BoundaryData::constant(&g, 0.0);
        let (op, rhs) = assemble(&one, &zero, &bd, &zero).unwrap();
        assert!(rhs.iter().all(|&v| v == 0.0));
        let (u, rep) = solve(&op, &rhs, 1e-10, 100).unwrap();
        assert!(rep.converged);
        assert!(u.iter_valid().all(|(_, v)| v == 0.0));
    }

    #[test]
    fn five_point_pattern_inside() {
        let g = grid(33);
        let one = Field::constant(&g, 1.0);
        let zero = Field::constant(&g, 0.0);
        let (op, _) = assemble(&one, &zero, &BoundaryData::constant(&g, 0.0), &zero).unwrap();
        let k = g.index(16, 16);
        let r = op.unknown_of(k).unwrap();
        let h2 = g.h() * g.h();
        assert!((op.coefficient(r, r) * h2 - 4.0).abs() < 1e-12);
        for d in Dir::ALL {
            let c = op.unknown_of(g.neighbour(k, d).unwrap()).unwrap();
            assert!((op.coefficient(r, c) * h2 + 1.0).abs() < 1e-12);
        }
        assert_eq!(op.row(r).count(), 5);
    }

    #[test]
    fn symmetric_with_variable_coefficient() {
        let g = grid(33);
        let a = Field::from_fn(&g, |x, _| 1.0 + x * x);
        let b = Field::constant(&g, 1.0);
        let (op, _) = assemble(&a, &b, &BoundaryData::constant(&g, 0.0), &b).unwrap();
        for r in 0..op.dimension() {
            for (c, v) in op.row(r) {
                assert!((v - op.coefficient(c, r)).abs() <= 1e-12 * v.abs().max(1.0));
            }
            assert!(op.diagonal()[r] > 0.0);
        }
    }

    #[test]
    fn row_sums_equal_boundary_folding() {
        let g = grid(40);
        let a = Field::constant(&g, 2.0);
        let zero = Field::constant(&g, 0.0);
        let (op, _) = assemble(&a, &zero, &BoundaryData::constant(&g, 1.0), &zero).unwrap();
        let ones = vec![1.0; op.dimension()];
        let mut y = vec![0.0; op.dimension()];
        op.apply(&ones, &mut y);
        for (lhs, rhs) in y.iter().zip(op.rhs_boundary_contribution()) {
            assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_non_positive_diffusion() {
        let g = grid(33);
        let a = Field::from_fn(&g, |x, _| if x > 0.5 { 0.0 } else { 1.0 });
        let z = Field::constant(&g, 0.0);
        let r = assemble(&a, &z, &BoundaryData::constant(&g, 0.0), &z);
        assert!(matches!(r, Err(QpatError::Coefficient(_))));
    }

    #[test]
    fn recovers_known_vector() {
        let g = grid(49);
        let a = Field::from_fn(&g, |x, y| 1.0 + 0.5 * (x * y).sin());
        let b = Field::constant(&g, 3.0);
        let z = Field::constant(&g, 0.0);
        let (op, _) = assemble(&a, &b, &BoundaryData::constant(&g, 0.0), &z).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w: Vec<f64> = (0..op.dimension()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut rhs = vec![0.0; w.len()];
        op.apply(&w, &mut rhs);
        let (u, rep) = solve(&op, &rhs, 1e-12, 5000).unwrap();
        assert!(rep.converged && rep.residual_norm <= 1e-12);
        let got = op.gather(&u);
        let err = got.iter().zip(&w).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn constant_is_harmonic() {
        let g = grid(65);
        let one = Field::constant(&g, 1.0);
        let zero = Field::constant(&g, 0.0);
        let (u, _) = solve_dirichlet(&one, &zero, &BoundaryData::constant(&g, 1.0), &zero).unwrap();
        for (_, v) in u.iter_valid() {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn maximum_principle() {
        let g = grid(65);
        let a = Field::from_fn(&g, |x, _| 1.0 + 0.5 * x);
        let b = Field::from_fn(&g, |_, y| 2.0 + y);
        let zero = Field::constant(&g, 0.0);
        let bd = BoundaryData::from_fn(&g, |p| 1.0 + (3.0 * p.angle).sin());
        let (u, _) = solve_dirichlet(&a, &b, &bd, &zero).unwrap();
        let (lo, hi) = (0.0, 2.0);
        assert!(u.min() >= lo - 1e-8 && u.max() <= hi + 1e-8);
    }

    #[test]
    fn indefinite_operator_falls_back() {
        let g = grid(33);
        let one = Field::constant(&g, 1.0);
        // -Δ - 20 is indefinite on the unit disc (eigenvalues 5.78, 14.68, 26.37, ...).
        let b = Field::constant(&g, -20.0);
        let f = Field::constant(&g, 1.0);
        let (u, rep) = solve_dirichlet(&one, &b, &BoundaryData::constant(&g, 0.0), &f).unwrap();
        assert_eq!(rep.method, Method::BiCgStab);
        assert!(rep.converged);
        assert!(u.iter_valid().all(|(_, v)| v.is_finite()));
    }

    #[test]
    fn repeat_solves_are_identical() {
        let g = grid(33);
        let a = Field::from_fn(&g, |x, _| 1.0 + x * x);
        let b = Field::constant(&g, 1.0);
        let bd = BoundaryData::from_fn(&g, |p| p.x);
        let r1 = solve_dirichlet(&a, &b, &bd, &b).unwrap();
        let r2 = solve_dirichlet(&a, &b, &bd, &b).unwrap();
        assert_eq!(r1.1, r2.1);
        assert_eq!(r1.0, r2.0);
    }

    #[test]
    fn bad_tolerance_is_rejected() {
        let g = grid(33);
        let one = Field::constant(&g, 1.0);
        let (op, rhs) = assemble(&one, &one, &BoundaryData::constant(&g, 1.0), &one).unwrap();
        assert!(matches!(solve(&op, &rhs, 0.5, 10), Err(QpatError::Config(_))));
        assert!(matches!(solve(&op, &rhs, 1e-10, 2), Err(QpatError::NotConverged { .. })));
    }

    #[test]
    fn interior_classes_are_unknowns() {
        let g = grid(33);
        let one = Field::constant(&g, 1.0);
        let (op, _) = assemble(&one, &one, &BoundaryData::constant(&g, 1.0), &one).unwrap();
        for k in 0..g.len() {
            if g.class(k) == NodeClass::Interior {
                assert!(op.unknown_of(k).is_some());
            }
        }
    }
}
