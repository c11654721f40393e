//! Reconstruction of `D` and `mu` from internal data.
//!
//! Ratios `v_j = H_{j+1} / H_1` satisfy `div(sigma grad v_j) = 0` with
//! `sigma = D u_1^2`, which gives the pointwise system `M grad(ln sigma) = N`.
//! `ln sigma` is integrated along paths from the boundary, `sqrt(D)` solves a
//! Schrödinger-type equation and `mu = H_1 sqrt(D) / sqrt(sigma)`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::calculus::{divergence, gradient, laplacian};
use crate::elliptic::{solve_dirichlet, SolveReport};
use crate::error::{QpatError, Result, Stage, StageExt};
use crate::field::{Field, Mask, VectorField2, SENTINEL};
use crate::forward::{DataSet, IlluminationSpec};
use crate::grid::{interpolate_periodic, BoundaryData, DiscGrid};
use crate::path::{path_integrate_with, PathOptions};
use crate::smooth::{local_quadratic_fit, local_quadratic_fit_anchored, Anchor};

/// Known boundary values of a coefficient as a function of angle.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryProfile {
    Constant(f64),
    /// `(angle, value)` samples, periodic linear interpolation in between.
    Samples(Vec<(f64, f64)>),
}

impl BoundaryProfile {
    pub fn value(&self, angle: f64) -> f64 {
        match self {
            BoundaryProfile::Constant(c) => *c,
            BoundaryProfile::Samples(s) => interpolate_periodic(s, angle),
        }
    }

    pub fn samples(mut samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(QpatError::config("boundary profile needs at least one sample"));
        }
        for s in &mut samples {
            if !(s.1 > 0.0 && s.1.is_finite() && s.0.is_finite()) {
                return Err(QpatError::config(format!("invalid boundary sample ({}, {})", s.0, s.1)));
            }
            s.0 = s.0.rem_euclid(TAU);
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(BoundaryProfile::Samples(samples))
    }

    fn validate(&self) -> Result<()> {
        match self {
            BoundaryProfile::Constant(c) if !(*c > 0.0 && c.is_finite()) => {
                Err(QpatError::config(format!("boundary D must be positive, got {c}")))
            }
            _ => Ok(()),
        }
    }
}

/// Fill rule for nodes outside the reliable region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fill {
    Value(f64),
    Average,
}

/// How the coefficient and source of the `sqrt(D)` equation are extended off the mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Completion {
    /// Values of a homogeneous background: `q = mu/D`, source `mu/sqrt(D)`.
    Background { d: f64, mu: f64 },
    /// Means over the reliable region.
    Average,
}

/// Subset of the disc used for error metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    All,
    YAbove(f64),
}

impl Region {
    pub fn contains(&self, _x: f64, y: f64) -> bool {
        match *self {
            Region::All => true,
            Region::YAbove(y0) => y > y0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    /// Absolute floor on smoothed `H_1`; `None` derives it from the data noise level.
    pub h1_threshold: Option<f64>,
    pub cond_threshold: f64,
    /// Floor on `|det M|` relative to its maximum over the candidate nodes.
    pub det_floor: f64,
    /// Width, in grid spacings, of the strip along the circle excluded from the mask.
    pub boundary_band: f64,
    pub smooth_width_data: f64,
    pub smooth_width_grad: f64,
    /// Width of the fit of `ln sigma` used for `q`; 0 takes `q` from `g` directly.
    pub smooth_width_q: f64,
    /// Weight of the exact boundary ratios in the derivative fits; 0 ignores them.
    pub boundary_anchor_weight: f64,
    pub n_path_starts: usize,
    pub completion: Completion,
    pub boundary_d: BoundaryProfile,
    pub error_region: Region,
}

impl ReconConfig {
    pub fn new(boundary_d: BoundaryProfile) -> Self {
        ReconConfig {
            h1_threshold: None,
            cond_threshold: 50.0,
            det_floor: 1e-2,
            boundary_band: 3.0,
            smooth_width_data: 0.0,
            smooth_width_grad: 0.01,
            smooth_width_q: 0.0,
            boundary_anchor_weight: 0.0,
            n_path_starts: 10,
            completion: Completion::Average,
            boundary_d,
            error_region: Region::YAbove(0.2),
        }
    }

    /// Defaults adjusted to the noise level recorded in `data`.
    pub fn for_data(boundary_d: BoundaryProfile, data: &DataSet) -> Self {
        let mut cfg = ReconConfig::new(boundary_d);
        if data.noise_level > 0.0 {
            cfg.smooth_width_data = 0.05;
            cfg.smooth_width_grad = 0.05;
            cfg.smooth_width_q = 0.05;
            cfg.boundary_anchor_weight = 5.0;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.h1_threshold {
            if !(t > 0.0 && t.is_finite()) {
                return Err(QpatError::config(format!("h1_threshold must be positive, got {t}")));
            }
        }
        if !(self.cond_threshold > 1.0) {
            return Err(QpatError::config(format!(
                "cond_threshold must exceed 1, got {}",
                self.cond_threshold
            )));
        }
        if !(0.0..1.0).contains(&self.det_floor) {
            return Err(QpatError::config(format!("det_floor must lie in [0, 1), got {}", self.det_floor)));
        }
        if !(self.boundary_band >= 0.0 && self.boundary_band.is_finite()) {
            return Err(QpatError::config("boundary_band must be >= 0"));
        }
        let widths = [self.smooth_width_data, self.smooth_width_grad, self.smooth_width_q];
        if !widths.iter().all(|w| *w >= 0.0 && w.is_finite()) {
            return Err(QpatError::config("smoothing widths must be >= 0"));
        }
        if !(self.boundary_anchor_weight >= 0.0 && self.boundary_anchor_weight.is_finite()) {
            return Err(QpatError::config("boundary_anchor_weight must be >= 0"));
        }
        if self.n_path_starts == 0 {
            return Err(QpatError::config("n_path_starts must be at least 1"));
        }
        if let Completion::Background { d, mu } = self.completion {
            if !(d > 0.0 && mu > 0.0) {
                return Err(QpatError::config("background completion needs positive D and mu"));
            }
        }
        self.boundary_d.validate()
    }

    /// Threshold on `H_1` actually used for `data`.
    pub fn resolved_h1_threshold(&self, data: &DataSet) -> f64 {
        self.h1_threshold.unwrap_or_else(|| {
            let max = data.h[0].max();
            if data.noise_level > 0.0 {
                5.0 * data.noise_level * max
            } else {
                1e-3 * max
            }
        })
    }
}

/// Pointwise system `M x = N` at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSystem {
    /// Rows are the gradients of the two ratio fields.
    pub m: [[f64; 2]; 2],
    pub n: [f64; 2],
    pub cond: f64,
    pub det: f64,
}

impl LocalSystem {
    pub fn new(m: [[f64; 2]; 2], n: [f64; 2]) -> Self {
        let (smax, smin) = singular_values(m);
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        LocalSystem {
            m,
            n,
            cond,
            det: m[0][0] * m[1][1] - m[0][1] * m[1][0],
        }
    }

    /// Solution by Gaussian elimination with partial pivoting.
    pub fn solve(&self) -> Option<[f64; 2]> {
        let [[a, b], [c, d]] = self.m;
        let [e, f] = self.n;
        let (a, b, c, d, e, f) = if c.abs() > a.abs() {
            (c, d, a, b, f, e)
        } else {
            (a, b, c, d, e, f)
        };
        if a == 0.0 {
            return None;
        }
        let l = c / a;
        let d2 = d - l * b;
        if d2 == 0.0 {
            return None;
        }
        let y = (f - l * e) / d2;
        let x = (e - b * y) / a;
        Some([x, y])
    }
}

/// Largest and smallest singular values of a 2x2 matrix.
pub fn singular_values(m: [[f64; 2]; 2]) -> (f64, f64) {
    let [[a, b], [c, d]] = m;
    // With E = (a+d)/2, F = (a-d)/2, G = (c+b)/2, H = (c-b)/2:
    // s = hypot(E, H) +- hypot(F, G).
    let q = (0.5 * (a + d)).hypot(0.5 * (c - b));
    let r = (0.5 * (a - d)).hypot(0.5 * (c + b));
    (q + r, (q - r).abs())
}

/// Per-node local systems on the grid of the ratio fields.
#[derive(Debug, Clone)]
pub struct LocalSystems {
    grid: Arc<DiscGrid>,
    systems: Vec<Option<LocalSystem>>,
}

impl LocalSystems {
    pub fn from_parts(grid: &Arc<DiscGrid>, systems: Vec<Option<LocalSystem>>) -> Result<Self> {
        if systems.len() != grid.len() {
            return Err(QpatError::config("one entry per grid node is required"));
        }
        Ok(LocalSystems {
            grid: Arc::clone(grid),
            systems,
        })
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    pub fn get(&self, idx: usize) -> Option<&LocalSystem> {
        self.systems[idx].as_ref()
    }

    /// Field of `|det M|`, sentinel where no system exists.
    pub fn abs_det(&self) -> Field {
        self.scalar(|s| s.det.abs())
    }

    pub fn cond(&self) -> Field {
        self.scalar(|s| s.cond)
    }

    fn scalar(&self, f: impl Fn(&LocalSystem) -> f64) -> Field {
        let values = self.systems.iter().map(|s| s.as_ref().map_or(SENTINEL, &f)).collect();
        Field::from_values(&self.grid, values).expect("sizes agree")
    }
}

/// Smoothing of positive data in the log domain; identity for width 0.
fn smooth_data(f: &Field, width: f64) -> Field {
    if width > 0.0 {
        let ln = f.map(|x| if x > 0.0 { x.ln() } else { SENTINEL });
        local_quadratic_fit(&ln, width).value.map(f64::exp)
    } else {
        f.clone()
    }
}

/// `v_j = smooth(H_{j+1}) / smooth(H_1)` where `smooth(H_1)` exceeds the threshold.
pub fn ratio_fields(data: &DataSet, cfg: &ReconConfig) -> Result<Vec<Field>> {
    data.validate()?;
    let threshold = cfg.resolved_h1_threshold(data);
    let h1 = smooth_data(&data.h[0], cfg.smooth_width_data);
    let reliable = h1.map(|v| if v > threshold { v } else { SENTINEL });
    if reliable.iter_valid().next().is_none() {
        return Err(QpatError::EmptyRegion(format!(
            "no node has H1 above the threshold {threshold:.4e}"
        )));
    }
    Ok(data.h[1..]
        .iter()
        .map(|h| smooth_data(h, cfg.smooth_width_data).zip_map(&reliable, |a, b| a / b))
        .collect())
}

/// Builds `M` from the gradients of the first two ratio fields and `N = -Δv`.
///
/// Derivatives are taken of `ln v`, which varies far more slowly than `v`:
/// `grad v = v grad(ln v)` and `Δv = v (Δ ln v + |grad ln v|^2)`. With a positive
/// `smooth_width_grad` they come from local quadratic fits, otherwise from
/// finite differences.
pub fn local_systems(v: &[Field], smooth_width_grad: f64, anchors: &[Vec<Anchor>], anchor_weight: f64) -> Result<LocalSystems> {
    if v.len() < 2 {
        return Err(QpatError::config("two ratio fields are needed in 2D"));
    }
    let grid = Arc::clone(v[0].grid());
    let parts: Vec<(Field, VectorField2, Field)> = v[..2]
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let ln = f.map(|x| if x > 0.0 { x.ln() } else { SENTINEL });
            if smooth_width_grad > 0.0 {
                let pts = anchors.get(j).map_or(&[][..], |a| &a[..]);
                let fit = local_quadratic_fit_anchored(&ln, smooth_width_grad, pts, anchor_weight);
                let grad = VectorField2::new(fit.dx.clone(), fit.dy.clone()).expect("fit fields share support");
                (fit.value.map(f64::exp), grad, fit.laplacian())
            } else {
                (f.clone(), gradient(&ln), laplacian(&ln, None))
            }
        })
        .collect();
    let systems = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let mut m = [[0.0; 2]; 2];
            let mut n = [0.0; 2];
            for (j, (val, grad, lap)) in parts.iter().enumerate() {
                let (gx, gy) = grad.get(k)?;
                let (v, l) = (val.get(k), lap.get(k));
                if !(v.is_finite() && l.is_finite()) {
                    return None;
                }
                m[j] = [v * gx, v * gy];
                n[j] = -v * (l + gx * gx + gy * gy);
            }
            Some(LocalSystem::new(m, n))
        })
        .collect();
    LocalSystems::from_parts(&grid, systems)
}

/// `ln(g_{j+1}/g_1)` at every boundary point of the grid: exact values of
/// `ln v_j` on the circle, independent of the coefficients.
pub fn boundary_log_ratios(grid: &DiscGrid, illuminations: &[IlluminationSpec]) -> Vec<Vec<Anchor>> {
    let Some(first) = illuminations.first() else {
        return Vec::new();
    };
    illuminations[1..]
        .iter()
        .map(|spec| {
            grid.boundary_points()
                .iter()
                .map(|p| Anchor {
                    x: p.x,
                    y: p.y,
                    value: (spec.value(p.angle) / first.value(p.angle)).ln(),
                })
                .collect()
        })
        .collect()
}

/// Depth below the circle within which a mask node counts as touching the boundary.
fn contact_depth(grid: &DiscGrid, band: f64) -> f64 {
    (band + 1.5) * grid.h()
}

/// Nodes with enough light and a well-conditioned system, reduced to the
/// largest connected piece touching the boundary strip.
pub fn reliable_region(systems: &LocalSystems, h1: &Field, threshold: f64, cfg: &ReconConfig) -> Result<Mask> {
    let grid = systems.grid();
    let band = cfg.boundary_band * grid.h();
    let max_det = (0..grid.len())
        .filter_map(|k| systems.get(k))
        .filter(|s| s.cond <= cfg.cond_threshold && s.det.is_finite())
        .map(|s| s.det.abs())
        .fold(0.0, f64::max);
    let det_min = cfg.det_floor * max_det;
    let candidate = Mask::from_fn(grid, |k| {
        h1.get(k) > threshold
            && grid.depth(k) >= band
            && systems
                .get(k)
                .is_some_and(|s| s.cond <= cfg.cond_threshold && s.det.abs() >= det_min && s.det.abs() > 0.0)
    });
    let touch = contact_depth(grid, cfg.boundary_band);
    let best = candidate
        .components()
        .into_iter()
        .filter(|c| c.iter().any(|&k| grid.depth(k) <= touch))
        .max_by_key(|c| c.len())
        .ok_or_else(|| QpatError::EmptyRegion("no well-conditioned region touches the boundary".into()))?;
    let mut mask = Mask::from_fn(grid, |_| false);
    for k in best {
        mask.set(k, true);
    }
    Ok(mask)
}

/// Solves every masked local system for `grad(ln sigma)`.
pub fn solve_grad_ln_sigma(systems: &LocalSystems, mask: &Mask) -> VectorField2 {
    let grid = systems.grid();
    let sol: Vec<Option<[f64; 2]>> = (0..grid.len())
        .into_par_iter()
        .map(|k| if mask.get(k) { systems.get(k)?.solve() } else { None })
        .collect();
    let x = sol.iter().map(|s| s.map_or(SENTINEL, |s| s[0])).collect();
    let y = sol.iter().map(|s| s.map_or(SENTINEL, |s| s[1])).collect();
    VectorField2::new(
        Field::from_values(grid, x).expect("sizes agree"),
        Field::from_values(grid, y).expect("sizes agree"),
    )
    .expect("same sentinel pattern")
}

/// Angles of `count` start points spread over the arc of the circle next to the mask.
pub fn boundary_arc_starts(mask: &Mask, band: f64, count: usize) -> Result<Vec<f64>> {
    let grid = mask.grid();
    let touch = contact_depth(grid, band);
    let mut angles: Vec<f64> = mask
        .indices()
        .filter(|&k| grid.depth(k) <= touch)
        .map(|k| {
            let (x, y) = grid.coords(k);
            y.atan2(x).rem_euclid(TAU)
        })
        .collect();
    if angles.is_empty() {
        return Err(QpatError::EmptyRegion("reliable region does not touch the boundary".into()));
    }
    angles.sort_by(f64::total_cmp);
    // The arc is the complement of the widest angular gap.
    let mut start = angles[0];
    let mut gap = angles[0] + TAU - angles[angles.len() - 1];
    for w in angles.windows(2) {
        if w[1] - w[0] > gap {
            gap = w[1] - w[0];
            start = w[1];
        }
    }
    let span = TAU - gap;
    Ok((0..count)
        .map(|k| (start + span * (k as f64 + 0.5) / count as f64).rem_euclid(TAU))
        .collect())
}

/// Result of [`integrate_ln_sigma`].
#[derive(Debug, Clone)]
pub struct LnSigma {
    pub ln_sigma: Field,
    /// Reliable mask minus unreachable nodes.
    pub mask: Mask,
    pub dropped: usize,
    /// Mean over nodes of the standard deviation between path estimates.
    pub mean_path_spread: f64,
    pub start_angles: Vec<f64>,
}

/// Averages `ln sigma(start) + ∫ g · dl` over straight paths from the boundary arc.
pub fn integrate_ln_sigma(
    g: &VectorField2,
    mask: &Mask,
    ln_sigma_boundary: impl Fn(f64) -> f64 + Sync,
    n_path_starts: usize,
    band: f64,
) -> Result<LnSigma> {
    let grid = g.grid();
    let r = grid.radius();
    let starts = boundary_arc_starts(mask, band, n_path_starts)?;
    let opts = PathOptions {
        head_gap: band + 1.5,
        ..PathOptions::default()
    };
    let starts_xy: Vec<((f64, f64), f64)> = starts
        .iter()
        .map(|&a| ((r * a.cos(), r * a.sin()), ln_sigma_boundary(a)))
        .collect();
    let estimates: Vec<Option<(f64, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            if !mask.get(k) {
                return None;
            }
            let target = grid.coords(k);
            let vals: Vec<f64> = starts_xy
                .iter()
                .filter_map(|&(s, l0)| path_integrate_with(g, s, target, &opts).ok().map(|i| l0 + i))
                .collect();
            if vals.is_empty() {
                return None;
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
            Some((m, var.sqrt()))
        })
        .collect();
    let mut out = mask.clone();
    let mut dropped = 0;
    let mut spread = 0.0;
    let mut values = vec![SENTINEL; grid.len()];
    for k in mask.indices() {
        match estimates[k] {
            Some((m, s)) => {
                values[k] = m;
                spread += s;
            }
            None => {
                out.set(k, false);
                dropped += 1;
            }
        }
    }
    let kept = out.count();
    if kept == 0 {
        return Err(QpatError::EmptyRegion("no node is reachable from the boundary arc".into()));
    }
    Ok(LnSigma {
        ln_sigma: Field::from_values(grid, values)?,
        mask: out,
        dropped,
        mean_path_spread: spread / kept as f64,
        start_angles: starts,
    })
}

/// `q = Δsqrt(sigma)/sqrt(sigma) = |g|^2/4 + div(g)/2` for `g = grad(ln sigma)`.
pub fn helmholtz_coefficient(g: &VectorField2, mask: &Mask, smooth_width_grad: f64) -> Field {
    let gm = g.masked(mask);
    if smooth_width_grad > 0.0 {
        let fx = local_quadratic_fit(&gm.x, smooth_width_grad);
        let fy = local_quadratic_fit(&gm.y, smooth_width_grad);
        let n2 = fx.value.zip_map(&fy.value, |a, b| a * a + b * b);
        let div = fx.dx.zip_map(&fy.dy, |a, b| a + b);
        return n2.zip_map(&div, |n2, d| 0.25 * n2 + 0.5 * d).masked(mask);
    }
    let div = divergence(&gm);
    gm.norm_squared().zip_map(&div, |n2, d| 0.25 * n2 + 0.5 * d).masked(mask)
}

/// Same coefficient from a quadratic fit of the integrated `ln sigma`. Path
/// averaging has already removed much of the noise in `g`, so this avoids
/// differentiating it again.
pub fn helmholtz_coefficient_from_ln_sigma(ln_sigma: &Field, mask: &Mask, width: f64) -> Field {
    let fit = local_quadratic_fit(&ln_sigma.masked(mask), width);
    let n2 = fit.dx.zip_map(&fit.dy, |a, b| a * a + b * b);
    n2.zip_map(&fit.laplacian(), |n2, l| 0.25 * n2 + 0.5 * l).masked(mask)
}

/// Keeps `f` on the mask (where finite) and fills every other disc node.
pub fn complete_field(f: &Field, mask: &Mask, fill: Fill) -> Result<Field> {
    let known = f.masked(mask);
    let value = match fill {
        Fill::Value(v) => v,
        Fill::Average => known
            .mean(None)
            .ok_or_else(|| QpatError::EmptyRegion("nothing to average for completion".into()))?,
    };
    let values = known
        .values()
        .iter()
        .map(|&v| if v.is_finite() { v } else { value })
        .collect();
    Field::from_values(f.grid(), values)
}

/// Solution of [`solve_sqrt_d`].
#[derive(Debug, Clone)]
pub struct SqrtD {
    pub w: Field,
    pub report: SolveReport,
    pub clamped: usize,
}

/// Solves `-Δw + q w = source` with `w = sqrt(D)` on the circle; negative values are clamped to 0.
pub fn solve_sqrt_d(q: &Field, source: &Field, boundary_d: &BoundaryProfile) -> Result<SqrtD> {
    let grid = q.grid();
    let g = BoundaryData::from_fn(grid, |p| boundary_d.value(p.angle).sqrt());
    let (w, report) = solve_dirichlet(&Field::constant(grid, 1.0), q, &g, source)?;
    let clamped = w.iter_valid().filter(|&(_, v)| v < 0.0).count();
    Ok(SqrtD {
        w: w.map(|v| v.max(0.0)),
        report,
        clamped,
    })
}

/// `mu = H_1 w / sqrt(sigma)` on the mask.
pub fn recover_mu(h1: &Field, sqrt_d: &Field, sigma: &Field, mask: &Mask) -> Field {
    h1.zip_map(sqrt_d, |h, w| h * w)
        .zip_map(sigma, |hw, s| hw / s.sqrt())
        .masked(mask)
}

/// Relative discrete l2 error over region nodes where both fields are defined.
pub fn relative_error(recon: &Field, truth: &Field, region: Region) -> Result<f64> {
    let grid = recon.grid();
    if !grid.same_shape(truth.grid()) {
        return Err(QpatError::config(format!(
            "fields live on different grids (n={} and n={})",
            grid.n(),
            truth.grid().n()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut count = 0usize;
    for (k, r) in recon.iter_valid() {
        let t = truth.get(k);
        let (x, y) = grid.coords(k);
        if !t.is_finite() || !region.contains(x, y) {
            continue;
        }
        num += (r - t) * (r - t);
        den += t * t;
        count += 1;
    }
    if count == 0 {
        return Err(QpatError::EmptyRegion("error region contains no reconstructed node".into()));
    }
    if den == 0.0 {
        return Err(QpatError::config("reference field vanishes on the error region"));
    }
    Ok((num / den).sqrt())
}

/// Per-stage summary of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub h1_threshold: f64,
    pub cond_threshold: f64,
    pub candidate_nodes: usize,
    pub mask_nodes: usize,
    pub dropped_nodes: usize,
    pub min_abs_det: f64,
    pub max_cond: f64,
    pub mean_path_spread: f64,
    pub grad_ln_sigma_norm: f64,
    pub q_mean: f64,
    pub q_fill: f64,
    pub source_fill: f64,
    pub clamped_nodes: usize,
    pub sqrt_d_solve: SolveReport,
    pub d_norm: f64,
    pub mu_norm: f64,
}

impl Diagnostics {
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("h1_threshold", format!("{:.6e}", self.h1_threshold)),
            ("cond_threshold", format!("{}", self.cond_threshold)),
            ("candidate_nodes", self.candidate_nodes.to_string()),
            ("mask_nodes", self.mask_nodes.to_string()),
            ("dropped_nodes", self.dropped_nodes.to_string()),
            ("min_abs_det", format!("{:.6e}", self.min_abs_det)),
            ("max_cond", format!("{:.6}", self.max_cond)),
            ("mean_path_spread", format!("{:.6e}", self.mean_path_spread)),
            ("grad_ln_sigma_norm", format!("{:.6e}", self.grad_ln_sigma_norm)),
            ("q_mean", format!("{:.6}", self.q_mean)),
            ("q_fill", format!("{:.6}", self.q_fill)),
            ("source_fill", format!("{:.6}", self.source_fill)),
            ("clamped_nodes", self.clamped_nodes.to_string()),
            ("sqrt_d_method", format!("{:?}", self.sqrt_d_solve.method)),
            ("sqrt_d_iterations", self.sqrt_d_solve.iterations.to_string()),
            ("sqrt_d_residual", format!("{:.3e}", self.sqrt_d_solve.residual_norm)),
            ("d_norm", format!("{:.6e}", self.d_norm)),
            ("mu_norm", format!("{:.6e}", self.mu_norm)),
        ]
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.key_values() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReconResult {
    pub sigma: Field,
    pub grad_ln_sigma: VectorField2,
    pub q: Field,
    /// Full-disc solution of the `sqrt(D)` equation.
    pub sqrt_d: Field,
    /// `sqrt_d^2` on the reliable mask.
    pub d: Field,
    pub mu: Field,
    pub reliable_mask: Mask,
    pub systems: LocalSystems,
    pub diagnostics: Diagnostics,
}

fn ln_sigma_on_boundary<'a>(
    boundary_d: &'a BoundaryProfile,
    g1: &IlluminationSpec,
) -> impl Fn(f64) -> f64 + Sync + 'a {
    let g1 = *g1;
    move |a| (boundary_d.value(a) * g1.value(a).powi(2)).ln()
}

/// Runs every stage in order.
pub fn run_pipeline(data: &DataSet, cfg: &ReconConfig) -> Result<ReconResult> {
    cfg.validate()?;
    data.validate()?;
    let threshold = cfg.resolved_h1_threshold(data);
    let v = ratio_fields(data, cfg).stage(Stage::Ratios)?;
    let anchors = boundary_log_ratios(&data.grid, &data.illuminations);
    let systems =
        local_systems(&v, cfg.smooth_width_grad, &anchors, cfg.boundary_anchor_weight).stage(Stage::LocalSystems)?;
    let h1 = smooth_data(&data.h[0], cfg.smooth_width_data);
    let mask = reliable_region(&systems, &h1, threshold, cfg).stage(Stage::ReliableRegion)?;
    let candidate_nodes = v[0].coverage().count();

    let g = solve_grad_ln_sigma(&systems, &mask);
    let boundary = ln_sigma_on_boundary(&cfg.boundary_d, &data.illuminations[0]);
    let ln = integrate_ln_sigma(&g, &mask, boundary, cfg.n_path_starts, cfg.boundary_band)
        .stage(Stage::IntegrateLnSigma)?;
    let mask = ln.mask.clone();
    let g = g.masked(&mask);
    let sigma = ln.ln_sigma.map(f64::exp);

    let q = if cfg.smooth_width_q > 0.0 {
        helmholtz_coefficient_from_ln_sigma(&ln.ln_sigma, &mask, cfg.smooth_width_q)
    } else {
        helmholtz_coefficient(&g, &mask, cfg.smooth_width_grad)
    };
    let q_mean = q
        .mean(Some(&mask))
        .ok_or_else(|| QpatError::EmptyRegion("no coefficient value on the mask".into()))
        .stage(Stage::Coefficient)?;
    let source = h1.zip_map(&sigma, |h, s| h / s.sqrt());
    let (q_fill, s_fill) = match cfg.completion {
        Completion::Background { d, mu } => (Fill::Value(mu / d), Fill::Value(mu / d.sqrt())),
        Completion::Average => (Fill::Average, Fill::Average),
    };
    let q_full = complete_field(&q, &mask, q_fill).stage(Stage::SqrtD)?;
    let source_full = complete_field(&source, &mask, s_fill).stage(Stage::SqrtD)?;
    let fill_value = |full: &Field| {
        full.grid()
            .non_exterior()
            .find(|&k| !mask.get(k))
            .map_or(f64::NAN, |k| full.get(k))
    };
    let sqrt_d = solve_sqrt_d(&q_full, &source_full, &cfg.boundary_d).stage(Stage::SqrtD)?;

    let mu = recover_mu(&h1, &sqrt_d.w, &sigma, &mask);
    let d = sqrt_d.w.map(|w| w * w).masked(&mask);
    let diagnostics = Diagnostics {
        h1_threshold: threshold,
        cond_threshold: cfg.cond_threshold,
        candidate_nodes,
        mask_nodes: mask.count(),
        dropped_nodes: ln.dropped,
        min_abs_det: systems.abs_det().masked(&mask).min(),
        max_cond: systems.cond().masked(&mask).max(),
        mean_path_spread: ln.mean_path_spread,
        grad_ln_sigma_norm: g.norm_squared().map(f64::sqrt).norm_l2(),
        q_mean,
        q_fill: fill_value(&q_full),
        source_fill: fill_value(&source_full),
        clamped_nodes: sqrt_d.clamped,
        sqrt_d_solve: sqrt_d.report.clone(),
        d_norm: d.norm_l2(),
        mu_norm: mu.norm_l2(),
    };
    Ok(ReconResult {
        sigma: sigma.masked(&mask),
        grad_ln_sigma: g,
        q,
        sqrt_d: sqrt_d.w,
        d,
        mu,
        reliable_mask: mask,
        systems,
        diagnostics,
    })
}
