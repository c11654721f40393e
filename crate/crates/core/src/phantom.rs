//! Test media: piecewise-constant shapes, their smoothed versions, raster imports.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{QpatError, Result};
use crate::field::{Field, SENTINEL};
use crate::grid::DiscGrid;
use crate::io::pgm::{read_pgm, GrayImage};
use crate::smooth::gaussian_smooth;

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    /// Axis-aligned, corners `(x0, y0)` and `(x1, y1)` with `x0 < x1`, `y0 < y1`.
    Rectangle { x0: f64, y0: f64, x1: f64, y1: f64 },
    Disc { cx: f64, cy: f64, r: f64 },
    /// Vertices in counterclockwise order.
    Triangle { a: (f64, f64), b: (f64, f64), c: (f64, f64) },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    pub value: f64,
}

fn cross(o: (f64, f64), p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - o.0) * (q.1 - o.1) - (p.1 - o.1) * (q.0 - o.0)
}

impl Shape {
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64, value: f64) -> Self {
        Shape {
            kind: ShapeKind::Rectangle { x0, y0, x1, y1 },
            value,
        }
    }

    pub fn disc(cx: f64, cy: f64, r: f64, value: f64) -> Self {
        Shape {
            kind: ShapeKind::Disc { cx, cy, r },
            value,
        }
    }

    pub fn triangle(a: (f64, f64), b: (f64, f64), c: (f64, f64), value: f64) -> Self {
        Shape {
            kind: ShapeKind::Triangle { a, b, c },
            value,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self.kind {
            ShapeKind::Rectangle { x0, y0, x1, y1 } => x >= x0 && x <= x1 && y >= y0 && y <= y1,
            ShapeKind::Disc { cx, cy, r } => (x - cx).hypot(y - cy) <= r,
            ShapeKind::Triangle { a, b, c } => {
                let p = (x, y);
                cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
            }
        }
    }

    /// Checks the geometry and that the shape lies inside the disc of `radius`.
    pub fn validate(&self, radius: f64) -> Result<()> {
        if !(self.value > 0.0 && self.value.is_finite()) {
            return Err(QpatError::config(format!("shape value must be positive, got {}", self.value)));
        }
        let inside = |p: (f64, f64)| p.0.hypot(p.1) <= radius;
        let ok = match self.kind {
            ShapeKind::Rectangle { x0, y0, x1, y1 } => {
                if !(x0 < x1 && y0 < y1) {
                    return Err(QpatError::config("rectangle corners must satisfy x0 < x1, y0 < y1"));
                }
                [(x0, y0), (x1, y0), (x0, y1), (x1, y1)].into_iter().all(inside)
            }
            ShapeKind::Disc { cx, cy, r } => {
                if !(r > 0.0) {
                    return Err(QpatError::config("disc radius must be positive"));
                }
                cx.hypot(cy) + r <= radius
            }
            ShapeKind::Triangle { a, b, c } => {
                if !(cross(a, b, c) > 0.0) {
                    return Err(QpatError::config("triangle vertices must be counterclockwise"));
                }
                [a, b, c].into_iter().all(inside)
            }
        };
        if !ok {
            return Err(QpatError::config(format!("shape {:?} extends outside the disc", self.kind)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub background: f64,
    /// Later shapes overwrite earlier ones.
    pub shapes: Vec<Shape>,
    /// Gaussian smoothing width; 0 keeps the medium piecewise constant.
    pub smooth_width: f64,
}

impl PhantomSpec {
    pub fn homogeneous(value: f64) -> Self {
        PhantomSpec {
            background: value,
            shapes: Vec::new(),
            smooth_width: 0.0,
        }
    }

    pub fn validate(&self, radius: f64) -> Result<()> {
        if !(self.background > 0.0 && self.background.is_finite()) {
            return Err(QpatError::config(format!("background must be positive, got {}", self.background)));
        }
        if !(self.smooth_width >= 0.0 && self.smooth_width.is_finite()) {
            return Err(QpatError::config("smooth_width must be >= 0"));
        }
        self.shapes.iter().try_for_each(|s| s.validate(radius))
    }

    /// Value of the unsmoothed medium at a point.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        self.shapes
            .iter()
            .rev()
            .find(|s| s.contains(x, y))
            .map_or(self.background, |s| s.value)
    }
}

pub fn rasterize(spec: &PhantomSpec, grid: &Arc<DiscGrid>) -> Result<Field> {
    spec.validate(grid.radius())?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            if grid.is_exterior(k) {
                return SENTINEL;
            }
            let (x, y) = grid.coords(k);
            spec.value_at(x, y)
        })
        .collect();
    let f = Field::from_values(grid, values)?;
    Ok(gaussian_smooth(&f, spec.smooth_width))
}

/// Which coefficient of a preset medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    D,
    Mu,
}

pub const PHANTOM_A_BACKGROUND_D: f64 = 0.2;
pub const PHANTOM_A_BACKGROUND_MU: f64 = 20.0;
pub const PHANTOM_A_SMOOTH_WIDTH: f64 = 0.04;

/// Canonical layout "phantom-A": rectangles and discs in the upper half of the
/// unit disc. `mu` has an extra rectangle near the top and a triangle; `D` has
/// neither. Representative, not a copy of any published geometry.
pub fn phantom_a(which: Coefficient, smooth: bool) -> PhantomSpec {
    let smooth_width = if smooth { PHANTOM_A_SMOOTH_WIDTH } else { 0.0 };
    let shapes = match which {
        Coefficient::D => vec![
            Shape::disc(-0.4, 0.45, 0.1, 0.35),
            Shape::rectangle(0.2, 0.32, 0.45, 0.48, 0.1),
            Shape::disc(0.0, 0.5, 0.08, 0.35),
        ],
        Coefficient::Mu => vec![
            Shape::disc(-0.4, 0.45, 0.1, 10.0),
            Shape::rectangle(0.2, 0.32, 0.45, 0.48, 35.0),
            Shape::disc(0.0, 0.5, 0.08, 10.0),
            Shape::rectangle(-0.12, 0.72, 0.12, 0.84, 35.0),
            Shape::triangle((0.15, 0.6), (0.45, 0.6), (0.3, 0.78), 10.0),
        ],
    };
    let background = match which {
        Coefficient::D => PHANTOM_A_BACKGROUND_D,
        Coefficient::Mu => PHANTOM_A_BACKGROUND_MU,
    };
    PhantomSpec {
        background,
        shapes,
        smooth_width,
    }
}

/// Preset by name: `smooth-A`, `discontinuous-A` or `homogeneous`.
pub fn preset(name: &str, which: Coefficient) -> Result<PhantomSpec> {
    match name {
        "smooth-A" => Ok(phantom_a(which, true)),
        "discontinuous-A" => Ok(phantom_a(which, false)),
        "homogeneous" => Ok(PhantomSpec::homogeneous(match which {
            Coefficient::D => PHANTOM_A_BACKGROUND_D,
            Coefficient::Mu => PHANTOM_A_BACKGROUND_MU,
        })),
        other => Err(QpatError::config(format!(
            "unknown preset '{other}' (expected smooth-A, discontinuous-A or homogeneous)"
        ))),
    }
}

/// Maps a graymap onto the grid: gray levels scale affinely onto `value_range`,
/// the image is centred on the disc with its longer side spanning the diameter,
/// and nodes the image does not cover get `background`.
pub fn raster_to_field(
    img: &GrayImage,
    background: f64,
    value_range: (f64, f64),
    grid: &Arc<DiscGrid>,
) -> Result<Field> {
    let (lo, hi) = value_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(QpatError::config(format!("invalid value range ({lo}, {hi})")));
    }
    let r = grid.radius();
    let pixel = 2.0 * r / img.width.max(img.height) as f64;
    let (half_w, half_h) = (0.5 * img.width as f64 * pixel, 0.5 * img.height as f64 * pixel);
    let level = |c: usize, row: usize| lo + (hi - lo) * img.get(c, row) as f64 / img.maxval as f64;
    let values = (0..grid.len())
        .map(|k| {
            if grid.is_exterior(k) {
                return SENTINEL;
            }
            let (x, y) = grid.coords(k);
            if x.abs() > half_w + 1e-12 || y.abs() > half_h + 1e-12 {
                return background;
            }
            // Continuous pixel coordinates, pixel centres at integers.
            let u = ((x + half_w) / pixel - 0.5).clamp(0.0, (img.width - 1) as f64);
            let v = ((half_h - y) / pixel - 0.5).clamp(0.0, (img.height - 1) as f64);
            let (c0, r0) = (u.floor() as usize, v.floor() as usize);
            let (c1, r1) = ((c0 + 1).min(img.width - 1), (r0 + 1).min(img.height - 1));
            let (tu, tv) = (u - c0 as f64, v - r0 as f64);
            (1.0 - tu) * (1.0 - tv) * level(c0, r0)
                + tu * (1.0 - tv) * level(c1, r0)
                + (1.0 - tu) * tv * level(c0, r1)
                + tu * tv * level(c1, r1)
        })
        .collect();
    Field::from_values(grid, values)
}

pub fn import_raster(
    path: &Path,
    background: f64,
    value_range: (f64, f64),
    grid: &Arc<DiscGrid>,
) -> Result<Field> {
    raster_to_field(&read_pgm(path)?, background, value_range, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Arc<DiscGrid> {
        Arc::new(DiscGrid::new(n, 1.0).unwrap())
    }

    #[test]
    fn empty_spec_is_constant() {
        let f = rasterize(&PhantomSpec::homogeneous(0.2), &grid(33)).unwrap();
        assert!(f.iter_valid().all(|(_, v)| v == 0.2));
    }

    #[test]
    fn disc_membership() {
        let g = grid(65);
        let spec = PhantomSpec {
            background: 0.2,
            shapes: vec![Shape::disc(0.0, 0.0, 0.3, 0.35)],
            smooth_width: 0.0,
        };
        let f = rasterize(&spec, &g).unwrap();
        assert_eq!(f.at(32, 32), 0.35);
        assert_eq!(f.at(48, 48), 0.2);
    }

    #[test]
    fn smoothed_disc_is_bounded_and_monotone_along_a_ray() {
        let g = grid(129);
        let spec = PhantomSpec {
            background: 0.2,
            shapes: vec![Shape::disc(0.0, 0.0, 0.3, 0.35)],
            smooth_width: 0.05,
        };
        let f = rasterize(&spec, &g).unwrap();
        assert!(f.min() >= 0.2 - 1e-12 && f.max() <= 0.35 + 1e-12);
        let ray: Vec<f64> = (64..110).map(|i| f.at(i, 64)).collect();
        assert!(ray.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn later_shapes_win() {
        let spec = PhantomSpec {
            background: 1.0,
            shapes: vec![Shape::disc(0.0, 0.0, 0.5, 2.0), Shape::disc(0.0, 0.0, 0.2, 3.0)],
            smooth_width: 0.0,
        };
        assert_eq!(spec.value_at(0.0, 0.0), 3.0);
        assert_eq!(spec.value_at(0.3, 0.0), 2.0);
        assert_eq!(spec.value_at(0.6, 0.0), 1.0);
    }

    #[test]
    fn triangle_half_planes() {
        let t = Shape::triangle((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), 1.0);
        assert!(t.contains(0.2, 0.2));
        assert!(!t.contains(0.6, 0.6));
        assert!(Shape::triangle((0.0, 0.0), (0.0, 0.5), (0.5, 0.0), 1.0).validate(1.0).is_err());
    }

    #[test]
    fn shapes_outside_the_disc_are_rejected() {
        let spec = PhantomSpec {
            background: 0.2,
            shapes: vec![Shape::disc(0.8, 0.0, 0.3, 0.35)],
            smooth_width: 0.0,
        };
        assert!(matches!(rasterize(&spec, &grid(33)), Err(QpatError::Config(_))));
        let rect = Shape::rectangle(0.5, 0.5, 0.9, 0.9, 1.0);
        assert!(rect.validate(1.0).is_err());
    }

    #[test]
    fn phantom_a_structure() {
        let g = grid(129);
        let d = rasterize(&phantom_a(Coefficient::D, false), &g).unwrap();
        let mu = rasterize(&phantom_a(Coefficient::Mu, false), &g).unwrap();
        for (_, v) in d.iter_valid() {
            assert!([0.1, 0.2, 0.35].contains(&v));
        }
        for (_, v) in mu.iter_valid() {
            assert!([10.0, 20.0, 35.0].contains(&v));
        }
        assert_eq!((d.min(), d.max()), (0.1, 0.35));
        assert_eq!((mu.min(), mu.max()), (10.0, 35.0));
        // Top rectangle and triangle only in mu.
        let d_spec = phantom_a(Coefficient::D, false);
        assert_eq!(d_spec.value_at(0.0, 0.78), 0.2);
        assert_eq!(phantom_a(Coefficient::Mu, false).value_at(0.0, 0.78), 35.0);
        assert_eq!(d_spec.value_at(0.3, 0.65), 0.2);
        assert_eq!(phantom_a(Coefficient::Mu, false).value_at(0.3, 0.65), 10.0);
        let smooth = rasterize(&phantom_a(Coefficient::D, true), &g).unwrap();
        assert!(smooth.min() >= 0.1 - 1e-12 && smooth.max() <= 0.35 + 1e-12);
    }

    #[test]
    fn raster_levels_and_mean() {
        let g = grid(65);
        let flat = |p: u8| GrayImage {
            width: 4,
            height: 4,
            maxval: 255,
            pixels: vec![p; 16],
        };
        let lo = raster_to_field(&flat(0), 0.0, (0.1, 0.35), &g).unwrap();
        assert!(lo.iter_valid().all(|(_, v)| (v - 0.1).abs() < 1e-15));
        let hi = raster_to_field(&flat(255), 0.0, (0.1, 0.35), &g).unwrap();
        assert!(hi.iter_valid().all(|(_, v)| (v - 0.35).abs() < 1e-15));
        let checker = GrayImage {
            width: 2,
            height: 2,
            maxval: 255,
            pixels: vec![0, 255, 255, 0],
        };
        let f = raster_to_field(&checker, 0.0, (10.0, 30.0), &g).unwrap();
        assert!(f.min() >= 10.0 && f.max() <= 30.0);
        let mean = f.mean(None).unwrap();
        assert!((mean / 20.0 - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn unreadable_raster_is_an_io_error() {
        let e = import_raster(Path::new("/nonexistent/vessel.pgm"), 0.2, (0.1, 0.3), &grid(33)).unwrap_err();
        assert_eq!(e.exit_code(), 5);
    }
}
