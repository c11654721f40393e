//! Synthetic internal data: solve the diffusion equation for each boundary
//! illumination on a fine grid, form `H = mu u`, transfer to the measurement grid.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::elliptic::{solve_dirichlet, SolveReport};
use crate::error::{QpatError, Result};
use crate::field::Field;
use crate::grid::{BoundaryData, DiscGrid};
use crate::sample::restrict;

/// Gaussian-in-angle boundary source `floor + amplitude * exp(-d^2 / (2 std^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlluminationSpec {
    pub peak_angle: f64,
    pub std: f64,
    pub amplitude: f64,
    pub floor: f64,
}

/// Relative floor added to every illumination so the source is positive on the whole circle.
pub const DEFAULT_FLOOR_FRACTION: f64 = 0.05;

impl IlluminationSpec {
    pub fn new(peak_angle: f64, std: f64) -> Result<Self> {
        Self::with_levels(peak_angle, std, 1.0, DEFAULT_FLOOR_FRACTION)
    }

    pub fn with_levels(peak_angle: f64, std: f64, amplitude: f64, floor: f64) -> Result<Self> {
        let spec = IlluminationSpec {
            peak_angle,
            std,
            amplitude,
            floor,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std > 0.0 && self.std.is_finite()) {
            return Err(QpatError::config(format!("illumination std must be positive, got {}", self.std)));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(QpatError::config(format!(
                "illumination amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if !(self.floor >= 0.0 && self.floor.is_finite()) {
            return Err(QpatError::config(format!("illumination floor must be >= 0, got {}", self.floor)));
        }
        if !self.peak_angle.is_finite() {
            return Err(QpatError::config("illumination peak angle must be finite"));
        }
        Ok(())
    }

    /// Source value at polar angle `angle`.
    pub fn value(&self, angle: f64) -> f64 {
        let d = wrapped_distance(angle, self.peak_angle);
        self.floor + self.amplitude * (-d * d / (2.0 * self.std * self.std)).exp()
    }
}

/// Signed angular distance `a - b` wrapped to `(-π, π]`.
pub fn wrapped_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Three sources of width 0.3 rad peaked at 4π/9, π/2 and 5π/9.
pub fn standard_illuminations() -> Vec<IlluminationSpec> {
    [4.0 * PI / 9.0, PI / 2.0, 5.0 * PI / 9.0]
        .into_iter()
        .map(|p| IlluminationSpec::new(p, 0.3).expect("valid constants"))
        .collect()
}

pub fn illumination_to_boundary_values(spec: &IlluminationSpec, grid: &DiscGrid) -> BoundaryData {
    BoundaryData::from_fn(grid, |p| spec.value(p.angle))
}

/// Internal data on the measurement grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub h: Vec<Field>,
    pub grid: Arc<DiscGrid>,
    pub illuminations: Vec<IlluminationSpec>,
    /// Relative standard deviation of the multiplicative noise (0 for clean data).
    pub noise_level: f64,
    pub seed: u64,
}

impl DataSet {
    pub fn validate(&self) -> Result<()> {
        if self.h.len() < 3 {
            return Err(QpatError::config(format!(
                "need at least 3 internal data sets in 2D, got {}",
                self.h.len()
            )));
        }
        if self.h.len() != self.illuminations.len() {
            return Err(QpatError::config("one illumination per data set is required"));
        }
        if self.h.iter().any(|f| !f.grid().same_shape(&self.grid)) {
            return Err(QpatError::config("internal data live on different grids"));
        }
        if !(self.h[0].max() > 0.0) {
            return Err(QpatError::config("first data set has no positive values"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub illuminations: Vec<IlluminationSpec>,
    pub fine_n: usize,
    pub meas_n: usize,
    pub noise_level: f64,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(fine_n: usize, meas_n: usize) -> Self {
        SimulationConfig {
            illuminations: standard_illuminations(),
            fine_n,
            meas_n,
            noise_level: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fine_n < 2 * self.meas_n {
            return Err(QpatError::config(format!(
                "fine grid (n={}) must have at least twice the measurement nodes (n={})",
                self.fine_n, self.meas_n
            )));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(QpatError::config(format!("noise level must be >= 0, got {}", self.noise_level)));
        }
        if self.illuminations.len() < 3 {
            return Err(QpatError::config("at least three illuminations are required"));
        }
        for s in &self.illuminations {
            s.validate()?;
        }
        Ok(())
    }
}

/// Output of [`simulate`]: the measurement data plus the fine-grid states.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub data: DataSet,
    pub fine_u: Vec<Field>,
    pub reports: Vec<SolveReport>,
}

/// Solves `-div(D grad u) + mu u = 0` with `u = g_j` for each illumination.
pub fn solve_states(d: &Field, mu: &Field, specs: &[IlluminationSpec]) -> Result<Vec<(Field, SolveReport)>> {
    let grid = d.grid();
    let zero = Field::constant(grid, 0.0);
    specs
        .par_iter()
        .map(|s| {
            let g = illumination_to_boundary_values(s, grid);
            solve_dirichlet(d, mu, &g, &zero)
        })
        .collect()
}

/// Generates internal data from coefficients given on the fine grid.
pub fn simulate(d: &Field, mu: &Field, cfg: &SimulationConfig) -> Result<Simulation> {
    cfg.validate()?;
    let fine = d.grid();
    if fine.n() != cfg.fine_n || !fine.same_shape(mu.grid()) {
        return Err(QpatError::config(format!(
            "coefficients must be given on the fine grid (n={}), got n={} and n={}",
            cfg.fine_n,
            fine.n(),
            mu.grid().n()
        )));
    }
    let meas = Arc::new(DiscGrid::new(cfg.meas_n, fine.radius())?);
    let states = solve_states(d, mu, &cfg.illuminations)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut h = Vec::with_capacity(states.len());
    for (u, _) in &states {
        let hf = mu.zip_map(u, |m, u| m * u);
        let mut hm = restrict(&hf, &meas)?;
        if cfg.noise_level > 0.0 {
            for k in 0..meas.len() {
                if meas.is_exterior(k) {
                    continue;
                }
                let xi: f64 = StandardNormal.sample(&mut rng);
                hm.values_mut()[k] *= 1.0 + cfg.noise_level * xi;
            }
        }
        h.push(hm);
    }
    let (fine_u, reports) = states.into_iter().unzip();
    Ok(Simulation {
        data: DataSet {
            h,
            grid: meas,
            illuminations: cfg.illuminations.clone(),
            noise_level: cfg.noise_level,
            seed: cfg.seed,
        },
        fine_u,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn gaussian_profile() {
        let s = IlluminationSpec::with_levels(FRAC_PI_2, 0.3, 1.0, 0.0).unwrap();
        assert!((s.value(FRAC_PI_2) - 1.0).abs() < 1e-15);
        let e = (-0.5f64).exp();
        assert!((s.value(FRAC_PI_2 + 0.3) - e).abs() < 1e-15);
        assert!((s.value(FRAC_PI_2 - 0.3) - e).abs() < 1e-15);
        let f = IlluminationSpec::with_levels(FRAC_PI_2, 0.3, 2.0, 0.1).unwrap();
        assert!((f.value(FRAC_PI_2) - 2.1).abs() < 1e-15);
    }

    #[test]
    fn angles_wrap() {
        let s = IlluminationSpec::new(0.0, 0.3).unwrap();
        assert!((s.value(TAU - 0.1) - s.value(-0.1)).abs() < 1e-15);
        assert!((wrapped_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
        assert!((wrapped_distance(PI, 0.0) - PI).abs() < 1e-15);
    }

    #[test]
    fn circle_integral_matches_gaussian_mass() {
        let s = IlluminationSpec::with_levels(1.0, 0.3, 1.5, 0.05).unwrap();
        // Midpoint quadrature oracle.
        let m = 20_000;
        let total: f64 = (0..m)
            .map(|k| s.value((k as f64 + 0.5) * TAU / m as f64) * TAU / m as f64)
            .sum();
        let expected = 1.5 * 0.3 * TAU.sqrt() + TAU * 0.05;
        assert!((total / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(IlluminationSpec::new(0.0, 0.0).is_err());
        assert!(IlluminationSpec::with_levels(0.0, 0.3, -1.0, 0.0).is_err());
        assert!(IlluminationSpec::with_levels(0.0, 0.3, 1.0, -0.1).is_err());
    }

    #[test]
    fn inverse_crime_guard() {
        let g = Arc::new(DiscGrid::new(64, 1.0).unwrap());
        let d = Field::constant(&g, 0.2);
        let cfg = SimulationConfig::new(64, 64);
        assert!(matches!(simulate(&d, &d, &cfg), Err(QpatError::Config(_))));
    }

    #[test]
    fn maximum_principle_for_constant_source() {
        let fine = Arc::new(DiscGrid::new(97, 1.0).unwrap());
        let d = Field::constant(&fine, 0.2);
        let mu = Field::constant(&fine, 20.0);
        let flat = IlluminationSpec {
            peak_angle: 0.0,
            std: 1.0,
            amplitude: 1e-300,
            floor: 1.0,
        };
        let mut cfg = SimulationConfig::new(97, 48);
        cfg.illuminations = vec![flat; 3];
        let sim = simulate(&d, &mu, &cfg).unwrap();
        for u in &sim.fine_u {
            assert!(u.max() <= 1.0 + 1e-9 && u.min() > 0.0);
        }
        for h in &sim.data.h {
            assert!(h.max() <= 20.0 + 1e-7);
        }
    }

    #[test]
    fn noise_is_reproducible() {
        let fine = Arc::new(DiscGrid::new(64, 1.0).unwrap());
        let d = Field::constant(&fine, 0.2);
        let mu = Field::constant(&fine, 20.0);
        let mut cfg = SimulationConfig::new(64, 32);
        cfg.noise_level = 0.01;
        cfg.seed = 11;
        let a = simulate(&d, &mu, &cfg).unwrap();
        let b = simulate(&d, &mu, &cfg).unwrap();
        assert_eq!(a.data, b.data);
        cfg.seed = 12;
        let c = simulate(&d, &mu, &cfg).unwrap();
        assert_ne!(a.data, c.data);
    }

    /// I0(x) from its power series.
    fn bessel_i0(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            term *= (x / 2.0) * (x / 2.0) / (k as f64 * k as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn bessel_center_value() {
        assert!((bessel_i0(1.0) - 1.266066).abs() < 1e-6);
        let fine = Arc::new(DiscGrid::new(129, 1.0).unwrap());
        let one = Field::constant(&fine, 1.0);
        let flat = IlluminationSpec {
            peak_angle: 0.0,
            std: 1.0,
            amplitude: 1e-300,
            floor: 1.0,
        };
        let states = solve_states(&one, &one, &[flat]).unwrap();
        let u = &states[0].0;
        let c = u.get(fine.index(64, 64));
        assert!((c * bessel_i0(1.0) - 1.0).abs() < 1e-3, "{c}");
    }

    #[test]
    fn data_positive_and_ratios_match_states() {
        let fine = Arc::new(DiscGrid::new(96, 1.0).unwrap());
        let d = Field::from_fn(&fine, |x, y| 0.2 + 0.05 * x * y);
        let mu = Field::from_fn(&fine, |x, _| 20.0 + 5.0 * x);
        let cfg = SimulationConfig::new(96, 48);
        let sim = simulate(&d, &mu, &cfg).unwrap();
        for u in &sim.fine_u {
            assert!(u.min() > 0.0);
        }
        for h in &sim.data.h {
            assert!(h.min() > 0.0);
        }
        let r = sim.fine_u[1].zip_map(&sim.fine_u[0], |a, b| a / b);
        let hr = mu.zip_map(&sim.fine_u[1], |m, u| m * u).zip_map(&mu.zip_map(&sim.fine_u[0], |m, u| m * u), |a, b| a / b);
        for (k, v) in r.iter_valid() {
            assert!((v - hr.get(k)).abs() <= 1e-12 * v.abs());
        }
    }
}
