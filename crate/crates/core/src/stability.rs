//! Hölder exponent of the local stability estimate and its admissible radii.
//!
//! With weight `phi(x) = (rho + r0)^(2 lambda0) / |x - x0|^(2 lambda0)`, the
//! exponent is `gamma = alpha / (alpha + beta)` where `alpha = 2 (phi0 - phi1)`
//! and `beta = 2 (phi2 - phi0)` compare the weight at radii `rho + theta r`,
//! `rho + r` and `rho`.

use crate::error::{QpatError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityParams {
    /// Radius of the exterior ball.
    pub rho: f64,
    pub theta: f64,
    pub lambda0: f64,
    pub r0: f64,
    pub r: f64,
}

impl StabilityParams {
    pub fn new(rho: f64, theta: f64, lambda0: f64, r0: f64, r: f64) -> Result<Self> {
        let p = StabilityParams {
            rho,
            theta,
            lambda0,
            r0,
            r,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if !(self.r > 0.0 && self.r < self.r0 && self.r0.is_finite()) {
            return Err(QpatError::config(format!(
                "need 0 < r < r0, got r={} r0={}",
                self.r, self.r0
            )));
        }
        Ok(())
    }

    /// Checks everything except the probe radius.
    fn validate_shape(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(QpatError::config(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(QpatError::config(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.lambda0 > 1.0 && self.lambda0.is_finite()) {
            return Err(QpatError::config(format!("lambda0 must exceed 1, got {}", self.lambda0)));
        }
        Ok(())
    }

    pub fn with_r(self, r: f64) -> Self {
        StabilityParams { r, ..self }
    }
}

/// `gamma` without range checks. Both differences are formed with
/// `expm1`/`ln_1p`, so tiny `r` does not cancel.
fn gamma_unchecked(rho: f64, theta: f64, lambda0: f64, r: f64) -> f64 {
    let (a, b) = scaled_alpha_beta(rho, theta, lambda0, r);
    a / (a + b)
}

/// `alpha / phi0` and `beta / phi0` up to the common factor 2:
/// `1 - ((rho+theta r)/(rho+r))^e` and `((rho+theta r)/rho)^e - 1`.
fn scaled_alpha_beta(rho: f64, theta: f64, lambda0: f64, r: f64) -> (f64, f64) {
    let e = 2.0 * lambda0;
    let a = -(e * ((theta - 1.0) * r / (rho + r)).ln_1p()).exp_m1();
    let b = (e * (theta * r / rho).ln_1p()).exp_m1();
    (a, b)
}

pub fn gamma(p: &StabilityParams) -> Result<f64> {
    p.validate()?;
    Ok(gamma_unchecked(p.rho, p.theta, p.lambda0, p.r))
}

/// First-order expansion `(1 - theta) - theta (1 - theta) (1 + 2 lambda0) r / (2 rho)`,
/// a cross-check for very small `r`.
pub fn gamma_small_r(p: &StabilityParams) -> f64 {
    let t = p.theta;
    (1.0 - t) - t * (1.0 - t) * (1.0 + 2.0 * p.lambda0) * p.r / (2.0 * p.rho)
}

/// Radius below which `gamma` is decreasing:
/// `rho * min(1/theta, 3 (1 - theta) / ((2 lambda0 - 1)(4^(lambda0 - 1) - 1)))`.
pub fn r_bound(p: &StabilityParams) -> Result<f64> {
    p.validate_shape()?;
    let (t, l) = (p.theta, p.lambda0);
    let second = 3.0 * (1.0 - t) / ((2.0 * l - 1.0) * (4f64.powf(l - 1.0) - 1.0));
    Ok(p.rho * (1.0 / t).min(second))
}

pub fn alpha_beta(p: &StabilityParams) -> Result<(f64, f64)> {
    p.validate()?;
    let e = 2.0 * p.lambda0;
    let phi0 = (e * ((p.rho + p.r0) / (p.rho + p.theta * p.r)).ln()).exp();
    let (a, b) = scaled_alpha_beta(p.rho, p.theta, p.lambda0, p.r);
    Ok((2.0 * phi0 * a, 2.0 * phi0 * b))
}

/// Result of a monotonicity sweep over `(0, r_bound)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    pub samples: usize,
    pub r_bound: f64,
    /// Largest `gamma(r_{i+1}) - gamma(r_i)`; negative for a decreasing sweep.
    pub max_forward_difference: f64,
    pub pass: bool,
}

/// Equispaced interior radii `r_i = r_bound * i / (samples + 1)`.
pub fn sweep_radii(rb: f64, samples: usize) -> impl Iterator<Item = f64> {
    (1..=samples).map(move |i| rb * i as f64 / (samples + 1) as f64)
}

pub fn check_monotone_decreasing(p: &StabilityParams, samples: usize) -> Result<MonotoneReport> {
    if samples < 10 {
        return Err(QpatError::config(format!("need at least 10 samples, got {samples}")));
    }
    let rb = r_bound(p)?;
    let values: Vec<f64> = sweep_radii(rb, samples)
        .map(|r| gamma_unchecked(p.rho, p.theta, p.lambda0, r))
        .collect();
    let mut max_diff = f64::NEG_INFINITY;
    let mut pass = true;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        max_diff = max_diff.max(d);
        if d > 1e-12 * w[0].abs() {
            pass = false;
        }
    }
    Ok(MonotoneReport {
        samples,
        r_bound: rb,
        max_forward_difference: max_diff,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn base(r: f64) -> StabilityParams {
        StabilityParams::new(1.0, 0.5, 1.5, 0.5, r).unwrap()
    }

    #[test]
    fn direct_values() {
        // Oracle values from a 50-digit evaluation of the defining quotient.
        assert!((gamma(&base(0.1)).unwrap() - 0.452_470_826_723_246_7).abs() < 1e-13);
        assert!((gamma(&base(0.01)).unwrap() - 0.495_024_978_240_198_3).abs() < 1e-13);
        assert!((gamma(&base(1e-8)).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn expansion_matches_at_small_r() {
        for r in [1e-4, 1e-6, 1e-9] {
            let p = base(r);
            assert!((gamma(&p).unwrap() - gamma_small_r(&p)).abs() < 10.0 * r * r);
        }
    }

    #[test]
    fn bound_values() {
        assert_eq!(r_bound(&base(0.1)).unwrap(), 0.75);
        let p = StabilityParams::new(2.0, 0.5, 1.5, 0.5, 0.1).unwrap();
        assert_eq!(r_bound(&p).unwrap(), 1.5);
        let near_one = StabilityParams::new(1.0, 1.0 - 1e-9, 1.5, 0.5, 0.1).unwrap();
        assert!(r_bound(&near_one).unwrap() < 1e-8);
    }

    #[test]
    fn rejects_invalid() {
        assert!(StabilityParams::new(1.0, 0.5, 1.0, 0.5, 0.1).is_err());
        assert!(StabilityParams::new(1.0, 1.0, 1.5, 0.5, 0.1).is_err());
        assert!(StabilityParams::new(0.0, 0.5, 1.5, 0.5, 0.1).is_err());
        assert!(StabilityParams::new(1.0, 0.5, 1.5, 0.5, 0.6).is_err());
        assert!(check_monotone_decreasing(&base(0.1), 5).is_err());
    }

    #[test]
    fn alpha_over_beta_limit() {
        let (a, b) = alpha_beta(&base(1e-7)).unwrap();
        assert!((a / b - 1.0).abs() < 1e-5);
        let (a, b) = alpha_beta(&base(0.1)).unwrap();
        assert!((a / (a + b) / gamma(&base(0.1)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweeps_pass() {
        assert!(check_monotone_decreasing(&base(0.1), 1000).unwrap().pass);
        let p = StabilityParams::new(0.3, 0.9, 2.0, 0.5, 0.01).unwrap();
        assert!(check_monotone_decreasing(&p, 1000).unwrap().pass);
    }

    fn params() -> impl Strategy<Value = StabilityParams> {
        (0.1..5.0f64, 0.01..0.99f64, 1.01..4.0f64, 0.01..1.0f64, 0.001..0.999f64)
            .prop_map(|(rho, theta, l, r0, frac)| StabilityParams::new(rho, theta, l, r0, r0 * frac).unwrap())
    }

    proptest! {
        #[test]
        fn gamma_lies_below_its_limit(p in params(), frac in 0.001..0.999f64) {
            let p = p.with_r(frac * r_bound(&p).unwrap());
            let g = gamma_unchecked(p.rho, p.theta, p.lambda0, p.r);
            prop_assert!(g > 0.0 && g < 1.0 - p.theta);
        }

        #[test]
        fn scale_invariant(p in params(), c in 0.1..10.0f64) {
            let q = StabilityParams::new(c * p.rho, p.theta, p.lambda0, c * p.r0, c * p.r).unwrap();
            prop_assert!((gamma(&q).unwrap() / gamma(&p).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn independent_of_r0(p in params(), extra in 0.0..3.0f64) {
            let q = StabilityParams { r0: p.r0 + extra, ..p };
            prop_assert_eq!(gamma(&q).unwrap(), gamma(&p).unwrap());
        }

        #[test]
        fn alpha_beta_identity(p in params()) {
            let (a, b) = alpha_beta(&p).unwrap();
            prop_assert!(a > 0.0 && b > 0.0);
            prop_assert!((a / (a + b) / gamma(&p).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
