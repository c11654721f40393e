//! Reconstructs a constant medium D = 0.2, mu = 20 and prints the errors.
//!
//! Usage: `homogeneous_recon [noise]`

use std::sync::Arc;

use qpat::forward::{simulate, SimulationConfig};
use qpat::recon::{relative_error, run_pipeline, BoundaryProfile, ReconConfig, Region};
use qpat::sample::restrict;
use qpat::{DiscGrid, Field};

fn main() -> qpat::Result<()> {
    let noise: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.0);
    let fine = Arc::new(DiscGrid::new(512, 1.0)?);
    let d = Field::constant(&fine, 0.2);
    let mu = Field::constant(&fine, 20.0);
    let mut sc = SimulationConfig::new(512, 256);
    sc.noise_level = noise;
    sc.seed = 7;
    let sim = simulate(&d, &mu, &sc)?;
    let cfg = ReconConfig::for_data(BoundaryProfile::Constant(0.2), &sim.data);
    let r = run_pipeline(&sim.data, &cfg)?;
    print!("{}", r.diagnostics);

    // Errors on the mask interior; sigma = D u1^2 is known exactly here.
    let meas = &sim.data.grid;
    let interior = r.reliable_mask.eroded(2);
    let d_true = restrict(&d, meas)?;
    let mu_true = restrict(&mu, meas)?;
    let sigma_true = restrict(&sim.fine_u[0].map(|u| 0.2 * u * u), meas)?;
    println!("err_D={:.5}", relative_error(&r.d.masked(&interior), &d_true, Region::All)?);
    println!("err_mu={:.5}", relative_error(&r.mu.masked(&interior), &mu_true, Region::All)?);
    println!("err_sigma={:.5}", relative_error(&r.sigma.masked(&interior), &sigma_true, Region::All)?);
    Ok(())
}
