//! Reconstructs a preset phantom from simulated data and reports the errors.
//!
//! Usage: `phantom_recon [smooth-A|discontinuous-A] [noise]`

use std::sync::Arc;

use qpat::forward::{simulate, SimulationConfig};
use qpat::phantom::{preset, rasterize, Coefficient};
use qpat::recon::{relative_error, run_pipeline, BoundaryProfile, ReconConfig};
use qpat::sample::restrict;
use qpat::DiscGrid;

fn main() -> qpat::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("smooth-A", String::as_str);
    let noise: f64 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(0.0);

    let fine = Arc::new(DiscGrid::new(512, 1.0)?);
    let d = rasterize(&preset(name, Coefficient::D)?, &fine)?;
    let mu = rasterize(&preset(name, Coefficient::Mu)?, &fine)?;
    let mut sc = SimulationConfig::new(512, 256);
    sc.noise_level = noise;
    sc.seed = 1;
    let sim = simulate(&d, &mu, &sc)?;

    let cfg = ReconConfig::for_data(BoundaryProfile::Constant(0.2), &sim.data);
    let t = std::time::Instant::now();
    let r = run_pipeline(&sim.data, &cfg)?;
    print!("{}", r.diagnostics);
    let meas = &sim.data.grid;
    let d_true = restrict(&d, meas)?;
    let mu_true = restrict(&mu, meas)?;
    println!("err_D={:.5}", relative_error(&r.d, &d_true, cfg.error_region)?);
    println!("err_mu={:.5}", relative_error(&r.mu, &mu_true, cfg.error_region)?);
    println!("recon_seconds={:.2}", t.elapsed().as_secs_f64());
    Ok(())
}
