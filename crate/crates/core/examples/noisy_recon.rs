//! Noise robustness on the smooth phantom: the noisy run and a clean run with
//! identical settings.
//!
//! Usage: `noisy_recon [noise] [seed]`

use std::sync::Arc;

use qpat::forward::{simulate, SimulationConfig};
use qpat::phantom::{preset, rasterize, Coefficient};
use qpat::recon::{relative_error, run_pipeline, BoundaryProfile, ReconConfig};
use qpat::sample::restrict;
use qpat::DiscGrid;

fn main() -> qpat::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let noise: f64 = args.first().and_then(|a| a.parse().ok()).unwrap_or(0.01);
    let seed: u64 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(1);

    let fine = Arc::new(DiscGrid::new(512, 1.0)?);
    let d = rasterize(&preset("smooth-A", Coefficient::D)?, &fine)?;
    let mu = rasterize(&preset("smooth-A", Coefficient::Mu)?, &fine)?;
    let run = |noise: f64| {
        let mut sc = SimulationConfig::new(512, 256);
        sc.noise_level = noise;
        sc.seed = seed;
        simulate(&d, &mu, &sc)
    };
    let noisy = run(noise)?;
    let clean = run(0.0)?;
    let mut cfg = ReconConfig::for_data(BoundaryProfile::Constant(0.2), &noisy.data);
    cfg.h1_threshold = Some(cfg.resolved_h1_threshold(&noisy.data));

    let meas = &noisy.data.grid;
    let (d_true, mu_true) = (restrict(&d, meas)?, restrict(&mu, meas)?);
    for (label, sim) in [("noisy", &noisy), ("clean", &clean)] {
        let r = run_pipeline(&sim.data, &cfg)?;
        println!(
            "{label}: err_D={:.5} err_mu={:.5} mask_nodes={}",
            relative_error(&r.d, &d_true, cfg.error_region)?,
            relative_error(&r.mu, &mu_true, cfg.error_region)?,
            r.reliable_mask.count()
        );
    }
    Ok(())
}
