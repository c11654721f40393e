//! Simulates internal data for a phantom and writes the H files.
//!
//! Usage: `forward_data [out_dir] [noise]`

use std::path::PathBuf;
use std::sync::Arc;

use qpat::forward::{simulate, SimulationConfig};
use qpat::io::fld::write_field;
use qpat::phantom::{preset, rasterize, Coefficient};
use qpat::DiscGrid;

fn main() -> qpat::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().map(PathBuf::from);
    let noise: f64 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(0.0);

    let fine = Arc::new(DiscGrid::new(512, 1.0)?);
    let d = rasterize(&preset("smooth-A", Coefficient::D)?, &fine)?;
    let mu = rasterize(&preset("smooth-A", Coefficient::Mu)?, &fine)?;
    let mut cfg = SimulationConfig::new(512, 256);
    cfg.noise_level = noise;
    cfg.seed = 3;
    let sim = simulate(&d, &mu, &cfg)?;
    for (j, ((h, spec), rep)) in sim.data.h.iter().zip(&cfg.illuminations).zip(&sim.reports).enumerate() {
        println!(
            "H{}: peak {:.4} rad, H in [{:.3e}, {:.3e}], {rep}",
            j + 1,
            spec.peak_angle,
            h.min(),
            h.max()
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            write_field(&dir.join(format!("H{}.fld", j + 1)), h)?;
        }
    }
    Ok(())
}
