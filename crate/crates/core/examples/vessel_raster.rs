//! Imports a vessel-like absorption map from a graymap and reconstructs it.
//!
//! Usage: `vessel_raster [image.pgm]`; without an argument a branching
//! pattern is drawn and used.

use std::path::PathBuf;
use std::sync::Arc;

use qpat::forward::{simulate, SimulationConfig};
use qpat::io::pgm::{write_pgm, GrayImage};
use qpat::phantom::import_raster;
use qpat::recon::{relative_error, run_pipeline, BoundaryProfile, ReconConfig};
use qpat::sample::restrict;
use qpat::{DiscGrid, Field};

/// Distance from `p` to the segment `a b`.
fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn vessels(size: usize) -> GrayImage {
    // Trunk and branches in pixel units of a 0..1 square, y down.
    let segs = [
        ((0.5, 0.05), (0.5, 0.45), 0.025),
        ((0.5, 0.2), (0.25, 0.4), 0.015),
        ((0.5, 0.25), (0.78, 0.38), 0.015),
        ((0.25, 0.4), (0.2, 0.5), 0.01),
        ((0.78, 0.38), (0.85, 0.48), 0.01),
    ];
    let pixels = (0..size * size)
        .map(|k| {
            let p = ((k % size) as f64 / size as f64, (k / size) as f64 / size as f64);
            let hit = segs.iter().any(|&(a, b, w)| segment_distance(p, a, b) < w);
            if hit { 255 } else { 0 }
        })
        .collect();
    GrayImage { width: size, height: size, maxval: 255, pixels }
}

fn main() -> qpat::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("qpat_vessels.pgm");
            write_pgm(&p, &vessels(256))?;
            p
        }
    };
    let fine = Arc::new(DiscGrid::new(512, 1.0)?);
    let d = Field::constant(&fine, 0.2);
    // Black maps onto the background absorption, white onto the vessels.
    let mu = import_raster(&path, 20.0, (20.0, 35.0), &fine)?;
    let sim = simulate(&d, &mu, &SimulationConfig::new(512, 256))?;
    let cfg = ReconConfig::for_data(BoundaryProfile::Constant(0.2), &sim.data);
    let r = run_pipeline(&sim.data, &cfg)?;
    let meas = &sim.data.grid;
    println!("image {}", path.display());
    println!("err_D={:.5}", relative_error(&r.d, &restrict(&d, meas)?, cfg.error_region)?);
    println!("err_mu={:.5}", relative_error(&r.mu, &restrict(&mu, meas)?, cfg.error_region)?);
    println!("mask_nodes={}", r.reliable_mask.count());
    Ok(())
}
