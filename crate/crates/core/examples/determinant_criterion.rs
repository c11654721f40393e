//! Reliable region of the local systems on a homogeneous medium: size,
//! connectivity and the determinant and condition ranges it keeps.

use std::sync::Arc;

use qpat::forward::{simulate, SimulationConfig};
use qpat::recon::{boundary_log_ratios, local_systems, ratio_fields, reliable_region, BoundaryProfile, ReconConfig};
use qpat::{DiscGrid, Field};

fn main() -> qpat::Result<()> {
    let fine = Arc::new(DiscGrid::new(512, 1.0)?);
    let sim = simulate(
        &Field::constant(&fine, 0.2),
        &Field::constant(&fine, 20.0),
        &SimulationConfig::new(512, 256),
    )?;
    let data = &sim.data;
    let cfg = ReconConfig::for_data(BoundaryProfile::Constant(0.2), data);
    let v = ratio_fields(data, &cfg)?;
    let anchors = boundary_log_ratios(&data.grid, &data.illuminations);
    let systems = local_systems(&v, cfg.smooth_width_grad, &anchors, cfg.boundary_anchor_weight)?;
    for cond in [10.0, 50.0, 200.0] {
        let cfg = ReconConfig { cond_threshold: cond, ..cfg.clone() };
        let mask = reliable_region(&systems, &data.h[0], cfg.resolved_h1_threshold(data), &cfg)?;
        let det = systems.abs_det().masked(&mask);
        println!(
            "cond<={cond:5}: {} nodes, {} component(s), |det M| in [{:.3}, {:.3}]",
            mask.count(),
            mask.components().len(),
            det.min(),
            det.max()
        );
    }
    Ok(())
}
