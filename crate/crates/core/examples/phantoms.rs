//! Rasterizes every preset and exports graymaps.
//!
//! Usage: `phantoms [out_dir]`

use std::path::PathBuf;
use std::sync::Arc;

use qpat::io::pgm::{field_to_image, write_pgm};
use qpat::phantom::{preset, rasterize, Coefficient};
use qpat::DiscGrid;

fn main() -> qpat::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "phantoms".into()));
    std::fs::create_dir_all(&out)?;
    let grid = Arc::new(DiscGrid::new(256, 1.0)?);
    for name in ["homogeneous", "smooth-A", "discontinuous-A"] {
        for (c, label) in [(Coefficient::D, "D"), (Coefficient::Mu, "mu")] {
            let f = rasterize(&preset(name, c)?, &grid)?;
            let path = out.join(format!("{name}_{label}.pgm"));
            write_pgm(&path, &field_to_image(&f))?;
            println!("{name:16} {label:2} range [{:.3}, {:.3}] -> {}", f.min(), f.max(), path.display());
        }
    }
    Ok(())
}
