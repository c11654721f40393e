//! Second-order convergence of the embedded-boundary solver, plus the
//! Bessel value at the centre of the disc.

use std::sync::Arc;

use qpat::elliptic::solve_dirichlet;
use qpat::{BoundaryData, DiscGrid, Field};

/// `u = sin x cos y` with `D = mu = 1`, so the source is `3u`.
fn mms(n: usize) -> qpat::Result<f64> {
    let g = Arc::new(DiscGrid::new(n, 1.0)?);
    let one = Field::constant(&g, 1.0);
    let exact = Field::from_fn(&g, |x, y| x.sin() * y.cos());
    let f = exact.map(|u| 3.0 * u);
    let bd = BoundaryData::from_fn(&g, |p| p.x.sin() * p.y.cos());
    let (u, report) = solve_dirichlet(&one, &one, &bd, &f)?;
    let sq: f64 = u.iter_valid().map(|(k, v)| (v - exact.get(k)).powi(2)).sum();
    let err = (sq * g.h() * g.h()).sqrt();
    println!("n={n:4} L2 error {err:.3e} ({report})");
    Ok(err)
}

fn main() -> qpat::Result<()> {
    let errs = [mms(65)?, mms(129)?, mms(257)?];
    for w in errs.windows(2) {
        println!("ratio {:.3}", w[0] / w[1]);
    }

    let g = Arc::new(DiscGrid::new(257, 1.0)?);
    let one = Field::constant(&g, 1.0);
    let (u, _) = solve_dirichlet(&one, &one, &BoundaryData::constant(&g, 1.0), &Field::constant(&g, 0.0))?;
    let i0: f64 = (0..30).scan(1.0, |t, k: i32| {
        let v = *t;
        *t *= 0.25 / ((k + 1) * (k + 1)) as f64;
        Some(v)
    }).sum();
    println!("u(0)={:.6} 1/I0(1)={:.6}", u.at(128, 128), 1.0 / i0);
    Ok(())
}
