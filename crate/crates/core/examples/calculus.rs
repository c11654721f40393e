//! Finite differences on the disc grid against a closed-form field.

use std::sync::Arc;

use qpat::calculus::{divergence, gradient, laplacian};
use qpat::{DiscGrid, Field};

fn main() -> qpat::Result<()> {
    for n in [65, 129, 257] {
        let g = Arc::new(DiscGrid::new(n, 1.0)?);
        let f = Field::from_fn(&g, |x, y| (x + 0.5 * y).exp());
        let grad = gradient(&f);
        let lap = laplacian(&f, None);
        let div = divergence(&grad);
        let (mut eg, mut el, mut ed) = (0.0f64, 0.0f64, 0.0f64);
        for (k, v) in f.iter_valid() {
            eg = eg.max((grad.x.get(k) - v).abs()).max((grad.y.get(k) - 0.5 * v).abs());
            el = el.max((lap.get(k) - 1.25 * v).abs());
            ed = ed.max((div.get(k) - 1.25 * v).abs());
        }
        println!("n={n:4} h={:.4} max|grad err|={eg:.2e} max|lap err|={el:.2e} max|div grad err|={ed:.2e}", g.h());
    }
    Ok(())
}
