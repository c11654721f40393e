//! Tabulates the Hölder exponent for a few parameter sets and checks that it
//! decreases on the admissible radii.

use qpat::stability::{check_monotone_decreasing, gamma, r_bound, StabilityParams};

fn main() -> qpat::Result<()> {
    for (rho, theta, lambda0) in [(1.0, 0.5, 1.5), (1.0, 0.1, 3.0), (0.5, 0.9, 1.1)] {
        let p = StabilityParams::new(rho, theta, lambda0, 1.0, 0.5)?;
        let rb = r_bound(&p)?;
        let rep = check_monotone_decreasing(&p, 1000)?;
        println!("rho={rho} theta={theta} lambda0={lambda0}: r_bound={rb:.4} monotone={}", rep.pass);
        for r in [1e-8, 1e-4, 1e-2, 0.5 * rb.min(1.0)] {
            println!("  r={r:.1e} gamma={:.9} (limit {:.6})", gamma(&p.with_r(r))?, 1.0 - theta);
        }
    }
    Ok(())
}
