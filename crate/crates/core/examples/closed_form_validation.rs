//! Equal-prior closed forms against the simulator.

use std::f64::consts::PI;

use qprotect::closed_form::{optimal_gamma, optimal_p, validate_closed_forms, ValidationOptions};
use qprotect::scheme::{Ensemble, NoiseStrength};

fn main() -> qprotect::Result<()> {
    let r = NoiseStrength::new(0.4)?;
    let o = optimal_p(r, PI / 3.0);
    println!(
        "alpha_cf=π/3: p*={:.6} ({:?}), γ*={:.6}, F={:.6}",
        o.p,
        o.source,
        optimal_gamma(r, PI / 3.0, o.p),
        o.fidelity
    );

    for (theta, r) in [(0.3, 1.0), (0.8, 0.4)] {
        let e = Ensemble::new(theta, 0.0, 0.5)?;
        let rep = validate_closed_forms(&e, NoiseStrength::new(r)?, &ValidationOptions::default())?;
        println!("θ={theta} r={r}: {} discrepancies", rep.entries.len());
        for fit in rep.fits.iter().take(3) {
            println!("  {:<40} rms {:.4} max {:.4}", fit.label(), fit.rms, fit.max_gap);
        }
        for d in rep.entries.iter().filter(|d| d.formula != "reduced_fidelity") {
            println!("  {}: closed form {:.6}, oracle {:.6}", d.formula, d.closed_form, d.oracle);
        }
    }
    Ok(())
}
