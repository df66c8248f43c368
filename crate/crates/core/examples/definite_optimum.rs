//! Best fidelity at unit success probability for every named family.

use std::f64::consts::PI;

use qprotect::scheme::{Ensemble, NoiseStrength};
use qprotect::search::{definite_optimum, BaselineKind, GridSpec, SearchOptions};

fn main() -> qprotect::Result<()> {
    let e = Ensemble::new(PI / 4.0, 0.0, 0.2)?;
    for r in [0.0, 0.5, 1.0] {
        let r = NoiseStrength::new(r)?;
        for b in BaselineKind::ALL {
            let o = definite_optimum(&e, r, &b.family(), &GridSpec::definite(), &SearchOptions::default())?;
            println!(
                "r={:.1} {:<8} F={:.6} alpha={:+.4} p={:.4}",
                r.value(),
                b.label(),
                o.fidelity,
                o.params.alpha,
                o.params.p
            );
        }
    }
    Ok(())
}
