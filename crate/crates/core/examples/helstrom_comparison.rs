//! Free measurement basis versus the Helstrom basis at s+ = 1/3, θ = π/6.

use std::f64::consts::PI;

use qprotect::oracle::helstrom_success;
use qprotect::scheme::{Ensemble, NoiseStrength};
use qprotect::search::{
    definite_optimum, discrimination_probability, helstrom_angle, BaselineKind, GridSpec, SearchOptions,
};

fn main() -> qprotect::Result<()> {
    let e = Ensemble::new(PI / 6.0, 0.0, 1.0 / 3.0)?;
    let h = helstrom_angle(&e);
    println!(
        "Helstrom angle {:.6} (degenerate: {}), success {:.6} = {:.6}",
        h.alpha,
        h.degenerate,
        discrimination_probability(&e, h.alpha),
        helstrom_success(&e)
    );

    let r = NoiseStrength::new(0.8)?;
    for b in [BaselineKind::Gqcc, BaselineKind::Helstrom, BaselineKind::Qcc] {
        let o = definite_optimum(&e, r, &b.family(), &GridSpec::definite(), &SearchOptions::default())?;
        println!("{:<8} infidelity {:.6} at alpha {:+.4}", b.label(), 1.0 - o.fidelity, o.params.alpha);
    }
    Ok(())
}
