//! Lattice sweep streamed to a callback.

use std::f64::consts::PI;

use qprotect::scheme::{Ensemble, NoiseStrength};
use qprotect::search::{sweep_each, Axis, BaselineKind, GridSpec};

fn main() -> qprotect::Result<()> {
    let e = Ensemble::new(PI / 4.0, 0.0, 0.5)?;
    let r = NoiseStrength::new(0.8)?;
    let grid = GridSpec {
        alpha: Axis::turn(8),
        p: Axis::new(0.0, 1.0, 0.25),
        p1: Axis::point(0.0),
        p2: Axis::point(0.0),
        ..GridSpec::default()
    };
    let mut best = (f64::NEG_INFINITY, 0);
    sweep_each(&e, r, &grid, &BaselineKind::Gqcc.family(), |rec| {
        if let Ok(m) = &rec.outcome {
            println!(
                "alpha={:+.4} p={:.2} γ+={:+.4} γ-={:+.4} F={:.6}",
                rec.params.alpha, rec.params.p, rec.params.gamma_plus, rec.params.gamma_minus, m.fidelity
            );
            if m.fidelity > best.0 {
                best = (m.fidelity, rec.index);
            }
        }
        Ok(())
    })?;
    println!("best F={:.6} at lattice index {}", best.0, best.1);
    Ok(())
}
