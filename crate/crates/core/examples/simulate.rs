//! One evaluation of the protection scheme.
//!
//! ```bash
//! cargo run --release --example simulate
//! ```

use std::f64::consts::PI;

use qprotect::scheme::{protect, ControlParams, Ensemble, NoiseStrength};

fn main() -> qprotect::Result<()> {
    let e = Ensemble::new(PI / 3.0, 0.0, 0.5)?;
    let r = NoiseStrength::new(0.6)?;

    // no control at all: p = 1/2 learns nothing, nothing is abandoned
    let idle = protect(&e, &ControlParams::identity(), r)?;
    println!("idle:       F={:.6} G={:.6}", idle.fidelity, idle.success);

    let c = ControlParams::new(0.0, 0.85, 0.3, 0.3, 0.4, -0.4)?;
    let res = protect(&e, &c, r)?;
    println!("controlled: F={:.6} G={:.6}", res.fidelity, res.success);
    println!("  f+={:.6} f-={:.6} g+={:.6} g-={:.6}", res.f_plus, res.f_minus, res.g_plus, res.g_minus);
    for p in &res.paths_plus {
        println!(
            "  input + outcome {} E{}: weight {:.6}",
            p.preweak_outcome.label(),
            p.kraus_index.number(),
            p.weight
        );
    }
    Ok(())
}
