//! Fidelity/success frontier of the full family against the logical-basis
//! baseline. Takes a little while on the default lattice.
//!
//! ```bash
//! cargo run --release --example pareto_frontier
//! ```

use std::f64::consts::PI;

use qprotect::scheme::{Ensemble, NoiseStrength};
use qprotect::search::{pareto, Axis, BaselineKind, GridSpec, SearchOptions};

fn main() -> qprotect::Result<()> {
    let e = Ensemble::new(PI / 3.0, 0.0, 1.0 / 3.0)?;
    let r = NoiseStrength::new(0.9)?;
    let grid = GridSpec {
        alpha: Axis::turn(60),
        p: Axis::new(0.0, 1.0, 0.05),
        p1: Axis::new(0.0, 1.0, 0.05),
        p2: Axis::new(0.0, 1.0, 0.05),
        ..GridSpec::default()
    };
    let opts = SearchOptions::default();
    let bins = 20;
    let full = pareto(&e, r, bins, &grid, &BaselineKind::Gqcc.family(), &opts)?;
    let qcc = pareto(&e, r, bins, &grid, &BaselineKind::Qcc.family(), &opts)?;

    println!("{:>10} {:>10} {:>10}", "G bin", "F gqcc", "F qcc");
    for bin in 0..bins {
        let (lo, hi) = full.bin_edges(bin);
        let show = |f: Option<f64>| f.map_or("-".to_string(), |v| format!("{v:.6}"));
        let a = full.at_bin(bin).map(|p| p.fidelity);
        let b = qcc.at_bin(bin).map(|p| p.fidelity);
        if a.is_some() || b.is_some() {
            println!("{:>10} {:>10} {:>10}", format!("{lo:.2}-{hi:.2}"), show(a), show(b));
        }
    }
    Ok(())
}
