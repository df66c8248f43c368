//! Path sum versus superoperator composition, plus a grid scan with the oracle.

use qprotect::oracle::{conditional_maps, exhaustive_argmax, verify, FreeParam};
use qprotect::scheme::{ControlParams, Ensemble, NoiseStrength};

fn main() -> qprotect::Result<()> {
    let rep = verify(2000, 1);
    println!(
        "2000 draws: max gap {:.2e}, min Choi eigenvalue {:.2e}, trace excess {:.2e}",
        rep.max_gap, rep.min_choi_eigenvalue, rep.max_trace_excess
    );

    let e = Ensemble::new(1.0, 0.0, 0.3)?;
    let r = NoiseStrength::new(0.7)?;
    let c = ControlParams::identity();
    for (k, m) in conditional_maps(e.phi, &c, r).iter().enumerate() {
        println!("map {k}: Choi min eigenvalue {:.3e}", m.choi_min_eigenvalue());
    }
    let g = exhaustive_argmax(&e, r, &c, &[FreeParam::Alpha, FreeParam::P], 0.01)?;
    println!(
        "grid argmax over (alpha, p): F={:.6} at alpha={:+.3} p={:.2} ({} evaluations)",
        g.fidelity, g.params.alpha, g.params.p, g.evaluations
    );
    Ok(())
}
