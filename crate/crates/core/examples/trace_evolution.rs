//! Stage-by-stage state of one preweak branch.

use qprotect::scheme::{trace_evolution, ControlParams, Ensemble, NoiseStrength, Sign};

fn main() -> qprotect::Result<()> {
    let e = Ensemble::new(0.9, 0.4, 0.3)?;
    let r = NoiseStrength::new(0.5)?;
    let c = ControlParams::new(0.2, 0.7, 0.1, 0.2, 0.3, -0.5)?;

    let ev = trace_evolution(Sign::Minus, Sign::Plus, &e, &c, r);
    println!("preweak      |ψ|² = {:.6}", ev.after_preweak.norm_sqr());
    println!("feedforward  |ψ|² = {:.6}", ev.after_feedforward.norm_sqr());
    for j in 0..2 {
        println!(
            "E{}: noise {:.6}  postweak {:.6}  feedback {:.6}",
            j + 1,
            ev.after_noise[j].norm_sqr(),
            ev.after_postweak[j].norm_sqr(),
            ev.final_states[j].norm_sqr()
        );
    }
    Ok(())
}
