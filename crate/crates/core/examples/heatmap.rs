//! Definite-protection improvement over the logical-basis scheme, coarse grid.

use std::f64::consts::FRAC_PI_2;

use qprotect::search::{heatmap, BaselineKind, GridSpec, HeatAxis, HeatBase, HeatQuantity, SearchOptions};

fn main() -> qprotect::Result<()> {
    let n = 9;
    let s: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let t: Vec<f64> = (0..n).map(|k| FRAC_PI_2 * k as f64 / (n - 1) as f64).collect();
    let base = HeatBase { theta: 0.0, phi: 0.0, s_plus: 0.5, r: 1.0 };
    let hm = heatmap(
        &base,
        (HeatAxis::SPlus, s.clone()),
        (HeatAxis::Theta, t.clone()),
        HeatQuantity::Delta,
        &BaselineKind::Gqcc.family(),
        &BaselineKind::Qcc.family(),
        &GridSpec::definite(),
        &SearchOptions::default(),
    )?;
    print!("{:>6}", "s+\\θ");
    for v in &t {
        print!("{v:>7.3}");
    }
    println!();
    for (i, row) in hm.values.iter().enumerate() {
        print!("{:>6.3}", s[i]);
        for v in row {
            print!("{v:>7.4}");
        }
        println!();
    }
    if let Some((v, i, j)) = hm.argmax() {
        println!("max Δ {v:.4} at s+={:.3}, θ={:.3}", s[i], t[j]);
    }
    Ok(())
}
