//! Fock states stay Fock-diagonal; print where |j> goes and the predicted
//! support.

use fockchan::channel::{fock_action, support_bounds, SupportRange};
use fockchan::kraus::Family;

fn main() -> fockchan::Result<()> {
    let dim_out = 40;
    for (family, kappa) in [(Family::Attenuator, 0.7), (Family::Amplifier, 1.3), (Family::Conjugator, 0.9)] {
        println!("{family} kappa={kappa}, n=2");
        for j in 0..4 {
            let w = fock_action(family, kappa, 2, j, dim_out)?;
            let bounds = support_bounds(family, 2, SupportRange::finite(j, j)?);
            let lo = w.iter().position(|x| *x > 1e-15).unwrap_or(0);
            let hi = w.iter().rposition(|x| *x > 1e-15).unwrap_or(0);
            let head: Vec<String> = w.iter().take(6).map(|x| format!("{x:.3}")).collect();
            println!(
                "  |{j}> -> [{} ...]  occupied {lo}..{hi}  predicted {}..{}  kept {:.6}",
                head.join(" "),
                bounds.n_min,
                bounds.n_max.map_or("inf".to_string(), |h| h.to_string()),
                w.iter().sum::<f64>()
            );
        }
    }
    Ok(())
}
