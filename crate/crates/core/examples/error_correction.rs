//! With the Kraus outcome known, Fock inputs are recovered exactly (up to
//! the truncation defect).

use fockchan::errcorr::{build_recovery, corrected_apply, DEFAULT_NULL_THRESHOLD};
use fockchan::kraus::{build_auto, Family};

fn main() -> fockchan::Result<()> {
    for (family, kappa) in [(Family::Attenuator, 0.5), (Family::Amplifier, 1.3), (Family::Conjugator, 0.7)] {
        let ch = build_auto(family, kappa, 2, 8, 1e-10)?;
        let worst = (0..8)
            .map(|x| corrected_apply(&ch, x, DEFAULT_NULL_THRESHOLD).map(|c| c.fidelity))
            .collect::<fockchan::Result<Vec<_>>>()?
            .into_iter()
            .fold(1.0, f64::min);
        let r = build_recovery(&ch, 1, DEFAULT_NULL_THRESHOLD)?;
        println!(
            "{family} kappa={kappa} n=2: worst Fock fidelity {worst:.12}, defect {:.1e}; recovery #1 defect {:.1e}, targets {}",
            ch.completeness_defect(),
            r.completeness_defect(),
            r.targets.len()
        );
    }
    Ok(())
}
