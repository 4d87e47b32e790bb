//! Quadratic operators W = F_l^dagger F_l' and their numerical linear
//! independence, the usual test for extremality of a channel.

use fockchan::kraus::{build_auto, Family};
use fockchan::quadratic::{independence_rank, w_closed_form, w_operator};

fn main() -> fockchan::Result<()> {
    for (family, kappa) in [(Family::Attenuator, 0.7), (Family::Amplifier, 1.25), (Family::Conjugator, 0.5)] {
        let ch = build_auto(family, kappa, 1, 12, 1e-10)?;
        let w = w_operator(&ch, 1, 3)?;
        let closed = w_closed_form(family, kappa, 1, 1, 3, 12)?;
        let r = independence_rank(&ch, 3)?;
        println!(
            "{family} kappa={kappa} n=1: W[1,3] shift {:+}, closed form diff {:.1e}; rank {}/{} (smallest singular value {:.2e})",
            w.shift,
            w.max_abs_diff(&closed),
            r.rank,
            r.count,
            r.singular_values.last().copied().unwrap_or(0.0)
        );
    }
    Ok(())
}
