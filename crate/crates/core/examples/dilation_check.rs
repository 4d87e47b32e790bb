//! Compare the Kraus construction with the two-mode unitary dilation built
//! from a matrix exponential.

use std::time::Instant;

use fockchan::channel::apply;
use fockchan::dilation::{channel_via_dilation, guarded_dim, DilationSpec, DEFAULT_GUARD_FACTOR};
use fockchan::kraus::{build_auto, Family};
use fockchan::random;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fockchan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rho = random::density_matrix(&mut rng, 6, 3);
    for (family, kappa, n) in [(Family::Attenuator, 0.6, 2), (Family::Amplifier, 1.25, 1), (Family::Conjugator, 0.5, 2)] {
        let t = Instant::now();
        let ch = build_auto(family, kappa, n, 6, 1e-12)?;
        let d = ch.trunc().dim_out();
        let spec = DilationSpec::photon_added(family, kappa, n, guarded_dim(d, DEFAULT_GUARD_FACTOR))?;
        let oracle = channel_via_dilation(&spec, &rho)?.resized(d);
        let kraus = apply(&ch, &rho)?;
        println!(
            "{family} kappa={kappa} n={n}: dim_out {d}, oracle per-mode dim {}, max diff {:.2e} ({:.2?})",
            spec.per_mode_dim,
            kraus.max_abs_diff(&oracle),
            t.elapsed()
        );
    }
    Ok(())
}
