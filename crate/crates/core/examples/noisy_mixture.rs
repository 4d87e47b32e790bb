//! A thermal-noise attenuator as a thermal mixture of photon-added
//! attenuators, checked against the dilation with a thermal environment.

use fockchan::channel::{mixture_noisy, MixtureOptions};
use fockchan::dilation::{channel_via_dilation, DilationSpec, Environment, UnitaryKind};
use fockchan::fock::{thermal_state, DiagonalState, FockDensityMatrix, Truncation};
use fockchan::info::{mean_photon, mean_photon_diagonal};
use fockchan::kraus::{kraus_from_mixed_environment, Family};

fn main() -> fockchan::Result<()> {
    let (kappa, nbar, dim_in) = (0.7, 1.0, 5);
    let cutoff = fockchan::fock::thermal_cutoff(nbar, 1e-8) - 1;
    let trunc = Truncation::new(dim_in, dim_in + cutoff)?;
    let mix = mixture_noisy(Family::Attenuator, kappa, nbar, trunc, MixtureOptions::default())?;
    println!("{} components, thermal tail {:.1e}", mix.components.len(), mix.tail_mass);

    for m in 0..dim_in {
        let mut w = vec![0.0; dim_in];
        w[m] = 1.0;
        let out = mix.apply_diagonal(&DiagonalState::new(w, 0.0)?)?;
        let expected = kappa * kappa * m as f64 + (1.0 - kappa * kappa) * nbar;
        println!("  |{m}>: <n> = {:.8} (expected {expected:.8})", mean_photon_diagonal(&out));
    }

    let rho = FockDensityMatrix::from_pure(&fockchan::fock::fock_state(3, dim_in)?);
    let env = thermal_state(nbar, cutoff + 1)?;
    let spec = DilationSpec::new(UnitaryKind::for_family(Family::Attenuator, kappa)?, dim_in + cutoff, Environment::Diagonal(env.clone()))?;
    let oracle = channel_via_dilation(&spec, &rho)?;
    let direct = kraus_from_mixed_environment(Family::Attenuator, kappa, &env, trunc, 1e-12)?;
    let via_kraus = fockchan::channel::apply(&direct, &rho)?;
    println!(
        "mixture vs thermal dilation {:.1e}, merged Kraus set vs dilation {:.1e}, <n> = {:.6}",
        mix.apply(&rho)?.max_abs_diff(&oracle),
        via_kraus.max_abs_diff(&oracle),
        mean_photon(&oracle)
    );
    Ok(())
}
