//! A channel and its complement have equal output entropy on pure inputs.

use fockchan::channel::{apply, complementary_params};
use fockchan::dilation::{build_unitary, UnitaryKind};
use fockchan::fock::FockDensityMatrix;
use fockchan::info::{von_neumann_entropy, LogBase};
use fockchan::kraus::{build_auto, Family};
use fockchan::random;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fockchan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let psi = FockDensityMatrix::from_pure(&random::pure_state(&mut rng, 5));
    for (family, kappa) in [(Family::Attenuator, 0.6), (Family::Amplifier, 1.4), (Family::Conjugator, 0.8)] {
        let (cf, ck) = complementary_params(family, kappa)?;
        let ch = build_auto(family, kappa, 1, 5, 1e-12)?;
        let comp = build_auto(cf, ck, 1, 5, 1e-12)?;
        let s = von_neumann_entropy(&apply(&ch, &psi)?, LogBase::Two)?;
        let sc = von_neumann_entropy(&apply(&comp, &psi)?, LogBase::Two)?;
        println!("{family}({kappa}) vs {cf}({ck:.4}): S = {s:.10}, S^c = {sc:.10}, diff {:.1e}", (s - sc).abs());
    }

    // the conjugator dilation is the amplifier dilation after a mode swap
    let kappa: f64 = 1.5;
    let dim = 10;
    let amp = build_unitary(UnitaryKind::for_family(Family::Amplifier, kappa)?, dim)?.to_dense();
    let conj = build_unitary(UnitaryKind::for_family(Family::Conjugator, (kappa * kappa - 1.0).sqrt())?, dim)?.to_dense();
    let flip = build_unitary(UnitaryKind::ModeFlip, dim)?.to_dense();
    println!("max |U_conj - U_amp U_flip| = {:.1e}", (conj - amp * flip).amax());
    Ok(())
}
