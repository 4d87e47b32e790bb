//! Q(0) = <0|rho|0> as a nonclassicality witness for conjugator outputs.

use fockchan::channel::apply;
use fockchan::fock::{fock_state, FockDensityMatrix};
use fockchan::info::{diagonal_rho, q_at_origin};
use fockchan::kraus::{build_auto, Family};

fn main() -> fockchan::Result<()> {
    let kappa = 0.8;
    for n in 1..=3 {
        let ch = build_auto(Family::Conjugator, kappa, n, 4, 1e-12)?;
        let vac = FockDensityMatrix::from_pure(&fock_state(0, 4)?);
        let out = apply(&ch, &vac)?;
        let low: Vec<String> = (0..n).map(|t| format!("{:.1e}", out.get(t, t).re)).collect();
        println!("C({kappa}; {n}) on vacuum: Q(0) = {:.1e}, <tau|out|tau> for tau < n: [{}]", q_at_origin(&out), low.join(", "));

        // a classical input with population above n feeds the low levels
        let mixed = diagonal_rho(&[0.5, 0.3, 0.15, 0.05])?;
        let out = apply(&ch, &mixed)?;
        println!("C({kappa}; {n}) on diag(0.5, 0.3, 0.15, 0.05): Q(0) = {:.3e}", q_at_origin(&out));
    }
    Ok(())
}
