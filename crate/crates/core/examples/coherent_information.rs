//! Conjugator/amplifier entropies and coherent information for the reference
//! inputs, plus the vacuum-environment baseline.

use std::time::Instant;

use fockchan::info::{coherent_information, diagonal_rho, table2, LogBase, TruncationPolicy};
use fockchan::kraus::{ChannelSpec, Family};

fn main() -> fockchan::Result<()> {
    let t = Instant::now();
    println!("{:>2}  {:<22} {:>9} {:>9} {:>9}", "n", "input", "S(C)", "S(A)", "I_coh");
    for row in table2(111, LogBase::Two)? {
        let r = &row.result;
        println!(
            "{:>2}  {:<22} {:>9.5} {:>9.5} {:>9.5}",
            row.n_add,
            format!("{:?}", row.input),
            r.s_out,
            r.s_comp,
            r.i_coh
        );
    }
    println!("({:.1?}, output truncated at Fock level 110)", t.elapsed());

    let spec = ChannelSpec::new(Family::Conjugator, 1.25f64.sqrt(), 0)?;
    let r = coherent_information(&spec, &diagonal_rho(&[0.6, 0.4])?, &TruncationPolicy::default())?;
    println!("n=0 baseline: I_coh = {:.6} at dim_out {}", r.i_coh, r.dim_out);
    Ok(())
}
