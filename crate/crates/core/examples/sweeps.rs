//! Coherent information against the number of added photons, and the
//! convergence of the output entropy with the truncation.

use fockchan::info::{diagonal_rho, sweep, SweepKind, TruncationPolicy};
use fockchan::kraus::{ChannelSpec, Family};

fn main() -> fockchan::Result<()> {
    let rho = diagonal_rho(&[0.6, 0.4])?;
    let spec = ChannelSpec::new(Family::Conjugator, 1.25f64.sqrt(), 1)?;
    let policy = TruncationPolicy::fixed(111);

    let grid: Vec<f64> = (1..=10).map(f64::from).collect();
    let by_n = sweep(SweepKind::NAdd, spec, &rho, &grid, &policy);
    print!("{}", by_n.to_csv_string()?);
    println!("strictly decreasing: {}\n", by_n.strictly_decreasing());

    let dims: Vec<f64> = (2..=14).map(|k| f64::from(k * 10 + 1)).collect();
    let by_dim = sweep(SweepKind::Truncation, spec, &rho, &dims, &policy);
    print!("{}", by_dim.to_csv_string()?);
    println!("plateau (|delta| < 1e-4) from dim_out {:?}", by_dim.plateau_start(1e-4));
    Ok(())
}
