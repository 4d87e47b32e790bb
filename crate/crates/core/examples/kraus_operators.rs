//! Build the three photon-added families and look at their band structure.

use fockchan::fock::Truncation;
use fockchan::kraus::{build, build_auto, BandKind, Family};

fn main() -> fockchan::Result<()> {
    // the attenuator's Kraus range is finite, so one extra output level per
    // added photon is exact
    let att = build(Family::Attenuator, 0.8, 1, Truncation::new(6, 7)?, 1e-12)?;
    println!("attenuator B(0.8; 1): {} operators, defect {:.2e}", att.operators().len(), att.completeness_defect());
    for op in att.operators().iter().take(3) {
        let band = op.single_band().expect("photon-added operators are single-band");
        let vals: Vec<String> = band.values.iter().map(|v| format!("{:.4}", v.re)).collect();
        println!("  B_{}: offset {:+}, values [{}]", op.index, band.offset, vals.join(", "));
    }

    // amplifier and conjugator need an output cutoff; build_auto grows it
    for (family, kappa) in [(Family::Amplifier, 1.5), (Family::Conjugator, 1.0)] {
        let ch = build_auto(family, kappa, 2, 8, 1e-8)?;
        let anti = ch
            .operators()
            .iter()
            .filter(|op| op.single_band().map(|b| b.kind) == Some(BandKind::AntiDiagonal))
            .count();
        println!(
            "{family} kappa={kappa} n=2: dim_out {}, Kraus cutoff {}, defect {:.2e}, anti-diagonal ops {anti}",
            ch.trunc().dim_out(),
            ch.kraus_cutoff(),
            ch.completeness_defect()
        );
    }

    // JSON export round trip
    let json = att.to_json();
    let back: fockchan::kraus::KrausExport = serde_json::from_str(&json).expect("valid export");
    let again = back.into_channel()?;
    println!("export: {} bytes, round trip defect {:.2e}", json.len(), again.completeness_defect());
    Ok(())
}
