//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criterion 7 is checked as stated and fails: a conjugator with `n` added
//! photons populates levels below `n` as soon as the input has weight above
//! the vacuum. The line after it checks the bound that does hold. A known
//! failure does not change the exit status; any other failure does.

use std::time::{Duration, Instant};

use fockchan::channel::{apply, apply_diagonal, complementary_params, support_bounds, SupportRange};
use fockchan::dilation::{channel_via_dilation, guarded_dim, DilationSpec, DEFAULT_GUARD_FACTOR};
use fockchan::fock::{DiagonalState, FockDensityMatrix, HERMITIAN_TOL, PSD_TOL};
use fockchan::info::{coherent_information, diagonal_rho, table2, von_neumann_entropy, LogBase, TruncationPolicy};
use fockchan::kraus::{build_auto, ChannelSpec, Family, PhotonAddedChannel};
use fockchan::random;
use fockchan::verify::{flip_relation_defect, run_suite, Suite, VerifyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (u32, &'static str, Box<dyn FnOnce() -> Outcome>);

const KNOWN_FALSE: &[u32] = &[7];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn grid() -> Vec<(Family, f64)> {
    let cfg = VerifyConfig::default();
    let mut g = Vec::new();
    for k in cfg.attenuator_kappas {
        g.push((Family::Attenuator, k));
    }
    for k in cfg.amplifier_kappas {
        g.push((Family::Amplifier, k));
    }
    for k in cfg.conjugator_kappas {
        g.push((Family::Conjugator, k));
    }
    g
}

fn channel(family: Family, kappa: f64, n: usize, dim_in: usize) -> PhotonAddedChannel {
    let tol = if family == Family::Attenuator { 1e-12 } else { 1e-10 };
    build_auto(family, kappa, n, dim_in, tol).expect("channel builds")
}

fn table2_reproduction() -> Outcome {
    let expected = [
        (3.46527, 3.35954, 0.10573),
        (4.12843, 4.02385, 0.10458),
        (4.36985, 4.27853, 0.09132),
        (4.54768, 4.48032, 0.06736),
        (4.86302, 4.78464, 0.07838),
    ];
    let t = Instant::now();
    let rows = table2(111, LogBase::Two).expect("table computes");
    let elapsed = t.elapsed();
    let mut worst = 0.0f64;
    for (row, (sc, sa, i)) in rows.iter().zip(expected) {
        let r = &row.result;
        worst = worst.max((r.s_out - sc).abs()).max((r.s_comp - sa).abs()).max((r.i_coh - i).abs());
    }
    let first = &rows[0].result;
    outcome(
        worst <= 2e-3 && elapsed < Duration::from_secs(60) && rows.iter().all(|r| !r.result.flagged),
        format!(
            "worst |diff| {worst:.1e}, row 1 = ({:.5}, {:.5}, {:.5}), log base 2, all rows {elapsed:.1?}",
            first.s_out, first.s_comp, first.i_coh
        ),
    )
}

fn n0_baseline() -> Outcome {
    let spec = ChannelSpec::new(Family::Conjugator, 1.25f64.sqrt(), 0).unwrap();
    let r = coherent_information(&spec, &diagonal_rho(&[0.6, 0.4]).unwrap(), &TruncationPolicy::fixed(111)).unwrap();
    outcome((r.i_coh + 0.2239).abs() <= 1e-3, format!("I_coh = {:.6}", r.i_coh))
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut points = 0;
    for (family, kappa) in grid() {
        for n in 0..=3 {
            let ch = channel(family, kappa, n, 12);
            let d = ch.trunc().dim_out();
            let spec = DilationSpec::photon_added(family, kappa, n, guarded_dim(d, DEFAULT_GUARD_FACTOR)).unwrap();
            let rho = random::density_matrix(&mut rng, 12, 4);
            let oracle = channel_via_dilation(&spec, &rho).unwrap().resized(d);
            worst = worst.max(apply(&ch, &rho).unwrap().max_abs_diff(&oracle));
            points += 1;
        }
    }
    let elapsed = t.elapsed();
    outcome(
        worst <= 1e-8 && elapsed < Duration::from_secs(300),
        format!("{points} grid points, dim_in 12, worst element diff {worst:.1e}, {elapsed:.1?}"),
    )
}

fn cptp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_att = 0.0f64;
    let mut worst_other = 0.0f64;
    let mut herm = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut trace = 0.0f64;
    let mut inputs = 0;
    let channels: Vec<PhotonAddedChannel> = grid()
        .into_iter()
        .flat_map(|(f, k)| (0..=3).map(move |n| (f, k, n)))
        .map(|(f, k, n)| {
            let tol = if f == Family::Attenuator { 1e-12 } else { 1e-8 };
            build_auto(f, k, n, 12, tol).unwrap()
        })
        .collect();
    for ch in &channels {
        if ch.family() == Family::Attenuator {
            worst_att = worst_att.max(ch.completeness_defect());
        } else {
            worst_other = worst_other.max(ch.completeness_defect());
        }
    }
    for i in 0..100 {
        let ch = &channels[i % channels.len()];
        let rank = rng.gen_range(1..=12);
        let out = apply(ch, &random::density_matrix(&mut rng, 12, rank)).unwrap();
        herm = herm.max(out.hermiticity_error());
        min_eig = min_eig.min(out.min_eigenvalue());
        trace = trace.max((out.trace() - 1.0).abs() - ch.completeness_defect());
        inputs += 1;
    }
    outcome(
        worst_att <= 1e-12 && worst_other <= 1e-8 && herm <= HERMITIAN_TOL && min_eig >= PSD_TOL && trace <= 1e-12,
        format!(
            "defect att {worst_att:.1e}, amp/conj {worst_other:.1e}; {inputs} random inputs: hermiticity {herm:.1e}, min eigenvalue {min_eig:.1e}"
        ),
    )
}

fn complementarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs = [
        (Family::Amplifier, vec![1.25, 1.5]),
        (Family::Attenuator, vec![0.3, 0.6, 0.9]),
    ];
    let mut worst = 0.0f64;
    let mut count = 0;
    for (family, kappas) in pairs {
        let setups: Vec<(PhotonAddedChannel, PhotonAddedChannel)> = kappas
            .iter()
            .flat_map(|&k| (0..=2).map(move |n| (k, n)))
            .map(|(k, n)| {
                let (cf, ck) = complementary_params(family, k).unwrap();
                (channel(family, k, n, 6), channel(cf, ck, n, 6))
            })
            .collect();
        for i in 0..50 {
            let (ch, comp) = &setups[i % setups.len()];
            let psi = FockDensityMatrix::from_pure(&random::pure_state(&mut rng, 6));
            let s = von_neumann_entropy(&apply(ch, &psi).unwrap(), LogBase::Two).unwrap();
            let sc = von_neumann_entropy(&apply(comp, &psi).unwrap(), LogBase::Two).unwrap();
            worst = worst.max((s - sc).abs());
            count += 1;
        }
    }
    let mut flip = 0.0f64;
    for kappa in [1.0, 1.25, 1.5, 2.0] {
        for dim in [4, 7, 10] {
            flip = flip.max(flip_relation_defect(kappa, dim).unwrap());
        }
    }
    outcome(
        worst <= 1e-6 && flip <= 1e-9,
        format!("{count} pure inputs, worst |S - S^c| {worst:.1e}; flip relation {flip:.1e}"),
    )
}

fn support_ranges() -> Outcome {
    let mut exact_ok = true;
    let mut worst_rel = 0.0f64;
    let mut cases = 0;
    for (family, kappa) in grid() {
        for n in 0..=4 {
            let ch = channel(family, kappa, n, 11);
            for j in 0..=10 {
                let mut w = vec![0.0; 11];
                w[j] = 1.0;
                let out = apply_diagonal(&ch, &DiagonalState::new(w, 0.0).unwrap()).unwrap();
                let range = support_bounds(family, n, SupportRange::finite(j, j).unwrap());
                let outside: f64 = out
                    .probs()
                    .iter()
                    .enumerate()
                    .filter(|(m, _)| !range.contains(*m))
                    .map(|(_, p)| *p)
                    .sum();
                if family == Family::Attenuator {
                    exact_ok &= outside == 0.0;
                } else {
                    worst_rel = worst_rel.max(outside.max(0.0) / (ch.completeness_defect() + f64::MIN_POSITIVE));
                }
                cases += 1;
            }
        }
    }
    outcome(
        exact_ok && worst_rel <= 1.0,
        format!("{cases} Fock inputs; attenuator exact: {exact_ok}; others outside/defect {worst_rel:.1e}"),
    )
}

/// As stated: `<tau|C(kappa; n)[rho]|tau> <= 1e-12` for `tau < n`, vacuum
/// plus five random classical inputs.
fn activation(rng: &mut ChaCha8Rng) -> (Outcome, Vec<DiagonalState>) {
    let mut inputs = vec![DiagonalState::new(vec![1.0], 0.0).unwrap()];
    for _ in 0..5 {
        let dim = rng.gen_range(2..=6);
        inputs.push(random::diagonal_state(rng, dim));
    }
    let mut vacuum = 0.0f64;
    let mut classical = 0.0f64;
    let mut worst_case = String::new();
    for kappa in [0.5, 1.0] {
        for n in 1..=3 {
            for (i, d) in inputs.iter().enumerate() {
                let ch = channel(Family::Conjugator, kappa, n, d.dim());
                let out = apply_diagonal(&ch, d).unwrap();
                let low = out.probs()[..n].iter().cloned().fold(0.0, f64::max);
                if i == 0 {
                    vacuum = vacuum.max(low);
                } else if low > classical {
                    classical = low;
                    worst_case = format!("kappa={kappa}, n={n}, input dim {}", d.dim());
                }
            }
        }
    }
    (
        outcome(
            vacuum <= 1e-12 && classical <= 1e-12,
            format!("vacuum max {vacuum:.1e}; classical inputs max {classical:.3e} ({worst_case})"),
        ),
        inputs,
    )
}

/// The bound that does hold: no output weight below `n - N_max_in`.
fn activation_corrected(inputs: &[DiagonalState]) -> Outcome {
    let mut worst = 0.0f64;
    for kappa in [0.5, 1.0] {
        for n in 1..=3 {
            for d in inputs {
                let ch = channel(Family::Conjugator, kappa, n, d.dim());
                let out = apply_diagonal(&ch, d).unwrap();
                let range = support_bounds(Family::Conjugator, n, SupportRange::of(d, 0.0).unwrap());
                let low = out.probs()[..range.n_min].iter().cloned().fold(0.0, f64::max);
                worst = worst.max(low);
            }
        }
    }
    outcome(worst <= 1e-12, format!("zero weight below n - max input level: max {worst:.1e}"))
}

fn suite_criterion(suite: Suite, cfg: &VerifyConfig) -> Outcome {
    let t = Instant::now();
    let r = run_suite(suite, cfg);
    let mut detail = format!(
        "{} checks, worst observed/threshold {:.1e}, {:.1?}",
        r.tally.checks,
        r.tally.worst_ratio,
        t.elapsed()
    );
    if let Some(f) = r.tally.failures.first() {
        detail.push_str(&format!("; first failure: {f}"));
    }
    outcome(r.passed, detail)
}

fn main() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (c7, classical_inputs) = activation(&mut rng);
    let standard = VerifyConfig::default();
    let criteria: Vec<Criterion> = vec![
        (1, "reference table reproduction", Box::new(table2_reproduction)),
        (2, "n=0 baseline", Box::new(n0_baseline)),
        (3, "oracle equivalence", Box::new(oracle_equivalence)),
        (4, "CPTP", Box::new(cptp)),
        (5, "complementarity", Box::new(complementarity)),
        (6, "support ranges", Box::new(support_ranges)),
        (7, "nonclassicality activation", Box::new(move || c7)),
        (8, "Fock preservation", {
            let cfg = standard.clone();
            Box::new(move || suite_criterion(Suite::FockPreservation, &cfg))
        }),
        (9, "W structure and rank", {
            let cfg = standard.clone();
            Box::new(move || suite_criterion(Suite::Quadratic, &cfg))
        }),
        (10, "error correction", Box::new(|| {
            let cfg = VerifyConfig {
                dim_in: 11,
                n_values: vec![0, 1, 2, 3],
                ..VerifyConfig::default()
            };
            suite_criterion(Suite::Errcorr, &cfg)
        })),
        (11, "mixture decomposition", {
            let cfg = standard.clone();
            Box::new(move || suite_criterion(Suite::Mixture, &cfg))
        }),
    ];

    let mut failed = Vec::new();
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        let o = check();
        println!("{} {id:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if id == 7 {
            let c = activation_corrected(&classical_inputs);
            println!("{}  7' corrected lower bound: {}", if c.passed { "PASS" } else { "FAIL" }, c.detail);
            if !c.passed {
                unexpected.push(7);
            }
        }
        if !o.passed {
            failed.push(id);
            if !KNOWN_FALSE.contains(&id) {
                unexpected.push(id);
            }
        }
    }
    println!(
        "\n{} of 11 criteria pass; failing: {:?} (known false as stated: {:?}); {:.1?}",
        11 - failed.len(),
        failed,
        KNOWN_FALSE,
        start.elapsed()
    );
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
