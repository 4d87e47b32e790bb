//! Invariant suites run over a parameter grid. Each suite records every
//! check with its observed value and threshold; a suite passes when no
//! check exceeds its threshold.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    apply, apply_diagonal, complementary_params, dephasing_commutator, fock_action, mixture_noisy,
    support_bounds, MixtureOptions, SupportRange, DEFAULT_MIXTURE_TAIL,
};
use crate::dilation::{
    build_unitary, channel_via_dilation, complementary_via_dilation, guarded_dim, DilationSpec,
    Environment, UnitaryKind, DEFAULT_GUARD_FACTOR,
};
use crate::errcorr::{corrected_apply, DEFAULT_NULL_THRESHOLD};
use crate::error::{Error, Result};
use crate::fock::{thermal_cutoff, thermal_state, FockDensityMatrix, Truncation, HERMITIAN_TOL, PSD_TOL};
use crate::info::{mean_photon_diagonal, von_neumann_entropy, LogBase};
use crate::kraus::{build_auto, Family, PhotonAddedChannel};
use crate::quadratic::{independence_rank, w_closed_form, w_operator};
use crate::random;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Completeness,
    Oracle,
    Complementarity,
    FockPreservation,
    Support,
    Quadratic,
    Errcorr,
    Mixture,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Completeness,
        Suite::Oracle,
        Suite::Complementarity,
        Suite::FockPreservation,
        Suite::Support,
        Suite::Quadratic,
        Suite::Errcorr,
        Suite::Mixture,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Completeness => "completeness",
            Suite::Oracle => "oracle",
            Suite::Complementarity => "complementarity",
            Suite::FockPreservation => "fock_preservation",
            Suite::Support => "support",
            Suite::Quadratic => "quadratic",
            Suite::Errcorr => "errcorr",
            Suite::Mixture => "mixture",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s || (s == "fock" && *x == Suite::FockPreservation))
            .ok_or_else(|| Error::Parse(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub dim_in: usize,
    pub n_values: Vec<usize>,
    pub attenuator_kappas: Vec<f64>,
    pub amplifier_kappas: Vec<f64>,
    pub conjugator_kappas: Vec<f64>,
    /// Completeness target for amplifier and conjugator Kraus sets.
    pub kraus_tol: f64,
    pub guard_factor: usize,
    /// Multiply every Kraus value by `1 + perturb` (fault injection).
    pub perturb: Option<f64>,
    pub seed: u64,
    /// Random inputs per grid point.
    pub samples: usize,
    /// Largest Kraus index used by the quadratic suite.
    pub max_l: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            dim_in: 12,
            n_values: vec![0, 1, 2],
            attenuator_kappas: vec![0.3, 0.6, 0.9],
            amplifier_kappas: vec![1.0, 1.25, 1.5],
            conjugator_kappas: vec![0.0, 0.5, 1.0],
            kraus_tol: 1e-10,
            guard_factor: DEFAULT_GUARD_FACTOR,
            perturb: None,
            seed: 2024,
            samples: 2,
            max_l: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub family: Family,
    pub kappa: f64,
    pub n_add: usize,
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(kappa={}, n={})", self.family.short_name(), self.kappa, self.n_add)
    }
}

impl VerifyConfig {
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut g = Vec::new();
        for (family, kappas) in [
            (Family::Attenuator, &self.attenuator_kappas),
            (Family::Amplifier, &self.amplifier_kappas),
            (Family::Conjugator, &self.conjugator_kappas),
        ] {
            for &kappa in kappas {
                for &n_add in &self.n_values {
                    g.push(GridPoint { family, kappa, n_add });
                }
            }
        }
        g
    }

    /// The channel under test, with the configured fault injected.
    pub fn channel(&self, p: GridPoint) -> Result<PhotonAddedChannel> {
        self.channel_with_dim(p, self.dim_in)
    }

    fn channel_with_dim(&self, p: GridPoint, dim_in: usize) -> Result<PhotonAddedChannel> {
        let tol = match p.family {
            Family::Attenuator => 1e-12,
            _ => self.kraus_tol,
        };
        let ch = build_auto(p.family, p.kappa, p.n_add, dim_in, tol)?;
        Ok(match self.perturb {
            Some(eps) => ch.scaled(1.0 + eps),
            None => ch,
        })
    }

    fn completeness_tol(&self, family: Family) -> f64 {
        match family {
            Family::Attenuator => 1e-12,
            _ => self.kraus_tol,
        }
    }

    fn rng(&self, p: GridPoint, salt: u64) -> ChaCha8Rng {
        let fam = match p.family {
            Family::Attenuator => 1,
            Family::Amplifier => 2,
            Family::Conjugator => 3,
        };
        ChaCha8Rng::seed_from_u64(
            self.seed ^ (fam << 40) ^ ((p.n_add as u64) << 32) ^ p.kappa.to_bits().rotate_left(7) ^ salt,
        )
    }
}

/// A failed or passed check, aggregated per suite.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub checks: usize,
    /// Largest observed / threshold ratio; below 1 means every check passed.
    pub worst_ratio: f64,
    pub failures: Vec<String>,
}

impl Tally {
    pub fn check(&mut self, label: impl FnOnce() -> String, observed: f64, threshold: f64) {
        self.checks += 1;
        let ratio = if threshold > 0.0 { observed / threshold } else if observed > 0.0 { f64::INFINITY } else { 0.0 };
        if ratio.is_nan() || ratio > self.worst_ratio {
            self.worst_ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
        }
        if !(observed <= threshold) {
            self.failures.push(format!("{}: {observed:.3e} > {threshold:.3e}", label()));
        }
    }

    pub fn fail(&mut self, label: String) {
        self.checks += 1;
        self.worst_ratio = f64::INFINITY;
        self.failures.push(label);
    }

    pub fn merge(&mut self, other: Tally) {
        self.checks += other.checks;
        self.worst_ratio = self.worst_ratio.max(other.worst_ratio);
        self.failures.extend(other.failures);
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    #[serde(flatten)]
    pub tally: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn failing(&self) -> Vec<Suite> {
        self.suites.iter().filter(|s| !s.passed).map(|s| s.suite).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn run(suites: &[Suite], cfg: &VerifyConfig) -> VerifyReport {
    let suites: Vec<SuiteReport> = suites.iter().map(|s| run_suite(*s, cfg)).collect();
    VerifyReport {
        passed: suites.iter().all(|s| s.passed),
        suites,
    }
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> SuiteReport {
    let tally = match suite {
        Suite::Mixture => guarded(mixture_suite(cfg)),
        _ => {
            let per_point: Vec<Tally> = cfg
                .grid()
                .into_par_iter()
                .map(|p| {
                    let r = match suite {
                        Suite::Completeness => completeness_point(cfg, p),
                        Suite::Oracle => oracle_point(cfg, p),
                        Suite::Complementarity => complementarity_point(cfg, p),
                        Suite::FockPreservation => fock_point(cfg, p),
                        Suite::Support => support_point(cfg, p),
                        Suite::Quadratic => quadratic_point(cfg, p),
                        Suite::Errcorr => errcorr_point(cfg, p),
                        Suite::Mixture => unreachable!(),
                    };
                    r.unwrap_or_else(|e| {
                        let mut t = Tally::default();
                        t.fail(format!("{p}: {e}"));
                        t
                    })
                })
                .collect();
            let mut t = Tally::default();
            for x in per_point {
                t.merge(x);
            }
            t
        }
    };
    SuiteReport {
        suite,
        passed: tally.passed(),
        tally,
    }
}

fn guarded(r: Result<Tally>) -> Tally {
    r.unwrap_or_else(|e| {
        let mut t = Tally::default();
        t.fail(e.to_string());
        t
    })
}

fn completeness_point(cfg: &VerifyConfig, p: GridPoint) -> Result<Tally> {
    let mut t = Tally::default();
    let ch = cfg.channel(p)?;
    t.check(|| format!("{p} completeness defect"), ch.completeness_defect(), cfg.completeness_tol(p.family));
    let mut rng = cfg.rng(p, 1);
    for s in 0..cfg.samples {
        let rho = random::density_matrix(&mut rng, cfg.dim_in, 3);
        let out = apply(&ch, &rho)?;
        t.check(|| format!("{p} sample {s} hermiticity"), out.hermiticity_error(), HERMITIAN_TOL);
        t.check(|| format!("{p} sample {s} negativity"), -out.min_eigenvalue(), -PSD_TOL);
        let tr = out.trace();
        t.check(
            || format!("{p} sample {s} trace"),
            (1.0 - tr).abs(),
            ch.completeness_defect() + 1e-12,
        );
    }
    Ok(t)
}

fn oracle_point(cfg: &VerifyConfig, p: GridPoint) -> Result<Tally> {
    let mut t = Tally::default();
    let ch = cfg.channel(p)?;
    let dim_out = ch.trunc().dim_out();
    let spec = DilationSpec::photon_added(p.family, p.kappa, p.n_add, guarded_dim(dim_out, cfg.guard_factor))?;
    let rho = random::density_matrix(&mut cfg.rng(p, 2), cfg.dim_in, 3);
    let kraus_out = apply(&ch, &rho)?;
    let oracle_out = channel_via_dilation(&spec, &rho)?.resized(dim_out);
    t.check(|| format!("{p} oracle vs Kraus"), kraus_out.max_abs_diff(&oracle_out), 1e-8);
    Ok(t)
}

fn complementarity_point(cfg: &VerifyConfig, p: GridPoint) -> Result<Tally> {
    let mut t = Tally::default();
    let ch = cfg.channel(p)?;
    let (cf, ck) = complementary_params(p.family, p.kappa)?;
    let comp = cfg.channel(GridPoint { family: cf, kappa: ck, n_add: p.n_add })?;
    let mut rng = cfg.rng(p, 3);
    for s in 0..cfg.samples {
        let psi = FockDensityMatrix::from_pure(&random::pure_state(&mut rng, cfg.dim_in));
        let s_out = von_neumann_entropy(&apply(&ch, &psi)?, LogBase::Two)?;
        let s_comp = von_neumann_entropy(&apply(&comp, &psi)?, LogBase::Two)?;
        t.check(|| format!("{p} sample {s} entropy equality"), (s_out - s_comp).abs(), 1e-6);
    }
    // the environment output of the dilation is the complementary channel
    let dim_out = comp.trunc().dim_out();
    let spec = DilationSpec::photon_added(p.family, p.kappa, p.n_add, guarded_dim(dim_out, cfg.guard_factor))?;
    let rho = random::density_matrix(&mut rng, cfg.dim_in, 2);
    let oracle = complementary_via_dilation(&spec, &rho)?.resized(dim_out);
    t.check(
        || format!("{p} complement vs environment output"),
        apply(&comp, &rho)?.max_abs_diff(&oracle),
        1e-8,
    );
    if p.family == Family::Amplifier && p.n_add == 0 {
        t.check(|| format!("{p} flip relation"), flip_relation_defect(p.kappa, 10)?, 1e-9);
    }
    Ok(t)
}

/// `max |U[C(sqrt(kappa^2 - 1))] - U[A(kappa)] U_flip|` on `dim` levels per
/// mode.
pub fn flip_relation_defect(kappa: f64, dim: usize) -> Result<f64> {
    let amp = build_unitary(UnitaryKind::for_family(Family::Amplifier, kappa)?, dim)?.to_dense();
    let conj = build_unitary(
        UnitaryKind::for_family(Family::Conjugator, (kappa * kappa - 1.0).max(0.0).sqrt())?,
        dim,
    )?
    .to_dense();
    let flip = build_unitary(UnitaryKind::ModeFlip, dim)?.to_dense();
    Ok((conj - amp * flip).amax())
}

fn fock_point(cfg: &VerifyConfig, p: GridPoint) -> Result<Tally> {
    let mut t = Tally::default();
    let ch = cfg.channel(p)?;
    let mut rng = cfg.rng(p, 4);
    let d = random::diagonal_state(&mut rng, cfg.dim_in);
    let dense = apply(&ch, &FockDensityMatrix::from_diagonal(&d))?;
    t.check(|| format!("{p} off-diagonal output"), dense.off_diagonal_max(), 1e-12);
    if cfg.perturb.is_none() {
        let fast = apply_diagonal(&ch, &d)?;
        let diff = fast
            .probs()
            .iter()
            .enumerate()
            .map(|(m, x)| (x - dense.get(m, m).re).abs())
            .fold(0.0, f64::max);
        t.check(|| format!("{p} closed-form Fock action"), diff, 1e-10);
    }
    let rho = random::density_matrix(&mut rng, cfg.dim_in, 2);
    t.check(|| format!("{p} dephasing commutation"), dephasing_commutator(&ch, &rho)?, 1e-12);
    Ok(t)
}

fn support_point(cfg: &VerifyConfig, p: GridPoint) -> Result<Tally> {
    let mut t = Tally::default();
    let ch = cfg.channel(p)?;
    let dim_out = ch.trunc().dim_out();
    let slack = match p.family {
        Family::Attenuator => 0.0,
        _ => ch.completeness_defect(),
    };
    for j in 0..cfg.dim_in {
        let w = fock_action(p.family, p.kappa, p.n_add, j, dim_out)?;
        let range = support_bounds(p.family, p.n_add, SupportRange::finite(j, j)?);
        let outside: f64 = w
            .iter()
            .enumerate()
            .filter(|(m, _)| !range.contains(*m))
            .map(|(_, x)| *x)
            .sum();
        t.check(|| format!("{p} input |{j}> weight outside support"), outside, slack);
    }
    Ok(t)
}

fn quadratic_point(cfg: &VerifyConfig, p: GridPoint) -> Result<Tally> {
    let mut t = Tally::default();
    let ch = cfg.channel(p)?;
    let max_l = cfg.max_l.min(ch.kraus_cutoff());
    for l in 0..=max_l {
        let w = w_operator(&ch, l, l)?;
        t.check(|| format!("{p} W[{l},{l}] shift"), w.shift.unsigned_abs() as f64, 0.0);
        for lp in 0..=max_l {
            let direct = w_operator(&ch, l, lp)?;
            let closed = w_closed_form(p.family, p.kappa, p.n_add, l, lp, cfg.dim_in)?;
            let scale = cfg.perturb.map_or(1.0, |e| (1.0 + e) * (1.0 + e));
            let closed_scaled = crate::quadratic::QuadraticOperator {
                entries: closed.entries.iter().map(|(r, v)| (*r, v * scale)).collect(),
                ..closed
            };
            t.check(
                || format!("{p} W[{l},{lp}] closed form"),
                direct.max_abs_diff(&closed_scaled),
                1e-10,
            );
        }
    }
    let r = independence_rank(&ch, max_l)?;
    t.check(
        || format!("{p} rank deficit of {} quadratic operators", r.count),
        (r.count - r.rank) as f64,
        0.0,
    );
    Ok(t)
}

fn errcorr_point(cfg: &VerifyConfig, p: GridPoint) -> Result<Tally> {
    let mut t = Tally::default();
    let ch = cfg.channel(p)?;
    for x in 0..cfg.dim_in.min(11) {
        let c = corrected_apply(&ch, x, DEFAULT_NULL_THRESHOLD)?;
        t.check(
            || format!("{p} corrected fidelity on |{x}>"),
            1.0 - c.fidelity,
            ch.completeness_defect() + 1e-10,
        );
    }
    Ok(t)
}

fn mixture_suite(cfg: &VerifyConfig) -> Result<Tally> {
    let nbar = 1.0;
    let dim_in = 6;
    let results: Vec<Result<Tally>> = cfg
        .attenuator_kappas
        .par_iter()
        .map(|&kappa| mixture_point(cfg, kappa, nbar, dim_in))
        .collect();
    let mut t = Tally::default();
    for r in results {
        t.merge(r?);
    }
    Ok(t)
}

/// Thermal-noise attenuator: photon-number moments and agreement with the
/// dilation driven by the truncated thermal environment.
pub fn mixture_point(cfg: &VerifyConfig, kappa: f64, nbar: f64, dim_in: usize) -> Result<Tally> {
    let mut t = Tally::default();
    let cutoff = thermal_cutoff(nbar, DEFAULT_MIXTURE_TAIL) - 1;
    let trunc = Truncation::new(dim_in, dim_in + cutoff)?;
    let mut mix = mixture_noisy(Family::Attenuator, kappa, nbar, trunc, MixtureOptions::default())?;
    if let Some(eps) = cfg.perturb {
        mix.components = mix.components.iter().map(|c| c.scaled(1.0 + eps)).collect();
    }
    for m in 0..dim_in {
        let mut w = vec![0.0; dim_in];
        w[m] = 1.0;
        let d = crate::fock::DiagonalState::new(w, 0.0)?;
        let mean = mean_photon_diagonal(&mix.apply_diagonal(&d)?);
        let expected = kappa * kappa * m as f64 + (1.0 - kappa * kappa) * nbar;
        t.check(|| format!("mixture kappa={kappa} |{m}> mean photon number"), (mean - expected).abs(), 1e-5);
    }
    let env = thermal_state(nbar, cutoff + 1)?;
    let spec = DilationSpec::new(
        UnitaryKind::for_family(Family::Attenuator, kappa)?,
        dim_in + cutoff,
        Environment::Diagonal(env),
    )?;
    let rho = random::density_matrix(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ kappa.to_bits()), dim_in, 3);
    let oracle = channel_via_dilation(&spec, &rho)?;
    t.check(
        || format!("mixture kappa={kappa} vs thermal dilation"),
        mix.apply(&rho)?.max_abs_diff(&oracle),
        1e-6,
    );
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyConfig {
        VerifyConfig {
            dim_in: 4,
            n_values: vec![0, 1],
            attenuator_kappas: vec![0.6],
            amplifier_kappas: vec![1.2],
            conjugator_kappas: vec![0.5],
            samples: 1,
            max_l: 2,
            ..Default::default()
        }
    }

    #[test]
    fn cheap_suites_pass_on_a_small_grid() {
        let report = run(
            &[Suite::Completeness, Suite::FockPreservation, Suite::Support, Suite::Errcorr, Suite::Quadratic],
            &small(),
        );
        assert!(report.passed, "{}", report.to_json());
    }

    #[test]
    fn perturbation_breaks_completeness() {
        let cfg = VerifyConfig {
            perturb: Some(1e-3),
            ..small()
        };
        let r = run_suite(Suite::Completeness, &cfg);
        assert!(!r.passed);
        assert!(r.tally.worst_ratio > 1.0);
    }

    #[test]
    fn suite_names_parse() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!("fock".parse::<Suite>().unwrap(), Suite::FockPreservation);
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn flip_relation_holds() {
        assert!(flip_relation_defect(1.5, 8).unwrap() < 1e-12);
    }
}
