//! Entropies, coherent information, simple witnesses and parameter sweeps.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply, apply_diagonal, complementary_params};
use crate::error::{Error, Result};
use crate::fock::{DiagonalState, FockDensityMatrix, Truncation, PSD_TOL};
use crate::kraus::{ChannelSpec, Family};

/// Eigenvalues below this are treated as zero.
pub const EIGEN_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Two,
    E,
}

impl LogBase {
    fn ln_scale(self) -> f64 {
        match self {
            LogBase::Two => std::f64::consts::LN_2,
            LogBase::E => 1.0,
        }
    }
}

/// `-sum p log p` over weights, `0 log 0 = 0`.
pub fn entropy_of_weights(weights: &[f64], base: LogBase) -> f64 {
    let s: f64 = weights
        .iter()
        .filter(|p| **p > EIGEN_FLOOR)
        .map(|p| -p * p.ln())
        .sum();
    (s / base.ln_scale()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub entropy: f64,
    pub min_eigenvalue: f64,
    /// Total magnitude of the eigenvalues that were clipped to zero.
    pub clipped_weight: f64,
    /// Entropy change from clipping, `|S(clipped) - S(|lambda|)|`.
    pub sensitivity: f64,
}

/// Von Neumann entropy with the clipping diagnostics.
pub fn entropy_report(rho: &FockDensityMatrix, base: LogBase) -> Result<EntropyReport> {
    let eig = rho.eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < PSD_TOL {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    let clipped_weight = eig.iter().filter(|l| **l < 0.0).map(|l| -l).sum();
    let abs: Vec<f64> = eig.iter().map(|l| l.abs()).collect();
    let entropy = entropy_of_weights(&eig, base);
    Ok(EntropyReport {
        entropy,
        min_eigenvalue: min,
        clipped_weight,
        sensitivity: (entropy_of_weights(&abs, base) - entropy).abs(),
    })
}

pub fn von_neumann_entropy(rho: &FockDensityMatrix, base: LogBase) -> Result<f64> {
    entropy_report(rho, base).map(|r| r.entropy)
}

/// `<0|rho|0>`, the Husimi function at the origin up to `1/pi`. Zero
/// certifies a nonclassical state.
pub fn q_at_origin(rho: &FockDensityMatrix) -> f64 {
    rho.get(0, 0).re
}

pub fn mean_photon(rho: &FockDensityMatrix) -> f64 {
    rho.diagonal().iter().enumerate().map(|(m, p)| m as f64 * p).sum()
}

pub fn mean_photon_diagonal(d: &DiagonalState) -> f64 {
    d.probs().iter().enumerate().map(|(m, p)| m as f64 * p).sum()
}

/// How output dimensions are chosen for entropy calculations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Output dimensions tried in order; the first one whose leakage is below
    /// the threshold is used. A single entry is a fixed truncation.
    pub schedule: Vec<usize>,
    pub leakage_threshold: f64,
    /// Completeness target for the Kraus index cutoff.
    pub kraus_tol: f64,
    pub base: LogBase,
}

impl TruncationPolicy {
    pub fn fixed(dim_out: usize) -> Self {
        Self {
            schedule: vec![dim_out],
            ..Self::default()
        }
    }

    pub fn with_base(mut self, base: LogBase) -> Self {
        self.base = base;
        self
    }

    pub fn with_leakage_threshold(mut self, threshold: f64) -> Self {
        self.leakage_threshold = threshold;
        self
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            schedule: vec![32, 64, 111, 160, 240, 360],
            leakage_threshold: crate::fock::DEFAULT_LEAKAGE_TOL,
            kraus_tol: 1e-12,
            base: LogBase::Two,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentInfo {
    pub i_coh: f64,
    pub s_out: f64,
    pub s_comp: f64,
    /// `1 - tr` of the truncated outputs.
    pub leakage_out: f64,
    pub leakage_comp: f64,
    pub dim_out: usize,
    /// Leakage exceeded the policy threshold at every scheduled dimension.
    pub flagged: bool,
}

/// Output and complementary-output entropies at one output dimension.
fn entropies_at(
    spec: &ChannelSpec,
    rho: &FockDensityMatrix,
    dim_out: usize,
    policy: &TruncationPolicy,
) -> Result<CoherentInfo> {
    let dim_in = rho.dim();
    let trunc = Truncation::new(dim_in, dim_out.max(dim_in))?;
    let (cf, ck) = complementary_params(spec.family, spec.kappa)?;
    let comp = ChannelSpec::new(cf, ck, spec.n_add)?;
    let diagonal = rho.off_diagonal_max() == 0.0;
    let run = |s: &ChannelSpec| -> Result<(f64, f64)> {
        let ch = s.build_unchecked(trunc, policy.kraus_tol)?;
        if diagonal {
            let d = DiagonalState::new(rho.diagonal(), 1.0)?;
            let out = apply_diagonal(&ch, &d)?;
            Ok((entropy_of_weights(out.probs(), policy.base), 1.0 - out.total()))
        } else {
            let out = apply(&ch, rho)?;
            Ok((von_neumann_entropy(&out, policy.base)?, 1.0 - out.trace()))
        }
    };
    let (out, comp_out) = rayon::join(|| run(spec), || run(&comp));
    let ((s_out, leakage_out), (s_comp, leakage_comp)) = (out?, comp_out?);
    Ok(CoherentInfo {
        i_coh: s_out - s_comp,
        s_out,
        s_comp,
        leakage_out,
        leakage_comp,
        dim_out: trunc.dim_out(),
        flagged: leakage_out.max(leakage_comp) > policy.leakage_threshold,
    })
}

/// `S(Phi(rho)) - S(Phi^c(rho))`, both at the same output dimension.
pub fn coherent_information(
    spec: &ChannelSpec,
    rho: &FockDensityMatrix,
    policy: &TruncationPolicy,
) -> Result<CoherentInfo> {
    if policy.schedule.is_empty() {
        return Err(Error::InvalidState("empty truncation schedule".into()));
    }
    let mut last = None;
    for &dim_out in &policy.schedule {
        let r = entropies_at(spec, rho, dim_out, policy)?;
        if !r.flagged {
            return Ok(r);
        }
        last = Some(r);
    }
    Ok(last.expect("schedule is nonempty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    NAdd,
    Kappa,
    Truncation,
}

impl SweepKind {
    pub fn axis_name(self) -> &'static str {
        match self {
            SweepKind::NAdd => "n_add",
            SweepKind::Kappa => "kappa",
            SweepKind::Truncation => "truncation",
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" | "n_add" | "n-add" => Ok(Self::NAdd),
            "kappa" => Ok(Self::Kappa),
            "trunc" | "truncation" => Ok(Self::Truncation),
            other => Err(Error::Parse(format!("unknown sweep kind '{other}'"))),
        }
    }
}

pub const SWEEP_COLUMNS: [&str; 7] = [
    "s_out",
    "s_comp",
    "i_coh",
    "leakage_out",
    "leakage_comp",
    "dim_out",
    "delta",
];

/// One row per grid point. `delta` is the change of the tracked quantity
/// (`s_out` for truncation sweeps, `i_coh` otherwise) from the previous
/// point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub axis_name: String,
    pub axis_values: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub status: Vec<String>,
}

impl SweepResult {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn all_ok(&self) -> bool {
        self.status.iter().all(|s| s == "ok")
    }

    /// Every `delta` after the first point is strictly negative.
    pub fn strictly_decreasing(&self) -> bool {
        self.column("delta")
            .map(|d| d.iter().skip(1).all(|x| *x < 0.0))
            .unwrap_or(false)
    }

    /// First axis value from which the tracked quantity stays within `tol`
    /// of the final point.
    pub fn plateau_start(&self, tol: f64) -> Option<f64> {
        let name = if self.kind == SweepKind::Truncation { "s_out" } else { "i_coh" };
        let col = self.column(name)?;
        let last = *col.last()?;
        let idx = (0..col.len()).find(|&i| col[i..].iter().all(|v| (v - last).abs() <= tol))?;
        Some(self.axis_values[idx])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.axis_name.clone()];
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        header.push("status".into());
        w.write_record(&header).map_err(csv_err)?;
        for (i, x) in self.axis_values.iter().enumerate() {
            let mut row = vec![format_value(*x)];
            row.extend(self.columns.iter().map(|(_, v)| format_value(v[i])));
            row.push(self.status[i].clone());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serializes")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn format_value(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.12e}")
    }
}

/// Coherent information along one parameter axis. Failing points are
/// recorded in `status` and filled with NaN; the sweep continues.
pub fn sweep(
    kind: SweepKind,
    base: ChannelSpec,
    rho: &FockDensityMatrix,
    grid: &[f64],
    policy: &TruncationPolicy,
) -> SweepResult {
    let rows: Vec<Result<CoherentInfo>> = grid
        .par_iter()
        .map(|&x| match kind {
            SweepKind::NAdd => {
                let spec = ChannelSpec::new(base.family, base.kappa, x as usize)?;
                coherent_information(&spec, rho, policy)
            }
            SweepKind::Kappa => {
                let spec = ChannelSpec::new(base.family, x, base.n_add)?;
                coherent_information(&spec, rho, policy)
            }
            SweepKind::Truncation => {
                let p = TruncationPolicy {
                    schedule: vec![x as usize],
                    ..policy.clone()
                };
                coherent_information(&base, rho, &p)
            }
        })
        .collect();

    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); SWEEP_COLUMNS.len()];
    let mut status = Vec::with_capacity(grid.len());
    let mut prev: Option<f64> = None;
    for row in rows {
        match row {
            Ok(r) => {
                let tracked = if kind == SweepKind::Truncation { r.s_out } else { r.i_coh };
                let vals = [
                    r.s_out,
                    r.s_comp,
                    r.i_coh,
                    r.leakage_out,
                    r.leakage_comp,
                    r.dim_out as f64,
                    prev.map_or(f64::NAN, |p| tracked - p),
                ];
                for (c, v) in cols.iter_mut().zip(vals) {
                    c.push(v);
                }
                prev = Some(tracked);
                status.push(if r.flagged { "leakage".to_string() } else { "ok".to_string() });
            }
            Err(e) => {
                for c in cols.iter_mut() {
                    c.push(f64::NAN);
                }
                prev = None;
                status.push(format!("error: {e}"));
            }
        }
    }
    SweepResult {
        kind,
        axis_name: kind.axis_name().to_string(),
        axis_values: grid.to_vec(),
        columns: SWEEP_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .zip(cols)
            .collect(),
        status,
    }
}

/// One row of the conjugator/amplifier entropy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n_add: usize,
    pub input: Vec<f64>,
    pub result: CoherentInfo,
}

/// Inputs of the five reference rows, `n = 1..=5`.
pub fn table2_inputs() -> Vec<(usize, Vec<f64>)> {
    vec![
        (1, vec![0.6, 0.4]),
        (2, vec![0.4, 0.3, 0.3]),
        (3, vec![0.35, 0.35, 0.3]),
        (4, vec![0.35, 0.35, 0.3]),
        (5, vec![0.3, 0.3, 0.2, 0.2]),
    ]
}

/// Conjugator `C(sqrt(1.25); n)` against its complement `A(1.5; n)` at output
/// dimension `dim_out`.
pub fn table2(dim_out: usize, base: LogBase) -> Result<Vec<TableRow>> {
    let kappa = 1.25f64.sqrt();
    let policy = TruncationPolicy::fixed(dim_out).with_base(base);
    table2_inputs()
        .into_par_iter()
        .map(|(n, input)| {
            let spec = ChannelSpec::new(Family::Conjugator, kappa, n)?;
            let rho = diagonal_rho(&input)?;
            let result = coherent_information(&spec, &rho, &policy)?;
            Ok(TableRow {
                n_add: n,
                input,
                result,
            })
        })
        .collect()
}

/// Diagonal density matrix from weights.
pub fn diagonal_rho(weights: &[f64]) -> Result<FockDensityMatrix> {
    let d = DiagonalState::new(weights.to_vec(), 1e-12)?;
    Ok(FockDensityMatrix::from_diagonal(&d))
}

/// Dense density matrix for `weights` embedded into `dim` levels.
pub fn embed(rho: &FockDensityMatrix, dim: usize) -> FockDensityMatrix {
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    let k = rho.dim().min(dim);
    m.view_mut((0, 0), (k, k)).copy_from(&rho.entries().view((0, 0), (k, k)));
    FockDensityMatrix::from_matrix_unchecked(m)
}
