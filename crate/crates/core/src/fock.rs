//! Truncated Fock-space primitives: states, log-factorials and the small
//! amount of dense linear algebra every other module leans on.
//!
//! Matrices are indexed `(row m, column n) = <m|rho|n>` with levels starting
//! at the vacuum.

use std::sync::LazyLock;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Default per-computation tolerance on probability mass lost to truncation.
pub const DEFAULT_LEAKAGE_TOL: f64 = 1e-6;

/// Hermiticity tolerance on `max |rho - rho^dagger|`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Smallest eigenvalue accepted as "positive".
pub const PSD_TOL: f64 = -1e-10;

const LOG_FACTORIAL_TABLE: usize = 4096;

static LOG_FACTORIALS: LazyLock<Vec<f64>> = LazyLock::new(|| {
    let mut table = Vec::with_capacity(LOG_FACTORIAL_TABLE);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    table.push(0.0);
    for k in 1..LOG_FACTORIAL_TABLE {
        // Neumaier summation of ln(1) + ... + ln(k)
        let x = (k as f64).ln();
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        table.push(sum + comp);
    }
    table
});

/// `ln(k!)`.
pub fn log_factorial(k: usize) -> f64 {
    if k < LOG_FACTORIAL_TABLE {
        return LOG_FACTORIALS[k];
    }
    // Stirling series for ln Gamma(x), x = k + 1.
    let x = k as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn log_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    log_factorial(n) - log_factorial(k) - log_factorial(n - k)
}

/// Input and output Fock cutoffs of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    dim_in: usize,
    dim_out: usize,
}

impl Truncation {
    pub fn new(dim_in: usize, dim_out: usize) -> Result<Self> {
        if dim_in == 0 {
            return Err(Error::InvalidState("dim_in must be at least 1".into()));
        }
        if dim_out < dim_in {
            return Err(Error::DimensionMismatch {
                expected: dim_in,
                got: dim_out,
            });
        }
        Ok(Self { dim_in, dim_out })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }
}

/// Pure state on levels `0..dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
}

impl PureState {
    /// Requires unit norm within 1e-12.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidState("empty amplitude vector".into()));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!(
                "amplitude vector has norm {norm}, expected 1"
            )));
        }
        Ok(Self { amps })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Self::new(amps.into_iter().map(|a| a / norm).collect())
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amp(&self, level: usize) -> C64 {
        self.amps.get(level).copied().unwrap_or_default()
    }
}

/// Fock-diagonal state. `tail_mass` records probability known to sit above
/// the stored cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalState {
    probs: Vec<f64>,
    #[serde(default)]
    tail_mass: f64,
}

impl DiagonalState {
    /// Validates nonnegativity and `1 - trace_tol <= sum <= 1`.
    pub fn new(probs: Vec<f64>, trace_tol: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidState("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidState(format!("negative or non-finite weight {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if sum > 1.0 + 1e-12 || sum < 1.0 - trace_tol {
            return Err(Error::InvalidState(format!(
                "weights sum to {sum}, outside [1 - {trace_tol:e}, 1]"
            )));
        }
        Ok(Self {
            probs,
            tail_mass: (1.0 - sum).max(0.0),
        })
    }

    pub(crate) fn from_parts(probs: Vec<f64>, tail_mass: f64) -> Self {
        Self { probs, tail_mass }
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, level: usize) -> f64 {
        self.probs.get(level).copied().unwrap_or(0.0)
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Smallest and largest occupied level (weights strictly above `floor`).
    pub fn support(&self, floor: f64) -> Option<(usize, usize)> {
        let lo = self.probs.iter().position(|p| *p > floor)?;
        let hi = self.probs.iter().rposition(|p| *p > floor)?;
        Some((lo, hi))
    }
}

/// Dense density matrix on levels `0..dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    entries: DMatrix<C64>,
}

impl FockDensityMatrix {
    /// Checks Hermiticity, positivity and `1 - trace_tol <= tr <= 1`.
    pub fn new(entries: DMatrix<C64>, trace_tol: f64) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidState("density matrix must be square and nonempty".into()));
        }
        let rho = Self { entries };
        let herm = rho.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = rho.trace();
        if tr > 1.0 + 1e-12 || tr < 1.0 - trace_tol {
            return Err(Error::InvalidState(format!(
                "trace {tr} outside [1 - {trace_tol:e}, 1]"
            )));
        }
        let min = rho.min_eigenvalue();
        if min < PSD_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(rho)
    }

    /// Wraps a matrix without validation; used for channel outputs whose
    /// properties are checked separately.
    pub fn from_matrix_unchecked(entries: DMatrix<C64>) -> Self {
        Self { entries }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi.amps());
        Self {
            entries: &v * v.adjoint(),
        }
    }

    pub fn from_diagonal(d: &DiagonalState) -> Self {
        let n = d.dim();
        let mut entries = DMatrix::zeros(n, n);
        for (i, p) in d.probs().iter().enumerate() {
            entries[(i, i)] = C64::new(*p, 0.0);
        }
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn get(&self, m: usize, n: usize) -> C64 {
        if m < self.dim() && n < self.dim() {
            self.entries[(m, n)]
        } else {
            C64::default()
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }

    /// Largest off-diagonal modulus.
    pub fn off_diagonal_max(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.entries[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.off_diagonal_max() == 0.0 {
            let mut d = self.diagonal();
            d.sort_by(f64::total_cmp);
            return d;
        }
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Zero-pads (or crops) to `dim` levels.
    pub fn resized(&self, dim: usize) -> Self {
        let mut entries = DMatrix::zeros(dim, dim);
        let k = dim.min(self.dim());
        entries
            .view_mut((0, 0), (k, k))
            .copy_from(&self.entries.view((0, 0), (k, k)));
        Self { entries }
    }

    /// Largest elementwise modulus of `self - other` on the common window.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.dim().max(other.dim());
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.get(i, j) - other.get(i, j)).norm());
            }
        }
        worst
    }
}

/// `|j>` on `dim` levels.
pub fn fock_state(j: usize, dim: usize) -> Result<PureState> {
    if j >= dim {
        return Err(Error::OutOfRange { index: j, dim });
    }
    let mut amps = vec![C64::default(); dim];
    amps[j] = C64::new(1.0, 0.0);
    PureState::new(amps)
}

/// Thermal state `p_n = nbar^n / (1 + nbar)^(n + 1)` cut at `dim` levels.
pub fn thermal_state(nbar: f64, dim: usize) -> Result<DiagonalState> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(domain("nbar", nbar, "[0, inf)"));
    }
    if dim == 0 {
        return Err(Error::InvalidState("dim must be at least 1".into()));
    }
    let ratio = nbar / (1.0 + nbar);
    let mut probs = Vec::with_capacity(dim);
    let mut p = 1.0 / (1.0 + nbar);
    for _ in 0..dim {
        probs.push(p);
        p *= ratio;
    }
    // exact geometric tail beyond the cutoff
    let tail = ratio.powi(dim as i32);
    Ok(DiagonalState::from_parts(probs, tail))
}

/// Smallest cutoff whose thermal tail `(nbar / (1 + nbar))^dim` is at most
/// `tail_tol`.
pub fn thermal_cutoff(nbar: f64, tail_tol: f64) -> usize {
    if nbar <= 0.0 {
        return 1;
    }
    let ratio = nbar / (1.0 + nbar);
    let mut dim = 1usize;
    let mut tail = ratio;
    while tail > tail_tol {
        tail *= ratio;
        dim += 1;
    }
    dim
}

/// Photon-added thermal state: `a^dagger^k rho_th a^k`, renormalized.
///
/// The normalization uses the untruncated constant `k! (1 + nbar)^k`, so mass
/// that falls beyond `dim` shows up in `tail_mass`.
pub fn pats_state(nbar: f64, k_additions: usize, dim: usize) -> Result<DiagonalState> {
    if k_additions == 0 {
        return Err(Error::InvalidState("k_additions must be at least 1".into()));
    }
    if dim <= k_additions {
        return Err(Error::OutOfRange {
            index: k_additions,
            dim,
        });
    }
    let thermal = thermal_state(nbar, dim - k_additions)?;
    let log_scale = k_additions as f64 * (1.0 + nbar).ln();
    let mut probs = vec![0.0; dim];
    for (n, p) in thermal.probs().iter().enumerate() {
        let m = n + k_additions;
        if *p > 0.0 {
            probs[m] = (p.ln() + log_binomial(m, k_additions) - log_scale).exp();
        }
    }
    let sum: f64 = probs.iter().sum();
    Ok(DiagonalState::from_parts(probs, (1.0 - sum).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_factorial_small_values() {
        assert_eq!(log_factorial(0), 0.0);
        assert_eq!(log_factorial(1), 0.0);
        assert!((log_factorial(10) - 3628800f64.ln()).abs() < 1e-14 * 15.1);
    }

    #[test]
    fn log_factorial_stirling_branch_is_continuous() {
        let k = LOG_FACTORIAL_TABLE - 1;
        let table = log_factorial(k);
        let next = log_factorial(k + 1);
        let expected = table + ((k + 1) as f64).ln();
        assert!((next - expected).abs() / expected < 1e-14);
    }

    #[test]
    fn fock_states() {
        let s = fock_state(2, 4).unwrap();
        assert_eq!(s.amps()[2], C64::new(1.0, 0.0));
        assert_eq!(s.amps().iter().filter(|a| a.norm() > 0.0).count(), 1);
        assert_eq!(fock_state(0, 4).unwrap().amp(0), C64::new(1.0, 0.0));
        assert!(matches!(fock_state(5, 4), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn thermal_examples() {
        let vac = thermal_state(0.0, 5).unwrap();
        assert_eq!(vac.probs(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let t = thermal_state(1.0, 3).unwrap();
        assert_eq!(t.probs(), &[0.5, 0.25, 0.125]);
        assert_eq!(t.tail_mass(), 0.125);
        let wide = thermal_state(0.5, 40).unwrap();
        assert!(wide.total() >= 1.0 - 1e-6);
        assert!(thermal_state(-0.1, 4).is_err());
    }

    #[test]
    fn thermal_is_geometric() {
        let nbar = 0.7;
        let t = thermal_state(nbar, 30).unwrap();
        let ratio = nbar / (1.0 + nbar);
        for w in t.probs().windows(2) {
            assert!(w[1] < w[0]);
            assert!((w[1] / w[0] - ratio).abs() < 1e-15);
        }
    }

    #[test]
    fn pats_examples() {
        let one = pats_state(0.0, 1, 5).unwrap();
        assert_eq!(one.probs(), &[0.0, 1.0, 0.0, 0.0, 0.0]);

        // a^dagger |n><n| a = (n + 1) |n + 1><n + 1|, thermal weight (1/2)^(n + 1),
        // normalized by sum_n (n + 1) (1/2)^(n + 1) = 2
        let p = pats_state(1.0, 1, 60).unwrap();
        assert_eq!(p.prob(0), 0.0);
        for n in 0..20 {
            let expected = (n as f64 + 1.0) * 0.5f64.powi(n as i32 + 1) / 2.0;
            assert!((p.prob(n + 1) - expected).abs() < 1e-14);
        }
        assert!((p.total() - 1.0).abs() < 1e-12);

        let q = pats_state(0.3, 2, 30).unwrap();
        assert_eq!(q.prob(0), 0.0);
        assert_eq!(q.prob(1), 0.0);
        assert!(pats_state(0.3, 3, 3).is_err());
    }

    #[test]
    fn pats_of_vacuum_is_fock() {
        for k in 1..6 {
            let d = pats_state(0.0, k, 10).unwrap();
            for (m, p) in d.probs().iter().enumerate() {
                assert_eq!(*p, if m == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn density_matrix_validation() {
        let psi = PureState::normalized(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).unwrap();
        let rho = FockDensityMatrix::from_pure(&psi);
        let checked = FockDensityMatrix::new(rho.entries().clone(), 1e-6).unwrap();
        assert!(checked.hermiticity_error() <= HERMITIAN_TOL);
        assert!(checked.min_eigenvalue() > -1e-12);

        let mut bad = rho.entries().clone();
        bad[(0, 0)] = C64::new(1.2, 0.0);
        bad[(1, 1)] = C64::new(-0.2, 0.0);
        assert!(matches!(
            FockDensityMatrix::new(bad, 1e-6),
            Err(Error::NotPositive { .. })
        ));
    }
}
