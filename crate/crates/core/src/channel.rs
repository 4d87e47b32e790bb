//! Channel action on states, output support ranges, complementary channels,
//! dephasing and thermal-noise mixtures.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{g1_sum, g2_sum, g3_sum, Bases};
use crate::error::{Error, Result};
use crate::fock::{
    log_factorial, thermal_cutoff, DiagonalState, FockDensityMatrix, Truncation,
};
use crate::kraus::{build, Band, Family, KrausChannel, PhotonAddedChannel};

/// Default thermal tail left out of a noisy-channel mixture.
pub const DEFAULT_MIXTURE_TAIL: f64 = 1e-8;

/// `sum_l F_l rho F_l^dagger`.
///
/// Each operator is handled band by band; per-operator contributions are
/// computed in parallel and summed in ascending Kraus order.
pub fn apply(channel: &impl AsRef<KrausChannel>, rho: &FockDensityMatrix) -> Result<FockDensityMatrix> {
    let ch = channel.as_ref();
    if rho.dim() != ch.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: ch.dim_in(),
            got: rho.dim(),
        });
    }
    let d = ch.dim_out();
    let parts: Vec<DMatrix<C64>> = ch
        .operators()
        .par_iter()
        .map(|op| {
            let mut out = DMatrix::zeros(d, d);
            for b1 in &op.bands {
                for b2 in &op.bands {
                    add_band_product(&mut out, b1, rho.entries(), b2);
                }
            }
            out
        })
        .collect();
    let mut out = DMatrix::zeros(d, d);
    for p in parts {
        out += p;
    }
    Ok(FockDensityMatrix::from_matrix_unchecked(out))
}

/// `out += B1 rho B2^dagger` for two bands.
fn add_band_product(out: &mut DMatrix<C64>, b1: &Band, rho: &DMatrix<C64>, b2: &Band) {
    for (i, v1) in b1.values.iter().enumerate() {
        let c1 = b1.start + i;
        let r1 = b1.row_of(c1) as usize;
        for (k, v2) in b2.values.iter().enumerate() {
            let c2 = b2.start + k;
            let x = rho[(c1, c2)];
            if x == C64::default() {
                continue;
            }
            let r2 = b2.row_of(c2) as usize;
            out[(r1, r2)] += v1 * x * v2.conj();
        }
    }
}

/// Output weights of the channel on the Fock state `|j>`, on `dim_out`
/// levels, evaluated from the closed forms rather than the stored Kraus
/// list. The Kraus sum runs over every `l` that lands inside `dim_out`.
pub fn fock_action(
    family: Family,
    kappa: f64,
    n: usize,
    j: usize,
    dim_out: usize,
) -> Result<Vec<f64>> {
    let mut w = vec![0.0; dim_out];
    match family {
        Family::Attenuator => {
            let Bases::Attenuator { k, s } = Bases::attenuator(kappa)? else {
                unreachable!()
            };
            // level j + n - l, l = 0..=j + n
            for l in 0..=(j + n) {
                let m = j + n - l;
                if m >= dim_out {
                    continue;
                }
                let g = g2_sum(n, l, j, k, s).value();
                let log_c = log_factorial(m) + log_factorial(l) - log_factorial(j) - log_factorial(n);
                w[m] += log_c.exp() * g * g;
            }
        }
        Family::Amplifier => {
            let Bases::Amplifier { inv, s } = Bases::amplifier(kappa)? else {
                unreachable!()
            };
            // level j + l - n
            for m in 0..dim_out {
                let Some(l) = (m + n).checked_sub(j) else { continue };
                let g = g1_sum(n, j, m, inv, s).value();
                let log_c = log_factorial(j) + log_factorial(l) - log_factorial(m) - log_factorial(n);
                w[m] += inv * inv * log_c.exp() * g * g;
            }
        }
        Family::Conjugator => {
            let Bases::Conjugator { sech, tanh } = Bases::conjugator(kappa)? else {
                unreachable!()
            };
            // level l + n - j
            for m in 0..dim_out {
                let Some(l) = (m + j).checked_sub(n) else { continue };
                let g = g3_sum(n, j, m, sech, tanh).value();
                let log_c = log_factorial(n) + log_factorial(l) - log_factorial(m) - log_factorial(j);
                w[m] += sech * sech * log_c.exp() * g * g;
            }
        }
    }
    Ok(w)
}

/// Diagonal-to-diagonal action from the closed-form Fock weights. Mass that
/// lands above `dim_out` is reported as `tail_mass`.
pub fn apply_diagonal(channel: &PhotonAddedChannel, d: &DiagonalState) -> Result<DiagonalState> {
    let t = channel.trunc();
    if d.dim() != t.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: t.dim_in(),
            got: d.dim(),
        });
    }
    let mut probs = vec![0.0; t.dim_out()];
    for (j, p) in d.probs().iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let w = fock_action(channel.family(), channel.kappa(), channel.n_add(), j, t.dim_out())?;
        for (acc, x) in probs.iter_mut().zip(w) {
            *acc += p * x;
        }
    }
    let tail = (d.total() - probs.iter().sum::<f64>()).max(0.0) + d.tail_mass();
    Ok(DiagonalState::from_parts(probs, tail))
}

/// Smallest and largest occupied Fock level; `n_max = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportRange {
    pub n_min: usize,
    pub n_max: Option<usize>,
}

impl SupportRange {
    pub fn new(n_min: usize, n_max: Option<usize>) -> Result<Self> {
        if let Some(hi) = n_max {
            if hi < n_min {
                return Err(Error::InvalidState(format!("empty support range [{n_min}, {hi}]")));
            }
        }
        Ok(Self { n_min, n_max })
    }

    pub fn finite(n_min: usize, n_max: usize) -> Result<Self> {
        Self::new(n_min, Some(n_max))
    }

    pub fn of(d: &DiagonalState, floor: f64) -> Option<Self> {
        d.support(floor).map(|(lo, hi)| Self {
            n_min: lo,
            n_max: Some(hi),
        })
    }

    pub fn contains(&self, level: usize) -> bool {
        level >= self.n_min && self.n_max.is_none_or(|hi| level <= hi)
    }
}

/// Output support of the photon-added channel for inputs supported in
/// `input`.
///
/// The conjugator's lower bound is `max(n - N_max_in, 0)`: an input level
/// `j` reaches every output level from `max(n - j, 0)` upward, so the
/// largest input level sets the floor.
pub fn support_bounds(family: Family, n_add: usize, input: SupportRange) -> SupportRange {
    match family {
        Family::Attenuator => SupportRange {
            n_min: 0,
            n_max: input.n_max.map(|hi| hi + n_add),
        },
        Family::Amplifier => SupportRange {
            n_min: input.n_min.saturating_sub(n_add),
            n_max: None,
        },
        Family::Conjugator => SupportRange {
            n_min: input.n_max.map_or(0, |hi| n_add.saturating_sub(hi)),
            n_max: None,
        },
    }
}

/// Family and parameter of the complementary channel:
/// amplifier `kappa` <-> conjugator `sqrt(kappa^2 - 1)`, attenuator `kappa`
/// -> attenuator `sqrt(1 - kappa^2)`.
pub fn complementary_params(family: Family, kappa: f64) -> Result<(Family, f64)> {
    family.check_kappa(kappa)?;
    Ok(match family {
        Family::Amplifier => (Family::Conjugator, (kappa * kappa - 1.0).max(0.0).sqrt()),
        Family::Attenuator => (Family::Attenuator, (1.0 - kappa * kappa).max(0.0).sqrt()),
        Family::Conjugator => (Family::Amplifier, (kappa * kappa + 1.0).sqrt()),
    })
}

/// The complementary photon-added channel on `trunc`, same `n`.
pub fn complementary(
    channel: &PhotonAddedChannel,
    trunc: Truncation,
    tol: f64,
) -> Result<PhotonAddedChannel> {
    let (family, kappa) = complementary_params(channel.family(), channel.kappa())?;
    build(family, kappa, channel.n_add(), trunc, tol)
}

/// Completely dephasing map: keeps the diagonal.
pub fn dephase(rho: &FockDensityMatrix) -> DiagonalState {
    let probs: Vec<f64> = rho.diagonal();
    let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    DiagonalState::from_parts(probs, tail)
}

/// `max |dephase(F rho F^dagger) - F dephase(rho) F^dagger|` over the
/// operators of `channel`.
pub fn dephasing_commutator(channel: &impl AsRef<KrausChannel>, rho: &FockDensityMatrix) -> Result<f64> {
    let ch = channel.as_ref();
    if rho.dim() != ch.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: ch.dim_in(),
            got: rho.dim(),
        });
    }
    let deph = FockDensityMatrix::from_diagonal(&dephase(rho));
    let mut worst = 0.0f64;
    for op in ch.operators() {
        let f = op.to_dense();
        let lhs = &f * rho.entries() * f.adjoint();
        let rhs = &f * deph.entries() * f.adjoint();
        for i in 0..lhs.nrows() {
            for j in 0..lhs.ncols() {
                let a = if i == j { lhs[(i, j)] } else { C64::default() };
                worst = worst.max((a - rhs[(i, j)]).norm());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureOptions {
    /// Largest environment level; chosen from `tail_tol` when `None`.
    pub cutoff: Option<usize>,
    pub tail_tol: f64,
    pub kraus_tol: f64,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self {
            cutoff: None,
            tail_tol: DEFAULT_MIXTURE_TAIL,
            kraus_tol: 1e-10,
        }
    }
}

/// Noisy Gaussian channel as `sum_n p_n(nbar) Phi(kappa; n)` with thermal
/// weights, truncated at `cutoff`.
#[derive(Debug, Clone)]
pub struct MixtureChannel {
    pub nbar: f64,
    pub weights: Vec<f64>,
    pub components: Vec<PhotonAddedChannel>,
    pub cutoff: usize,
    /// Thermal weight beyond `cutoff`, `(nbar / (1 + nbar))^(cutoff + 1)`.
    pub tail_mass: f64,
}

pub fn mixture_noisy(
    family: Family,
    kappa: f64,
    nbar: f64,
    trunc: Truncation,
    opts: MixtureOptions,
) -> Result<MixtureChannel> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(crate::error::domain("nbar", nbar, "[0, inf)"));
    }
    family.check_kappa(kappa)?;
    let ratio = nbar / (1.0 + nbar);
    let cutoff = opts
        .cutoff
        .unwrap_or_else(|| thermal_cutoff(nbar, opts.tail_tol) - 1);
    let tail_mass = if nbar == 0.0 { 0.0 } else { ratio.powi(cutoff as i32 + 1) };
    if tail_mass > opts.tail_tol {
        return Err(Error::Tolerance {
            tol: opts.tail_tol,
            achieved: tail_mass,
            context: format!("thermal tail beyond cutoff {cutoff} at nbar={nbar}"),
        });
    }
    let mut weights = Vec::with_capacity(cutoff + 1);
    let mut p = 1.0 / (1.0 + nbar);
    for _ in 0..=cutoff {
        weights.push(p);
        p *= ratio;
    }
    let components = (0..=cutoff)
        .into_par_iter()
        .map(|n| build(family, kappa, n, trunc, opts.kraus_tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixtureChannel {
        nbar,
        weights,
        components,
        cutoff,
        tail_mass,
    })
}

impl MixtureChannel {
    pub fn trunc(&self) -> Truncation {
        self.components[0].trunc()
    }

    pub fn apply(&self, rho: &FockDensityMatrix) -> Result<FockDensityMatrix> {
        let d = self.trunc().dim_out();
        let mut out = DMatrix::<C64>::zeros(d, d);
        for (w, c) in self.weights.iter().zip(&self.components) {
            if *w == 0.0 {
                continue;
            }
            out += apply(c, rho)?.into_entries() * C64::new(*w, 0.0);
        }
        Ok(FockDensityMatrix::from_matrix_unchecked(out))
    }

    pub fn apply_diagonal(&self, d: &DiagonalState) -> Result<DiagonalState> {
        let mut probs = vec![0.0; self.trunc().dim_out()];
        for (w, c) in self.weights.iter().zip(&self.components) {
            let out = apply_diagonal(c, d)?;
            for (acc, x) in probs.iter_mut().zip(out.probs()) {
                *acc += w * x;
            }
        }
        let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        Ok(DiagonalState::from_parts(probs, tail))
    }
}

/// JSON form of a state: `{dim, diag}` or `{dim, re, im}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateJson {
    Diagonal { dim: usize, diag: Vec<f64> },
    Dense { dim: usize, re: Vec<Vec<f64>>, im: Vec<Vec<f64>> },
}

impl StateJson {
    pub fn from_diagonal(d: &DiagonalState) -> Self {
        Self::Diagonal {
            dim: d.dim(),
            diag: d.probs().to_vec(),
        }
    }

    pub fn from_density(rho: &FockDensityMatrix) -> Self {
        let n = rho.dim();
        let e = rho.entries();
        Self::Dense {
            dim: n,
            re: (0..n).map(|i| (0..n).map(|j| e[(i, j)].re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| e[(i, j)].im).collect()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Diagonal { dim, .. } | Self::Dense { dim, .. } => *dim,
        }
    }

    pub fn to_density(&self, trace_tol: f64) -> Result<FockDensityMatrix> {
        match self {
            Self::Diagonal { .. } => Ok(FockDensityMatrix::from_diagonal(&self.to_diagonal(trace_tol)?)),
            Self::Dense { dim, re, im } => {
                let rows_ok = re.len() == *dim
                    && im.len() == *dim
                    && re.iter().chain(im).all(|r| r.len() == *dim);
                if !rows_ok {
                    return Err(Error::Parse(format!("state matrix is not {dim}x{dim}")));
                }
                let m = DMatrix::from_fn(*dim, *dim, |i, j| C64::new(re[i][j], im[i][j]));
                FockDensityMatrix::new(m, trace_tol)
            }
        }
    }

    /// The diagonal state; dense inputs must be diagonal.
    pub fn to_diagonal(&self, trace_tol: f64) -> Result<DiagonalState> {
        match self {
            Self::Diagonal { dim, diag } => {
                if diag.len() != *dim {
                    return Err(Error::DimensionMismatch {
                        expected: *dim,
                        got: diag.len(),
                    });
                }
                DiagonalState::new(diag.clone(), trace_tol)
            }
            Self::Dense { .. } => {
                let rho = self.to_density(trace_tol)?;
                if rho.off_diagonal_max() > 0.0 {
                    return Err(Error::InvalidState("state is not Fock-diagonal".into()));
                }
                DiagonalState::new(rho.diagonal(), trace_tol)
            }
        }
    }
}
