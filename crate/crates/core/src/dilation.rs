//! Reference realization of the channels by their two-mode unitaries.
//!
//! Generators (the first mode is the system, the second the environment):
//! beamsplitter `theta (a b^dag - a^dag b)` with `kappa = cos theta`, two-mode
//! squeezer `r (a^dag b^dag - a b)` with `kappa = cosh r`. The conjugator is
//! the squeezer with `cosh r = sqrt(1 + kappa^2)` applied after a mode flip.
//!
//! Both generators conserve a photon number (sum or difference), so the
//! exponential is computed block by block from the Hermitian eigensystem of
//! `i G`. This module deliberately shares no code with the closed forms.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DiagonalState, FockDensityMatrix, PureState};
use crate::kraus::Family;

pub const DEFAULT_GUARD_FACTOR: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "parameter")]
pub enum UnitaryKind {
    Beamsplitter(f64),
    TwoModeSqueeze(f64),
    ModeFlip,
    /// Squeezer of strength `r` after a mode flip.
    Conjugator(f64),
}

impl UnitaryKind {
    /// Unitary realizing `family` at `kappa`.
    pub fn for_family(family: Family, kappa: f64) -> Result<Self> {
        family.check_kappa(kappa)?;
        Ok(match family {
            Family::Attenuator => Self::Beamsplitter(kappa.clamp(-1.0, 1.0).acos()),
            Family::Amplifier => Self::TwoModeSqueeze(kappa.acosh()),
            Family::Conjugator => Self::Conjugator(kappa.asinh()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Pure(PureState),
    Diagonal(DiagonalState),
}

impl Environment {
    fn dim(&self) -> usize {
        match self {
            Self::Pure(p) => p.dim(),
            Self::Diagonal(d) => d.dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DilationSpec {
    pub unitary: UnitaryKind,
    pub per_mode_dim: usize,
    pub env: Environment,
}

impl DilationSpec {
    pub fn new(unitary: UnitaryKind, per_mode_dim: usize, env: Environment) -> Result<Self> {
        if per_mode_dim < 2 {
            return Err(Error::InvalidState("per-mode dimension must be at least 2".into()));
        }
        if env.dim() > per_mode_dim {
            return Err(Error::DimensionMismatch {
                expected: per_mode_dim,
                got: env.dim(),
            });
        }
        Ok(Self {
            unitary,
            per_mode_dim,
            env,
        })
    }

    /// Photon-added channel `family(kappa; n)`, environment `|n>`.
    pub fn photon_added(family: Family, kappa: f64, n_add: usize, per_mode_dim: usize) -> Result<Self> {
        let env = crate::fock::fock_state(n_add, per_mode_dim)?;
        Self::new(UnitaryKind::for_family(family, kappa)?, per_mode_dim, Environment::Pure(env))
    }
}

/// `guard_factor * working_dim`.
pub fn guarded_dim(working_dim: usize, guard_factor: usize) -> usize {
    (working_dim * guard_factor.max(1)).max(2)
}

/// One photon-number block: the basis states it acts on and its matrix.
#[derive(Debug, Clone)]
struct Block {
    states: Vec<(usize, usize)>,
    u: DMatrix<f64>,
}

/// Block-sparse real two-mode unitary on `dim x dim` levels.
#[derive(Debug, Clone)]
pub struct TwoModeUnitary {
    dim: usize,
    kind: UnitaryKind,
    blocks: Vec<Block>,
    /// `(block, position)` of each basis state `a * dim + b`.
    locate: Vec<(usize, usize)>,
}

/// `exp(G)` for the real antisymmetric tridiagonal `G` with `G[k+1][k] =
/// sub[k]`. With `S = diag(i^k)`, `S^dagger (i G) S` is the real symmetric
/// tridiagonal matrix with off-diagonal `sub`, so a real eigensolver suffices.
fn exp_tridiagonal(sub: &[f64]) -> DMatrix<f64> {
    let n = sub.len() + 1;
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    let mut t = DMatrix::zeros(n, n);
    for (k, x) in sub.iter().enumerate() {
        t[(k + 1, k)] = *x;
        t[(k, k + 1)] = *x;
    }
    let eig = SymmetricEigen::new(t);
    let w = &eig.eigenvectors;
    let phases: Vec<C64> = eig.eigenvalues.iter().map(|l| C64::new(0.0, -l).exp()).collect();
    // U[p][q] = i^(p - q) sum_k W[p][k] W[q][k] exp(-i lambda_k)
    let quarter = [
        C64::new(1.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, -1.0),
    ];
    DMatrix::from_fn(n, n, |p, q| {
        let mut acc = C64::default();
        for k in 0..n {
            acc += phases[k] * (w[(p, k)] * w[(q, k)]);
        }
        (quarter[(p + 4 * n - q) % 4] * acc).re
    })
}

fn beamsplitter_blocks(dim: usize, theta: f64) -> Vec<Block> {
    (0..=2 * (dim - 1))
        .map(|s| {
            let lo = s.saturating_sub(dim - 1);
            let hi = s.min(dim - 1);
            let states: Vec<(usize, usize)> = (lo..=hi).map(|a| (a, s - a)).collect();
            // -a^dag b |a, b> = -sqrt((a + 1) b) |a + 1, b - 1>; the
            // a b^dag term fills the transposed position with opposite sign
            let sub: Vec<f64> = states
                .windows(2)
                .map(|w| {
                    let (a, b) = w[0];
                    -theta * (((a + 1) * b) as f64).sqrt()
                })
                .collect();
            Block {
                u: exp_tridiagonal(&sub),
                states,
            }
        })
        .collect()
}

fn squeezer_blocks(dim: usize, r: f64) -> Vec<Block> {
    let d = dim as i64;
    ((1 - d)..d)
        .map(|diff| {
            let states: Vec<(usize, usize)> = (0..dim)
                .filter_map(|b| {
                    let a = b as i64 + diff;
                    (a >= 0 && a < d).then_some((a as usize, b))
                })
                .collect();
            // a^dag b^dag |a, b> = sqrt((a + 1)(b + 1)) |a + 1, b + 1>; the
            // -a b term is the antisymmetric partner
            let sub: Vec<f64> = states
                .windows(2)
                .map(|w| {
                    let (a, b) = w[0];
                    r * (((a + 1) * (b + 1)) as f64).sqrt()
                })
                .collect();
            Block {
                u: exp_tridiagonal(&sub),
                states,
            }
        })
        .collect()
}

fn flip_blocks(dim: usize) -> Vec<Block> {
    let mut blocks = Vec::new();
    for a in 0..dim {
        for b in a..dim {
            if a == b {
                blocks.push(Block {
                    states: vec![(a, a)],
                    u: DMatrix::from_element(1, 1, 1.0),
                });
            } else {
                blocks.push(Block {
                    states: vec![(a, b), (b, a)],
                    u: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
                });
            }
        }
    }
    blocks
}

pub fn build_unitary(kind: UnitaryKind, dim: usize) -> Result<TwoModeUnitary> {
    if dim < 2 {
        return Err(Error::InvalidState("per-mode dimension must be at least 2".into()));
    }
    let blocks = match kind {
        UnitaryKind::Beamsplitter(theta) => beamsplitter_blocks(dim, theta),
        UnitaryKind::TwoModeSqueeze(r) | UnitaryKind::Conjugator(r) => squeezer_blocks(dim, r),
        UnitaryKind::ModeFlip => flip_blocks(dim),
    };
    let mut locate = vec![(usize::MAX, 0); dim * dim];
    for (bi, block) in blocks.iter().enumerate() {
        for (pos, &(a, b)) in block.states.iter().enumerate() {
            locate[a * dim + b] = (bi, pos);
        }
    }
    Ok(TwoModeUnitary {
        dim,
        kind,
        blocks,
        locate,
    })
}

impl TwoModeUnitary {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> UnitaryKind {
        self.kind
    }

    fn flips_first(&self) -> bool {
        matches!(self.kind, UnitaryKind::Conjugator(_))
    }

    /// `<m1, m2| U |n1, n2>`.
    pub fn element(&self, m1: usize, m2: usize, n1: usize, n2: usize) -> f64 {
        let d = self.dim;
        if [m1, m2, n1, n2].iter().any(|&x| x >= d) {
            return 0.0;
        }
        let (n1, n2) = if self.flips_first() { (n2, n1) } else { (n1, n2) };
        let (bi, col) = self.locate[n1 * d + n2];
        let (bj, row) = self.locate[m1 * d + m2];
        if bi != bj {
            return 0.0;
        }
        self.blocks[bi].u[(row, col)]
    }

    /// `U v` for a vector indexed by `a * dim + b`.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let d = self.dim;
        let mut input = v.to_vec();
        if self.flips_first() {
            for a in 0..d {
                for b in 0..d {
                    input[a * d + b] = v[b * d + a];
                }
            }
        }
        let mut out = vec![C64::default(); d * d];
        for block in &self.blocks {
            let k = block.states.len();
            let x: Vec<C64> = block.states.iter().map(|&(a, b)| input[a * d + b]).collect();
            if x.iter().all(|z| *z == C64::default()) {
                continue;
            }
            for (i, &(a, b)) in block.states.iter().enumerate() {
                let mut acc = C64::default();
                for j in 0..k {
                    acc += x[j] * block.u[(i, j)];
                }
                out[a * d + b] = acc;
            }
        }
        out
    }

    /// Dense `dim^2 x dim^2` matrix; test-sized dimensions only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d * d, d * d, |r, c| self.element(r / d, r % d, c / d, c % d))
    }

    /// Weight of `U |n1, n2>` on states with either level at or above
    /// `dim - edge`; a proxy for truncation error.
    pub fn edge_population(&self, n1: usize, n2: usize, edge: usize) -> f64 {
        let d = self.dim;
        let mut v = vec![C64::default(); d * d];
        v[n1 * d + n2] = C64::new(1.0, 0.0);
        let out = self.apply(&v);
        let cut = d.saturating_sub(edge);
        out.iter()
            .enumerate()
            .filter(|(i, _)| i / d >= cut || i % d >= cut)
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }
}

/// `M[(m1, m2), j] = <m1, m2| U |j> (x) |psi>` for every input level.
fn isometry(u: &TwoModeUnitary, psi: &[C64], dim_in: usize) -> Vec<Vec<C64>> {
    let d = u.dim();
    (0..dim_in)
        .map(|j| {
            let mut v = vec![C64::default(); d * d];
            for (e, amp) in psi.iter().enumerate() {
                v[j * d + e] = *amp;
            }
            u.apply(&v)
        })
        .collect()
}

/// Accumulates `sum_k w K_k rho K_k^dagger`, where `K_k` is the slice of
/// the isometry with the traced mode fixed to `k`.
fn partial_trace_into(
    out: &mut DMatrix<C64>,
    cols: &[Vec<C64>],
    rho: &DMatrix<C64>,
    d: usize,
    trace_env: bool,
    weight: f64,
) {
    let dim_in = cols.len();
    for k in 0..d {
        let slice = DMatrix::from_fn(d, dim_in, |m, j| {
            let idx = if trace_env { m * d + k } else { k * d + m };
            cols[j][idx]
        });
        if slice.iter().all(|z| *z == C64::default()) {
            continue;
        }
        let contrib = &slice * rho * slice.adjoint();
        *out += contrib * C64::new(weight, 0.0);
    }
}

fn dilate(spec: &DilationSpec, rho: &FockDensityMatrix, trace_env: bool) -> Result<FockDensityMatrix> {
    let d = spec.per_mode_dim;
    if rho.dim() > d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho.dim(),
        });
    }
    let u = build_unitary(spec.unitary, d)?;
    let mut out = DMatrix::<C64>::zeros(d, d);
    match &spec.env {
        Environment::Pure(psi) => {
            let cols = isometry(&u, psi.amps(), rho.dim());
            partial_trace_into(&mut out, &cols, rho.entries(), d, trace_env, 1.0);
        }
        Environment::Diagonal(env) => {
            for (k, q) in env.probs().iter().enumerate() {
                if *q == 0.0 {
                    continue;
                }
                let mut psi = vec![C64::default(); k + 1];
                psi[k] = C64::new(1.0, 0.0);
                let cols = isometry(&u, &psi, rho.dim());
                partial_trace_into(&mut out, &cols, rho.entries(), d, trace_env, *q);
            }
        }
    }
    Ok(FockDensityMatrix::from_matrix_unchecked(out))
}

/// `Tr_E[U (rho (x) rho_E) U^dagger]` on `per_mode_dim` levels.
pub fn channel_via_dilation(spec: &DilationSpec, rho: &FockDensityMatrix) -> Result<FockDensityMatrix> {
    dilate(spec, rho, true)
}

/// The environment output: the system mode is traced out instead.
pub fn complementary_via_dilation(
    spec: &DilationSpec,
    rho: &FockDensityMatrix,
) -> Result<FockDensityMatrix> {
    dilate(spec, rho, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{t_amplifier, t_attenuator, t_conjugator};
    use crate::fock::fock_state;

    fn unitarity_defect(u: &DMatrix<f64>) -> f64 {
        let p = u.transpose() * u;
        let n = p.nrows();
        (p - DMatrix::identity(n, n)).amax()
    }

    #[test]
    fn zero_angle_is_identity() {
        let u = build_unitary(UnitaryKind::Beamsplitter(0.0), 5).unwrap();
        assert_eq!(unitarity_defect(&u.to_dense()), 0.0);
        assert!((u.to_dense() - DMatrix::identity(25, 25)).amax() < 1e-15);
    }

    #[test]
    fn flip_elements() {
        let u = build_unitary(UnitaryKind::ModeFlip, 4).unwrap();
        for m1 in 0..4 {
            for m2 in 0..4 {
                for n1 in 0..4 {
                    for n2 in 0..4 {
                        let expected = if m1 == n2 && m2 == n1 { 1.0 } else { 0.0 };
                        assert_eq!(u.element(m1, m2, n1, n2), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn beamsplitter_matches_closed_form() {
        let d = 10;
        for kappa in [0.0, 0.35, 0.8, 1.0] {
            let u = build_unitary(UnitaryKind::for_family(Family::Attenuator, kappa).unwrap(), d).unwrap();
            assert!(unitarity_defect(&u.to_dense()) < 1e-12);
            // blocks with n1 + n2 < dim are untouched by the truncation
            for n1 in 0..d {
                for n2 in 0..d - n1 {
                    for m1 in 0..=n1 + n2 {
                        let m2 = n1 + n2 - m1;
                        let t = t_attenuator(m1, m2, n1, n2, kappa).unwrap();
                        assert!((u.element(m1, m2, n1, n2) - t).abs() < 1e-9, "{kappa} {m1}{m2}{n1}{n2}");
                    }
                }
            }
        }
    }

    #[test]
    fn squeezer_matches_closed_form_away_from_edge() {
        let d = 60;
        let kappa = 1.5;
        let u = build_unitary(UnitaryKind::for_family(Family::Amplifier, kappa).unwrap(), d).unwrap();
        for n1 in 0..10 {
            for n2 in 0..10 {
                for m1 in 0..10 {
                    for m2 in 0..10 {
                        let t = t_amplifier(m1, m2, n1, n2, kappa).unwrap();
                        assert!((u.element(m1, m2, n1, n2) - t).abs() < 1e-9);
                    }
                }
            }
        }
        let edge = u.edge_population(3, 1, 5);
        assert!(edge > 0.0 && edge < 1e-8, "{edge:e}");
    }

    #[test]
    fn conjugator_is_flip_then_squeeze() {
        let d = 60;
        let kappa = 1.5f64;
        let amp = build_unitary(UnitaryKind::for_family(Family::Amplifier, kappa).unwrap(), d).unwrap();
        let conj = build_unitary(
            UnitaryKind::for_family(Family::Conjugator, (kappa * kappa - 1.0).sqrt()).unwrap(),
            d,
        )
        .unwrap();
        for n1 in 0..10 {
            for n2 in 0..10 {
                for m1 in 0..10 {
                    for m2 in 0..10 {
                        let via_flip = amp.element(m1, m2, n2, n1);
                        assert!((conj.element(m1, m2, n1, n2) - via_flip).abs() < 1e-12);
                        let t = t_conjugator(m1, m2, n1, n2, (kappa * kappa - 1.0).sqrt()).unwrap();
                        assert!((conj.element(m1, m2, n1, n2) - t).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn vacuum_through_attenuator() {
        let spec = DilationSpec::photon_added(Family::Attenuator, 0.4, 0, 6).unwrap();
        let rho = FockDensityMatrix::from_pure(&fock_state(0, 3).unwrap());
        let out = channel_via_dilation(&spec, &rho).unwrap();
        let vac = FockDensityMatrix::from_pure(&fock_state(0, 6).unwrap());
        assert!(out.max_abs_diff(&vac) < 1e-14);
    }

    #[test]
    fn partial_traces_preserve_trace() {
        let spec = DilationSpec::photon_added(Family::Attenuator, 0.6, 2, 12).unwrap();
        let psi = PureState::normalized(vec![
            C64::new(0.3, 0.1),
            C64::new(-0.2, 0.5),
            C64::new(0.7, 0.0),
            C64::new(0.1, -0.3),
        ])
        .unwrap();
        let rho = FockDensityMatrix::from_pure(&psi);
        let out = channel_via_dilation(&spec, &rho).unwrap();
        let comp = complementary_via_dilation(&spec, &rho).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-13);
        assert!((comp.trace() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_oversized_inputs() {
        assert!(DilationSpec::photon_added(Family::Attenuator, 0.5, 4, 3).is_err());
        let spec = DilationSpec::photon_added(Family::Attenuator, 0.5, 0, 3).unwrap();
        let rho = FockDensityMatrix::from_pure(&fock_state(0, 5).unwrap());
        assert!(channel_via_dilation(&spec, &rho).is_err());
        assert!(build_unitary(UnitaryKind::ModeFlip, 1).is_err());
    }
}
