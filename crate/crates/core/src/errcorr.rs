//! Environment-assisted recovery of Fock-basis information.
//!
//! Given the Kraus outcome `y`, the recovery
//! `R_y(X) = sum_j |j><phi_j| X |phi_j><j| + E_y X E_y` with
//! `phi_j = F_y|j> / |F_y|j>|` undoes `F_y` on Fock inputs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::FockDensityMatrix;
use crate::kraus::{KrausChannel, KrausOperator};

pub const DEFAULT_NULL_THRESHOLD: f64 = 1e-12;

type SparseVec = Vec<(usize, C64)>;

fn sparse_dot(a: &SparseVec, v: &DVector<C64>) -> C64 {
    a.iter().map(|(i, x)| x.conj() * v[*i]).sum()
}

#[derive(Debug, Clone)]
pub struct RecoveryMap {
    pub y: usize,
    pub dim: usize,
    /// `(j, phi_j)` for every input level with `|F_y|j>|` above threshold.
    pub targets: Vec<(usize, SparseVec)>,
    /// `|F_y|j>|` for every input level.
    pub norms: Vec<f64>,
    /// Orthonormal basis of `span{phi_j}`; `E_y` projects onto its complement.
    span: Vec<SparseVec>,
}

fn column(op: &KrausOperator, j: usize) -> SparseVec {
    let mut v: SparseVec = Vec::new();
    for (r, c, x) in op.entries() {
        if c == j && x != C64::default() {
            match v.iter_mut().find(|(i, _)| *i == r) {
                Some((_, acc)) => *acc += x,
                None => v.push((r, x)),
            }
        }
    }
    v.sort_by_key(|(i, _)| *i);
    v
}

fn to_dense(v: &SparseVec, dim: usize) -> DVector<C64> {
    let mut d = DVector::zeros(dim);
    for (i, x) in v {
        d[*i] += *x;
    }
    d
}

/// Recovery for outcome `y` (the position of the operator in the channel's
/// Kraus list).
pub fn build_recovery(channel: &impl AsRef<KrausChannel>, y: usize, null_threshold: f64) -> Result<RecoveryMap> {
    let ch = channel.as_ref();
    let op = ch.operators().get(y).ok_or(Error::OutOfRange {
        index: y,
        dim: ch.operators().len(),
    })?;
    let dim = ch.dim_out();
    let mut targets = Vec::new();
    let mut norms = Vec::with_capacity(ch.dim_in());
    let mut span: Vec<SparseVec> = Vec::new();
    for j in 0..ch.dim_in() {
        let v = column(op, j);
        let norm = v.iter().map(|(_, x)| x.norm_sqr()).sum::<f64>().sqrt();
        norms.push(norm);
        if norm <= null_threshold {
            continue;
        }
        let phi: SparseVec = v.iter().map(|(i, x)| (*i, x / norm)).collect();
        // Gram-Schmidt; a no-op for single-band operators
        let mut w = to_dense(&phi, dim);
        for b in &span {
            let c = sparse_dot(b, &w);
            for (i, x) in b {
                w[*i] -= c * x;
            }
        }
        let wn = w.norm();
        if wn > null_threshold {
            span.push(
                w.iter()
                    .enumerate()
                    .filter(|(_, x)| x.norm() > 0.0)
                    .map(|(i, x)| (i, x / wn))
                    .collect(),
            );
        }
        targets.push((j, phi));
    }
    Ok(RecoveryMap {
        y,
        dim,
        targets,
        norms,
        span,
    })
}

impl RecoveryMap {
    /// `E_y v`.
    fn project_out(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut w = v.clone();
        for b in &self.span {
            let c = sparse_dot(b, v);
            for (i, x) in b {
                w[*i] -= c * x;
            }
        }
        w
    }

    /// `R_y(v v^dagger)`.
    pub fn apply_pure(&self, v: &DVector<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (j, phi) in &self.targets {
            out[(*j, *j)] += C64::new(sparse_dot(phi, v).norm_sqr(), 0.0);
        }
        let e = self.project_out(v);
        out += &e * e.adjoint();
        out
    }

    /// `R_y(rho)` for a general state on the output space.
    pub fn apply(&self, rho: &FockDensityMatrix) -> Result<FockDensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rho.dim(),
            });
        }
        let mut out = DMatrix::<C64>::zeros(self.dim, self.dim);
        for (j, phi) in &self.targets {
            let p = to_dense(phi, self.dim);
            out[(*j, *j)] += (p.adjoint() * rho.entries() * &p)[(0, 0)];
        }
        let mut proj = DMatrix::<C64>::identity(self.dim, self.dim);
        for b in &self.span {
            let bv = to_dense(b, self.dim);
            proj -= &bv * bv.adjoint();
        }
        out += &proj * rho.entries() * &proj;
        Ok(FockDensityMatrix::from_matrix_unchecked(out))
    }

    /// `max |sum_k R_k^dagger R_k - I|` over the recovery Kraus operators.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = DMatrix::<C64>::identity(self.dim, self.dim);
        for b in &self.span {
            let bv = to_dense(b, self.dim);
            sum -= &bv * bv.adjoint();
        }
        for (_, phi) in &self.targets {
            let p = to_dense(phi, self.dim);
            sum += &p * p.adjoint();
        }
        (sum - DMatrix::<C64>::identity(self.dim, self.dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest overlap between distinct `phi_j`.
    pub fn max_overlap(&self) -> f64 {
        let mut worst = 0.0f64;
        for (a, (_, p)) in self.targets.iter().enumerate() {
            let pd = to_dense(p, self.dim);
            for (_, q) in &self.targets[a + 1..] {
                worst = worst.max(sparse_dot(q, &pd).norm());
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct CorrectedOutput {
    pub rho: FockDensityMatrix,
    /// `<x| rho |x>`.
    pub fidelity: f64,
}

/// `sum_y R_y(F_y |x><x| F_y^dagger)` on the output space.
pub fn corrected_apply(
    channel: &impl AsRef<KrausChannel>,
    x: usize,
    null_threshold: f64,
) -> Result<CorrectedOutput> {
    let ch = channel.as_ref();
    if x >= ch.dim_in() {
        return Err(Error::OutOfRange {
            index: x,
            dim: ch.dim_in(),
        });
    }
    let d = ch.dim_out();
    let mut out = DMatrix::<C64>::zeros(d, d);
    for y in 0..ch.operators().len() {
        let r = build_recovery(ch, y, null_threshold)?;
        let v = to_dense(&column(&ch.operators()[y], x), d);
        if v.iter().all(|z| *z == C64::default()) {
            continue;
        }
        out += r.apply_pure(&v);
    }
    let fidelity = out[(x, x)].re;
    Ok(CorrectedOutput {
        rho: FockDensityMatrix::from_matrix_unchecked(out),
        fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fock_state, Truncation};
    use crate::kraus::{build, build_attenuator, Family};

    fn trunc(i: usize, o: usize) -> Truncation {
        Truncation::new(i, o).unwrap()
    }

    #[test]
    fn diagonal_outcome_targets_same_levels() {
        let ch = build_attenuator(0.6, 1, trunc(5, 6), 1e-12).unwrap();
        let y = ch.operators().iter().position(|op| op.index == 1).unwrap();
        let r = build_recovery(&ch, y, DEFAULT_NULL_THRESHOLD).unwrap();
        for (j, phi) in &r.targets {
            assert_eq!(phi.len(), 1);
            assert_eq!(phi[0].0, *j);
        }
        assert!(r.completeness_defect() < 1e-12);
    }

    #[test]
    fn shifted_outcome_is_shifted_back() {
        let ch = build_attenuator(0.6, 2, trunc(5, 7), 1e-12).unwrap();
        let r = build_recovery(&ch, 0, DEFAULT_NULL_THRESHOLD).unwrap();
        assert_eq!(ch.operators()[0].index, 0);
        for (j, phi) in &r.targets {
            assert_eq!(phi[0].0, j + 2);
        }
        assert!(r.completeness_defect() < 1e-12);
        assert_eq!(r.max_overlap(), 0.0);
    }

    #[test]
    fn recovery_is_trace_preserving_on_general_states() {
        let ch = build(Family::Conjugator, 0.8, 1, trunc(4, 30), 1e-6).unwrap();
        let r = build_recovery(&ch, 3, DEFAULT_NULL_THRESHOLD).unwrap();
        let psi = crate::fock::PureState::normalized(
            (0..30).map(|k| C64::new((k as f64).cos(), (k as f64 * 0.3).sin())).collect(),
        )
        .unwrap();
        let out = r.apply(&FockDensityMatrix::from_pure(&psi)).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attenuator_correction_is_exact() {
        let ch = build_attenuator(0.7, 1, trunc(8, 9), 1e-12).unwrap();
        let c = corrected_apply(&ch, 5, DEFAULT_NULL_THRESHOLD).unwrap();
        assert!(c.fidelity >= 1.0 - 1e-10);
        let target = FockDensityMatrix::from_pure(&fock_state(5, 9).unwrap());
        assert!(c.rho.max_abs_diff(&target) < 1e-10);
    }

    #[test]
    fn truncated_families_lose_at_most_the_defect() {
        for (family, kappa, n, x) in [(Family::Amplifier, 1.4, 2, 3), (Family::Conjugator, 1.0, 1, 0)] {
            let ch = build(family, kappa, n, trunc(6, 60), 1e-8).unwrap();
            let c = corrected_apply(&ch, x, DEFAULT_NULL_THRESHOLD).unwrap();
            assert!(c.fidelity >= 1.0 - ch.completeness_defect() - 1e-10);
        }
    }

    #[test]
    fn rejects_bad_indices() {
        let ch = build_attenuator(0.7, 1, trunc(3, 4), 1e-12).unwrap();
        assert!(corrected_apply(&ch, 3, DEFAULT_NULL_THRESHOLD).is_err());
        assert!(build_recovery(&ch, 99, DEFAULT_NULL_THRESHOLD).is_err());
    }
}
