//! Seeded random states for tests, examples and the verification grid.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::fock::{DiagonalState, FockDensityMatrix, PureState};

/// Haar-random pure state on `dim` levels.
pub fn pure_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> PureState {
    loop {
        let amps: Vec<C64> = (0..dim)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re, im)
            })
            .collect();
        if let Ok(p) = PureState::normalized(amps) {
            return p;
        }
    }
}

/// Mixture of `rank` random pure states with random weights.
pub fn density_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> FockDensityMatrix {
    let weights = simplex(rng, rank.max(1));
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for w in weights {
        m += FockDensityMatrix::from_pure(&pure_state(rng, dim)).into_entries() * C64::new(w, 0.0);
    }
    // exact Hermiticity
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    FockDensityMatrix::from_matrix_unchecked(m)
}

/// Random Fock-diagonal state with full support.
pub fn diagonal_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DiagonalState {
    DiagonalState::new(simplex(rng, dim), 1e-12).expect("simplex weights are a valid state")
}

fn simplex<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}
