//! Random instances with a planted feasible point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{eigh, normalize, qform, HermitianMatrix, C64, DEFAULT_MAX_SWEEPS};
use crate::problem::{HqcqpProblem, ProblemError};

pub const DEFAULT_MARGIN: f64 = 0.5;
/// Fresh draws allowed per constraint before giving up on indefiniteness.
pub const MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("constraint {index} stayed definite after {MAX_REDRAWS} redraws")]
    RedrawBudget { index: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub dim: usize,
    pub num_constraints: usize,
    /// `u₀ᴴPᵢu₀ = −margin` at the planted unit vector `u₀`.
    pub margin: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(dim: usize, num_constraints: usize, seed: u64) -> Self {
        Self { dim, num_constraints, margin: DEFAULT_MARGIN, seed }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::InvalidSpec(m));
        if self.dim < 2 {
            return bad(format!("dimension must be at least 2, got {}", self.dim));
        }
        if !(1..=3).contains(&self.num_constraints) {
            return bad(format!("expected 1 to 3 constraints, got {}", self.num_constraints));
        }
        if self.num_constraints == 3 && self.dim < 3 {
            return bad(format!("three constraints require dimension at least 3, got {}", self.dim));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad(format!("margin must be positive and finite, got {}", self.margin));
        }
        Ok(())
    }
}

fn complex_gaussian(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn gaussian_matrix(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    (0..n * n).map(|_| complex_gaussian(rng)).collect()
}

pub(crate) fn random_hermitian_with(rng: &mut impl Rng, n: usize) -> HermitianMatrix {
    HermitianMatrix::hermitian_part(n, &gaussian_matrix(rng, n))
}

/// `(G + Gᴴ)/2` with independent standard complex Gaussian entries of `G`.
pub fn random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
    random_hermitian_with(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

/// `GGᴴ + I`.
fn random_objective(rng: &mut impl Rng, n: usize) -> HermitianMatrix {
    let g = gaussian_matrix(rng, n);
    let mut data = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let s: C64 = (0..n).map(|k| g[i * n + k] * g[j * n + k].conj()).sum();
            data[i * n + j] = s + if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        }
    }
    HermitianMatrix::hermitian_part(n, &data)
}

/// `H − (u₀ᴴHu₀ + margin)·u₀u₀ᴴ`.
fn plant(h: &HermitianMatrix, u0: &[C64], margin: f64) -> HermitianMatrix {
    let n = u0.len();
    let shift = qform(h, u0) + margin;
    let mut data = h.as_slice().to_vec();
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] -= u0[i] * u0[j].conj() * shift;
        }
    }
    HermitianMatrix::hermitian_part(n, &data)
}

/// A generated instance together with its planted direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedProblem {
    pub problem: HqcqpProblem,
    /// Unit `u₀` with `u₀ᴴPᵢu₀ = −margin` for every constraint.
    pub planted: Vec<C64>,
}

pub fn random_planted_problem(spec: &GeneratorSpec) -> Result<PlantedProblem, GeneratorError> {
    spec.validate()?;
    let n = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let t = random_objective(&mut rng, n);
    let mut u0: Vec<C64> = (0..n).map(|_| complex_gaussian(&mut rng)).collect();
    normalize(&mut u0);
    let mut constraints = Vec::with_capacity(spec.num_constraints);
    for index in 0..spec.num_constraints {
        let mut accepted = None;
        for _ in 0..MAX_REDRAWS {
            let p = plant(&random_hermitian_with(&mut rng, n), &u0, spec.margin);
            let eig = eigh(&p, DEFAULT_MAX_SWEEPS).map_err(ProblemError::Objective)?;
            if eig.min() < 0.0 && eig.max() > 0.0 {
                accepted = Some(p);
                break;
            }
        }
        constraints.push(accepted.ok_or(GeneratorError::RedrawBudget { index })?);
    }
    Ok(PlantedProblem { problem: HqcqpProblem::new(t, constraints)?, planted: u0 })
}

/// Feasible by construction: `x = √(1/margin)·u₀` satisfies every constraint
/// with equality.
pub fn random_feasible_problem(spec: &GeneratorSpec) -> Result<HqcqpProblem, GeneratorError> {
    Ok(random_planted_problem(spec)?.problem)
}
