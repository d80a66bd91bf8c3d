//! Problem instances, whitening, solution recovery and the top-level solve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{inverse_sqrt_factor, qform, quadratic_form, HermitianMatrix, LinalgError, LowerTriangular, C64};
use crate::search::{SearchConfig, SearchError, TracePoint};
use crate::{solver2, solver3};

/// Absolute tolerance on `xᴴPᵢx + 1` for a constraint to count as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Absolute tolerance on `|xᴴPᵢx + 1|` for a constraint to count as binding.
pub const BINDING_TOL: f64 = 1e-4;
/// `c*` this close to zero (relative to the constraint scale) is reported as
/// infeasible: the optimum would only be reached in the limit `p → ∞`.
pub const MARGINAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("expected 1 to 3 constraints, got {0}")]
    ConstraintCount(usize),
    #[error("three constraints require dimension at least 3, got {0}")]
    ThreeConstraintsNeedDim3(usize),
    #[error("constraint {index} has dimension {found}, expected {expected}")]
    ConstraintDimension { index: usize, expected: usize, found: usize },
    #[error("objective matrix: {0}")]
    Objective(LinalgError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("infeasible: c* >= 0 (c* = {c_star:e}{})", if *.marginal { ", feasible only in the limit" } else { "" })]
    Infeasible { c_star: f64, marginal: bool },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `min xᴴTx` subject to `xᴴPᵢx + 1 ≤ 0` for one to three constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct HqcqpProblem {
    objective: HermitianMatrix,
    constraints: Vec<HermitianMatrix>,
}

fn check_shape(dim: usize, constraints: &[HermitianMatrix]) -> Result<(), ProblemError> {
    if dim < 2 {
        return Err(ProblemError::DimensionTooSmall(dim));
    }
    if constraints.is_empty() || constraints.len() > 3 {
        return Err(ProblemError::ConstraintCount(constraints.len()));
    }
    for (index, c) in constraints.iter().enumerate() {
        if c.dim() != dim {
            return Err(ProblemError::ConstraintDimension { index, expected: dim, found: c.dim() });
        }
    }
    if constraints.len() == 3 && dim < 3 {
        return Err(ProblemError::ThreeConstraintsNeedDim3(dim));
    }
    Ok(())
}

impl HqcqpProblem {
    pub fn new(objective: HermitianMatrix, constraints: Vec<HermitianMatrix>) -> Result<Self, ProblemError> {
        check_shape(objective.dim(), &constraints)?;
        inverse_sqrt_factor(&objective).map_err(ProblemError::Objective)?;
        Ok(Self { objective, constraints })
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn objective(&self) -> &HermitianMatrix {
        &self.objective
    }

    pub fn constraints(&self) -> &[HermitianMatrix] {
        &self.constraints
    }
}

/// Whitened instance: `min zᴴz` subject to `zᴴCᵢz + 1 ≤ 0`, `Cᵢ = F⁻¹PᵢF⁻ᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    constraints: Vec<HermitianMatrix>,
    whitener: LowerTriangular,
}

impl ReducedProblem {
    /// An already-whitened instance (`T = I`).
    pub fn new(constraints: Vec<HermitianMatrix>) -> Result<Self, ProblemError> {
        let dim = constraints.first().map_or(0, |c| c.dim());
        check_shape(dim, &constraints)?;
        Ok(Self { whitener: LowerTriangular::identity(dim), constraints })
    }

    pub fn dim(&self) -> usize {
        self.whitener.dim()
    }

    pub fn constraints(&self) -> &[HermitianMatrix] {
        &self.constraints
    }

    /// The stored `F⁻¹`.
    pub fn whitener(&self) -> &LowerTriangular {
        &self.whitener
    }
}

pub fn reduce(prob: &HqcqpProblem) -> Result<ReducedProblem, ProblemError> {
    let whitener = inverse_sqrt_factor(&prob.objective).map_err(ProblemError::Objective)?;
    let constraints = prob.constraints.iter().map(|p| p.congruence(&whitener)).collect();
    Ok(ReducedProblem { constraints, whitener })
}

/// Maps the polar pair `(p, u)` of `z = √p·u` back to `x = F⁻ᴴz`.
pub fn recover(p: f64, u: &[C64], red: &ReducedProblem) -> Vec<C64> {
    let s = p.sqrt();
    let z: Vec<C64> = u.iter().map(|v| v * s).collect();
    red.whitener.adjoint_mul_vec(&z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    OneConstraint,
    TwoCase1,
    TwoCase2,
    TwoCase3,
    ThreeSingle(usize),
    ThreePair(usize, usize),
    ThreeAll,
}

impl CaseTag {
    /// Number of constraints the case treats as binding.
    pub fn binding_count(&self) -> usize {
        match self {
            CaseTag::OneConstraint | CaseTag::TwoCase1 | CaseTag::TwoCase2 | CaseTag::ThreeSingle(_) => 1,
            CaseTag::TwoCase3 | CaseTag::ThreePair(..) => 2,
            CaseTag::ThreeAll => 3,
        }
    }

    pub fn uses_search(&self) -> bool {
        matches!(self, CaseTag::TwoCase3 | CaseTag::ThreePair(..) | CaseTag::ThreeAll)
    }
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CaseTag::OneConstraint => write!(f, "one"),
            CaseTag::TwoCase1 => write!(f, "two-case1"),
            CaseTag::TwoCase2 => write!(f, "two-case2"),
            CaseTag::TwoCase3 => write!(f, "two-case3"),
            CaseTag::ThreeSingle(i) => write!(f, "three-single-{i}"),
            CaseTag::ThreePair(i, j) => write!(f, "three-pair-{i}-{j}"),
            CaseTag::ThreeAll => write!(f, "three-all"),
        }
    }
}

/// Numerical side information about how a solution was obtained.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Best `λmin` of the matrix pencil seen by the search (a lower bound on
    /// the equality-constrained value of the winning case).
    pub lower_bound: Option<f64>,
    /// Gap between the two smallest eigenvalues at the final multiplier(s).
    pub eigen_gap: Option<f64>,
    /// Number of low eigenvectors combined to build `u` (1 = plain eigenvector).
    pub span: usize,
    /// Largest `|cᵢ(u) − cⱼ(u)|` over the constraints the case treats as binding.
    pub equality_residual: f64,
    /// Candidates whose equality set is empty (pencil maximum unbounded).
    pub unbounded: Vec<CaseTag>,
    /// Set when `u` could not be equalized to within `BINDING_TOL`.
    pub flagged: bool,
}

/// Result of solving a whitened instance: the min-max value `c*` and its unit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    /// `maxᵢ cᵢ(u)` evaluated at the returned `u`.
    pub c_star: f64,
    pub u: Vec<C64>,
    pub case_tag: CaseTag,
    pub multipliers: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub iterations: usize,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub p_star: f64,
    pub c_star: f64,
    pub u: Vec<C64>,
    pub x: Vec<C64>,
    pub case_tag: CaseTag,
    /// Zero-based indices of constraints with `|xᴴPᵢx + 1| ≤ BINDING_TOL`.
    pub binding: Vec<usize>,
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
    pub diagnostics: Diagnostics,
}

pub(crate) fn max_form(cs: &[HermitianMatrix], u: &[C64]) -> f64 {
    cs.iter().map(|c| qform(c, u)).fold(f64::NEG_INFINITY, f64::max)
}

/// Rejects fragments whose value certifies infeasibility.
pub(crate) fn require_feasible(frag: Fragment, cs: &[HermitianMatrix]) -> Result<Fragment, SolveError> {
    let scale = cs.iter().map(|c| c.frobenius_norm()).fold(0.0, f64::max);
    let c = frag.c_star;
    if c >= -MARGINAL_TOL * scale || c.is_nan() {
        return Err(SolveError::Infeasible { c_star: c, marginal: c.abs() <= MARGINAL_TOL * scale });
    }
    Ok(frag)
}

/// Solves a whitened instance, dispatching on the number of constraints.
pub fn solve_reduced(red: &ReducedProblem, cfg: &SearchConfig) -> Result<Fragment, SolveError> {
    cfg.validate()?;
    match red.constraints.as_slice() {
        [c1] => solver2::solve_one(c1, cfg),
        [c1, c2] => solver2::solve_two(c1, c2, cfg),
        [c1, c2, c3] => solver3::solve_three([c1, c2, c3], cfg),
        cs => Err(ProblemError::ConstraintCount(cs.len()).into()),
    }
}

pub fn solve(prob: &HqcqpProblem, cfg: &SearchConfig) -> Result<Solution, SolveError> {
    let red = reduce(prob)?;
    let frag = solve_reduced(&red, cfg)?;
    let p_star = -1.0 / frag.c_star;
    let x = recover(p_star, &frag.u, &red);
    let binding = prob
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, p)| (qform(p, &x) + 1.0).abs() <= BINDING_TOL)
        .map(|(i, _)| i)
        .collect();
    Ok(Solution {
        p_star,
        c_star: frag.c_star,
        u: frag.u,
        x,
        case_tag: frag.case_tag,
        binding,
        multipliers: frag.multipliers,
        iterations: frag.iterations,
        trace: frag.trace,
        diagnostics: frag.diagnostics,
    })
}

impl Solution {
    /// `xᴴPᵢx + 1` for every constraint of `prob`.
    pub fn constraint_slack(&self, prob: &HqcqpProblem) -> Vec<f64> {
        prob.constraints.iter().map(|p| quadratic_form(p, &self.x).map_or(f64::NAN, |v| v + 1.0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCheck {
    pub feasible: bool,
    /// Unit vector with `maxᵢ cᵢ(u) < 0` when feasible.
    pub witness: Option<Vec<C64>>,
    pub c_star: f64,
}

/// Feasibility of a whitened instance, certified by the sign of `c*`.
pub fn check_feasible(red: &ReducedProblem, cfg: &SearchConfig) -> Result<FeasibilityCheck, SolveError> {
    match solve_reduced(red, cfg) {
        Ok(frag) => Ok(FeasibilityCheck { feasible: true, c_star: frag.c_star, witness: Some(frag.u) }),
        Err(SolveError::Infeasible { c_star, .. }) => Ok(FeasibilityCheck { feasible: false, witness: None, c_star }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(d: &[f64]) -> HermitianMatrix {
        HermitianMatrix::from_diag(d)
    }

    fn e(n: usize, k: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[k] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn construction_rules() {
        assert_eq!(
            HqcqpProblem::new(diag(&[1.0]), vec![diag(&[-1.0])]).unwrap_err(),
            ProblemError::DimensionTooSmall(1)
        );
        assert_eq!(HqcqpProblem::new(diag(&[1.0, 1.0]), vec![]).unwrap_err(), ProblemError::ConstraintCount(0));
        let three = vec![diag(&[-1.0, 1.0]); 3];
        assert_eq!(
            HqcqpProblem::new(diag(&[1.0, 1.0]), three).unwrap_err(),
            ProblemError::ThreeConstraintsNeedDim3(2)
        );
        assert!(matches!(
            HqcqpProblem::new(diag(&[1.0, -1.0]), vec![diag(&[-1.0, 1.0])]),
            Err(ProblemError::Objective(LinalgError::NotPositiveDefinite { pivot: 1, .. }))
        ));
        assert!(matches!(
            HqcqpProblem::new(diag(&[1.0, 1.0]), vec![diag(&[-1.0, 1.0, 2.0])]),
            Err(ProblemError::ConstraintDimension { index: 0, expected: 2, found: 3 })
        ));
    }

    #[test]
    fn reduce_examples() {
        let prob = HqcqpProblem::new(diag(&[4.0, 4.0]), vec![diag(&[-4.0, -8.0])]).unwrap();
        let red = reduce(&prob).unwrap();
        assert_eq!(red.constraints()[0], diag(&[-1.0, -2.0]));

        let p = HermitianMatrix::from_rows(&[
            vec![C64::new(-1.0, 0.0), C64::new(0.5, 0.25)],
            vec![C64::new(0.5, -0.25), C64::new(2.0, 0.0)],
        ])
        .unwrap();
        let prob = HqcqpProblem::new(HermitianMatrix::identity(2), vec![p.clone()]).unwrap();
        assert_eq!(reduce(&prob).unwrap().constraints()[0], p);
    }

    #[test]
    fn recover_examples() {
        let red = reduce(&HqcqpProblem::new(HermitianMatrix::identity(2), vec![diag(&[-1.0, 1.0])]).unwrap()).unwrap();
        let x = recover(4.0, &e(2, 0), &red);
        assert_abs_diff_eq!(x[0].re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1].norm(), 0.0);

        let prob = HqcqpProblem::new(diag(&[4.0, 4.0]), vec![diag(&[-1.0, 1.0])]).unwrap();
        let red = reduce(&prob).unwrap();
        let x = recover(1.0, &e(2, 0), &red);
        assert_abs_diff_eq!(x[0].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(qform(prob.objective(), &x), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn feasibility_examples() {
        let cfg = SearchConfig::default();
        let red = ReducedProblem::new(vec![diag(&[1.0, 2.0])]).unwrap();
        let chk = check_feasible(&red, &cfg).unwrap();
        assert!(!chk.feasible);
        assert!(chk.witness.is_none());
        assert_abs_diff_eq!(chk.c_star, 1.0, epsilon = 1e-14);

        let red = ReducedProblem::new(vec![diag(&[-1.0, 2.0])]).unwrap();
        let chk = check_feasible(&red, &cfg).unwrap();
        assert!(chk.feasible);
        assert_abs_diff_eq!(chk.witness.unwrap()[0].re, 1.0, epsilon = 1e-12);

        let red = ReducedProblem::new(vec![diag(&[-2.0, -1.0]), diag(&[-1.0, -2.0])]).unwrap();
        let chk = check_feasible(&red, &cfg).unwrap();
        assert!(chk.feasible);
        let w = chk.witness.unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(w[0].norm(), s, epsilon = 1e-6);
        assert_abs_diff_eq!(w[1].norm(), s, epsilon = 1e-6);
    }

    #[test]
    fn zero_optimum_is_marginally_infeasible() {
        // λmin is exactly 0: feasible only in the limit p → ∞.
        let red = ReducedProblem::new(vec![diag(&[0.0, 3.0])]).unwrap();
        match solve_reduced(&red, &SearchConfig::default()) {
            Err(SolveError::Infeasible { c_star, marginal }) => {
                assert_eq!(c_star, 0.0);
                assert!(marginal);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn solution_is_feasible_with_binding_constraint() {
        let prob = HqcqpProblem::new(diag(&[4.0, 4.0]), vec![diag(&[-4.0, -8.0])]).unwrap();
        let sol = solve(&prob, &SearchConfig::default()).unwrap();
        assert_abs_diff_eq!(sol.p_star, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.c_star, -2.0, epsilon = 1e-12);
        assert_eq!(sol.binding, vec![0]);
        assert_eq!(sol.case_tag, CaseTag::OneConstraint);
        for s in sol.constraint_slack(&prob) {
            assert!(s <= FEASIBILITY_TOL);
        }
        assert_abs_diff_eq!(qform(prob.objective(), &sol.x), sol.p_star, epsilon = 1e-12);
    }
}
