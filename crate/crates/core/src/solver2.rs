//! One- and two-constraint solver.
//!
//! With `x₁`, `x₂` the minimum eigenvectors of `C₁`, `C₂`:
//!
//! * Case 1, `c₁(x₁) > c₂(x₁)`: the left-most point of the joint numerical
//!   range is optimal, `c* = λmin(C₁)`.
//! * Case 2, `c₂(x₂) > c₁(x₂)`: the bottom-most point is optimal, `c* = λmin(C₂)`.
//! * Case 3, otherwise: both constraints bind and
//!   `c* = maxₜ λmin(A₁ + tA₂)` with `A₁ = C₁`, `A₂ = C₁ − C₂`.

use serde::{Deserialize, Serialize};

use crate::linalg::{eigh, qform, EigenPair, HermitianEigen, HermitianMatrix, LinalgError, C64};
use crate::problem::{require_feasible, CaseTag, Diagnostics, Fragment, SolveError, BINDING_TOL};
use crate::search::{dichotomous_max, initial_interval, SearchConfig, SearchError, TracePoint};
use crate::subspace::best_in_lowest_eigenspace;

/// Relative tolerance for treating eigenvalues as equal.
const CLUSTER_TOL: f64 = 1e-10;
/// Relative Frobenius tolerance for treating two constraints as identical.
const COINCIDENT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag2 {
    Case1,
    Case2,
    Case3,
}

pub(crate) fn cluster_tol(m: &HermitianMatrix) -> f64 {
    CLUSTER_TOL * (1.0 + m.frobenius_norm())
}

pub(crate) fn coincident(a: &HermitianMatrix, b: &HermitianMatrix) -> bool {
    a.sub(b).frobenius_norm() <= COINCIDENT_TOL * (1.0 + a.frobenius_norm().max(b.frobenius_norm()))
}

/// Minimizer of `qform(tiebreak, ·)` over the lowest eigenspace of `eig`.
///
/// For a simple smallest eigenvalue this is just the eigenvector; on a
/// repeated one it selects the end of the flat edge of the numerical range.
pub(crate) fn extreme_vector(eig: &HermitianEigen, tol: f64, tiebreak: &HermitianMatrix, sweeps: usize) -> Result<Vec<C64>, LinalgError> {
    let k = eig.lowest_cluster(tol);
    if k == 1 {
        return Ok(eig.vectors[0].clone());
    }
    let basis = &eig.vectors[..k];
    let inner = eigh(&tiebreak.compress(basis), sweeps)?;
    let y = &inner.vectors[0];
    let mut u = vec![C64::new(0.0, 0.0); eig.vectors[0].len()];
    for (v, w) in basis.iter().zip(y) {
        for (ui, vi) in u.iter_mut().zip(v) {
            *ui += vi * w;
        }
    }
    crate::linalg::normalize(&mut u);
    Ok(u)
}

/// Left-most point of the joint numerical range of `(C₁, C₂)`: the vector
/// attaining `λmin(C₁)` with the smallest `c₂`. Returns `(λmin(C₁), x₁)`.
pub fn leftmost_vector(c1: &HermitianMatrix, c2: &HermitianMatrix, cfg: &SearchConfig) -> Result<(f64, Vec<C64>), LinalgError> {
    let eig = eigh(c1, cfg.max_sweeps)?;
    let x = extreme_vector(&eig, cluster_tol(c1), c2, cfg.max_sweeps)?;
    Ok((eig.min(), x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub tag: CaseTag2,
    pub lambda1: f64,
    pub lambda2: f64,
    pub x1: Vec<C64>,
    pub x2: Vec<C64>,
    /// `c₂(x₁)`: second coordinate of the left-most point.
    pub c2_at_x1: f64,
    /// `c₁(x₂)`: first coordinate of the bottom-most point.
    pub c1_at_x2: f64,
}

pub fn classify(c1: &HermitianMatrix, c2: &HermitianMatrix, cfg: &SearchConfig) -> Result<Classification, LinalgError> {
    let (lambda1, x1) = leftmost_vector(c1, c2, cfg)?;
    let (lambda2, x2) = leftmost_vector(c2, c1, cfg)?;
    let c2_at_x1 = qform(c2, &x1);
    let c1_at_x2 = qform(c1, &x2);
    let tag = if lambda1 > c2_at_x1 {
        CaseTag2::Case1
    } else if lambda2 > c1_at_x2 {
        CaseTag2::Case2
    } else {
        CaseTag2::Case3
    };
    Ok(Classification { tag, lambda1, lambda2, x1, x2, c2_at_x1, c1_at_x2 })
}

pub fn classify_case(c1: &HermitianMatrix, c2: &HermitianMatrix) -> Result<CaseTag2, LinalgError> {
    Ok(classify(c1, c2, &SearchConfig::default())?.tag)
}

/// Minimum eigenpair of `A₁ + t·A₂`.
pub fn lambda_of_t(a1: &HermitianMatrix, a2: &HermitianMatrix, t: f64) -> Result<EigenPair, LinalgError> {
    Ok(eigh(&a1.combine(1.0, a2, t), crate::linalg::DEFAULT_MAX_SWEEPS)?.pair(0))
}

/// Outcome of the equality-constrained sub-problem `min c₁(u)` s.t. `c₁(u) = c₂(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityResult {
    /// `max(c₁(u), c₂(u))` at the returned `u`.
    pub value: f64,
    pub u: Vec<C64>,
    /// Maximizing multiplier; `None` when the two constraints coincide.
    pub t_star: Option<f64>,
    /// Best `λmin(A₁ + tA₂)` seen.
    pub lower_bound: f64,
    pub trace: Vec<TracePoint>,
    pub iterations: usize,
    pub eigen_gap: Option<f64>,
    pub span: usize,
    /// `|c₁(u) − c₂(u)|`.
    pub residual: f64,
}

/// Maximizes `λmin(C₁ + t(C₁ − C₂))` by dichotomous search and extracts the
/// equalizing vector from the lowest eigenspace at the maximizer.
pub fn solve_equality(c1: &HermitianMatrix, c2: &HermitianMatrix, cfg: &SearchConfig) -> Result<EqualityResult, SearchError> {
    equality_with(c1, c2, &[], cfg)
}

/// [`solve_equality`], with `extra` forms joining the objective used to pick
/// `u` inside a degenerate eigenspace (and in the reported value).
pub(crate) fn equality_with(
    c1: &HermitianMatrix,
    c2: &HermitianMatrix,
    extra: &[&HermitianMatrix],
    cfg: &SearchConfig,
) -> Result<EqualityResult, SearchError> {
    let mut objective = vec![c1, c2];
    objective.extend_from_slice(extra);
    let a1 = c1;
    let a2 = c1.sub(c2);
    if coincident(c1, c2) {
        let eig = eigh(c1, cfg.max_sweeps)?;
        let pick = best_in_lowest_eigenspace(&eig, &objective, &[], 1);
        let value = pick.value;
        return Ok(EqualityResult {
            value,
            u: pick.u,
            t_star: None,
            lower_bound: value,
            trace: vec![TracePoint { iteration: 0, value }],
            iterations: 0,
            eigen_gap: None,
            span: 1,
            residual: 0.0,
        });
    }
    let sweeps = cfg.max_sweeps;
    let lambda = |t: f64| -> Result<f64, LinalgError> { Ok(eigh(&a1.combine(1.0, &a2, t), sweeps)?.min()) };
    let init = initial_interval(a1, lambda, cfg)?;
    let res = dichotomous_max(lambda, init.interval, cfg)?;
    let (lo, hi) = bisect_slope(a1, &a2, res.final_interval.lo, res.final_interval.hi, sweeps)?;
    let t = 0.5 * (lo + hi);
    let eig = eigh(&a1.combine(1.0, &a2, t), sweeps)?;
    let mut pick = best_in_lowest_eigenspace(&eig, &objective, &[&a2], 3);
    if let Some(branches) = branch_pair(a1, &a2, lo, hi, sweeps)? {
        let mixed = best_in_lowest_eigenspace(&branches, &objective, &[&a2], 2);
        if mixed.value < pick.value {
            pick = mixed;
        }
    }
    let lower_bound = res.trace.last().map_or(res.value, |p| p.value).max(res.value);
    Ok(EqualityResult {
        value: pick.value,
        u: pick.u,
        t_star: Some(t),
        lower_bound,
        trace: res.trace,
        iterations: res.iterations,
        eigen_gap: eig.values.get(1).map(|v| v - eig.values[0]),
        span: pick.span,
        residual: pick.residual,
    })
}

/// Shrinks a bracket of the maximizer of `λ(t) = λmin(A₁ + tA₂)` by bisecting
/// on the sign of its slope `xᴴA₂x` (`x` the minimum eigenvector), down to
/// floating-point resolution.
pub(crate) fn bisect_slope(
    a1: &HermitianMatrix,
    a2: &HermitianMatrix,
    mut lo: f64,
    mut hi: f64,
    sweeps: usize,
) -> Result<(f64, f64), LinalgError> {
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let eig = eigh(&a1.combine(1.0, a2, mid), sweeps)?;
        let slope = qform(a2, &eig.vectors[0]);
        if slope > 0.0 {
            lo = mid;
        } else if slope < 0.0 {
            hi = mid;
        } else {
            return Ok((mid, mid));
        }
    }
    Ok((lo, hi))
}

/// Orthonormalized minimum eigenvectors at both ends of a tight bracket: at a
/// kink of `λ(t)` these are the two crossing branches.
fn branch_pair(
    a1: &HermitianMatrix,
    a2: &HermitianMatrix,
    lo: f64,
    hi: f64,
    sweeps: usize,
) -> Result<Option<HermitianEigen>, LinalgError> {
    if lo == hi {
        return Ok(None);
    }
    let x = eigh(&a1.combine(1.0, a2, lo), sweeps)?.vectors.swap_remove(0);
    let mut y = eigh(&a1.combine(1.0, a2, hi), sweeps)?.vectors.swap_remove(0);
    let overlap = crate::linalg::dot(&x, &y);
    for (yi, xi) in y.iter_mut().zip(&x) {
        *yi -= xi * overlap;
    }
    if crate::linalg::normalize(&mut y) < 1e-8 {
        return Ok(None);
    }
    Ok(Some(HermitianEigen { values: vec![0.0, 0.0], vectors: vec![x, y], sweeps: 0 }))
}

pub fn solve_one(c1: &HermitianMatrix, cfg: &SearchConfig) -> Result<Fragment, SolveError> {
    let eig = eigh(c1, cfg.max_sweeps)?;
    let c_star = eig.min();
    let frag = Fragment {
        c_star,
        u: eig.vectors[0].clone(),
        case_tag: CaseTag::OneConstraint,
        multipliers: vec![],
        trace: vec![TracePoint { iteration: 0, value: c_star }],
        iterations: 0,
        diagnostics: Diagnostics {
            lower_bound: Some(c_star),
            eigen_gap: eig.values.get(1).map(|v| v - c_star),
            span: 1,
            ..Default::default()
        },
    };
    require_feasible(frag, std::slice::from_ref(c1))
}

fn extreme_fragment(tag: CaseTag, value: f64, u: Vec<C64>, lower: f64) -> Fragment {
    Fragment {
        c_star: value,
        u,
        case_tag: tag,
        multipliers: vec![],
        trace: vec![TracePoint { iteration: 0, value }],
        iterations: 0,
        diagnostics: Diagnostics { lower_bound: Some(lower), span: 1, ..Default::default() },
    }
}

/// `min over unit u of max(c₁(u), c₂(u))` without the feasibility verdict.
pub(crate) fn min_max_two(c1: &HermitianMatrix, c2: &HermitianMatrix, cfg: &SearchConfig) -> Result<Fragment, SolveError> {
    let cls = classify(c1, c2, cfg)?;
    let lower = cls.lambda1.max(cls.lambda2);
    match cls.tag {
        CaseTag2::Case1 => Ok(extreme_fragment(CaseTag::TwoCase1, cls.lambda1, cls.x1, lower)),
        CaseTag2::Case2 => Ok(extreme_fragment(CaseTag::TwoCase2, cls.lambda2, cls.x2, lower)),
        CaseTag2::Case3 => {
            let eq = solve_equality(c1, c2, cfg)?;
            Ok(Fragment {
                c_star: eq.value,
                u: eq.u,
                case_tag: CaseTag::TwoCase3,
                multipliers: eq.t_star.into_iter().collect(),
                trace: eq.trace,
                iterations: eq.iterations,
                diagnostics: Diagnostics {
                    lower_bound: Some(eq.lower_bound.max(lower)),
                    eigen_gap: eq.eigen_gap,
                    span: eq.span,
                    equality_residual: eq.residual,
                    unbounded: vec![],
                    flagged: eq.residual > BINDING_TOL,
                },
            })
        }
    }
}

pub fn solve_two(c1: &HermitianMatrix, c2: &HermitianMatrix, cfg: &SearchConfig) -> Result<Fragment, SolveError> {
    let frag = min_max_two(c1, c2, cfg)?;
    require_feasible(frag, &[c1.clone(), c2.clone()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use approx::assert_abs_diff_eq;

    fn diag(d: &[f64]) -> HermitianMatrix {
        HermitianMatrix::from_diag(d)
    }

    #[test]
    fn solve_one_examples() {
        let cfg = SearchConfig::default();
        let f = solve_one(&diag(&[-2.0, 1.0]), &cfg).unwrap();
        assert_abs_diff_eq!(f.c_star, -2.0);
        assert_abs_diff_eq!(f.u[0].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(-1.0 / f.c_star, 0.5);
        assert!(matches!(
            solve_one(&HermitianMatrix::identity(2), &cfg),
            Err(SolveError::Infeasible { c_star, .. }) if (c_star - 1.0).abs() < 1e-14
        ));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_case(&diag(&[-1.0, 5.0]), &diag(&[-3.0, 4.0])).unwrap(), CaseTag2::Case1);
        assert_eq!(classify_case(&diag(&[-3.0, 4.0]), &diag(&[-1.0, 5.0])).unwrap(), CaseTag2::Case2);
        assert_eq!(classify_case(&diag(&[-2.0, -1.0]), &diag(&[-1.0, -2.0])).unwrap(), CaseTag2::Case3);
    }

    #[test]
    fn classification_tie_routes_to_case3() {
        // c₁(x₁) = c₂(x₁) = −1 exactly.
        assert_eq!(classify_case(&diag(&[-1.0, 2.0]), &diag(&[-1.0, 3.0])).unwrap(), CaseTag2::Case3);
    }

    #[test]
    fn repeated_eigenvalue_uses_leftmost_end_of_edge() {
        // λmin(C₁) = −1 on span{e₁, e₂}; c₂ is smaller on e₂, so x₁ = e₂.
        let c1 = diag(&[-1.0, -1.0, 4.0]);
        let c2 = diag(&[0.0, -3.0, 1.0]);
        let (lam, x1) = leftmost_vector(&c1, &c2, &SearchConfig::default()).unwrap();
        assert_abs_diff_eq!(lam, -1.0);
        assert_abs_diff_eq!(x1[1].norm(), 1.0, epsilon = 1e-12);
        assert_eq!(classify_case(&c1, &c2).unwrap(), CaseTag2::Case1);
    }

    #[test]
    fn lambda_of_t_examples() {
        let a1 = diag(&[-2.0, -1.0]);
        let a2 = diag(&[-1.0, 1.0]);
        assert_abs_diff_eq!(lambda_of_t(&a1, &a2, 0.0).unwrap().value, -2.0);
        assert_abs_diff_eq!(lambda_of_t(&a1, &a2, -0.5).unwrap().value, -1.5, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_case3_optimum() {
        let cfg = SearchConfig::default();
        let f = solve_two(&diag(&[-2.0, -1.0]), &diag(&[-1.0, -2.0]), &cfg).unwrap();
        assert_eq!(f.case_tag, CaseTag::TwoCase3);
        assert_abs_diff_eq!(f.multipliers[0], -0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(f.c_star, -1.5, epsilon = 1e-6);
        assert_abs_diff_eq!(-1.0 / f.c_star, 2.0 / 3.0, epsilon = 1e-4);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(f.u[0].norm(), s, epsilon = 1e-6);
        assert_abs_diff_eq!(f.u[1].norm(), s, epsilon = 1e-6);
        assert!(f.diagnostics.equality_residual <= 1e-4);
        assert_eq!(f.diagnostics.span, 2);
    }

    #[test]
    fn case1_optimum() {
        let cfg = SearchConfig::default();
        let (c1, c2) = (diag(&[-1.0, 5.0]), diag(&[-3.0, 4.0]));
        let f = solve_two(&c1, &c2, &cfg).unwrap();
        assert_eq!(f.case_tag, CaseTag::TwoCase1);
        assert_abs_diff_eq!(f.c_star, -1.0);
        assert!(f.multipliers.is_empty());
        let p = -1.0 / f.c_star;
        assert_abs_diff_eq!(p, 1.0);
        assert_abs_diff_eq!(f.u[0].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p * qform(&c2, &f.u) + 1.0, -2.0, epsilon = 1e-14);
    }

    #[test]
    fn coincident_constraints_bypass_search() {
        let cfg = SearchConfig::default();
        let c = diag(&[-2.0, 1.0, 3.0]);
        let f = solve_two(&c, &c, &cfg).unwrap();
        assert_abs_diff_eq!(f.c_star, -2.0);
        assert_eq!(f.iterations, 0);
        assert!(f.multipliers.is_empty());
        assert_abs_diff_eq!(norm(&f.u), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn both_definite_is_infeasible() {
        let cfg = SearchConfig::default();
        assert!(matches!(
            solve_two(&diag(&[1.0, 2.0]), &diag(&[-1.0, 3.0]), &cfg),
            Err(SolveError::Infeasible { .. })
        ));
    }
}
