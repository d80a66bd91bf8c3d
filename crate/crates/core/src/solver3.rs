//! Three-constraint solver.
//!
//! The optimum of `min over unit u of max(c₁, c₂, c₃)` binds one, two or all
//! three constraints. Each of the seven possibilities yields a candidate unit
//! vector; every candidate is scored by the full three-form maximum, so each
//! score is an upper bound on `c*` and the smallest one is the answer.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, eigh, normalize, qform, HermitianMatrix, C64};
use crate::problem::{max_form, require_feasible, CaseTag, Diagnostics, Fragment, SolveError, BINDING_TOL};
use crate::search::{alternating_max, initial_interval, SearchConfig, SearchError, TracePoint};
use crate::solver2::{cluster_tol, coincident, equality_with, min_max_two};
use crate::subspace::best_in_lowest_eigenspace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CandidateKind {
    AllBinding,
    /// Zero-based constraint indices.
    PairBinding(usize, usize),
    SingleBinding(usize),
}

impl CandidateKind {
    pub fn binding_count(&self) -> usize {
        match self {
            CandidateKind::AllBinding => 3,
            CandidateKind::PairBinding(..) => 2,
            CandidateKind::SingleBinding(_) => 1,
        }
    }

    pub fn case_tag(&self) -> CaseTag {
        match *self {
            CandidateKind::AllBinding => CaseTag::ThreeAll,
            CandidateKind::PairBinding(i, j) => CaseTag::ThreePair(i, j),
            CandidateKind::SingleBinding(i) => CaseTag::ThreeSingle(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate3 {
    pub kind: CandidateKind,
    pub u: Vec<C64>,
    /// `maxₖ cₖ(u)` over all three forms.
    pub value: f64,
    pub multipliers: Vec<f64>,
    /// Best pencil eigenvalue seen by the search, if one ran.
    pub lower_bound: Option<f64>,
    pub trace: Vec<TracePoint>,
    pub iterations: usize,
    pub eigen_gap: Option<f64>,
    pub span: usize,
    /// Largest `|cᵢ(u) − cⱼ(u)|` over the constraints this candidate binds.
    pub residual: f64,
    /// The search ran out of rounds and `u` is its best incumbent.
    pub salvaged: bool,
}

fn check_dim(cs: [&HermitianMatrix; 3]) -> Result<(), SolveError> {
    let n = cs[0].dim();
    if n < 3 {
        return Err(crate::problem::ProblemError::ThreeConstraintsNeedDim3(n).into());
    }
    Ok(())
}

fn binding_residual(cs: [&HermitianMatrix; 3], idx: &[usize], u: &[C64]) -> f64 {
    let vals: Vec<f64> = idx.iter().map(|&i| qform(cs[i], u)).collect();
    vals.iter().flat_map(|a| vals.iter().map(move |b| (a - b).abs())).fold(0.0, f64::max)
}

/// Minimum eigenvector of `Cᵢ`. On a repeated eigenvalue the other two forms
/// are minimized (in the min-max sense) over the eigenspace.
pub fn candidate_single(cs: [&HermitianMatrix; 3], i: usize, cfg: &SearchConfig) -> Result<Candidate3, SolveError> {
    check_dim(cs)?;
    let eig = eigh(cs[i], cfg.max_sweeps)?;
    let k = eig.lowest_cluster(cluster_tol(cs[i]));
    let mut u = eig.vectors[0].clone();
    let mut span = 1;
    if k > 1 {
        let basis = &eig.vectors[..k];
        let others: Vec<HermitianMatrix> = (0..3).filter(|&j| j != i).map(|j| cs[j].compress(basis)).collect();
        if let Ok(inner) = min_max_two(&others[0], &others[1], cfg) {
            let mut w = vec![C64::new(0.0, 0.0); u.len()];
            for (v, y) in basis.iter().zip(&inner.u) {
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi += vi * y;
                }
            }
            normalize(&mut w);
            if max_form_refs(cs, &w) <= max_form_refs(cs, &u) {
                u = w;
                span = k;
            }
        }
    }
    let value = max_form_refs(cs, &u);
    Ok(Candidate3 {
        kind: CandidateKind::SingleBinding(i),
        value,
        multipliers: vec![],
        lower_bound: Some(eig.min()),
        trace: vec![TracePoint { iteration: 0, value }],
        iterations: 0,
        eigen_gap: eig.values.get(1).map(|v| v - eig.values[0]),
        span,
        residual: 0.0,
        salvaged: false,
        u,
    })
}

fn max_form_refs(cs: [&HermitianMatrix; 3], u: &[C64]) -> f64 {
    cs.iter().map(|c| qform(c, u)).fold(f64::NEG_INFINITY, f64::max)
}

/// Equalizes `cᵢ = cⱼ` via `maxₜ λmin(Cᵢ + t(Cᵢ − Cⱼ))`, then scores all three forms.
pub fn candidate_pair(cs: [&HermitianMatrix; 3], i: usize, j: usize, cfg: &SearchConfig) -> Result<Candidate3, SolveError> {
    check_dim(cs)?;
    assert!(i != j && i < 3 && j < 3, "pair indices must be distinct and below 3");
    if coincident(cs[i], cs[j]) {
        let single = candidate_single(cs, i, cfg)?;
        return Ok(Candidate3 { kind: CandidateKind::PairBinding(i, j), ..single });
    }
    let k = 3 - i - j;
    let eq = equality_with(cs[i], cs[j], &[cs[k]], cfg)?;
    Ok(Candidate3 {
        kind: CandidateKind::PairBinding(i, j),
        value: eq.value,
        multipliers: eq.t_star.into_iter().collect(),
        lower_bound: Some(eq.lower_bound),
        trace: eq.trace,
        iterations: eq.iterations,
        eigen_gap: eq.eigen_gap,
        span: eq.span,
        residual: eq.residual,
        salvaged: false,
        u: eq.u,
    })
}

/// Maximizes `λmin(A₁ + t₁A₂ + t₂A₃)`, `A₁ = C₁`, `A₂ = C₁ − C₂`, `A₃ = C₁ − C₃`,
/// by alternating line searches, then equalizes all three forms inside the
/// lowest eigenspace at the maximizer.
///
/// When the round budget runs out the best incumbent is still returned, with
/// `salvaged` set.
pub fn candidate_all(cs: [&HermitianMatrix; 3], cfg: &SearchConfig) -> Result<Candidate3, SolveError> {
    check_dim(cs)?;
    let a1 = cs[0];
    let a2 = cs[0].sub(cs[1]);
    let a3 = cs[0].sub(cs[2]);
    if coincident(cs[0], cs[1]) && coincident(cs[0], cs[2]) {
        let single = candidate_single(cs, 0, cfg)?;
        return Ok(Candidate3 { kind: CandidateKind::AllBinding, ..single });
    }
    let sweeps = cfg.max_sweeps;
    let pencil = |t1: f64, t2: f64| a1.affine(&[(t1, &a2), (t2, &a3)]);
    let lambda = |t1: f64, t2: f64| Ok(eigh(&pencil(t1, t2), sweeps)?.min());
    let init = initial_interval(a1, |t| lambda(t, 0.0), cfg)?;
    let (t, lower, trace, iterations, salvaged) = match alternating_max(lambda, [0.0, 0.0], init.interval, cfg) {
        Ok(r) => (r.t_star, r.value, r.trace, r.iterations, false),
        Err(SearchError::RoundBudget { best_t, best_value, trace, .. }) => {
            let n = trace.len();
            (best_t, best_value, trace, n, true)
        }
        Err(e) => return Err(e.into()),
    };
    let eig = eigh(&pencil(t[0], t[1]), sweeps)?;
    let mut pick = best_in_lowest_eigenspace(&eig, &cs, &[&a2, &a3], 4);
    let mut t = t;
    let mut eig = eig;
    if let Some(tp) = newton_polish(a1, [&a2, &a3], t, sweeps)? {
        let e = eigh(&pencil(tp[0], tp[1]), sweeps)?;
        let p = best_in_lowest_eigenspace(&e, &cs, &[&a2, &a3], 4);
        if p.value < pick.value {
            (pick, t, eig) = (p, tp, e);
        }
    }
    Ok(Candidate3 {
        kind: CandidateKind::AllBinding,
        value: pick.value,
        multipliers: t.to_vec(),
        lower_bound: Some(lower),
        trace,
        iterations,
        eigen_gap: eig.values.get(1).map(|v| v - eig.values[0]),
        span: pick.span,
        residual: binding_residual(cs, &[0, 1, 2], &pick.u),
        salvaged,
        u: pick.u,
    })
}

/// Newton iteration on `∇λ(t) = (xᴴA₂x, xᴴA₃x)` for `λ = λmin(A₁ + t₁A₂ + t₂A₃)`,
/// valid while the smallest eigenvalue stays simple. The Hessian comes from
/// second-order perturbation theory. Returns `None` if no step was taken.
fn newton_polish(
    a1: &HermitianMatrix,
    a: [&HermitianMatrix; 2],
    mut t: [f64; 2],
    sweeps: usize,
) -> Result<Option<[f64; 2]>, SolveError> {
    let scale = 1.0 + a1.frobenius_norm() + a[0].frobenius_norm() + a[1].frobenius_norm();
    let state = |t: [f64; 2]| -> Result<(crate::linalg::HermitianEigen, [f64; 2]), SolveError> {
        let e = eigh(&a1.affine(&[(t[0], a[0]), (t[1], a[1])]), sweeps)?;
        let g = [qform(a[0], &e.vectors[0]), qform(a[1], &e.vectors[0])];
        Ok((e, g))
    };
    let gnorm = |g: [f64; 2]| g[0].hypot(g[1]);
    let (mut eig, mut g) = state(t)?;
    let mut moved = false;
    for _ in 0..30 {
        if gnorm(g) <= 1e-13 * scale {
            break;
        }
        let gap = eig.values[1] - eig.values[0];
        if gap <= 1e-9 * scale {
            break;
        }
        let u0 = &eig.vectors[0];
        let w = [a[0].mul_vec(u0), a[1].mul_vec(u0)];
        let mut h = [[0.0; 2]; 2];
        for (v, lam) in eig.vectors.iter().zip(&eig.values).skip(1) {
            let p = [dot(v, &w[0]), dot(v, &w[1])];
            let den = eig.values[0] - lam;
            for j in 0..2 {
                for k in 0..2 {
                    h[j][k] += 2.0 * (p[j].conj() * p[k]).re / den;
                }
            }
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let step = if det.abs() > 1e-14 * (h[0][0].abs() + h[1][1].abs()).powi(2) {
            [(h[1][1] * g[0] - h[0][1] * g[1]) / det, (h[0][0] * g[1] - h[1][0] * g[0]) / det]
        } else {
            break;
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial = [t[0] - alpha * step[0], t[1] - alpha * step[1]];
            let (e, gt) = state(trial)?;
            if gnorm(gt) < gnorm(g) && e.values[0] >= eig.values[0] - 1e-12 * scale {
                (t, eig, g) = (trial, e, gt);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        moved = true;
    }
    Ok(moved.then_some(t))
}

/// All seven candidates in a fixed order: singles, pairs, then all-binding.
/// Candidates whose equality set is empty (unbounded pencil) are reported
/// separately rather than failing the whole computation.
pub fn candidates(cs: [&HermitianMatrix; 3], cfg: &SearchConfig) -> Result<(Vec<Candidate3>, Vec<CandidateKind>), SolveError> {
    let mut out = Vec::with_capacity(7);
    let mut unbounded = Vec::new();
    for i in 0..3 {
        out.push(candidate_single(cs, i, cfg)?);
    }
    let mut keep = |kind: CandidateKind, r: Result<Candidate3, SolveError>| -> Result<(), SolveError> {
        match r {
            Ok(c) => out.push(c),
            Err(SolveError::Search(SearchError::Unbounded { .. })) => unbounded.push(kind),
            Err(e) => return Err(e),
        }
        Ok(())
    };
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        keep(CandidateKind::PairBinding(i, j), candidate_pair(cs, i, j, cfg))?;
    }
    keep(CandidateKind::AllBinding, candidate_all(cs, cfg))?;
    Ok((out, unbounded))
}

/// Smallest candidate score; near-ties go to fewer binding constraints.
fn select(cands: &[Candidate3]) -> &Candidate3 {
    let best = cands.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let tie = 1e-9 * (1.0 + best.abs());
    cands
        .iter()
        .filter(|c| c.value <= best + tie)
        .min_by(|a, b| a.kind.binding_count().cmp(&b.kind.binding_count()).then(a.value.total_cmp(&b.value)))
        .expect("single-binding candidates always exist")
}

pub fn solve_three(cs: [&HermitianMatrix; 3], cfg: &SearchConfig) -> Result<Fragment, SolveError> {
    let (cands, unbounded) = candidates(cs, cfg)?;
    let w = select(&cands);
    let owned: Vec<HermitianMatrix> = cs.iter().map(|c| (*c).clone()).collect();
    let frag = Fragment {
        c_star: max_form(&owned, &w.u),
        u: w.u.clone(),
        case_tag: w.kind.case_tag(),
        multipliers: w.multipliers.clone(),
        trace: w.trace.clone(),
        iterations: w.iterations,
        diagnostics: Diagnostics {
            lower_bound: w.lower_bound,
            eigen_gap: w.eigen_gap,
            span: w.span,
            equality_residual: w.residual,
            unbounded: unbounded.iter().map(|k| k.case_tag()).collect(),
            flagged: w.salvaged || w.residual > BINDING_TOL,
        },
    };
    require_feasible(frag, &owned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, qform};
    use approx::assert_abs_diff_eq;

    fn diag(d: &[f64]) -> HermitianMatrix {
        HermitianMatrix::from_diag(d)
    }

    fn symmetric() -> [HermitianMatrix; 3] {
        [diag(&[-3.0, -1.0, -1.0]), diag(&[-1.0, -3.0, -1.0]), diag(&[-1.0, -1.0, -3.0])]
    }

    fn single_binding() -> [HermitianMatrix; 3] {
        [diag(&[-1.0, 9.0, 9.0]), diag(&[-3.0, 9.0, 9.0]), diag(&[-2.0, 9.0, 9.0])]
    }

    fn refs(cs: &[HermitianMatrix; 3]) -> [&HermitianMatrix; 3] {
        [&cs[0], &cs[1], &cs[2]]
    }

    #[test]
    fn single_candidates() {
        let cfg = SearchConfig::default();
        let cs = single_binding();
        let c = candidate_single(refs(&cs), 0, &cfg).unwrap();
        assert_abs_diff_eq!(c.u[0].norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.value, -1.0);

        let cs = symmetric();
        let c = candidate_single(refs(&cs), 0, &cfg).unwrap();
        assert_abs_diff_eq!(c.u[0].norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.value, -1.0);
    }

    #[test]
    fn all_binding_symmetric_triple() {
        let cfg = SearchConfig::default();
        let cs = symmetric();
        let c = candidate_all(refs(&cs), &cfg).unwrap();
        assert_abs_diff_eq!(c.multipliers[0], -1.0 / 3.0, epsilon = 1e-3);
        assert_abs_diff_eq!(c.multipliers[1], -1.0 / 3.0, epsilon = 1e-3);
        assert_abs_diff_eq!(c.value, -5.0 / 3.0, epsilon = 1e-6);
        for z in &c.u {
            assert_abs_diff_eq!(z.norm(), 1.0 / 3f64.sqrt(), epsilon = 1e-4);
        }
        assert!(c.residual <= 1e-3);
    }

    #[test]
    fn all_binding_degenerates_to_min_eigenvalue() {
        let cfg = SearchConfig::default();
        let c = diag(&[-2.0, 1.0, 4.0]);
        let cs = [c.clone(), c.clone(), c];
        let cand = candidate_all(refs(&cs), &cfg).unwrap();
        assert_abs_diff_eq!(cand.value, -2.0);
    }

    #[test]
    fn pair_candidate_lies_above_its_equality_value() {
        let cfg = SearchConfig::default();
        let cs = symmetric();
        let c = candidate_pair(refs(&cs), 0, 1, &cfg).unwrap();
        assert!(c.value >= -5.0 / 3.0 - 1e-9);
        assert!(binding_residual(refs(&cs), &[0, 1], &c.u) <= 1e-4);
    }

    #[test]
    fn coincident_pair_reduces_to_single() {
        let cfg = SearchConfig::default();
        let cs = [diag(&[-2.0, 1.0, 1.0]), diag(&[-2.0, 1.0, 1.0]), diag(&[1.0, -1.0, 1.0])];
        let pair = candidate_pair(refs(&cs), 0, 1, &cfg).unwrap();
        let single = candidate_single(refs(&cs), 0, &cfg).unwrap();
        assert_abs_diff_eq!(pair.value, single.value);
    }

    #[test]
    fn solve_symmetric_triple() {
        let cfg = SearchConfig::default();
        let cs = symmetric();
        let f = solve_three(refs(&cs), &cfg).unwrap();
        assert_eq!(f.case_tag, CaseTag::ThreeAll);
        assert_abs_diff_eq!(f.c_star, -5.0 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(-1.0 / f.c_star, 0.6, epsilon = 1e-4);
    }

    #[test]
    fn solve_single_binding_triple() {
        let cfg = SearchConfig::default();
        let cs = single_binding();
        let f = solve_three(refs(&cs), &cfg).unwrap();
        assert_eq!(f.case_tag, CaseTag::ThreeSingle(0));
        assert_abs_diff_eq!(f.c_star, -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(norm(&f.u), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(qform(&cs[0], &f.u), -1.0, epsilon = 1e-9);
    }

    #[test]
    fn two_dimensional_triples_are_rejected() {
        let cfg = SearchConfig::default();
        let c = diag(&[-1.0, 1.0]);
        assert!(matches!(solve_three([&c, &c, &c], &cfg), Err(SolveError::Problem(_))));
    }
}
