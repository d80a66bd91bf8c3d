//! Acceptance checks, one line per criterion. Reference values come from the
//! eigen-free sampling oracle or from closed forms; nothing here trusts the
//! solver's own eigen machinery for ground truth.

use std::process::ExitCode;
use std::time::Instant;

use hqcqp::bench::{run_bench, BenchSpec};
use hqcqp::generator::{random_feasible_problem, random_hermitian, GeneratorSpec};
use hqcqp::linalg::{eigh, norm};
use hqcqp::oracle::{convex_hull, hull_contains, oracle_cstar, sample_numerical_range, OracleConfig, PointTag};
use hqcqp::search::{alternating_max, dichotomous_max, initial_interval, Interval};
use hqcqp::solver2::{classify, solve_equality, CaseTag2};
use hqcqp::{inverse_sqrt_factor, quadratic_form, reduce, solve, HermitianMatrix, HqcqpProblem, SearchConfig, Solution, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x5EED;
/// Oracle sphere samples per instance; refinement carries the precision.
const ORACLE_SAMPLES: usize = 4096;

struct Outcome {
    pass: bool,
    detail: String,
}

fn diag(d: &[f64]) -> HermitianMatrix {
    HermitianMatrix::from_diag(d)
}

fn oracle_cfg(seed: u64) -> OracleConfig {
    OracleConfig { samples: ORACLE_SAMPLES, seed, ..Default::default() }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Analytic optima.
fn criterion1() -> Outcome {
    let start = Instant::now();
    let cfg = SearchConfig::default();
    let id = |n| HermitianMatrix::identity(n);
    let two = HqcqpProblem::new(id(2), vec![diag(&[-2.0, -1.0]), diag(&[-1.0, -2.0])]).unwrap();
    let sym = HqcqpProblem::new(
        id(3),
        vec![diag(&[-3.0, -1.0, -1.0]), diag(&[-1.0, -3.0, -1.0]), diag(&[-1.0, -1.0, -3.0])],
    )
    .unwrap();
    let single =
        HqcqpProblem::new(id(3), vec![diag(&[-1.0, 9.0, 9.0]), diag(&[-3.0, 9.0, 9.0]), diag(&[-2.0, 9.0, 9.0])])
            .unwrap();
    let p2 = solve(&two, &cfg).unwrap().p_star;
    let p3 = solve(&sym, &cfg).unwrap().p_star;
    let c1 = solve(&single, &cfg).unwrap().c_star;
    let secs = start.elapsed().as_secs_f64();
    let pass = (p2 - 2.0 / 3.0).abs() <= 1e-4 && (p3 - 0.6).abs() <= 1e-4 && (c1 + 1.0).abs() <= 1e-6 && secs < 1.0;
    Outcome {
        pass,
        detail: format!(
            "p*={p2:.8} (2/3), p*={p3:.8} (3/5), c*={c1:.10} (-1), {:.1} ms",
            secs * 1e3
        ),
    }
}

struct Instance {
    prob: HqcqpProblem,
    sol: Solution,
}

/// Oracle equivalence; also returns the solved instances for the feasibility check.
fn criterion2() -> (Outcome, Vec<Instance>) {
    let start = Instant::now();
    let cfg = SearchConfig::default();
    let mut instances = Vec::new();
    let mut lines = Vec::new();
    let mut pass = true;
    for m in [2usize, 3] {
        let (mut ok, mut total, mut unexplained) = (0usize, 0usize, 0usize);
        let mut worst: f64 = 0.0;
        for k in 0..200usize {
            let n = 3 + k % 8;
            let seed = SEED ^ ((m as u64) << 32) ^ k as u64;
            let prob = random_feasible_problem(&GeneratorSpec::new(n, m, seed)).unwrap();
            let red = reduce(&prob).unwrap();
            let oracle = oracle_cstar(red.constraints(), &oracle_cfg(seed)).unwrap();
            let sol = solve(&prob, &cfg).unwrap();
            let p_oracle = -1.0 / oracle.c_hat;
            let gap = rel_gap(sol.p_star, p_oracle);
            worst = worst.max(gap);
            total += 1;
            if gap <= 2e-2 {
                ok += 1;
            } else {
                let d = &sol.diagnostics;
                let multiplicity = d.flagged || d.span > 1 || d.eigen_gap.is_some_and(|g| g < 1e-6);
                if !multiplicity {
                    unexplained += 1;
                }
            }
            instances.push(Instance { prob, sol });
        }
        let frac = ok as f64 / total as f64;
        pass &= frac >= 0.98 && unexplained == 0;
        lines.push(format!("m={m}: {ok}/{total} within 2e-2 (worst {worst:.2e}, {unexplained} unflagged misses)"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= 60.0;
    (Outcome { pass, detail: format!("{}; {secs:.1} s", lines.join("; ")) }, instances)
}

/// Average relative error at iteration 10.
fn criterion3() -> Outcome {
    let spec = BenchSpec {
        dims: vec![9, 16, 25],
        constraints: vec![2, 3],
        count: 100,
        seed: SEED,
        oracle: OracleConfig { samples: 2048, ..Default::default() },
        ..Default::default()
    };
    let report = run_bench(&spec);
    let mut pass = report.skipped.is_empty();
    let mut parts = Vec::new();
    for &m in &spec.constraints {
        for &d in &spec.dims {
            let rows: Vec<_> = report.rows.iter().filter(|r| r.dim == d && r.m == m).collect();
            let at10 = rows.iter().find(|r| r.iteration == 10).or(rows.last()).map_or(f64::NAN, |r| r.avg_rel_err);
            pass &= at10 <= 0.1 && rows.first().is_some_and(|r| r.n_instances == 100);
            parts.push(format!("m={m} N={d}: {at10:.2e}"));
        }
    }
    Outcome {
        pass,
        detail: format!("{} ({} skipped, {:.1} s)", parts.join(", "), report.skipped.len(), report.elapsed.as_secs_f64()),
    }
}

/// Feasibility and binding in the original variables.
fn criterion4(instances: &[Instance]) -> Outcome {
    let mut worst_slack = f64::NEG_INFINITY;
    let mut unbound = 0;
    for inst in instances {
        let slack = inst.sol.constraint_slack(&inst.prob);
        worst_slack = worst_slack.max(slack.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        if !slack.iter().any(|s| s.abs() <= 1e-4) {
            unbound += 1;
        }
    }
    Outcome {
        pass: worst_slack <= 1e-6 && unbound == 0,
        detail: format!(
            "{} solutions, max xᴴPx+1 = {worst_slack:.2e}, {unbound} without a binding constraint",
            instances.len()
        ),
    }
}

/// Duality for two-constraint problems in the equality-binding case.
fn criterion5() -> Outcome {
    let cfg = SearchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let (mut found, mut worst_gap, mut worst_weak) = (0, 0.0f64, f64::NEG_INFINITY);
    let mut worst_eq: f64 = 0.0;
    let mut k = 0u64;
    while found < 50 {
        k += 1;
        let n = 3 + (k % 8) as usize;
        let prob = random_feasible_problem(&GeneratorSpec::new(n, 2, SEED ^ (k << 8))).unwrap();
        let red = reduce(&prob).unwrap();
        let (c1, c2) = (&red.constraints()[0], &red.constraints()[1]);
        if classify(c1, c2, &cfg).unwrap().tag != CaseTag2::Case3 {
            continue;
        }
        found += 1;
        let eq = solve_equality(c1, c2, &cfg).unwrap();
        let oracle = oracle_cstar(red.constraints(), &oracle_cfg(k)).unwrap();
        // In this case the min-max optimum lies on the equality set.
        worst_eq = worst_eq.max((quadratic_form(c1, &oracle.u_hat).unwrap() - quadratic_form(c2, &oracle.u_hat).unwrap()).abs());
        worst_gap = worst_gap.max(rel_gap(eq.lower_bound, oracle.c_hat));
        let a2 = c1.sub(c2);
        for _ in 0..20 {
            let t = rng.random_range(-10.0..10.0);
            let lam = eigh(&c1.combine(1.0, &a2, t), 100).unwrap().min();
            worst_weak = worst_weak.max(lam - oracle.c_hat);
        }
    }
    Outcome {
        pass: worst_gap <= 2e-2 && worst_weak <= 1e-6,
        detail: format!(
            "50 pairs: max relative gap {worst_gap:.2e}, max λ(t) - oracle {worst_weak:.2e}, oracle |c1-c2| {worst_eq:.1e}"
        ),
    }
}

/// Midpoint concavity of the pencil's smallest eigenvalue in one and two variables.
fn criterion6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let lam = |m: &HermitianMatrix| eigh(m, 100).unwrap().min();
    let (mut worst1, mut worst2) = (f64::INFINITY, f64::INFINITY);
    for k in 0..100u64 {
        let n = 2 + (k % 9) as usize;
        let a1 = random_hermitian(n, SEED ^ (3 * k));
        let a2 = random_hermitian(n, SEED ^ (3 * k + 1));
        let a3 = random_hermitian(n, SEED ^ (3 * k + 2));
        let f1 = |t: f64| lam(&a1.combine(1.0, &a2, t));
        let f2 = |s: f64, t: f64| lam(&a1.affine(&[(s, &a2), (t, &a3)]));
        for _ in 0..10 {
            let (x, y) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            worst1 = worst1.min(f1(0.5 * (x + y)) - 0.5 * (f1(x) + f1(y)));
            let p: [f64; 4] = std::array::from_fn(|_| rng.random_range(-5.0..5.0));
            let mid = f2(0.5 * (p[0] + p[2]), 0.5 * (p[1] + p[3]));
            worst2 = worst2.min(mid - 0.5 * (f2(p[0], p[1]) + f2(p[2], p[3])));
        }
    }
    Outcome {
        pass: worst1 >= -1e-9 && worst2 >= -1e-9,
        detail: format!("min slack λ(t): {worst1:.2e}, λ(t1,t2): {worst2:.2e}"),
    }
}

/// Joint numerical range geometry.
fn criterion7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let mut rayleigh_ok = true;
    let mut inside = 0;
    let mut total = 0;
    let mut tags_ok = true;
    for k in 0..5u64 {
        let cs = [random_hermitian(4, SEED ^ (2 * k)), random_hermitian(4, SEED ^ (2 * k + 1))];
        let eig: Vec<_> = cs.iter().map(|c| eigh(c, 100).unwrap()).collect();
        let tol = 1e-12 * (1.0 + cs[0].frobenius_norm() + cs[1].frobenius_norm());
        let r = sample_numerical_range(&cs, 10_000, SEED + k).unwrap();
        for p in &r.points {
            for (v, e) in p.iter().zip(&eig) {
                rayleigh_ok &= *v >= e.min() - tol && *v <= e.max() + tol;
            }
        }
        let samples: Vec<[f64; 2]> = r.samples().map(|p| [p[0], p[1]]).collect();
        let hull = convex_hull(&samples);
        let fresh = sample_numerical_range(&cs, 2000, SEED + 100 + k).unwrap();
        let pts: Vec<&[f64]> = fresh.samples().collect();
        for _ in 0..1000 {
            let (a, b) = (pts[rng.random_range(0..pts.len())], pts[rng.random_range(0..pts.len())]);
            total += 1;
            if hull_contains(&hull, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], tol) {
                inside += 1;
            }
        }
        let left = r.tagged(PointTag::Leftmost).unwrap();
        let bottom = r.tagged(PointTag::Bottommost).unwrap();
        tags_ok &= (left[0] - eig[0].min()).abs() <= tol && (bottom[1] - eig[1].min()).abs() <= tol;
        tags_ok &= samples.iter().all(|p| p[0] >= left[0] - tol && p[1] >= bottom[1] - tol);
    }
    let frac = inside as f64 / total as f64;
    Outcome {
        pass: rayleigh_ok && frac >= 0.99 && tags_ok,
        detail: format!(
            "Rayleigh bounds {}, {:.1}% midpoints inside hull, distinguished points {}",
            if rayleigh_ok { "hold" } else { "violated" },
            frac * 100.0,
            if tags_ok { "exact" } else { "mismatch" }
        ),
    }
}

/// Line-search termination bound and alternating-driver monotonicity.
fn criterion8() -> Outcome {
    let cfg = SearchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let mut bound_ok = true;
    let mut worst_ratio: f64 = 0.0;
    for k in 0..100u64 {
        let n = 2 + (k % 7) as usize;
        let (a1, a2) = (random_hermitian(n, SEED ^ (5 * k)), random_hermitian(n, SEED ^ (5 * k + 1)));
        let f = |t: f64| Ok(eigh(&a1.combine(1.0, &a2, t), 100)?.min());
        let init = initial_interval(&a1, f, &cfg).unwrap();
        let mut ivals = vec![init.interval];
        let c = rng.random_range(-50.0..50.0);
        ivals.push(Interval::new(c - rng.random_range(0.5..500.0), c + rng.random_range(0.5..500.0)));
        for iv in ivals {
            let res = match dichotomous_max(f, iv, &cfg) {
                Ok(r) => r,
                Err(_) => continue,
            };
            let width = iv.width() * cfg.scale_factor.powi(res.expansions as i32);
            let limit = (width / cfg.interval_threshold).log2().ceil() as usize + 5;
            bound_ok &= res.final_interval.width() <= cfg.interval_threshold && res.iterations <= limit;
            worst_ratio = worst_ratio.max(res.iterations as f64 / limit as f64);
        }
    }
    let mut monotone = true;
    let mut runs = 0;
    for k in 0..100u64 {
        let n = 3 + (k % 6) as usize;
        let cs: Vec<HermitianMatrix> = (0..3).map(|i| random_hermitian(n, SEED ^ (7 * k + i))).collect();
        let (a2, a3) = (cs[0].sub(&cs[1]), cs[0].sub(&cs[2]));
        let f = |s: f64, t: f64| Ok(eigh(&cs[0].affine(&[(s, &a2), (t, &a3)]), 100)?.min());
        let trace = match alternating_max(f, [0.0, 0.0], Interval::new(-2.0, 2.0), &cfg) {
            Ok(r) => r.trace,
            Err(hqcqp::SearchError::RoundBudget { trace, .. }) => trace,
            Err(_) => continue,
        };
        runs += 1;
        monotone &= trace.windows(2).all(|w| w[1].value >= w[0].value - 1e-12);
    }
    Outcome {
        pass: bound_ok && monotone && runs > 0,
        detail: format!(
            "iteration bound {} (max used/limit {worst_ratio:.2}); incumbent monotone on {runs} alternating runs: {monotone}",
            if bound_ok { "met" } else { "violated" }
        ),
    }
}

/// Eigen residuals and whitening reconstruction.
fn criterion9() -> Outcome {
    let mut worst_eig: f64 = 0.0;
    let mut worst_white: f64 = 0.0;
    for k in 0..1000u64 {
        let n = 1 + (k % 16) as usize;
        let a = random_hermitian(n, SEED ^ k);
        let e = eigh(&a, 100).unwrap();
        let scale = 1.0 + a.frobenius_norm();
        for (lam, v) in e.values.iter().zip(&e.vectors) {
            let av = a.mul_vec(v);
            let r: Vec<C64> = av.iter().zip(v).map(|(x, y)| x - y * *lam).collect();
            worst_eig = worst_eig.max(norm(&r) / scale);
        }
        if n >= 2 {
            let prob = random_feasible_problem(&GeneratorSpec::new(n, 1, SEED ^ (k << 16))).unwrap();
            let l = inverse_sqrt_factor(prob.objective()).unwrap();
            let w = prob.objective().congruence(&l);
            let dev = w.sub(&HermitianMatrix::identity(n)).as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
            worst_white = worst_white.max(dev);
        }
    }
    Outcome {
        pass: worst_eig <= 1e-9 && worst_white <= 1e-10,
        detail: format!("max residual/(1+‖A‖F) {worst_eig:.2e}, max |F⁻¹TF⁻ᴴ - I| {worst_white:.2e}"),
    }
}

fn main() -> ExitCode {
    // Ignore harness flags such as --nocapture.
    let mut all = true;
    let mut report = |n: usize, o: Outcome| {
        all &= o.pass;
        println!("criterion {n}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };
    report(1, criterion1());
    let (c2, instances) = criterion2();
    report(2, c2);
    report(3, criterion3());
    report(4, criterion4(&instances));
    report(5, criterion5());
    report(6, criterion6());
    report(7, criterion7());
    report(8, criterion8());
    report(9, criterion9());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
