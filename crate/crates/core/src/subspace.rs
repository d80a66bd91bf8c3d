//! Picking the optimal unit vector out of a (near-)degenerate lowest eigenspace.
//!
//! At the maximizing multiplier the smallest eigenvalue of the pencil is
//! typically repeated, and a single eigenvector sits on one branch only. The
//! optimum is the combination of the low eigenvectors on which the difference
//! forms `uᴴ(Cᵢ − Cⱼ)u` vanish.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{eigh, normalize, qform, HermitianEigen, HermitianMatrix, C64, DEFAULT_MAX_SWEEPS};

pub(crate) struct Pick {
    pub u: Vec<C64>,
    /// Largest objective form at `u`.
    pub value: f64,
    /// Number of eigenvectors combined.
    pub span: usize,
    /// Largest `|uᴴDu|` over the difference forms.
    pub residual: f64,
}

fn combine(basis: &[Vec<C64>], y: &[C64]) -> Vec<C64> {
    let n = basis[0].len();
    let mut u = vec![C64::new(0.0, 0.0); n];
    for (v, &w) in basis.iter().zip(y) {
        for (ui, vi) in u.iter_mut().zip(v) {
            *ui += vi * w;
        }
    }
    normalize(&mut u);
    u
}

/// Tries spans `1..=max_span` of the lowest eigenvectors; within each span the
/// difference forms are zeroed, and the vector with the smallest
/// `max objective form` wins (smaller spans win ties).
pub(crate) fn best_in_lowest_eigenspace(
    eig: &HermitianEigen,
    objective: &[&HermitianMatrix],
    diffs: &[&HermitianMatrix],
    max_span: usize,
) -> Pick {
    let eval = |u: &[C64]| objective.iter().map(|c| qform(c, u)).fold(f64::NEG_INFINITY, f64::max);
    let resid = |u: &[C64]| diffs.iter().map(|d| qform(d, u).abs()).fold(0.0, f64::max);
    let u = eig.vectors[0].clone();
    let mut best = Pick { value: eval(&u), residual: resid(&u), u, span: 1 };
    let limit = max_span.min(eig.vectors.len());
    for k in 2..=limit {
        let basis = &eig.vectors[..k];
        let compressed: Vec<HermitianMatrix> = diffs.iter().map(|d| d.compress(basis)).collect();
        let y = equalize(&compressed);
        let u = combine(basis, &y);
        let value = eval(&u);
        let tie = 1e-12 * (1.0 + best.value.abs());
        if value < best.value - tie {
            best = Pick { value, residual: resid(&u), u, span: k };
        }
    }
    best
}

/// Unit `y ∈ ℂᵏ` with `yᴴDⱼy = 0` for every `j`, or the closest found.
pub(crate) fn equalize(ds: &[HermitianMatrix]) -> Vec<C64> {
    let k = ds[0].dim();
    if ds.len() == 1 && k == 2 {
        return equalize_pair(&ds[0]);
    }
    let scale = ds.iter().map(|d| d.frobenius_norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let objective = |y: &[C64]| ds.iter().map(|d| qform(d, y).powi(2)).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0E0A_11CE);
    let mut best: Option<(f64, Vec<C64>)> = None;
    for _ in 0..12 {
        let mut y: Vec<C64> =
            (0..k).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        normalize(&mut y);
        let y = gauss_newton(ds, y, scale);
        let r = objective(&y);
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, y));
        }
        if r <= (1e-15 * scale).powi(2) {
            break;
        }
    }
    best.expect("at least one start").1
}

/// Closed form for one 2×2 form: mix its eigenvectors so the form vanishes.
fn equalize_pair(d: &HermitianMatrix) -> Vec<C64> {
    let eig = eigh(d, DEFAULT_MAX_SWEEPS).expect("2x2 Jacobi converges in one sweep");
    let (lo, hi) = (eig.values[0], eig.values[1]);
    if lo <= 0.0 && hi >= 0.0 && hi > lo {
        let a = (hi / (hi - lo)).sqrt();
        let b = (-lo / (hi - lo)).sqrt();
        eig.vectors[0].iter().zip(&eig.vectors[1]).map(|(x, y)| x * a + y * b).collect()
    } else if lo.abs() <= hi.abs() {
        eig.vectors[0].clone()
    } else {
        eig.vectors[1].clone()
    }
}

/// Minimum-norm Gauss–Newton steps on the sphere for `yᴴDⱼy = 0`.
fn gauss_newton(ds: &[HermitianMatrix], mut y: Vec<C64>, scale: f64) -> Vec<C64> {
    let k = y.len();
    let m = ds.len();
    let residual = |y: &[C64]| ds.iter().map(|d| qform(d, y)).collect::<Vec<f64>>();
    let sq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut r = residual(&y);
    for _ in 0..50 {
        if sq(&r).sqrt() <= 1e-15 * scale {
            break;
        }
        // Rows: gradient of each form (real inner product on ℂᵏ ≅ ℝ²ᵏ), plus the tangent row.
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut rhs = Vec::with_capacity(m + 1);
        for (d, rj) in ds.iter().zip(&r) {
            let g = d.mul_vec(&y);
            let mut row = Vec::with_capacity(2 * k);
            row.extend(g.iter().map(|z| 2.0 * z.re));
            row.extend(g.iter().map(|z| 2.0 * z.im));
            rows.push(row);
            rhs.push(-rj);
        }
        let mut tangent = Vec::with_capacity(2 * k);
        tangent.extend(y.iter().map(|z| z.re));
        tangent.extend(y.iter().map(|z| z.im));
        rows.push(tangent);
        rhs.push(0.0);

        let q = rows.len();
        let mut gram = vec![0.0; q * q];
        for i in 0..q {
            for j in 0..q {
                gram[i * q + j] = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            }
        }
        let ridge = 1e-13 * (0..q).map(|i| gram[i * q + i]).sum::<f64>().max(f64::MIN_POSITIVE);
        for i in 0..q {
            gram[i * q + i] += ridge;
        }
        let Some(coef) = solve_dense(gram, rhs, q) else { break };
        let mut step = vec![C64::new(0.0, 0.0); k];
        for (row, c) in rows.iter().zip(&coef) {
            for i in 0..k {
                step[i] += C64::new(row[i] * c, row[k + i] * c);
            }
        }
        // Backtrack until the residual drops.
        let current = sq(&r);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let mut trial: Vec<C64> = y.iter().zip(&step).map(|(a, s)| a + s * alpha).collect();
            normalize(&mut trial);
            let rt = residual(&trial);
            if sq(&rt) < current {
                y = trial;
                r = rt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    y
}

/// Gaussian elimination with partial pivoting for a small dense system.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < f64::MIN_POSITIVE {
            return None;
        }
        if piv != col {
            for j in 0..n {
                a.swap(piv * n + j, col * n + j);
            }
            b.swap(piv, col);
        }
        for i in col + 1..n {
            let f = a[i * n + col] / a[col * n + col];
            for j in col..n {
                a[i * n + j] -= f * a[col * n + j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i * n + j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    Some(x)
}
