//! Eigen-free reference values: Monte-Carlo sampling of the unit sphere with
//! derivative-free local refinement, and joint-numerical-range sampling.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{normalize, qform, HermitianMatrix, LinalgError, C64};
use crate::search::SearchConfig;
use crate::solver2::leftmost_vector;

pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("expected {expected} constraints, got {found}")]
    ConstraintCount { expected: &'static str, found: usize },
    #[error("constraint {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("sample count must be positive")]
    NoSamples,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub samples: usize,
    pub seed: u64,
    /// Best samples used as refinement starting points.
    pub restarts: usize,
    pub initial_step: f64,
    pub final_step: f64,
    /// Sweeps over all coordinates allowed per step size.
    pub passes_per_step: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { samples: 100_000, seed: DEFAULT_SEED, restarts: 10, initial_step: 0.5, final_step: 1e-6, passes_per_step: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    /// `maxᵢ cᵢ(u_hat)`, evaluated directly; an upper bound on `c*`.
    pub c_hat: f64,
    pub u_hat: Vec<C64>,
    pub samples_used: usize,
    /// Accepted refinement moves over all restarts.
    pub refine_steps: usize,
}

const BLOCK: usize = 1024;

fn gaussian_unit(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    loop {
        let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        if normalize(&mut v) > 0.0 {
            return v;
        }
    }
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// `count` unit vectors from normalized standard complex Gaussians.
/// Deterministic in `(n, count, seed)`; vectors are drawn in blocks with
/// independent streams so the result does not depend on thread count.
pub fn sample_unit_sphere(n: usize, count: usize, seed: u64) -> Vec<Vec<C64>> {
    let blocks = count.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = block_rng(seed, b);
            let len = BLOCK.min(count - b * BLOCK);
            (0..len).map(move |_| gaussian_unit(&mut rng, n)).collect::<Vec<_>>()
        })
        .collect()
}

fn check_forms(cs: &[HermitianMatrix], allowed: std::ops::RangeInclusive<usize>, label: &'static str) -> Result<usize, OracleError> {
    if !allowed.contains(&cs.len()) {
        return Err(OracleError::ConstraintCount { expected: label, found: cs.len() });
    }
    let n = cs[0].dim();
    for (index, c) in cs.iter().enumerate() {
        if c.dim() != n {
            return Err(OracleError::DimensionMismatch { index, expected: n, found: c.dim() });
        }
    }
    Ok(n)
}

fn max_of(cs: &[HermitianMatrix], u: &[C64]) -> f64 {
    cs.iter().map(|c| qform(c, u)).fold(f64::NEG_INFINITY, f64::max)
}

/// Keeps the `k` smallest `(value, vector)` pairs, ties by arrival order.
fn push_best(best: &mut Vec<(f64, Vec<C64>)>, k: usize, value: f64, u: Vec<C64>) {
    if best.len() == k && value >= best[k - 1].0 {
        return;
    }
    let pos = best.partition_point(|(v, _)| *v <= value);
    best.insert(pos, (value, u));
    best.truncate(k);
}

/// Pattern search on the sphere for `min maxᵢ cᵢ(u)`.
///
/// Each coordinate is perturbed by `±h` and `±ih`; the quadratic forms of the
/// perturbed (then renormalized) vector are updated in `O(m)` from `wᵢ = Cᵢu`.
/// When no coordinate move helps, a batch of random full-vector directions is
/// tried before the step is halved.
struct Refiner<'a> {
    cs: &'a [HermitianMatrix],
    u: Vec<C64>,
    w: Vec<Vec<C64>>,
    vals: Vec<f64>,
    accepted: usize,
}

impl<'a> Refiner<'a> {
    fn new(cs: &'a [HermitianMatrix], u: Vec<C64>) -> Self {
        let mut r = Self { cs, w: vec![], vals: vec![], u, accepted: 0 };
        r.resync();
        r
    }

    fn resync(&mut self) {
        normalize(&mut self.u);
        self.w = self.cs.iter().map(|c| c.mul_vec(&self.u)).collect();
        self.vals = self.w.iter().map(|w| crate::linalg::dot(&self.u, w).re).collect();
    }

    fn value(&self) -> f64 {
        self.vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value after `u[k] += d` and renormalization.
    fn trial(&self, k: usize, d: C64) -> f64 {
        let uk = self.u[k];
        let nrm = 1.0 + 2.0 * (uk.conj() * d).re + d.norm_sqr();
        let mut best = f64::NEG_INFINITY;
        for (c, (w, v)) in self.cs.iter().zip(self.w.iter().zip(&self.vals)) {
            let num = v + 2.0 * (d.conj() * w[k]).re + d.norm_sqr() * c.get(k, k).re;
            best = best.max(num / nrm);
        }
        best
    }

    fn apply(&mut self, k: usize, d: C64) {
        let n = self.u.len();
        let uk = self.u[k];
        let nrm = 1.0 + 2.0 * (uk.conj() * d).re + d.norm_sqr();
        for (c, (w, v)) in self.cs.iter().zip(self.w.iter_mut().zip(self.vals.iter_mut())) {
            *v += 2.0 * (d.conj() * w[k]).re + d.norm_sqr() * c.get(k, k).re;
            for (i, wi) in w.iter_mut().enumerate().take(n) {
                *wi += c.get(i, k) * d;
            }
        }
        self.u[k] += d;
        let s = nrm.sqrt();
        for z in &mut self.u {
            *z /= s;
        }
        for (w, v) in self.w.iter_mut().zip(self.vals.iter_mut()) {
            for z in w.iter_mut() {
                *z /= s;
            }
            *v /= nrm;
        }
        self.accepted += 1;
    }

    fn coordinate_pass(&mut self, h: f64) -> bool {
        let mut improved = false;
        let dirs = [C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, h), C64::new(0.0, -h)];
        for k in 0..self.u.len() {
            let current = self.value();
            let mut best: Option<(f64, C64)> = None;
            for &d in &dirs {
                let v = self.trial(k, d);
                if v < current && best.is_none_or(|(b, _)| v < b) {
                    best = Some((v, d));
                }
            }
            if let Some((_, d)) = best {
                self.apply(k, d);
                improved = true;
            }
        }
        improved
    }

    fn random_pass(&mut self, h: f64, rng: &mut ChaCha8Rng) -> bool {
        let n = self.u.len();
        let current = self.value();
        for _ in 0..2 * n {
            let d = gaussian_unit(rng, n);
            for sign in [1.0, -1.0] {
                let mut v: Vec<C64> = self.u.iter().zip(&d).map(|(a, b)| a + b * (sign * h)).collect();
                normalize(&mut v);
                if max_of(self.cs, &v) < current {
                    self.u = v;
                    self.resync();
                    self.accepted += 1;
                    return true;
                }
            }
        }
        false
    }

    fn run(mut self, cfg: &OracleConfig, rng: &mut ChaCha8Rng) -> (f64, Vec<C64>, usize) {
        let mut h = cfg.initial_step;
        while h >= cfg.final_step {
            for _ in 0..cfg.passes_per_step {
                if !self.coordinate_pass(h) && !self.random_pass(h, rng) {
                    break;
                }
            }
            self.resync();
            h *= 0.5;
        }
        let (u, steps) = subgradient_descent(self.cs, self.u);
        (max_of(self.cs, &u), u, self.accepted + steps)
    }
}

fn real_dot(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Minimum-norm point of the convex hull of at most three vectors.
fn min_norm_in_hull(g: &[Vec<C64>]) -> Vec<C64> {
    let gram: Vec<Vec<f64>> = g.iter().map(|a| g.iter().map(|b| real_dot(a, b)).collect()).collect();
    let quad = |w: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..w.len() {
            for j in 0..w.len() {
                s += w[i] * w[j] * gram[i][j];
            }
        }
        s
    };
    let k = g.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |w: Vec<f64>| {
        if w.iter().all(|&x| x >= -1e-15) {
            let q = quad(&w);
            if best.as_ref().is_none_or(|(b, _)| q < *b) {
                best = Some((q, w));
            }
        }
    };
    for i in 0..k {
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        consider(w);
    }
    for i in 0..k {
        for j in i + 1..k {
            let den = gram[i][i] - 2.0 * gram[i][j] + gram[j][j];
            if den > 0.0 {
                let a = ((gram[j][j] - gram[i][j]) / den).clamp(0.0, 1.0);
                let mut w = vec![0.0; k];
                w[i] = a;
                w[j] = 1.0 - a;
                consider(w);
            }
        }
    }
    if k == 3 {
        // Interior: minimize over w₀, w₁ with w₂ = 1 − w₀ − w₁.
        let d = |i: usize, j: usize| gram[i][j] - gram[i][2] - gram[2][j] + gram[2][2];
        let r = |i: usize| gram[2][2] - gram[i][2];
        let (a, b, c) = (d(0, 0), d(0, 1), d(1, 1));
        let det = a * c - b * b;
        if det.abs() > 1e-300 {
            let w0 = (r(0) * c - r(1) * b) / det;
            let w1 = (a * r(1) - b * r(0)) / det;
            consider(vec![w0, w1, 1.0 - w0 - w1]);
        }
    }
    let w = best.map(|(_, w)| w).unwrap_or_else(|| vec![1.0 / k as f64; k]);
    let mut out = vec![C64::new(0.0, 0.0); g[0].len()];
    for (gi, wi) in g.iter().zip(&w) {
        for (o, x) in out.iter_mut().zip(gi) {
            *o += x * *wi;
        }
    }
    out
}

/// ε-steepest descent for `maxᵢ cᵢ(u)` on the sphere: the step direction is the
/// minimum-norm convex combination of the Riemannian gradients of all forms
/// within `ε` of the maximum, with `ε` shrinking whenever progress stalls.
/// Handles the kinks where single-coordinate moves cannot descend.
fn subgradient_descent(cs: &[HermitianMatrix], mut u: Vec<C64>) -> (Vec<C64>, usize) {
    let scale = cs.iter().map(|c| c.frobenius_norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut eps = 1e-2 * scale;
    let mut step = 1.0 / scale;
    let mut accepted = 0;
    for _ in 0..2000 {
        if eps < 1e-13 * scale {
            break;
        }
        let w: Vec<Vec<C64>> = cs.iter().map(|c| c.mul_vec(&u)).collect();
        let vals: Vec<f64> = w.iter().map(|wi| crate::linalg::dot(&u, wi).re).collect();
        let f = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let grads: Vec<Vec<C64>> = w
            .iter()
            .zip(&vals)
            .filter(|(_, v)| **v >= f - eps)
            .map(|(wi, v)| wi.iter().zip(&u).map(|(a, b)| (a - b * *v) * 2.0).collect())
            .collect();
        let d = min_norm_in_hull(&grads);
        let dn2 = real_dot(&d, &d);
        if dn2.sqrt() < 1e-12 * scale {
            eps *= 0.1;
            continue;
        }
        let mut s = step;
        let mut moved = false;
        for _ in 0..40 {
            let mut v: Vec<C64> = u.iter().zip(&d).map(|(a, b)| a - b * s).collect();
            normalize(&mut v);
            if max_of(cs, &v) < f - 1e-4 * s * dn2 {
                u = v;
                moved = true;
                accepted += 1;
                break;
            }
            s *= 0.5;
        }
        if moved {
            step = s * 2.0;
        } else {
            eps *= 0.1;
        }
    }
    (u, accepted)
}

/// Upper estimate of `c* = min over unit u of maxᵢ uᴴCᵢu`.
pub fn oracle_cstar(cs: &[HermitianMatrix], cfg: &OracleConfig) -> Result<OracleEstimate, OracleError> {
    let n = check_forms(cs, 1..=3, "1 to 3")?;
    if cfg.samples == 0 {
        return Err(OracleError::NoSamples);
    }
    let keep = cfg.restarts.max(1);
    let blocks = cfg.samples.div_ceil(BLOCK);
    let per_block: Vec<Vec<(f64, Vec<C64>)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(cfg.seed, b);
            let len = BLOCK.min(cfg.samples - b * BLOCK);
            let mut best = Vec::with_capacity(keep + 1);
            for _ in 0..len {
                let u = gaussian_unit(&mut rng, n);
                push_best(&mut best, keep, max_of(cs, &u), u);
            }
            best
        })
        .collect();
    let mut starts = Vec::with_capacity(keep + 1);
    for (v, u) in per_block.into_iter().flatten() {
        push_best(&mut starts, keep, v, u);
    }

    let refined: Vec<(f64, Vec<C64>, usize)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(r, (_, u))| {
            let mut rng = block_rng(cfg.seed ^ 0xA5A5_A5A5, blocks + r);
            Refiner::new(cs, u).run(cfg, &mut rng)
        })
        .collect();
    let refine_steps = refined.iter().map(|r| r.2).sum();
    let (c_hat, u_hat, _) = refined
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one restart");
    Ok(OracleEstimate { c_hat, u_hat, samples_used: cfg.samples, refine_steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointTag {
    Sample,
    Leftmost,
    Bottommost,
}

impl std::fmt::Display for PointTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PointTag::Sample => "sample",
            PointTag::Leftmost => "leftmost",
            PointTag::Bottommost => "bottommost",
        })
    }
}

/// Points `(c₁(u), …, c_m(u))` of the joint numerical range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSample {
    pub m: usize,
    pub points: Vec<Vec<f64>>,
    pub tags: Vec<PointTag>,
}

impl RangeSample {
    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().zip(&self.tags).filter(|(_, t)| **t == PointTag::Sample).map(|(p, _)| p.as_slice())
    }

    pub fn tagged(&self, tag: PointTag) -> Option<&[f64]> {
        self.points.iter().zip(&self.tags).find(|(_, t)| **t == tag).map(|(p, _)| p.as_slice())
    }

    /// CSV with header `c1,c2[,c3],tag`, one row per point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.m).map(|i| format!("c{i}")).collect();
        writeln!(w, "{},tag", header.join(","))?;
        for (p, t) in self.points.iter().zip(&self.tags) {
            let cols: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{t}", cols.join(","))?;
        }
        Ok(())
    }
}

/// Samples the joint numerical range of two or three forms. For two forms the
/// left-most `(λmin(C₁), c₂(x₁))` and bottom-most `(c₁(x₂), λmin(C₂))` points
/// are appended, tagged.
pub fn sample_numerical_range(cs: &[HermitianMatrix], count: usize, seed: u64) -> Result<RangeSample, OracleError> {
    let n = check_forms(cs, 2..=3, "2 or 3")?;
    if count == 0 {
        return Err(OracleError::NoSamples);
    }
    let mut points: Vec<Vec<f64>> =
        sample_unit_sphere(n, count, seed).iter().map(|u| cs.iter().map(|c| qform(c, u)).collect()).collect();
    let mut tags = vec![PointTag::Sample; points.len()];
    if cs.len() == 2 {
        let cfg = SearchConfig::default();
        let (_, x1) = leftmost_vector(&cs[0], &cs[1], &cfg)?;
        let (_, x2) = leftmost_vector(&cs[1], &cs[0], &cfg)?;
        points.push(vec![qform(&cs[0], &x1), qform(&cs[1], &x1)]);
        tags.push(PointTag::Leftmost);
        points.push(vec![qform(&cs[0], &x2), qform(&cs[1], &x2)]);
        tags.push(PointTag::Bottommost);
    }
    Ok(RangeSample { m: cs.len(), points, tags })
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull (counter-clockwise, no repeated endpoint) by monotone chain.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Whether `p` lies inside the counter-clockwise `hull`, allowing `tol`
/// distance outside any edge.
pub fn hull_contains(hull: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => ((p[0] - hull[0][0]).powi(2) + (p[1] - hull[0][1]).powi(2)).sqrt() <= tol,
        _ => hull.iter().zip(hull.iter().cycle().skip(1)).all(|(&a, &b)| {
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            len == 0.0 || cross(a, b, p) / len >= -tol
        }),
    }
}
