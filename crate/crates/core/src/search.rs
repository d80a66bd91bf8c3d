//! Concave scalar maximization: dichotomous line search with interval
//! expansion, and an alternating (coordinate-wise) driver for two variables.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{eigh, HermitianMatrix, LinalgError, DEFAULT_MAX_SWEEPS};

/// Interval endpoints beyond this magnitude trigger interval scaling.
pub const LARGE_INTERVAL: f64 = 1e3;

/// Maximum number of outward expansions before a search gives up.
pub const MAX_EXPANSIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Stop once the bracketing interval is at most this wide.
    pub interval_threshold: f64,
    /// Iteration budget for one line search.
    pub max_iterations: usize,
    /// Growth factor for interval expansion, and divisor for interval scaling.
    pub scale_factor: f64,
    /// Probe offset around the midpoint, as a fraction of the current width.
    pub delta_fraction: f64,
    pub outer_rounds_2d: usize,
    /// Absolute improvement below which the alternating driver stops.
    pub outer_tol_2d: f64,
    /// Jacobi sweep budget for every eigen evaluation.
    pub max_sweeps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            interval_threshold: 1e-4,
            max_iterations: 200,
            scale_factor: 2.0,
            delta_fraction: 0.01,
            outer_rounds_2d: 50,
            outer_tol_2d: 1e-6,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |what: &str| Err(SearchError::InvalidConfig(what.to_string()));
        if !(self.interval_threshold > 0.0) || !self.interval_threshold.is_finite() {
            return bad("interval_threshold must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.scale_factor > 1.0) || !self.scale_factor.is_finite() {
            return bad("scale_factor must exceed 1");
        }
        if !(self.delta_fraction > 0.0 && self.delta_fraction < 0.5) {
            return bad("delta_fraction must lie in (0, 0.5)");
        }
        if self.outer_rounds_2d == 0 {
            return bad("outer_rounds_2d must be positive");
        }
        if !(self.outer_tol_2d > 0.0) {
            return bad("outer_tol_2d must be positive");
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps must be positive");
        }
        Ok(())
    }
}

/// One entry of a convergence trace: best objective value after an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialInterval {
    pub interval: Interval,
    /// `λmin(M₀) ≥ 0`: the nominal interval is empty and `[-1, 0]` is used instead.
    pub degenerate: bool,
    /// Number of times the interval width was divided by the scale factor.
    pub rescalings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub t_star: f64,
    pub value: f64,
    pub iterations: usize,
    pub expansions: usize,
    pub final_interval: Interval,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSearchResult {
    pub t_star: [f64; 2],
    pub value: f64,
    /// Completed outer rounds.
    pub rounds: usize,
    /// Line-search iterations summed over all rounds.
    pub iterations: usize,
    /// Incumbent after each outer round; entry 0 is the starting point.
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("empty search interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("objective returned NaN at t = {t}")]
    NotANumber { t: f64 },
    #[error("objective still increasing after {expansions} interval expansions (best {best_value} at t = {best_t})")]
    Unbounded { expansions: usize, best_t: f64, best_value: f64, trace: Vec<TracePoint> },
    #[error("line search exceeded {iterations} iterations (best {best_value} at t = {best_t})")]
    MaxIterations { iterations: usize, best_t: f64, best_value: f64, trace: Vec<TracePoint> },
    #[error("alternating search did not settle within {rounds} rounds (best {best_value} at {best_t:?})")]
    RoundBudget { rounds: usize, best_t: [f64; 2], best_value: f64, trace: Vec<TracePoint> },
    #[error(transparent)]
    Objective(#[from] LinalgError),
}

struct Tracker<F> {
    f: F,
    best_t: f64,
    best_value: f64,
}

impl<F: FnMut(f64) -> Result<f64, LinalgError>> Tracker<F> {
    fn eval(&mut self, t: f64) -> Result<f64, SearchError> {
        let v = (self.f)(t)?;
        if v.is_nan() {
            return Err(SearchError::NotANumber { t });
        }
        if v > self.best_value {
            self.best_value = v;
            self.best_t = t;
        }
        Ok(v)
    }
}

/// Search interval `[λmin(M₀), 0]`, narrowed when `|λmin(M₀)|` is large.
///
/// Narrowing divides the width by `scale_factor` (keeping the upper end at 0)
/// as long as the lower end stays above `LARGE_INTERVAL` in magnitude and the
/// concave objective `f` is still non-decreasing at the new lower end, i.e. the
/// maximizer remains inside.
pub fn initial_interval<F>(
    m0: &HermitianMatrix,
    mut f: F,
    cfg: &SearchConfig,
) -> Result<InitialInterval, SearchError>
where
    F: FnMut(f64) -> Result<f64, LinalgError>,
{
    cfg.validate()?;
    let lam = eigh(m0, cfg.max_sweeps)?.min();
    if lam >= 0.0 {
        return Ok(InitialInterval { interval: Interval::new(-1.0, 0.0), degenerate: true, rescalings: 0 });
    }
    let mut lo = lam;
    let mut rescalings = 0;
    while lo.abs() > LARGE_INTERVAL {
        let candidate = lo / cfg.scale_factor;
        let probe = candidate.abs() * cfg.delta_fraction;
        let at = f(candidate)?;
        let inside = f(candidate + probe)?;
        if at.is_nan() || inside.is_nan() {
            return Err(SearchError::NotANumber { t: candidate });
        }
        if at > inside {
            // f decreasing at the candidate: the maximizer lies to its left.
            break;
        }
        lo = candidate;
        rescalings += 1;
    }
    Ok(InitialInterval { interval: Interval::new(lo, 0.0), degenerate: false, rescalings })
}

/// Dichotomous search for the maximizer of a concave function.
///
/// Each iteration probes `mid ± δ` with `δ = delta_fraction·width` and keeps
/// the half that must contain the maximizer. Before halving, the interval is
/// moved outward (width times `scale_factor`) while `f` is still increasing
/// across an endpoint.
pub fn dichotomous_max<F>(f: F, interval: Interval, cfg: &SearchConfig) -> Result<LineSearchResult, SearchError>
where
    F: FnMut(f64) -> Result<f64, LinalgError>,
{
    cfg.validate()?;
    let Interval { mut lo, mut hi } = interval;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(SearchError::EmptyInterval { lo, hi });
    }
    let mut tr = Tracker { f, best_t: lo, best_value: f64::NEG_INFINITY };
    let mut f_lo = tr.eval(lo)?;
    let mut f_hi = tr.eval(hi)?;
    let mut trace = vec![TracePoint { iteration: 0, value: tr.best_value }];

    // Concavity: once f rises across one endpoint the maximizer lies beyond
    // it, so expansion continues in that direction only.
    let mut expansions = 0;
    let mut direction = None;
    loop {
        let w = hi - lo;
        let d = cfg.delta_fraction * w;
        let rising_right = direction != Some(false) && f_hi > tr.eval(hi - d)?;
        let rising_left = !rising_right && direction != Some(true) && f_lo > tr.eval(lo + d)?;
        if !rising_right && !rising_left {
            break;
        }
        direction = Some(rising_right);
        if expansions == MAX_EXPANSIONS {
            trace.push(TracePoint { iteration: 0, value: tr.best_value });
            return Err(SearchError::Unbounded {
                expansions,
                best_t: tr.best_t,
                best_value: tr.best_value,
                trace,
            });
        }
        expansions += 1;
        if rising_right {
            lo = hi - d;
            f_lo = tr.eval(lo)?;
            hi = lo + cfg.scale_factor * w;
            f_hi = tr.eval(hi)?;
        } else {
            hi = lo + d;
            f_hi = tr.eval(hi)?;
            lo = hi - cfg.scale_factor * w;
            f_lo = tr.eval(lo)?;
        }
    }
    trace[0].value = tr.best_value;

    let mut iterations = 0;
    while hi - lo > cfg.interval_threshold {
        if iterations == cfg.max_iterations {
            return Err(SearchError::MaxIterations {
                iterations,
                best_t: tr.best_t,
                best_value: tr.best_value,
                trace,
            });
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let d = cfg.delta_fraction * (hi - lo);
        let (a, b) = (mid - d, mid + d);
        let fa = tr.eval(a)?;
        let fb = tr.eval(b)?;
        if fa < fb {
            lo = a;
        } else if fa > fb {
            hi = b;
        } else {
            lo = a;
            hi = b;
        }
        trace.push(TracePoint { iteration: iterations, value: tr.best_value });
    }
    let t_star = 0.5 * (lo + hi);
    let value = tr.eval(t_star)?;
    if let Some(last) = trace.last_mut() {
        last.value = tr.best_value;
    }
    Ok(LineSearchResult {
        t_star,
        value,
        iterations,
        expansions,
        final_interval: Interval::new(lo, hi),
        trace,
    })
}

/// Alternating maximization of a jointly concave `f(t₁, t₂)`.
///
/// Each outer round runs a dichotomous search over `t₁` with `t₂` fixed, then
/// over `t₂` with `t₁` fixed. The first round searches `interval`; later
/// rounds search a window around the current coordinate sized by how far that
/// coordinate moved in the previous round (expansion covers any shortfall).
/// A coordinate update is kept only if it does not lower the incumbent.
pub fn alternating_max<F>(
    mut f: F,
    init: [f64; 2],
    interval: Interval,
    cfg: &SearchConfig,
) -> Result<PlaneSearchResult, SearchError>
where
    F: FnMut(f64, f64) -> Result<f64, LinalgError>,
{
    cfg.validate()?;
    if !(interval.lo < interval.hi) {
        return Err(SearchError::EmptyInterval { lo: interval.lo, hi: interval.hi });
    }
    let mut t = init;
    let mut value = f(t[0], t[1])?;
    if value.is_nan() {
        return Err(SearchError::NotANumber { t: t[0] });
    }
    let mut trace = vec![TracePoint { iteration: 0, value }];
    let mut iterations = 0;
    let mut moved: [Option<f64>; 2] = [None, None];
    let min_half = 8.0 * cfg.interval_threshold;
    let max_half = 0.5 * interval.width();

    for round in 1..=cfg.outer_rounds_2d {
        let start = value;
        for k in 0..2 {
            let window = match moved[k] {
                None => interval,
                Some(step) => {
                    let half = (2.0 * step).clamp(min_half, max_half.max(min_half));
                    Interval::new(t[k] - half, t[k] + half)
                }
            };
            let other = t[1 - k];
            let line = |s: f64| if k == 0 { f(s, other) } else { f(other, s) };
                let res = dichotomous_max(line, window, cfg)?;
            iterations += res.iterations;
            if res.value >= value {
                moved[k] = Some((res.t_star - t[k]).abs());
                t[k] = res.t_star;
                value = res.value;
            } else {
                moved[k] = Some(0.0);
            }
        }
        trace.push(TracePoint { iteration: round, value });
        if value - start < cfg.outer_tol_2d {
            return Ok(PlaneSearchResult { t_star: t, value, rounds: round, iterations, trace });
        }
    }
    Err(SearchError::RoundBudget { rounds: cfg.outer_rounds_2d, best_t: t, best_value: value, trace })
}
