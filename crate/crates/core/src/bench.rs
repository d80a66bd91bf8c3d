//! Batch convergence benchmark: per-iteration relative error of the solver's
//! running estimate against the oracle, averaged over generated instances.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::generator::{random_feasible_problem, GeneratorError, GeneratorSpec, DEFAULT_MARGIN};
use crate::oracle::{oracle_cstar, OracleConfig, OracleError};
use crate::problem::{reduce, solve_reduced, CaseTag, SolveError};
use crate::search::{SearchConfig, TracePoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub dims: Vec<usize>,
    pub constraints: Vec<usize>,
    /// Instances per `(dim, m)` group.
    pub count: usize,
    pub seed: u64,
    pub margin: f64,
    pub search: SearchConfig,
    pub oracle: OracleConfig,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            dims: vec![9, 16, 25],
            constraints: vec![2, 3],
            count: 100,
            seed: crate::oracle::DEFAULT_SEED,
            margin: DEFAULT_MARGIN,
            search: SearchConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub dim: usize,
    pub m: usize,
    pub instance: usize,
    pub seed: u64,
    pub case_tag: CaseTag,
    pub c_oracle: f64,
    pub c_solver: f64,
    /// `εᵢ = |p* − p̂ᵢ| / p*`, indexed by trace iteration.
    pub rel_err: Vec<f64>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dim: usize,
    pub m: usize,
    pub iteration: usize,
    pub avg_rel_err: f64,
    pub n_instances: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    /// `(dim, m, reason)` for every instance that produced no record.
    pub skipped: Vec<(usize, usize, String)>,
    pub rows: Vec<BenchRow>,
    pub elapsed: Duration,
}

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("generation: {0}")]
    Generate(#[from] GeneratorError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("oracle estimate {0} is not negative")]
    OracleNonNegative(f64),
    #[error("solver: {0}")]
    Solve(#[from] SolveError),
}

/// SplitMix64 step, used to spread `(seed, dim, m, k)` into instance seeds.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn instance_seed(seed: u64, dim: usize, m: usize, k: usize) -> u64 {
    [dim as u64, m as u64, k as u64].iter().fold(splitmix(seed), |acc, &v| splitmix(acc ^ v))
}

/// `|p* − p̂| / p*` written in terms of `c = −1/p`. A non-negative running
/// value has no finite `p̂` and counts as error 1.
pub fn relative_error(c_oracle: f64, c: f64) -> f64 {
    if c >= 0.0 {
        1.0
    } else {
        (1.0 - c_oracle / c).abs()
    }
}

pub fn errors_from_trace(c_oracle: f64, trace: &[TracePoint]) -> Vec<f64> {
    let len = trace.iter().map(|p| p.iteration + 1).max().unwrap_or(0);
    let mut out = vec![f64::NAN; len];
    for p in trace {
        out[p.iteration] = relative_error(c_oracle, p.value);
    }
    // Fill gaps from the previous entry.
    for i in 1..len {
        if out[i].is_nan() {
            out[i] = out[i - 1];
        }
    }
    out
}

pub fn run_instance(spec: &BenchSpec, dim: usize, m: usize, k: usize) -> Result<BenchRecord, InstanceError> {
    let start = Instant::now();
    let seed = instance_seed(spec.seed, dim, m, k);
    let prob = random_feasible_problem(&GeneratorSpec { dim, num_constraints: m, margin: spec.margin, seed })?;
    let red = reduce(&prob).map_err(SolveError::from)?;
    let oracle = oracle_cstar(red.constraints(), &OracleConfig { seed, ..spec.oracle })?;
    if oracle.c_hat >= 0.0 {
        return Err(InstanceError::OracleNonNegative(oracle.c_hat));
    }
    let frag = solve_reduced(&red, &spec.search)?;
    Ok(BenchRecord {
        dim,
        m,
        instance: k,
        seed,
        case_tag: frag.case_tag,
        c_oracle: oracle.c_hat,
        c_solver: frag.c_star,
        rel_err: errors_from_trace(oracle.c_hat, &frag.trace),
        elapsed: start.elapsed(),
    })
}

/// Averages per-iteration errors per `(dim, m)`; shorter traces carry their
/// final error forward. Rows are sorted by `(dim, m, iteration)`.
pub fn aggregate(records: &[BenchRecord], skipped: &[(usize, usize, String)], groups: &[(usize, usize)]) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    let mut groups = groups.to_vec();
    groups.sort_unstable();
    groups.dedup();
    for (dim, m) in groups {
        let recs: Vec<&BenchRecord> = records.iter().filter(|r| r.dim == dim && r.m == m).collect();
        let n_skipped = skipped.iter().filter(|s| s.0 == dim && s.1 == m).count();
        let len = recs.iter().map(|r| r.rel_err.len()).max().unwrap_or(0);
        for iteration in 0..len {
            let sum: f64 = recs.iter().map(|r| r.rel_err[iteration.min(r.rel_err.len() - 1)]).sum();
            rows.push(BenchRow {
                dim,
                m,
                iteration,
                avg_rel_err: sum / recs.len() as f64,
                n_instances: recs.len(),
                skipped: n_skipped,
            });
        }
    }
    rows
}

pub fn run_bench(spec: &BenchSpec) -> BenchReport {
    let start = Instant::now();
    let jobs: Vec<(usize, usize, usize)> = spec
        .dims
        .iter()
        .flat_map(|&d| spec.constraints.iter().flat_map(move |&m| (0..spec.count).map(move |k| (d, m, k))))
        .collect();
    let results: Vec<_> = jobs.par_iter().map(|&(d, m, k)| (d, m, run_instance(spec, d, m, k))).collect();
    let mut report = BenchReport::default();
    for (d, m, r) in results {
        match r {
            Ok(rec) => report.records.push(rec),
            Err(e) => report.skipped.push((d, m, e.to_string())),
        }
    }
    let groups: Vec<(usize, usize)> =
        spec.dims.iter().flat_map(|&d| spec.constraints.iter().map(move |&m| (d, m))).collect();
    report.rows = aggregate(&report.records, &report.skipped, &groups);
    report.elapsed = start.elapsed();
    report
}

pub const CSV_HEADER: &str = "dim,m,iteration,avg_rel_err,n_instances,skipped";

pub fn write_csv<W: Write>(rows: &[BenchRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.dim, r.m, r.iteration, r.avg_rel_err, r.n_instances, r.skipped)?;
    }
    Ok(())
}

impl BenchReport {
    /// One line per `(dim, m)` group: instance count and mean wall time.
    pub fn timing_summary(&self) -> String {
        let mut groups: Vec<(usize, usize)> = self.records.iter().map(|r| (r.dim, r.m)).collect();
        groups.sort_unstable();
        groups.dedup();
        let mut out = String::new();
        for (d, m) in groups {
            let times: Vec<f64> =
                self.records.iter().filter(|r| r.dim == d && r.m == m).map(|r| r.elapsed.as_secs_f64()).collect();
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            out.push_str(&format!("dim={d} m={m}: {} instances, mean {:.3} ms\n", times.len(), mean * 1e3));
        }
        out.push_str(&format!("total {:.3} s, {} skipped\n", self.elapsed.as_secs_f64(), self.skipped.len()));
        out
    }
}
