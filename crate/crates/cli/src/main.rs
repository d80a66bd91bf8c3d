//! `hqcqp`: solve problem files, generate instances, benchmark convergence
//! against the sampling oracle, and export numerical-range samples.
//!
//! Exit status: 0 on success, 1 on input or solver errors, 2 when the problem
//! is infeasible.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hqcqp::bench::{run_bench, write_csv, BenchSpec};
use hqcqp::generator::{random_feasible_problem, GeneratorSpec, DEFAULT_MARGIN};
use hqcqp::io::{parse_problem, problem_to_json};
use hqcqp::oracle::{sample_numerical_range, OracleConfig, DEFAULT_SEED};
use hqcqp::{reduce, solve, HqcqpProblem, SearchConfig, SolveError};

#[derive(Parser)]
#[command(name = "hqcqp", version, about = "Eigenvalue solver for quadratic programs with up to three quadratic constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and print the solution.
    Solve(SolveArgs),
    /// Write random feasible problem files.
    Generate(GenerateArgs),
    /// Average relative error per search iteration against the oracle.
    Bench(BenchArgs),
    /// Sample the joint numerical range of the whitened constraints.
    Range(RangeArgs),
}

#[derive(Args)]
struct SolveArgs {
    input: PathBuf,
    /// Stop a line search once its interval is at most this wide.
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    /// Iteration budget per line search.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Print the solution as JSON (default).
    #[arg(long, conflicts_with = "csv_trace")]
    json: bool,
    /// Print the convergence trace as `iteration,incumbent_c` CSV instead.
    #[arg(long)]
    csv_trace: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    constraints: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, env = "HQCQP_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    margin: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', default_value = "9,16,25")]
    dims: Vec<usize>,
    /// Comma-separated constraint counts.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    constraints: Vec<usize>,
    /// Instances per (dim, constraints) group.
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, env = "HQCQP_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Oracle sphere samples per instance.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Output CSV path (standard output if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RangeArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    count: usize,
    #[arg(long, env = "HQCQP_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output CSV path (standard output if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(path: &Path) -> Result<HqcqpProblem> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_problem(&text).with_context(|| format!("{}", path.display()))
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let prob = load(&args.input)?;
    let cfg = SearchConfig { interval_threshold: args.threshold, max_iterations: args.max_iter, ..Default::default() };
    let sol = solve(&prob, &cfg)?;
    let mut out = output(None)?;
    if args.csv_trace {
        writeln!(out, "iteration,incumbent_c")?;
        for p in &sol.trace {
            writeln!(out, "{},{}", p.iteration, p.value)?;
        }
    } else {
        serde_json::to_writer_pretty(&mut out, &sol)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let base = GeneratorSpec { dim: args.dim, num_constraints: args.constraints, margin: args.margin, seed: args.seed };
    base.validate()?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    for k in 0..args.count {
        let spec = GeneratorSpec { seed: args.seed.wrapping_add(k as u64), ..base };
        let prob = random_feasible_problem(&spec)?;
        let path = args.out_dir.join(format!("problem_{k}.json"));
        fs::write(&path, problem_to_json(&prob) + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    if args.samples == 0 {
        bail!("--samples must be positive");
    }
    let spec = BenchSpec {
        dims: args.dims.clone(),
        constraints: args.constraints.clone(),
        count: args.count,
        seed: args.seed,
        oracle: OracleConfig { samples: args.samples, ..Default::default() },
        ..Default::default()
    };
    for &m in &spec.constraints {
        for &d in &spec.dims {
            GeneratorSpec::new(d, m, 0).validate()?;
        }
    }
    let report = run_bench(&spec);
    let mut out = output(args.out.as_deref())?;
    write_csv(&report.rows, &mut out)?;
    out.flush()?;
    eprint!("{}", report.timing_summary());
    Ok(())
}

fn cmd_range(args: &RangeArgs) -> Result<()> {
    let prob = load(&args.input)?;
    if prob.constraints().len() < 2 {
        bail!("range export requires m >= 2");
    }
    let red = reduce(&prob)?;
    let sample = sample_numerical_range(red.constraints(), args.count, args.seed)?;
    let mut out = output(args.out.as_deref())?;
    sample.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Range(a) => cmd_range(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<SolveError>() {
            Some(inf @ SolveError::Infeasible { .. }) => {
                eprintln!("{inf}");
                ExitCode::from(2)
            }
            _ => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
