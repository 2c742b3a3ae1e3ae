use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gapsafe::{Algorithm, LossKind, RefineTol, RunConfig, SolverKind};
use gapsafe_cli::{
    default_algorithms, parse_grid, run_path, solve, trace_json, validate_trace, write_path_csv,
    CliError, DataSource, Problem, SolveSetup,
};

#[derive(Parser)]
#[command(name = "gapsafe", version, about = "ℓ1-regularized regression with dynamic Gap Safe screening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at one λ and write a JSON trace.
    Solve(SolveArgs),
    /// Sweep a λ grid over several algorithms and write a CSV report.
    Path(PathArgs),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    loss: LossKind,
    /// File path (libsvm, .csv, .tri) or synth:<kind>:<m>x<n>[:<support>].
    #[arg(long)]
    data: DataSource,
    #[arg(long, default_value = "cd")]
    solver: SolverKind,
    #[arg(long, default_value_t = 1e-7)]
    eps_gap: f64,
    /// Relative stopping tolerance of the R-DGS radius refinement.
    #[arg(long, default_value_t = 1e-3)]
    eps_r: f64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    screen_every: usize,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop zero rows and scale columns to unit norm before solving.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    lambda_rel: f64,
    #[arg(long, default_value = "gdgs")]
    algorithm: Algorithm,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include the full solution vector in the trace.
    #[arg(long)]
    dump_x: bool,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "1e-3:1e-1:10log")]
    lambda_grid: String,
    /// Comma-separated; defaults to every algorithm the loss admits.
    #[arg(long, value_delimiter = ',')]
    algorithm: Vec<Algorithm>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn setup(&self, algorithm: Algorithm) -> SolveSetup {
        let mut config = RunConfig::new(algorithm, self.solver);
        config.eps_gap = self.eps_gap;
        config.eps_r = RefineTol::Relative(self.eps_r);
        config.screen_every = self.screen_every;
        config.max_iter = self.max_iter;
        SolveSetup {
            loss: self.loss,
            data: self.data.clone(),
            seed: self.seed,
            normalize: self.normalize,
            epsilon: self.epsilon,
            config,
        }
    }
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    if !(args.lambda_rel > 0.0 && args.lambda_rel <= 1.0) {
        return Err(CliError::Config(format!(
            "--lambda-rel must lie in (0, 1], got {}",
            args.lambda_rel
        )));
    }
    let setup = args.common.setup(args.algorithm);
    setup.config.validate(setup.loss)?;
    let problem = Problem::load(&setup)?;
    let out = solve(&problem, args.lambda_rel, &setup.config)?;
    let trace = trace_json(&setup, &problem, &out, args.dump_x);
    validate_trace(&trace).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    if let Some(path) = &args.out {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &trace).map_err(std::io::Error::from)?;
        w.flush()?;
    }
    let tr = &out.trace;
    println!(
        "loss={} algo={} iters={} gap={:e} screened={}/{} time_s={:.6}",
        setup.loss.name(),
        setup.config.algorithm.name(),
        tr.iterations,
        tr.gap,
        tr.screened_total,
        problem.dataset.a.cols(),
        out.time_s
    );
    tr.ensure_converged()?;
    Ok(())
}

fn cmd_path(args: PathArgs) -> Result<(), CliError> {
    let grid = parse_grid(&args.lambda_grid).map_err(CliError::Config)?;
    let mut algorithms = if args.algorithm.is_empty() {
        default_algorithms(args.common.loss)
    } else {
        args.algorithm.clone()
    };
    if !algorithms.contains(&Algorithm::Baseline) {
        algorithms.insert(0, Algorithm::Baseline);
    }
    let setup = args.common.setup(Algorithm::Baseline);
    for &a in &algorithms {
        let mut c = setup.config.clone();
        c.algorithm = a;
        c.validate(setup.loss)?;
    }
    let problem = Problem::load(&setup)?;
    let (rows, failures) = run_path(&problem, &setup, &grid, &algorithms, args.jobs)?;
    match &args.out {
        Some(p) => write_path_csv(&rows, BufWriter::new(File::create(p)?))?,
        None => write_path_csv(&rows, std::io::stdout().lock())?,
    }
    if failures > 0 {
        return Err(CliError::CellsFailed {
            failed: failures,
            total: rows.len(),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Path(a) => cmd_path(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
