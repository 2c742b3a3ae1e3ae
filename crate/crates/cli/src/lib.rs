//! Plumbing behind the `gapsafe` binary: data sources, λ grids, JSON traces
//! and path sweeps.

use std::path::Path;
use std::time::Instant;

use gapsafe::data_io::{load_auto, synth, DataError, Dataset, LabelPolicy, SynthKind};
use gapsafe::{run, Algorithm, Error, LossKind, LossModel, ProblemSpec, RunConfig, RunTrace, SolverKind};
use serde_json::{json, Value};

pub const TRACE_VERSION: u64 = 1;
pub const PATH_HEADER: [&str; 7] = [
    "lambda_rel",
    "algorithm",
    "solver",
    "iters",
    "time_s",
    "screen_ratio",
    "rel_time",
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Solver(Error),
    #[error("{failed} of {total} path cells failed")]
    CellsFailed { failed: usize, total: usize },
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_)
            | Error::EpsilonTooLarge(_)
            | Error::InfeasiblePrimal(_)
            | Error::DomainViolation(_)
            | Error::NonPositiveLambdaMax(_)
            | Error::RankDeficient
            | Error::UnsupportedPairing { .. }
            | Error::UnsupportedAlgorithmForLoss(_)
            | Error::Linalg(_) => CliError::Config(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    /// 2 for anything the user can fix by changing flags or inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Data(_) => 2,
            CliError::Solver(Error::NotConverged { .. }) | CliError::CellsFailed { .. } => 3,
            _ => 1,
        }
    }
}

/// `synth:<kind>:<m>x<n>[:<support>]` or a file path.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synth {
        kind: SynthKind,
        m: usize,
        n: usize,
        support: usize,
    },
    File(String),
}

impl std::str::FromStr for DataSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let Some(rest) = s.strip_prefix("synth:") else {
            return Ok(DataSource::File(s.to_string()));
        };
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(format!("expected synth:<kind>:<m>x<n>[:<support>], got '{s}'"));
        }
        let kind: SynthKind = parts[0].parse().map_err(|e: DataError| e.to_string())?;
        let (m, n) = parts[1]
            .split_once('x')
            .ok_or_else(|| format!("bad shape '{}'", parts[1]))?;
        let m: usize = m.parse().map_err(|_| format!("bad row count '{m}'"))?;
        let n: usize = n.parse().map_err(|_| format!("bad column count '{n}'"))?;
        let support = match parts.get(2) {
            Some(k) => k.parse().map_err(|_| format!("bad support '{k}'"))?,
            None => (n / 10).clamp(1, 20).min(n),
        };
        Ok(DataSource::Synth { kind, m, n, support })
    }
}

impl DataSource {
    pub fn load(&self, loss: LossKind, seed: u64) -> Result<Dataset, DataError> {
        match self {
            DataSource::Synth { kind, m, n, support } => Ok(synth(*kind, *m, *n, *support, seed)?.0),
            DataSource::File(path) => {
                let policy = if loss == LossKind::Logistic {
                    LabelPolicy::Binary
                } else {
                    LabelPolicy::Raw
                };
                load_auto(Path::new(path), policy)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DataSource::Synth { kind, m, n, support } => {
                format!("synth:{kind:?}:{m}x{n}:{support}").to_lowercase()
            }
            DataSource::File(p) => p.clone(),
        }
    }
}

/// Parses `start:stop:count[log|lin]`, e.g. `1e-3:1:30log`. Points are
/// returned in decreasing order, the usual direction of a path.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:count[log|lin], got '{s}'"));
    }
    let num = |t: &str| -> Result<f64, String> {
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v > 0.0)
            .ok_or_else(|| format!("bad grid bound '{t}'"))
    };
    let (a, b) = (num(parts[0])?, num(parts[1])?);
    let (count, log) = if let Some(c) = parts[2].strip_suffix("log") {
        (c, true)
    } else if let Some(c) = parts[2].strip_suffix("lin") {
        (c, false)
    } else {
        (parts[2], true)
    };
    let count: usize = count
        .parse()
        .ok()
        .filter(|c| *c > 0)
        .ok_or_else(|| format!("bad grid count '{count}'"))?;
    let (lo, hi) = (a.min(b), a.max(b));
    let mut pts: Vec<f64> = if count == 1 {
        vec![hi]
    } else {
        (0..count)
            .map(|k| {
                let t = k as f64 / (count - 1) as f64;
                if log {
                    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + t * (hi - lo)
                }
            })
            .collect()
    };
    // Endpoints exactly as written, free of exp/ln round-off.
    pts[0] = lo;
    *pts.last_mut().expect("nonempty") = hi;
    pts.reverse();
    Ok(pts)
}

/// Everything needed to reproduce one solve.
#[derive(Debug, Clone)]
pub struct SolveSetup {
    pub loss: LossKind,
    pub data: DataSource,
    pub seed: u64,
    pub normalize: bool,
    pub epsilon: f64,
    pub config: RunConfig,
}

/// A loaded problem at λ = 1, from which each λ on a path is derived.
pub struct Problem {
    pub dataset: Dataset,
    pub base: LossModel,
    pub lambda_max: f64,
}

impl Problem {
    pub fn load(setup: &SolveSetup) -> Result<Self, CliError> {
        let mut dataset = setup.data.load(setup.loss, setup.seed)?;
        if setup.normalize {
            dataset = dataset.preprocessed()?.0;
        }
        let spec = ProblemSpec::new(setup.loss, dataset.y.clone(), 1.0, setup.epsilon);
        let base = LossModel::new(spec, dataset.a.clone())?;
        let lambda_max = base.lambda_max()?;
        Ok(Problem {
            dataset,
            base,
            lambda_max,
        })
    }

    pub fn model(&self, lambda_rel: f64) -> Result<LossModel, CliError> {
        Ok(self.base.with_lambda(lambda_rel * self.lambda_max)?)
    }
}

/// A finished (possibly non-converged) solve.
pub struct Outcome {
    pub trace: RunTrace,
    pub lambda: f64,
    pub lambda_rel: f64,
    pub time_s: f64,
}

pub fn solve(problem: &Problem, lambda_rel: f64, config: &RunConfig) -> Result<Outcome, CliError> {
    let model = problem.model(lambda_rel)?;
    let start = Instant::now();
    let trace = run(&model, config)?;
    Ok(Outcome {
        trace,
        lambda: model.lambda(),
        lambda_rel,
        time_s: start.elapsed().as_secs_f64(),
    })
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

/// Serializes a run. Non-finite numbers become `null`.
pub fn trace_json(setup: &SolveSetup, problem: &Problem, out: &Outcome, dump_x: bool) -> Value {
    let c = &setup.config;
    let (eps_r_kind, eps_r) = match c.eps_r {
        gapsafe::RefineTol::Relative(v) => ("relative", v),
        gapsafe::RefineTol::Absolute(v) => ("absolute", v),
    };
    let tr = &out.trace;
    let iterations: Vec<Value> = tr
        .records
        .iter()
        .map(|r| {
            json!({
                "it": r.iter,
                "gap": num(r.gap),
                "active": r.active_count,
                "radius": opt(r.radius),
                "alpha": opt(r.alpha),
                "t": num(r.elapsed_seconds),
            })
        })
        .collect();
    let n = problem.dataset.a.cols();
    let mut fin = json!({
        "x_nnz": tr.x.iter().filter(|v| **v != 0.0).count(),
        "gap": num(tr.gap),
        "objective": num(tr.objective),
        "converged": tr.converged,
        "iterations": tr.iterations,
        "screened": tr.screened_total,
        "active": n - tr.screened_total,
        "coord_updates": tr.coord_updates,
        "time_s": num(out.time_s),
    });
    if dump_x {
        fin["x"] = Value::Array(tr.x.iter().map(|v| num(*v)).collect());
    }
    json!({
        "version": TRACE_VERSION,
        "config": {
            "loss": setup.loss.name(),
            "algorithm": c.algorithm.name(),
            "solver": c.solver.name(),
            "data": setup.data.describe(),
            "m": problem.dataset.a.rows(),
            "n": n,
            "preprocessing": problem.dataset.meta.preprocessing,
            "seed": setup.seed,
            "lambda": num(out.lambda),
            "lambda_rel": num(out.lambda_rel),
            "lambda_max": num(problem.lambda_max),
            "epsilon": num(setup.epsilon),
            "eps_gap": num(c.eps_gap),
            "eps_r": num(eps_r),
            "eps_r_kind": eps_r_kind,
            "screen_every": c.screen_every,
            "max_iter": c.max_iter,
            "x0": num(tr.x0),
        },
        "iterations": iterations,
        "final": fin,
    })
}

/// Checks the stable part of the trace layout. Numbers may be `null` where
/// they were non-finite or undefined (radius/alpha of the baseline).
pub fn validate_trace(v: &Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("trace is not an object")?;
    match obj.get("version").and_then(Value::as_u64) {
        Some(TRACE_VERSION) => {}
        other => return Err(format!("unsupported version {other:?}")),
    }
    let config = obj
        .get("config")
        .and_then(Value::as_object)
        .ok_or("missing config object")?;
    for key in ["loss", "algorithm", "solver"] {
        config
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| format!("config.{key} must be a string"))?;
    }
    let float_or_null = |x: Option<&Value>| matches!(x, Some(Value::Null)) || x.and_then(Value::as_f64).is_some();
    let iters = obj
        .get("iterations")
        .and_then(Value::as_array)
        .ok_or("missing iterations array")?;
    let mut prev = 0;
    for (k, rec) in iters.iter().enumerate() {
        let it = rec
            .get("it")
            .and_then(Value::as_u64)
            .ok_or_else(|| format!("iterations[{k}].it must be an integer"))?;
        if it <= prev {
            return Err(format!("iterations[{k}].it is not increasing"));
        }
        prev = it;
        rec.get("active")
            .and_then(Value::as_u64)
            .ok_or_else(|| format!("iterations[{k}].active must be an integer"))?;
        for key in ["gap", "radius", "alpha", "t"] {
            if !float_or_null(rec.get(key)) {
                return Err(format!("iterations[{k}].{key} must be a number or null"));
            }
        }
    }
    let fin = obj
        .get("final")
        .and_then(Value::as_object)
        .ok_or("missing final object")?;
    fin.get("x_nnz")
        .and_then(Value::as_u64)
        .ok_or("final.x_nnz must be an integer")?;
    for key in ["gap", "objective"] {
        if !float_or_null(fin.get(key)) {
            return Err(format!("final.{key} must be a number or null"));
        }
    }
    Ok(())
}

/// The algorithms a path sweeps by default: all that the loss admits.
pub fn default_algorithms(loss: LossKind) -> Vec<Algorithm> {
    let mut v = vec![Algorithm::Baseline];
    if loss.has_global_bound() {
        v.push(Algorithm::Dgs);
    }
    v.extend([Algorithm::Gdgs, Algorithm::Rdgs]);
    v
}

/// One row of the path report. `None` marks a failed cell.
#[derive(Debug, Clone)]
pub struct PathRow {
    pub lambda_rel: f64,
    pub algorithm: Algorithm,
    pub solver: SolverKind,
    pub result: Option<(usize, f64, f64)>,
    pub rel_time: Option<f64>,
}

/// Runs every (λ, algorithm) cell on a pool of `jobs` threads. Cells that
/// fail or do not converge are reported on stderr and marked `NA`.
pub fn run_path(
    problem: &Problem,
    setup: &SolveSetup,
    grid: &[f64],
    algorithms: &[Algorithm],
    jobs: usize,
) -> Result<(Vec<PathRow>, usize), CliError> {
    use rayon::prelude::*;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let cells: Vec<(f64, Algorithm)> = grid
        .iter()
        .flat_map(|&l| algorithms.iter().map(move |&a| (l, a)))
        .collect();
    let n = problem.dataset.a.cols() as f64;
    let results: Vec<Result<(usize, f64, f64), CliError>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(l, algo)| {
                let mut cfg = setup.config.clone();
                cfg.algorithm = algo;
                let out = solve(problem, l, &cfg)?;
                out.trace.ensure_converged()?;
                Ok((out.trace.iterations, out.time_s, out.trace.screened_total as f64 / n))
            })
            .collect()
    });

    let mut failures = 0;
    let mut rows: Vec<PathRow> = cells
        .iter()
        .zip(results)
        .map(|(&(l, algo), r)| {
            let result = match r {
                Ok(v) => Some(v),
                Err(e) => {
                    failures += 1;
                    eprintln!("cell lambda_rel={l:e} algorithm={}: {e}", algo.name());
                    None
                }
            };
            PathRow {
                lambda_rel: l,
                algorithm: algo,
                solver: setup.config.solver,
                result,
                rel_time: None,
            }
        })
        .collect();
    for k in 0..rows.len() {
        let base = rows
            .iter()
            .find(|r| r.lambda_rel == rows[k].lambda_rel && r.algorithm == Algorithm::Baseline)
            .and_then(|r| r.result.map(|v| v.1));
        rows[k].rel_time = match (rows[k].result, base) {
            (Some(_), _) if rows[k].algorithm == Algorithm::Baseline => Some(1.0),
            (Some((_, t, _)), Some(b)) if b > 0.0 => Some(t / b),
            _ => None,
        };
    }
    Ok((rows, failures))
}

pub fn write_path_csv<W: std::io::Write>(rows: &[PathRow], w: W) -> Result<(), CliError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(PATH_HEADER).map_err(csv_err)?;
    let na = || "NA".to_string();
    for r in rows {
        let (iters, time, ratio) = match r.result {
            Some((i, t, s)) => (i.to_string(), format!("{t:.6}"), format!("{s}")),
            None => (na(), na(), na()),
        };
        wr.write_record([
            format!("{}", r.lambda_rel),
            r.algorithm.name().to_string(),
            r.solver.name().to_string(),
            iters,
            time,
            ratio,
            r.rel_time.map_or_else(na, |v| format!("{v:.6}")),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_log_endpoints_and_order() {
        let g = parse_grid("1e-3:1:4log").unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[3], 1e-3);
        assert!((g[1] - 0.1).abs() < 1e-12);
        assert!((g[2] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn grid_linear_and_single() {
        assert_eq!(parse_grid("0.5:1:3lin").unwrap(), vec![1.0, 0.75, 0.5]);
        assert_eq!(parse_grid("0.1:0.1:1").unwrap(), vec![0.1]);
        assert!(parse_grid("0:1:3").is_err());
        assert!(parse_grid("1e-3:1").is_err());
        assert!(parse_grid("1e-3:1:0log").is_err());
    }

    #[test]
    fn data_source_parsing() {
        let d: DataSource = "synth:count:30x200:5".parse().unwrap();
        assert_eq!(
            d,
            DataSource::Synth {
                kind: SynthKind::Count,
                m: 30,
                n: 200,
                support: 5
            }
        );
        assert_eq!("a.svm".parse::<DataSource>().unwrap(), DataSource::File("a.svm".into()));
        assert!("synth:count:30".parse::<DataSource>().is_err());
        assert!("synth:nope:3x3".parse::<DataSource>().is_err());
    }

    #[test]
    fn validator_rejects_broken_traces() {
        let good = json!({
            "version": 1,
            "config": {"loss": "kl", "algorithm": "gdgs", "solver": "cd"},
            "iterations": [{"it": 1, "gap": 0.5, "active": 3, "radius": null, "alpha": 1.0, "t": 0.0}],
            "final": {"x_nnz": 0, "gap": 0.1, "objective": 2.0}
        });
        assert!(validate_trace(&good).is_ok());
        let mut bad = good.clone();
        bad["version"] = json!(2);
        assert!(validate_trace(&bad).is_err());
        let mut bad = good.clone();
        bad["iterations"][0]["gap"] = json!("x");
        assert!(validate_trace(&bad).is_err());
        let mut bad = good;
        bad["final"].as_object_mut().unwrap().remove("x_nnz");
        assert!(validate_trace(&bad).is_err());
    }
}
