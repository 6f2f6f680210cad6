//! Command-line front end: `dmc --features f.bin --algorithm dlaec ...`.
//!
//! Exit codes: 0 on success, 2 for invalid arguments (including inputs the
//! chosen algorithm cannot take and oracle requests that are too large), 3
//! for unreadable or invalid input data.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use dense_multicut::io::{self, RunSummary};
use dense_multicut::metrics::{ami, nmi};
use dense_multicut::oracle::MAX_ENUMERATION_NODES;
use dense_multicut::synth::synth_instance;
use dense_multicut::{
    enumerate_optimal, gaec, solve, Algorithm, AlphaSign, Error, FeatureMatrix, Partition, Solution, SolverConfig,
    SparseWeightedGraph,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dmc",
    version,
    about = "Greedy and lazy contraction solvers for dense multicut"
)]
struct Args {
    /// Feature file, binary DMC1 or CSV.
    #[arg(long, value_name = "PATH", group = "input")]
    features: Option<PathBuf>,

    /// Sparse graph as "u v cost" lines (gaec only).
    #[arg(long, value_name = "PATH", group = "input")]
    graph: Option<PathBuf>,

    /// Synthetic instance "n,d,k,sigma".
    #[arg(long, value_name = "N,D,K,SIGMA", group = "input")]
    synth: Option<String>,

    #[arg(long, default_value = "dgaec-inc")]
    algorithm: String,

    /// Neighbours per node; defaults to 1 for gaec/dgaec and 5 otherwise.
    #[arg(long)]
    k: Option<usize>,

    /// Affinity strength applied to every node [default: 0.4]. Overrides
    /// per-node values stored in a feature file.
    #[arg(long)]
    alpha: Option<f32>,

    #[arg(long, default_value = "minus")]
    alpha_sign: String,

    /// Scale every feature row to unit L2 norm.
    #[arg(long)]
    normalize: bool,

    /// Labels output, "node<TAB>cluster" per line.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// JSON run summary; printed to stdout when omitted.
    #[arg(long, value_name = "PATH")]
    summary: Option<PathBuf>,

    /// Ground-truth labels, one per line; adds NMI and AMI to the summary.
    #[arg(long, value_name = "PATH")]
    gt: Option<PathBuf>,

    /// Merge trace output, "i<TAB>j<TAB>m<TAB>similarity" per line.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,

    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Also compute the optimal objective by enumeration (at most 12 nodes).
    #[arg(long)]
    oracle: bool,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Argument(_) | Error::Capacity(_) => EXIT_USAGE,
            Error::Format { .. } | Error::Data(_) | Error::Io(_) => EXIT_DATA,
            Error::State(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

enum Input {
    Dense(FeatureMatrix),
    Sparse(SparseWeightedGraph),
}

fn parse_synth(spec: &str) -> Result<(usize, usize, usize, f64), Failure> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let bad = || Failure::usage(format!("--synth expects n,d,k,sigma, got {spec:?}"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let n = parts[0].parse().map_err(|_| bad())?;
    let d = parts[1].parse().map_err(|_| bad())?;
    let k = parts[2].parse().map_err(|_| bad())?;
    let sigma: f64 = parts[3].parse().map_err(|_| bad())?;
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(bad());
    }
    Ok((n, d, k, sigma))
}

fn run(args: Args) -> Result<(), Failure> {
    let algorithm: Algorithm = args.algorithm.parse().map_err(Failure::from)?;
    let sign: AlphaSign = args.alpha_sign.parse().map_err(Failure::from)?;
    let k = args.k.unwrap_or_else(|| algorithm.default_k());
    let cfg = SolverConfig::new(algorithm)
        .with_k(k)
        .with_threads(args.threads)
        .with_seed(args.seed);
    cfg.validate()?;
    if let Some(a) = args.alpha {
        if !a.is_finite() || a < 0.0 {
            return Err(Failure::usage(format!(
                "--alpha must be finite and nonnegative, got {a}"
            )));
        }
    }

    let mut synth_truth = None;
    let input = match (&args.features, &args.graph, &args.synth) {
        (Some(path), None, None) => {
            let fm = io::read_features(path, args.normalize)?;
            let fm = match args.alpha {
                Some(a) => fm.with_uniform_alpha(a, sign)?,
                None if fm.has_alpha() => fm.with_sign(sign),
                None => fm.with_uniform_alpha(0.4, sign)?,
            };
            Input::Dense(fm)
        }
        (None, Some(path), None) => {
            if algorithm.is_dense() {
                return Err(Failure::usage(format!(
                    "--graph input needs --algorithm gaec; {algorithm} works on features"
                )));
            }
            Input::Sparse(io::read_sparse_graph(path)?)
        }
        (None, None, Some(spec)) => {
            let (n, d, clusters, sigma) = parse_synth(spec)?;
            let (mut fm, truth) = synth_instance(n, d, clusters, sigma, args.seed)?;
            if args.normalize {
                fm.normalize_rows()?;
            }
            synth_truth = Some(truth);
            Input::Dense(fm.with_uniform_alpha(args.alpha.unwrap_or(0.4), sign)?)
        }
        (None, None, None) => return Err(Failure::usage("one of --features, --graph or --synth is required")),
        _ => return Err(Failure::usage("--features, --graph and --synth are mutually exclusive")),
    };

    let n = match &input {
        Input::Dense(fm) => fm.n(),
        Input::Sparse(g) => g.n(),
    };
    if args.oracle && n > MAX_ENUMERATION_NODES {
        return Err(Failure::usage(format!(
            "--oracle enumerates partitions and supports at most {MAX_ENUMERATION_NODES} nodes, input has {n}"
        )));
    }
    let truth = match &args.gt {
        Some(path) => {
            let t = io::read_ground_truth(path)?;
            if t.len() != n {
                return Err(Failure::from(Error::Data(format!(
                    "ground truth has {} labels for {n} nodes",
                    t.len()
                ))));
            }
            Some(t)
        }
        None => synth_truth,
    };

    let started = Instant::now();
    let solution: Solution = match &input {
        Input::Dense(fm) => solve(fm, &cfg)?,
        Input::Sparse(g) => gaec(g),
    };
    let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;

    let optimal_objective = if args.oracle {
        // Scored like the solver's partition so equal labelings report
        // equal objectives.
        let (best, _) = match &input {
            Input::Dense(fm) => enumerate_optimal(fm, MAX_ENUMERATION_NODES)?,
            Input::Sparse(g) => enumerate_optimal(g, MAX_ENUMERATION_NODES)?,
        };
        Some(best.objective())
    } else {
        None
    };

    let partition: &Partition = &solution.partition;
    let (d, alpha) = match &input {
        Input::Dense(fm) => {
            let mean = fm.alphas().iter().map(|&a| f64::from(a)).sum::<f64>() / fm.n() as f64;
            (fm.d(), if fm.sign() == AlphaSign::Off { 0.0 } else { mean })
        }
        Input::Sparse(_) => (0, 0.0),
    };
    let (nmi_v, ami_v) = match &truth {
        Some(t) => (Some(nmi(t, partition.labels())?), Some(ami(t, partition.labels())?)),
        None => (None, None),
    };
    let summary = RunSummary {
        algorithm: algorithm.name().to_string(),
        n,
        d,
        k,
        alpha,
        alpha_sign: match &input {
            Input::Dense(fm) => fm.sign(),
            Input::Sparse(_) => AlphaSign::Off,
        },
        objective: partition.objective(),
        n_clusters: partition.n_clusters(),
        wall_time_ms,
        n_contractions: solution.stats.contractions,
        n_exhaustive_searches: solution.stats.exhaustive_searches(),
        seed: args.seed,
        nmi: nmi_v,
        ami: ami_v,
        optimal_objective,
    };

    if let Some(path) = &args.out {
        io::write_labels(path, partition.labels())?;
    }
    if let Some(path) = &args.trace {
        io::write_trace(path, &solution.trace)?;
    }
    match &args.summary {
        Some(path) => io::write_summary(path, &summary)?,
        None => println!("{}", summary.to_json()),
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs, and returns the exit
/// code. Diagnostics go to stderr.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(args) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("dmc: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_spec_parsing() {
        assert_eq!(parse_synth("100,8,5,0.05").unwrap(), (100, 8, 5, 0.05));
        assert_eq!(parse_synth("10, 2, 3, 0").unwrap(), (10, 2, 3, 0.0));
        for bad in ["100,8,5", "a,8,5,0.1", "10,2,3,-1", "10,2,3,0.1,4"] {
            assert_eq!(parse_synth(bad).unwrap_err().code, EXIT_USAGE, "{bad}");
        }
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(Failure::from(Error::Argument("x".into())).code, EXIT_USAGE);
        assert_eq!(Failure::from(Error::Capacity("x".into())).code, EXIT_USAGE);
        assert_eq!(Failure::from(Error::Data("x".into())).code, EXIT_DATA);
        assert_eq!(
            Failure::from(Error::Format {
                offset: 3,
                message: "x".into()
            })
            .code,
            EXIT_DATA
        );
    }

    #[test]
    fn no_input_is_a_usage_error() {
        assert_eq!(cli_main(["dmc"]), EXIT_USAGE);
        assert_eq!(
            cli_main(["dmc", "--synth", "10,2,2,0.1", "--graph", "g.txt"]),
            EXIT_USAGE
        );
        assert_eq!(
            cli_main(["dmc", "--synth", "10,2,2,0.1", "--algorithm", "nope"]),
            EXIT_USAGE
        );
    }
}
