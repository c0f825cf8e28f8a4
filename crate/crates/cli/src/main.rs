use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kuramoto_pin_core::dynamics::{simulate, Diagnostics, SimConfig};
use kuramoto_pin_core::experiments::{emit_results, run_sweep, OutputFormat, SweepConfig};
use kuramoto_pin_core::feasibility::{
    audit_signed_cycles, check, lp_feasibility_pinned, sample_initial_phases, write_jsonl, DEFAULT_MARGIN,
    DEFAULT_PATH_CAP,
};
use kuramoto_pin_core::graph::{generate_ensemble, random_frequencies, EnsembleSpec};
use kuramoto_pin_core::select::{optimality_bound, select_optimal, DEFAULT_OPTIMAL_CAP, DEFAULT_SAMPLE_COUNT};
use kuramoto_pin_core::spectral::hetero_threshold;
use kuramoto_pin_core::{
    select, Algorithm, Error, GraphFile, GraphKind, InputSet, NaturalFrequencies, QEstimatorConfig, SignedDigraph,
};
use nalgebra::DVector;

/// Input selection and simulation for pinned signed Kuramoto networks.
#[derive(Parser)]
#[command(name = "kuramoto-pin", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Also write the per-point summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Choose input nodes for one graph.
    Select {
        #[arg(long)]
        graph: PathBuf,
        /// `auto` (0 for homogeneous, δ̄ otherwise) or a number.
        #[arg(long, default_value = "auto")]
        delta: String,
        #[arg(long, value_enum, default_value_t = AlgArg::Submodular)]
        algorithm: AlgArg,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        alpha: Option<f64>,
        /// Also run exhaustive search and report the gap.
        #[arg(long)]
        compare_optimal: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the pinned dynamics.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        /// Comma-separated 1-based input nodes.
        #[arg(long, default_value = "")]
        inputs: String,
        /// `zero`, `sampled`, or a path to a JSON array of phases.
        #[arg(long, default_value = "sampled")]
        theta0: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[arg(long, default_value_t = 200.0)]
        t: f64,
        #[arg(long)]
        out: PathBuf,
        /// Diagnostics sidecar; defaults to the output path with a `.json` extension.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Feasibility of the initial-phase intervals.
    Check {
        #[arg(long, required_unless_present = "audit_cycles")]
        graph: Option<PathBuf>,
        /// Comma-separated 1-based input nodes for the pinned test.
        #[arg(long)]
        inputs: Option<String>,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
        path_cap: usize,
        /// Audit every signed cycle with lengths `LO..=HI`, e.g. `3..8`.
        #[arg(long)]
        audit_cycles: Option<String>,
        /// Where audit discrepancies go (JSON lines).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Draw a random graph and write it as JSON.
    Generate {
        #[arg(long)]
        kind: GraphKind,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        neg_fraction: f64,
        #[arg(long, default_value_t = 0.3)]
        edge_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw frequencies uniformly from `LO,HI`.
        #[arg(long)]
        omega: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgArg {
    Submodular,
    Greedy,
    Random,
    Optimal,
}

impl From<AlgArg> for Algorithm {
    fn from(a: AlgArg) -> Self {
        match a {
            AlgArg::Submodular => Algorithm::Submodular,
            AlgArg::Greedy => Algorithm::Greedy,
            AlgArg::Random => Algorithm::Random,
            AlgArg::Optimal => Algorithm::Optimal,
        }
    }
}

/// Failure class, mapped to the process exit code.
enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self::Config(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Self::Runtime(e.to_string())
    }
}

/// Errors raised while computing: bad parameters are still the caller's fault.
fn classify(e: Error) -> Failure {
    match e {
        Error::InvalidParameter(_)
        | Error::NodeOutOfRange { .. }
        | Error::FrequencyLength { .. }
        | Error::PinnedPhaseNonzero { .. }
        | Error::CapExceeded { .. } => Failure::config(e),
        _ => Failure::runtime(e),
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load_graph(path: &Path) -> CliResult<(SignedDigraph, NaturalFrequencies)> {
    GraphFile::load(path).and_then(|f| f.to_graph()).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn parse_inputs(spec: &str, n: usize) -> CliResult<InputSet> {
    let ids = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse::<usize>() {
            Ok(id) if id >= 1 && id <= n => Ok(id - 1),
            _ => Err(Failure::config(format!("bad input node {s:?} (expected 1..={n})"))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    InputSet::new(n, ids).map_err(classify)
}

fn parse_pair(spec: &str, what: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = spec.split(',').collect();
    match parts.as_slice() {
        [a, b] => match (a.trim().parse(), b.trim().parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => Err(Failure::config(format!("bad {what} {spec:?}"))),
        },
        _ => Err(Failure::config(format!("{what} must look like LO,HI"))),
    }
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(Failure::runtime)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(Failure::runtime),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(Failure::runtime),
        },
    }
}

fn cmd_sweep(config: &Path, out: &Path, format: Format, summary: Option<&Path>) -> CliResult {
    let cfg = SweepConfig::load(config).map_err(|e| Failure::config(format!("{}: {e}", config.display())))?;
    let result = run_sweep(&cfg).map_err(classify)?;
    let format = match format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    emit_results(&result.records, out, format).map_err(Failure::runtime)?;
    if let Some(p) = summary {
        write_json(Some(p), &serde_json::to_value(&result.summary).map_err(Failure::runtime)?)?;
    }
    let failed = result.records.iter().filter(|r| r.error.is_some()).count();
    eprintln!("{} records written to {} ({failed} failed)", result.records.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_select(
    graph: &Path,
    delta: &str,
    algorithm: Algorithm,
    samples: usize,
    seed: u64,
    alpha: Option<f64>,
    compare_optimal: bool,
    out: Option<&Path>,
) -> CliResult {
    let (g, omega) = load_graph(graph)?;
    let delta = match delta {
        "auto" if omega.is_homogeneous() => 0.0,
        "auto" => hetero_threshold(&g, &omega),
        d => d
            .parse::<f64>()
            .ok()
            .filter(|d| *d >= 0.0 && d.is_finite())
            .ok_or_else(|| Failure::config(format!("bad delta {d:?}")))?,
    };
    let cfg = QEstimatorConfig { sample_count: samples, alpha, rng_seed: seed, shared_samples: true };
    let mut res = select::run_algorithm(algorithm, &g, &omega, delta, &cfg).map_err(classify)?;
    if compare_optimal && algorithm == Algorithm::Submodular {
        let opt = select_optimal(&g, &omega, delta, DEFAULT_OPTIMAL_CAP).map_err(classify)?;
        res.bound_report = optimality_bound(&res, Some(opt.num_inputs()));
    }
    write_json(out, &res.to_json())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    graph: &Path,
    inputs: &str,
    theta0: &str,
    seed: u64,
    margin: f64,
    h: f64,
    t: f64,
    out: &Path,
    diagnostics: Option<&Path>,
) -> CliResult {
    let (g, omega) = load_graph(graph)?;
    let s = parse_inputs(inputs, g.n())?;
    let cfg = SimConfig { step_h: h, horizon_t: t, ..SimConfig::default() };
    cfg.validate().map_err(classify)?;
    let theta0 = match theta0 {
        "zero" => DVector::zeros(g.n()),
        "sampled" => sample_initial_phases(&g, &s, seed, margin).map_err(classify)?,
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{path}: {e}")))?;
            let v: Vec<f64> = serde_json::from_str(&text).map_err(|e| Failure::config(format!("{path}: {e}")))?;
            DVector::from_vec(v)
        }
    };
    let traj = simulate(&g, &omega, &s, &theta0, &cfg).map_err(classify)?;
    traj.write_csv(out).map_err(Failure::runtime)?;
    let diag = Diagnostics::collect(&traj, &g, &cfg);
    let side = diagnostics.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("json"));
    diag.save(&side).map_err(Failure::runtime)?;
    eprintln!(
        "frequency sync: {} (residual {:.3e}), phase sync: {}",
        diag.frequency_sync.synced, diag.frequency_sync.residual, diag.phase_sync.synced
    );
    Ok(())
}

fn cmd_check(
    graph: Option<&Path>,
    inputs: Option<&str>,
    margin: f64,
    path_cap: usize,
    audit: Option<&str>,
    log: Option<&Path>,
) -> CliResult {
    if let Some(range) = audit {
        let (lo, hi) = range
            .split_once("..")
            .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.trim_start_matches('=').parse::<usize>().ok()?)))
            .filter(|(a, b)| *a >= 3 && a <= b && *b <= 16)
            .ok_or_else(|| {
                Failure::config(format!("bad cycle range {range:?} (expected LO..HI, 3 <= LO <= HI <= 16)"))
            })?;
        let report = audit_signed_cycles(lo..=hi, margin).map_err(classify)?;
        if let Some(p) = log {
            write_jsonl(p, &report.discrepancies).map_err(Failure::runtime)?;
        }
        let summary = serde_json::json!({
            "instances": report.rows.len(),
            "parity_true": report.rows.iter().filter(|r| r.parity).count(),
            "oracle_feasible": report.rows.iter().filter(|r| r.oracle).count(),
            "discrepancies": report.discrepancies.len(),
        });
        write_json(None, &summary)?;
    }
    if let Some(path) = graph {
        let (g, _) = load_graph(path)?;
        let mut doc = serde_json::to_value(check(&g, margin, path_cap).map_err(classify)?).map_err(Failure::runtime)?;
        if let Some(spec) = inputs {
            let s = parse_inputs(spec, g.n())?;
            let pinned = lp_feasibility_pinned(&g, &s, margin).map_err(classify)?;
            doc["pinned"] = serde_json::to_value(pinned).map_err(Failure::runtime)?;
        }
        write_json(None, &doc)?;
    }
    Ok(())
}

fn cmd_generate(
    kind: GraphKind,
    n: usize,
    neg_fraction: f64,
    edge_prob: f64,
    seed: u64,
    omega: Option<&str>,
    out: &Path,
) -> CliResult {
    let spec = EnsembleSpec { edge_prob, ..EnsembleSpec::new(kind, n).with_neg_fraction(neg_fraction) };
    let g = generate_ensemble(&spec, seed).map_err(classify)?;
    let omega = omega
        .map(|r| parse_pair(r, "omega range").map(|range| random_frequencies(n, range, seed.wrapping_add(1))))
        .transpose()?;
    GraphFile::from_graph(&g, omega.as_ref()).save(out).map_err(Failure::runtime)
}

fn run(cli: Cli) -> CliResult {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(Failure::runtime)?;
    }
    match cli.command {
        Command::Sweep { config, out, format, summary } => cmd_sweep(&config, &out, format, summary.as_deref()),
        Command::Select { graph, delta, algorithm, samples, seed, alpha, compare_optimal, out } => {
            cmd_select(&graph, &delta, algorithm.into(), samples, seed, alpha, compare_optimal, out.as_deref())
        }
        Command::Simulate { graph, inputs, theta0, seed, margin, h, t, out, diagnostics } => {
            cmd_simulate(&graph, &inputs, &theta0, seed, margin, h, t, &out, diagnostics.as_deref())
        }
        Command::Check { graph, inputs, margin, path_cap, audit_cycles, log } => {
            cmd_check(graph.as_deref(), inputs.as_deref(), margin, path_cap, audit_cycles.as_deref(), log.as_deref())
        }
        Command::Generate { kind, n, neg_fraction, edge_prob, seed, omega, out } => {
            cmd_generate(kind, n, neg_fraction, edge_prob, seed, omega.as_deref(), &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
