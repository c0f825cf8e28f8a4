//! Seeded sweeps comparing the selection algorithms.
//!
//! Every realization draws its own seed from the master seed, the grid
//! point and the realization index, so results do not depend on how the
//! work is scheduled. Records are sorted before they are emitted.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    generate_ensemble, random_frequencies, EnsembleSpec, GraphKind, InputSet, NaturalFrequencies, SignedDigraph,
};
use crate::seed;
use crate::select::{run_algorithm, Algorithm, QEstimatorConfig, DEFAULT_SAMPLE_COUNT};
use crate::spectral::{certifies, coupling_matrices, hetero_threshold, lambda_min, principal_submatrix};

const TAG_GRAPH: u64 = 10;
const TAG_OMEGA: u64 = 11;
const TAG_SELECT: u64 = 12;

pub const CSV_HEADER: [&str; 9] =
    ["graph_kind", "point", "realization", "seed", "algorithm", "num_inputs", "lambda_min", "delta", "wall_ms"];

/// `‖Dᵀω‖₂ / max_i d_in(i)` on the unpinned network.
pub fn wf_parameter(g: &SignedDigraph, omega: &NaturalFrequencies) -> Result<f64> {
    let max_in = (0..g.n()).map(|i| g.in_strength(i)).fold(f64::NEG_INFINITY, f64::max);
    if !(max_in > 0.0) {
        return Err(Error::InvalidParameter("largest in-degree sum must be positive".into()));
    }
    let w = omega.as_vector();
    let norm = g.edges().iter().map(|e| (w[e.dst] - w[e.src]).powi(2)).sum::<f64>().sqrt();
    Ok(norm / max_in)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SweepAxis {
    /// One point per negative-edge fraction.
    NegFraction { grid: Vec<f64> },
    /// Realizations are binned by their measured WF value; each point is a
    /// bin center and `realizations` counts draws per sweep.
    Wf {
        bin_edges: Vec<f64>,
        #[serde(default = "default_hetero_neg_fraction")]
        neg_fraction: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaMode {
    /// `δ = 0`, frequencies all zero.
    #[default]
    Homogeneous,
    /// Frequencies uniform on `omega_range`, `δ = δ̄`.
    Heterogeneous,
}

fn default_n() -> usize {
    10
}
fn default_realizations() -> usize {
    100
}
fn default_omega_range() -> (f64, f64) {
    (0.0, 2.0)
}
fn default_weight_range() -> (f64, f64) {
    (1.0, 5.0)
}
fn default_edge_prob() -> f64 {
    0.3
}
fn default_hetero_neg_fraction() -> f64 {
    0.3
}
fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}
fn default_sample_count() -> usize {
    DEFAULT_SAMPLE_COUNT
}
fn default_optimal_cap() -> usize {
    crate::select::DEFAULT_OPTIMAL_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub graph_kind: GraphKind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    pub axis: SweepAxis,
    #[serde(default)]
    pub delta_mode: DeltaMode,
    #[serde(default = "default_omega_range")]
    pub omega_range: (f64, f64),
    #[serde(default = "default_weight_range")]
    pub weight_range: (f64, f64),
    #[serde(default = "default_edge_prob")]
    pub edge_prob: f64,
    pub master_seed: u64,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default = "default_optimal_cap")]
    pub optimal_cap: usize,
    /// Wall time makes output machine dependent, so it is off by default.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl SweepConfig {
    pub fn new(graph_kind: GraphKind, axis: SweepAxis, master_seed: u64) -> Self {
        Self {
            graph_kind,
            n: default_n(),
            realizations: default_realizations(),
            axis,
            delta_mode: DeltaMode::Homogeneous,
            omega_range: default_omega_range(),
            weight_range: default_weight_range(),
            edge_prob: default_edge_prob(),
            master_seed,
            algorithms: default_algorithms(),
            sample_count: default_sample_count(),
            optimal_cap: default_optimal_cap(),
            record_wall_time: false,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.realizations == 0 {
            return bad("realizations must be at least 1");
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required");
        }
        if self.sample_count == 0 {
            return bad("sample_count must be at least 1");
        }
        let (lo, hi) = self.omega_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad("omega_range must satisfy lo <= hi");
        }
        match &self.axis {
            SweepAxis::NegFraction { grid } => {
                if grid.is_empty() {
                    return bad("neg_fraction grid is empty");
                }
                if grid.iter().any(|f| !(0.0..=1.0).contains(f)) {
                    return bad("neg_fraction values must lie in [0,1]");
                }
            }
            SweepAxis::Wf { bin_edges, neg_fraction } => {
                if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| !(w[0] < w[1])) {
                    return bad("WF bin edges need at least two strictly increasing values");
                }
                if !(0.0..=1.0).contains(neg_fraction) {
                    return bad("neg_fraction must lie in [0,1]");
                }
                if self.delta_mode != DeltaMode::Heterogeneous {
                    return bad("a WF sweep requires delta_mode heterogeneous");
                }
            }
        }
        self.spec(0.0).validate()
    }

    fn spec(&self, neg_fraction: f64) -> EnsembleSpec {
        EnsembleSpec {
            kind: self.graph_kind,
            n: self.n,
            edge_prob: self.edge_prob,
            weight_range: self.weight_range,
            neg_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub graph_kind: GraphKind,
    pub point: f64,
    pub realization: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub num_inputs: Option<usize>,
    #[serde(with = "crate::serde_f64::option")]
    pub lambda_min: Option<f64>,
    #[serde(with = "crate::serde_f64")]
    pub delta: f64,
    pub wall_ms: f64,
    #[serde(default)]
    pub inputs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: f64,
    pub algorithm: Algorithm,
    pub count: usize,
    pub failures: usize,
    pub mean_inputs: f64,
    pub stderr_inputs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: Vec<PointSummary>,
    /// Per point: mean of `|S_submodular| − |S_optimal|` over realizations where both ran.
    pub gap_by_point: Vec<(f64, f64)>,
    pub mean_gap: Option<f64>,
    /// WF sweeps: draws outside every bin.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub summary: SweepSummary,
}

struct Job {
    point_index: usize,
    realization: usize,
    neg_fraction: f64,
}

struct Instance {
    g: SignedDigraph,
    omega: NaturalFrequencies,
    delta: f64,
    seed: u64,
}

fn instance(cfg: &SweepConfig, job: &Job) -> Result<Instance> {
    let seed = seed::derive(cfg.master_seed, &[job.point_index as u64, job.realization as u64]);
    let g = generate_ensemble(&cfg.spec(job.neg_fraction), seed::derive(seed, &[TAG_GRAPH]))?;
    let (omega, delta) = match cfg.delta_mode {
        DeltaMode::Homogeneous => (NaturalFrequencies::zeros(cfg.n), 0.0),
        DeltaMode::Heterogeneous => {
            let w = random_frequencies(cfg.n, cfg.omega_range, seed::derive(seed, &[TAG_OMEGA]));
            let d = hetero_threshold(&g, &w);
            (w, d)
        }
    };
    Ok(Instance { g, omega, delta, seed })
}

/// Rebuild the network of a record from the config and its seed fields.
pub fn regenerate(
    cfg: &SweepConfig,
    point_index: usize,
    realization: usize,
) -> Result<(SignedDigraph, NaturalFrequencies, f64)> {
    let neg = match &cfg.axis {
        SweepAxis::NegFraction { grid } => grid[point_index],
        SweepAxis::Wf { neg_fraction, .. } => *neg_fraction,
    };
    let inst = instance(cfg, &Job { point_index, realization, neg_fraction: neg })?;
    Ok((inst.g, inst.omega, inst.delta))
}

fn run_job(cfg: &SweepConfig, job: &Job) -> Vec<SweepRecord> {
    let make = |alg, point, seed, delta, wf| SweepRecord {
        graph_kind: cfg.graph_kind,
        point,
        realization: job.realization,
        seed,
        algorithm: alg,
        num_inputs: None,
        lambda_min: None,
        delta,
        wall_ms: 0.0,
        inputs: Vec::new(),
        wf,
        error: None,
    };
    let inst = match instance(cfg, job) {
        Ok(i) => i,
        Err(e) => {
            return cfg
                .algorithms
                .iter()
                .map(|&a| SweepRecord { error: Some(e.to_string()), ..make(a, f64::NAN, 0, f64::NAN, None) })
                .collect()
        }
    };
    let (point, wf) = match &cfg.axis {
        SweepAxis::NegFraction { grid } => (grid[job.point_index], None),
        SweepAxis::Wf { .. } => {
            let wf = wf_parameter(&inst.g, &inst.omega).ok();
            (f64::NAN, wf)
        }
    };
    let qcfg = QEstimatorConfig {
        sample_count: cfg.sample_count,
        ..QEstimatorConfig::with_seed(seed::derive(inst.seed, &[TAG_SELECT]))
    };
    cfg.algorithms
        .iter()
        .map(|&alg| {
            let mut rec = make(alg, point, inst.seed, inst.delta, wf);
            let started = Instant::now();
            let res = match alg {
                Algorithm::Optimal => crate::select::select_optimal(&inst.g, &inst.omega, inst.delta, cfg.optimal_cap),
                _ => run_algorithm(alg, &inst.g, &inst.omega, inst.delta, &qcfg),
            };
            if cfg.record_wall_time {
                rec.wall_ms = started.elapsed().as_secs_f64() * 1e3;
            }
            match res {
                Ok(r) => {
                    rec.num_inputs = Some(r.num_inputs());
                    rec.lambda_min = Some(r.lambda_min);
                    rec.inputs = r.inputs.to_vec();
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect()
}

fn bin_center(edges: &[f64], x: f64) -> Option<(usize, f64)> {
    let i = edges.windows(2).position(|w| w[0] <= x && x < w[1])?;
    Some((i, 0.5 * (edges[i] + edges[i + 1])))
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let jobs: Vec<Job> = match &cfg.axis {
        SweepAxis::NegFraction { grid } => (0..grid.len())
            .flat_map(|p| (0..cfg.realizations).map(move |r| (p, r)))
            .map(|(p, r)| Job { point_index: p, realization: r, neg_fraction: grid[p] })
            .collect(),
        SweepAxis::Wf { neg_fraction, .. } => {
            (0..cfg.realizations).map(|r| Job { point_index: 0, realization: r, neg_fraction: *neg_fraction }).collect()
        }
    };
    let mut records: Vec<SweepRecord> = jobs.par_iter().flat_map_iter(|j| run_job(cfg, j)).collect();

    let mut dropped = 0;
    if let SweepAxis::Wf { bin_edges, .. } = &cfg.axis {
        let before = records.len();
        records.retain_mut(|r| match r.wf.and_then(|wf| bin_center(bin_edges, wf)) {
            Some((_, c)) => {
                r.point = c;
                true
            }
            None => false,
        });
        dropped = (before - records.len()) / cfg.algorithms.len();
    }
    let order = |a: Algorithm| cfg.algorithms.iter().position(|x| *x == a).unwrap_or(usize::MAX);
    records.sort_by(|a, b| {
        a.point
            .total_cmp(&b.point)
            .then(a.realization.cmp(&b.realization))
            .then(order(a.algorithm).cmp(&order(b.algorithm)))
    });
    let mut summary = summarize(&records);
    summary.dropped = dropped;
    Ok(SweepOutput { records, summary })
}

pub fn summarize(records: &[SweepRecord]) -> SweepSummary {
    let mut groups: BTreeMap<(u64, Algorithm), (Vec<f64>, usize, f64)> = BTreeMap::new();
    let key = |p: f64| p.to_bits();
    for r in records {
        let entry = groups.entry((key(r.point), r.algorithm)).or_insert((Vec::new(), 0, r.point));
        match r.num_inputs {
            Some(k) => entry.0.push(k as f64),
            None => entry.1 += 1,
        }
    }
    let mut points: Vec<PointSummary> = groups
        .into_iter()
        .map(|((_, algorithm), (xs, failures, point))| {
            let (mean, se) = mean_stderr(&xs);
            PointSummary { point, algorithm, count: xs.len(), failures, mean_inputs: mean, stderr_inputs: se }
        })
        .collect();
    points.sort_by(|a, b| a.point.total_cmp(&b.point).then(a.algorithm.name().cmp(b.algorithm.name())));

    let mut pairs: BTreeMap<(u64, usize), (Option<usize>, Option<usize>, f64)> = BTreeMap::new();
    for r in records {
        let e = pairs.entry((key(r.point), r.realization)).or_insert((None, None, r.point));
        match r.algorithm {
            Algorithm::Submodular => e.0 = r.num_inputs,
            Algorithm::Optimal => e.1 = r.num_inputs,
            _ => {}
        }
    }
    let mut per_point: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for (_, (sub, opt, point)) in pairs {
        if let (Some(s), Some(o)) = (sub, opt) {
            per_point.entry(key(point)).or_insert((point, Vec::new())).1.push(s as f64 - o as f64);
        }
    }
    let mut gap_by_point: Vec<(f64, f64)> = per_point.values().map(|(p, gaps)| (*p, mean_stderr(gaps).0)).collect();
    gap_by_point.sort_by(|a, b| a.0.total_cmp(&b.0));
    let all: Vec<f64> = per_point.values().flat_map(|(_, g)| g.iter().copied()).collect();
    let mean_gap = (!all.is_empty()).then(|| mean_stderr(&all).0);
    SweepSummary { points, gap_by_point, mean_gap, dropped: 0 }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean `num_inputs` of one algorithm at one point.
pub fn mean_inputs(summary: &SweepSummary, point: f64, algorithm: Algorithm) -> Option<f64> {
    summary.points.iter().find(|p| p.point == point && p.algorithm == algorithm).map(|p| p.mean_inputs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidParameter(format!("unknown output format {other:?}"))),
        }
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Write records as CSV into any writer. Floats use Rust's shortest
/// round-trip formatting; missing values are empty fields.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.graph_kind.name().to_string(),
            r.point.to_string(),
            r.realization.to_string(),
            r.seed.to_string(),
            r.algorithm.name().to_string(),
            opt(r.num_inputs),
            opt(r.lambda_min),
            r.delta.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_results(records: &[SweepRecord], path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    match format {
        OutputFormat::Csv => write_csv(records, out),
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, records)?;
            out.write_all(b"\n")?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

/// Check that a record's input set still certifies its network.
pub fn revalidate(cfg: &SweepConfig, record: &SweepRecord) -> Result<bool> {
    let point_index = match &cfg.axis {
        SweepAxis::NegFraction { grid } => grid
            .iter()
            .position(|p| *p == record.point)
            .ok_or_else(|| Error::InvalidParameter(format!("point {} not in grid", record.point)))?,
        SweepAxis::Wf { .. } => 0,
    };
    let (g, _, delta) = regenerate(cfg, point_index, record.realization)?;
    let s = InputSet::new(g.n(), record.inputs.iter().copied())?;
    let (_, r) = coupling_matrices(&g);
    let keep: Vec<usize> = (0..g.m()).filter(|&e| !s.contains(g.edge(e).dst)).collect();
    Ok(certifies(lambda_min(&principal_submatrix(&r, &keep))?, delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wf_examples() {
        let g = SignedDigraph::directed(2, &[(0, 1, 1.0)]).unwrap();
        let w = NaturalFrequencies::new(&g, vec![0.0, 0.5]).unwrap();
        assert_eq!(wf_parameter(&g, &w).unwrap(), 0.5);
        assert_eq!(wf_parameter(&g, &NaturalFrequencies::zeros(2)).unwrap(), 0.0);

        let c = SignedDigraph::directed(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let w = NaturalFrequencies::new(&c, vec![1.0, 2.0, 3.0]).unwrap();
        assert!((wf_parameter(&c, &w).unwrap() - 6f64.sqrt()).abs() < 1e-12);

        let neg = SignedDigraph::directed(2, &[(0, 1, -1.0)]).unwrap();
        assert!(wf_parameter(&neg, &NaturalFrequencies::zeros(2)).is_err());
    }

    fn small(kind: GraphKind) -> SweepConfig {
        SweepConfig {
            n: 6,
            realizations: 4,
            sample_count: 200,
            ..SweepConfig::new(kind, SweepAxis::NegFraction { grid: vec![0.0, 0.2] }, 7)
        }
    }

    #[test]
    fn sweep_shape_and_order() {
        let cfg = small(GraphKind::DirectedCycle);
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.records.len(), 2 * 4 * 4);
        for chunk in out.records.chunks(4) {
            let opt = chunk.iter().find(|r| r.algorithm == Algorithm::Optimal).unwrap().num_inputs.unwrap();
            assert!(chunk.iter().all(|r| r.num_inputs.unwrap() >= opt));
            assert!(chunk.iter().all(|r| revalidate(&cfg, r).unwrap()));
        }
        assert!(out.summary.mean_gap.unwrap() >= 0.0);
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn json_round_trip() {
        let out = run_sweep(&small(GraphKind::Tree)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        emit_results(&out.records, &path, OutputFormat::Json).unwrap();
        assert_eq!(load_records(&path).unwrap(), out.records);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small(GraphKind::Tree);
        cfg.realizations = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small(GraphKind::Tree);
        cfg.axis = SweepAxis::NegFraction { grid: vec![] };
        assert!(cfg.validate().is_err());
        let mut cfg = small(GraphKind::Tree);
        cfg.axis = SweepAxis::Wf { bin_edges: vec![0.0, 1.0], neg_fraction: 0.3 };
        assert!(cfg.validate().is_err());
        cfg.delta_mode = DeltaMode::Heterogeneous;
        assert!(cfg.validate().is_ok());
        let mut cfg = small(GraphKind::DirectedCycle);
        cfg.n = 2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: SweepConfig = serde_json::from_str(
            r#"{"graph_kind":"tree","axis":{"kind":"neg-fraction","grid":[0.0]},"master_seed":1}"#,
        )
        .unwrap();
        assert_eq!(cfg.n, 10);
        assert_eq!(cfg.realizations, 100);
        assert_eq!(cfg.algorithms.len(), 4);
        assert_eq!(cfg.omega_range, (0.0, 2.0));
        assert!(!cfg.record_wall_time);
    }

    #[test]
    fn wf_sweep_bins_points() {
        let mut cfg = small(GraphKind::UndirectedEr);
        cfg.delta_mode = DeltaMode::Heterogeneous;
        cfg.algorithms = vec![Algorithm::Greedy];
        cfg.axis = SweepAxis::Wf { bin_edges: vec![0.0, 0.5, 1.0, 100.0], neg_fraction: 0.3 };
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.records.len() + out.summary.dropped, 4);
        assert!(out.records.iter().all(|r| [0.25, 0.75, 50.5].contains(&r.point)));
    }
}
