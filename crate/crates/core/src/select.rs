//! Minimum-set input selection.
//!
//! Pinning node `i` removes the edges `E(i)` entering it from `R`. The
//! submodular algorithm scores a candidate edge set with the capped
//! expectation
//!
//! ```text
//! Q(E(S)) = 𝔼[min{ŵᵀ(R + α·diag(E(S)))ŵ, δ}]
//! ```
//!
//! over unit vectors `ŵ`, and greedily adds the node whose incoming edges
//! raise `Q` the most. Termination is always decided by the exact
//! certificate `λ_min(R(S)) > δ + ε`.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{InputSet, NaturalFrequencies, SignedDigraph};
use crate::seed;
use crate::spectral::{certifies, coupling_matrices, lambda_min, principal_submatrix};

pub const DEFAULT_SAMPLE_COUNT: usize = 2000;
pub const DEFAULT_OPTIMAL_CAP: usize = 16;

const TAG_SUBMODULAR: u64 = 1;
const TAG_RANDOM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QEstimatorConfig {
    pub sample_count: usize,
    /// `None` picks α with [`choose_alpha`].
    pub alpha: Option<f64>,
    pub rng_seed: u64,
    pub shared_samples: bool,
}

impl Default for QEstimatorConfig {
    fn default() -> Self {
        Self { sample_count: DEFAULT_SAMPLE_COUNT, alpha: None, rng_seed: 0, shared_samples: true }
    }
}

impl QEstimatorConfig {
    pub fn with_seed(rng_seed: u64) -> Self {
        Self { rng_seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::InvalidParameter("sample_count must be at least 1".into()));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter("alpha must be positive".into()));
            }
        }
        Ok(())
    }
}

/// `α = max(1, δ − λ_min(R) + ‖R‖_F)`.
pub fn choose_alpha(r: &DMatrix<f64>, delta: f64) -> f64 {
    let lam = lambda_min(r).unwrap_or(f64::INFINITY);
    (delta - lam + r.norm()).max(1.0)
}

fn resolve_alpha(cfg: &QEstimatorConfig, r: &DMatrix<f64>, delta: f64) -> f64 {
    cfg.alpha.unwrap_or_else(|| choose_alpha(r, delta))
}

/// Gaussian draws projected onto the unit sphere, one column per sample.
#[derive(Debug, Clone)]
pub struct SphereSamples(DMatrix<f64>);

impl SphereSamples {
    pub fn draw(dim: usize, count: usize, rng_seed: u64) -> Self {
        let mut rng = seed::rng(rng_seed);
        let mut data = DMatrix::zeros(dim, count);
        for mut col in data.column_iter_mut() {
            loop {
                for x in col.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                    break;
                }
            }
        }
        Self(data)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn count(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Evaluates `Q` for many pinned sets against one sample matrix.
///
/// The unpinned quadratic forms `ŵᵀRŵ` are computed once; each pinned set
/// only adds `α·Σ_{i ∈ E(S)} ŵ_i²`.
pub struct QEvaluator {
    base: Vec<f64>,
    squares: DMatrix<f64>,
    alpha: f64,
    delta: f64,
}

impl QEvaluator {
    pub fn new(r: &DMatrix<f64>, samples: &SphereSamples, alpha: f64, delta: f64) -> Self {
        let w = samples.matrix();
        let rw = r * w;
        let base = (0..w.ncols()).map(|k| w.column(k).dot(&rw.column(k))).collect();
        Self { base, squares: w.component_mul(w), alpha, delta }
    }

    pub fn estimate(&self, pinned: &[usize]) -> QEstimate {
        let n = self.base.len();
        let capped = self.base.iter().enumerate().map(|(k, &b)| {
            let lift: f64 = pinned.iter().map(|&i| self.squares[(i, k)]).sum();
            (b + self.alpha * lift).min(self.delta)
        });
        mean_and_stderr(capped, n)
    }
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone, n: usize) -> QEstimate {
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return QEstimate { value: mean, stderr: 0.0 };
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    QEstimate { value: mean, stderr: (var / n as f64).sqrt() }
}

/// Monte-Carlo estimate of `Q(E(S))` for the pinned edge indices.
pub fn q_estimate(
    r_full: &DMatrix<f64>,
    pinned_edges: &[usize],
    delta: f64,
    cfg: &QEstimatorConfig,
) -> Result<QEstimate> {
    cfg.validate()?;
    if !r_full.is_square() {
        return Err(Error::NotSquare { rows: r_full.nrows(), cols: r_full.ncols() });
    }
    if let Some(&bad) = pinned_edges.iter().find(|&&e| e >= r_full.nrows()) {
        return Err(Error::InvalidParameter(format!("edge index {bad} out of range")));
    }
    if r_full.is_empty() {
        return Ok(QEstimate { value: delta, stderr: 0.0 });
    }
    let samples = SphereSamples::draw(r_full.nrows(), cfg.sample_count, cfg.rng_seed);
    let alpha = resolve_alpha(cfg, r_full, delta);
    Ok(QEvaluator::new(r_full, &samples, alpha, delta).estimate(pinned_edges))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Submodular,
    Greedy,
    Random,
    Optimal,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Submodular, Algorithm::Greedy, Algorithm::Random, Algorithm::Optimal];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Submodular => "submodular",
            Algorithm::Greedy => "greedy",
            Algorithm::Random => "random",
            Algorithm::Optimal => "optimal",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub node: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<QEstimate>,
    #[serde(with = "crate::serde_f64")]
    pub lambda_min: f64,
}

/// Optimality report for a submodular run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `log((δ − λ_min(R)) / (δ − Q(E(S_{T−1}))))`.
    pub stated: f64,
    /// `|S*| · log((Q(E(S_T)) − Q(∅)) / (Q(E(S_T)) − Q(E(S_{T−1}))))`, when `|S*|` is known.
    #[serde(default, with = "crate::serde_f64::option")]
    pub proof_rhs: Option<f64>,
    /// `|S_T| − |S*|`, when `|S*|` is known.
    #[serde(default)]
    pub gap: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub algorithm: Algorithm,
    pub inputs: InputSet,
    pub iterations: Vec<IterationRecord>,
    pub delta: f64,
    /// `λ_min(R)` of the unpinned network.
    #[serde(with = "crate::serde_f64")]
    pub initial_lambda_min: f64,
    /// `λ_min(R(S))` of the returned set.
    #[serde(with = "crate::serde_f64")]
    pub lambda_min: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub sample_count: Option<usize>,
    #[serde(default)]
    pub rng_seed: Option<u64>,
    #[serde(default)]
    pub bound_report: Option<BoundReport>,
    pub terminated_ok: bool,
}

impl SelectionResult {
    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    /// JSON document with 1-based node ids.
    pub fn to_json(&self) -> serde_json::Value {
        let mut doc = serde_json::to_value(self).expect("selection result serializes");
        let one_based: Vec<usize> = self.inputs.iter().map(|v| v + 1).collect();
        doc["inputs"] = serde_json::json!(one_based);
        if let Some(iters) = doc["iterations"].as_array_mut() {
            for (it, rec) in iters.iter_mut().zip(&self.iterations) {
                it["node"] = serde_json::json!(rec.node + 1);
            }
        }
        doc
    }
}

/// Shared state for evaluating input sets on one network.
struct Problem {
    n: usize,
    r: DMatrix<f64>,
    heads: Vec<usize>,
    incoming: Vec<Vec<usize>>,
    delta: f64,
}

impl Problem {
    fn new(g: &SignedDigraph, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter("delta must be finite and nonnegative".into()));
        }
        let (_, r) = coupling_matrices(g);
        Ok(Self {
            n: g.n(),
            r,
            heads: g.edges().iter().map(|e| e.dst).collect(),
            incoming: (0..g.n()).map(|i| g.incoming(i)).collect(),
            delta,
        })
    }

    /// `λ_min(R(S))` via the principal submatrix of `R` on retained edges.
    fn lambda(&self, s: &InputSet) -> f64 {
        let keep: Vec<usize> = (0..self.heads.len()).filter(|&e| !s.contains(self.heads[e])).collect();
        lambda_min(&principal_submatrix(&self.r, &keep)).expect("square")
    }

    fn pinned_edges(&self, s: &InputSet) -> Vec<usize> {
        let mut v: Vec<usize> = s.iter().flat_map(|i| self.incoming[i].iter().copied()).collect();
        v.sort_unstable();
        v
    }

    fn result(&self, algorithm: Algorithm, inputs: InputSet, iterations: Vec<IterationRecord>) -> SelectionResult {
        let lambda_min = self.lambda(&inputs);
        SelectionResult {
            algorithm,
            terminated_ok: certifies(lambda_min, self.delta),
            inputs,
            iterations,
            delta: self.delta,
            initial_lambda_min: self.lambda(&InputSet::empty()),
            lambda_min,
            alpha: None,
            sample_count: None,
            rng_seed: None,
            bound_report: None,
        }
    }
}

/// Pick the maximizing candidate; ties go to the lowest node id.
fn argmax<T: Copy>(scored: &[(usize, T)], key: impl Fn(T) -> f64) -> (usize, T) {
    let mut best = scored[0];
    for &(v, s) in &scored[1..] {
        if key(s) > key(best.1) {
            best = (v, s);
        }
    }
    best
}

/// Greedy selection driven by the Monte-Carlo surrogate `Q`.
pub fn select_submodular(
    g: &SignedDigraph,
    _omega: &NaturalFrequencies,
    delta: f64,
    cfg: &QEstimatorConfig,
) -> Result<SelectionResult> {
    cfg.validate()?;
    let p = Problem::new(g, delta)?;
    let alpha = resolve_alpha(cfg, &p.r, delta);
    let dim = p.r.nrows();
    let mut s = InputSet::empty();
    let mut iterations = Vec::new();
    let mut lam = p.lambda(&s);
    while !certifies(lam, delta) {
        let iter = iterations.len() as u64;
        let candidates = s.complement(p.n);
        let base = p.pinned_edges(&s);
        let shared = cfg.shared_samples.then(|| {
            let samples =
                SphereSamples::draw(dim, cfg.sample_count, seed::derive(cfg.rng_seed, &[TAG_SUBMODULAR, iter]));
            QEvaluator::new(&p.r, &samples, alpha, delta)
        });
        let scored: Vec<(usize, QEstimate)> = candidates
            .par_iter()
            .map(|&i| {
                let mut pinned = base.clone();
                pinned.extend(&p.incoming[i]);
                let q = match &shared {
                    Some(eval) => eval.estimate(&pinned),
                    None => {
                        let samples = SphereSamples::draw(
                            dim,
                            cfg.sample_count,
                            seed::derive(cfg.rng_seed, &[TAG_SUBMODULAR, iter, i as u64]),
                        );
                        QEvaluator::new(&p.r, &samples, alpha, delta).estimate(&pinned)
                    }
                };
                (i, q)
            })
            .collect();
        let (v, q) = argmax(&scored, |q| q.value);
        s.insert(v);
        lam = p.lambda(&s);
        iterations.push(IterationRecord { node: v, q: Some(q), lambda_min: lam });
    }
    let mut res = p.result(Algorithm::Submodular, s, iterations);
    res.alpha = Some(alpha);
    res.sample_count = Some(cfg.sample_count);
    res.rng_seed = Some(cfg.rng_seed);
    res.bound_report = optimality_bound(&res, None);
    Ok(res)
}

/// Greedy selection on the exact `λ_min(R(S ∪ {i}))`.
pub fn select_greedy_lambda(g: &SignedDigraph, _omega: &NaturalFrequencies, delta: f64) -> Result<SelectionResult> {
    let p = Problem::new(g, delta)?;
    let mut s = InputSet::empty();
    let mut iterations = Vec::new();
    let mut lam = p.lambda(&s);
    while !certifies(lam, delta) {
        let scored: Vec<(usize, f64)> = s.complement(p.n).par_iter().map(|&i| (i, p.lambda(&s.with(i)))).collect();
        let (v, l) = argmax(&scored, |l| l);
        s.insert(v);
        lam = l;
        iterations.push(IterationRecord { node: v, q: None, lambda_min: lam });
    }
    Ok(p.result(Algorithm::Greedy, s, iterations))
}

/// Uniformly random additions until the certificate holds.
pub fn select_random(
    g: &SignedDigraph,
    _omega: &NaturalFrequencies,
    delta: f64,
    rng_seed: u64,
) -> Result<SelectionResult> {
    let p = Problem::new(g, delta)?;
    let mut rng = seed::rng(seed::derive(rng_seed, &[TAG_RANDOM]));
    let mut s = InputSet::empty();
    let mut iterations = Vec::new();
    let mut lam = p.lambda(&s);
    while !certifies(lam, delta) {
        let candidates = s.complement(p.n);
        let v = candidates[rng.random_range(0..candidates.len())];
        s.insert(v);
        lam = p.lambda(&s);
        iterations.push(IterationRecord { node: v, q: None, lambda_min: lam });
    }
    let mut res = p.result(Algorithm::Random, s, iterations);
    res.rng_seed = Some(rng_seed);
    Ok(res)
}

/// Smallest certified set by exhaustive search, ties in lexicographic order.
pub fn select_optimal(
    g: &SignedDigraph,
    _omega: &NaturalFrequencies,
    delta: f64,
    cap: usize,
) -> Result<SelectionResult> {
    if g.n() > cap {
        return Err(Error::CapExceeded { what: "exhaustive selection", n: g.n(), cap });
    }
    let p = Problem::new(g, delta)?;
    for k in 0..=p.n {
        let hit = (0..p.n).combinations(k).find_map(|c| {
            let s = InputSet::new(p.n, c).expect("ids in range");
            certifies(p.lambda(&s), delta).then_some(s)
        });
        if let Some(s) = hit {
            return Ok(p.result(Algorithm::Optimal, s, Vec::new()));
        }
    }
    unreachable!("pinning every node yields an empty R(S)")
}

pub fn run_algorithm(
    algorithm: Algorithm,
    g: &SignedDigraph,
    omega: &NaturalFrequencies,
    delta: f64,
    cfg: &QEstimatorConfig,
) -> Result<SelectionResult> {
    match algorithm {
        Algorithm::Submodular => select_submodular(g, omega, delta, cfg),
        Algorithm::Greedy => select_greedy_lambda(g, omega, delta),
        Algorithm::Random => select_random(g, omega, delta, cfg.rng_seed),
        Algorithm::Optimal => select_optimal(g, omega, delta, DEFAULT_OPTIMAL_CAP),
    }
}

const BOUND_TOL: f64 = 1e-12;

/// Evaluate the greedy optimality bound from a recorded submodular trace.
///
/// `Q(∅)` is taken as `λ_min(R)`. Returns `None` when there are no
/// iterations, no recorded `Q` values, or `δ − Q(E(S_{T−1}))` vanishes.
pub fn optimality_bound(result: &SelectionResult, optimal_size: Option<usize>) -> Option<BoundReport> {
    let t = result.iterations.len();
    if t == 0 {
        return None;
    }
    let q0 = result.initial_lambda_min;
    let q_prev = if t == 1 { q0 } else { result.iterations[t - 2].q?.value };
    let q_last = result.iterations[t - 1].q?.value;
    let delta = result.delta;
    let (num, den) = (delta - q0, delta - q_prev);
    if den <= BOUND_TOL || num <= 0.0 {
        return None;
    }
    let proof_rhs = optimal_size.and_then(|k| {
        let (a, b) = (q_last - q0, q_last - q_prev);
        (a > 0.0 && b > BOUND_TOL).then(|| k as f64 * (a / b).ln())
    });
    Some(BoundReport {
        stated: (num / den).ln(),
        proof_rhs,
        gap: optimal_size.map(|k| result.num_inputs() as i64 - k as i64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle3() -> SignedDigraph {
        SignedDigraph::directed(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap()
    }

    fn zeros(n: usize) -> NaturalFrequencies {
        NaturalFrequencies::zeros(n)
    }

    #[test]
    fn alpha_rule() {
        let r = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(choose_alpha(&r, 0.5), 1.0);
        let (_, r) = coupling_matrices(&cycle3());
        let expected = (0.0 - lambda_min(&r).unwrap() + r.norm()).max(1.0);
        assert!((choose_alpha(&r, 0.0) - expected).abs() < 1e-15);
        assert!((choose_alpha(&r, 0.0) - r.norm()).abs() < 1e-9);
        let cfg = QEstimatorConfig { alpha: Some(5.0), ..Default::default() };
        assert_eq!(resolve_alpha(&cfg, &r, 0.0), 5.0);
    }

    #[test]
    fn samples_are_unit_vectors() {
        let s = SphereSamples::draw(4, 50, 9);
        for c in s.matrix().column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn q_is_constant_on_identity() {
        let r = DMatrix::<f64>::identity(2, 2);
        let q = q_estimate(&r, &[], 0.5, &QEstimatorConfig::default()).unwrap();
        assert_eq!(q.value, 0.5);
        assert_eq!(q.stderr, 0.0);
        let q = q_estimate(&DMatrix::zeros(0, 0), &[], 0.3, &QEstimatorConfig::default()).unwrap();
        assert_eq!(q.value, 0.3);
    }

    #[test]
    fn q_rejects_bad_config() {
        let r = DMatrix::<f64>::identity(2, 2);
        let cfg = QEstimatorConfig { sample_count: 0, ..Default::default() };
        assert!(q_estimate(&r, &[], 0.5, &cfg).is_err());
        let cfg = QEstimatorConfig { alpha: Some(-1.0), ..Default::default() };
        assert!(q_estimate(&r, &[], 0.5, &cfg).is_err());
        assert!(q_estimate(&r, &[2], 0.5, &QEstimatorConfig::default()).is_err());
    }

    #[test]
    fn optimal_and_greedy_on_cycle() {
        let g = cycle3();
        let opt = select_optimal(&g, &zeros(3), 0.0, 16).unwrap();
        assert_eq!(opt.num_inputs(), 1);
        assert_eq!(opt.inputs.to_vec(), vec![0]);
        let gr = select_greedy_lambda(&g, &zeros(3), 0.0).unwrap();
        assert_eq!(gr.num_inputs(), 1);
        assert!((gr.lambda_min - 0.5).abs() < 1e-12);
        let sm = select_submodular(&g, &zeros(3), 0.0, &QEstimatorConfig::default()).unwrap();
        assert_eq!(sm.num_inputs(), 1);
        assert!(sm.terminated_ok);
    }

    #[test]
    fn certified_graph_needs_no_inputs() {
        // path 0 -> 1 -> 2 has R = [[1, -0.5], [-0.5, 1]]
        let g = SignedDigraph::directed(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        for res in [
            select_greedy_lambda(&g, &zeros(3), 0.0).unwrap(),
            select_random(&g, &zeros(3), 0.0, 5).unwrap(),
            select_optimal(&g, &zeros(3), 0.0, 16).unwrap(),
            select_submodular(&g, &zeros(3), 0.0, &QEstimatorConfig::default()).unwrap(),
        ] {
            assert!(res.inputs.is_empty(), "{}", res.algorithm);
            assert!(res.iterations.is_empty());
            assert!(optimality_bound(&res, Some(0)).is_none());
        }
    }

    #[test]
    fn optimal_cap() {
        let g = cycle3();
        assert!(matches!(select_optimal(&g, &zeros(3), 0.0, 2), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn random_is_reproducible() {
        let g = SignedDigraph::undirected(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]).unwrap();
        let a = select_random(&g, &zeros(4), 0.0, 11).unwrap();
        let b = select_random(&g, &zeros(4), 0.0, 11).unwrap();
        assert_eq!(a, b);
        let opt = select_optimal(&g, &zeros(4), 0.0, 16).unwrap();
        assert!(a.num_inputs() >= opt.num_inputs());
    }

    #[test]
    fn single_step_bound_is_zero() {
        let res = select_submodular(&cycle3(), &zeros(3), 0.25, &QEstimatorConfig::default()).unwrap();
        assert_eq!(res.iterations.len(), 1);
        let b = optimality_bound(&res, Some(1)).unwrap();
        assert_eq!(b.stated, 0.0);
        assert_eq!(b.gap, Some(0));
    }

    #[test]
    fn selection_json_is_one_based() {
        let res = select_optimal(&cycle3(), &zeros(3), 0.0, 16).unwrap();
        let doc = res.to_json();
        assert_eq!(doc["inputs"], serde_json::json!([1]));
        assert_eq!(doc["algorithm"], "optimal");
    }
}
