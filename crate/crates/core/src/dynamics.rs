//! Fixed-step simulation of the pinned network.
//!
//! Input nodes are held at phase 0 and every other node follows
//! `θ̇_i = ω_i − Σ_{(j,i)} K_ji sin(θ_i − θ_j)`. Phases are stored unwrapped,
//! and all diagnostics are evaluated on the raw edge differences
//! `z = D(S)ᵀθ` of the retained edges.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::EdgeInterval;
use crate::graph::{InputSet, NaturalFrequencies, SignedDigraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub step_h: f64,
    pub horizon_t: f64,
    pub detector_tol: f64,
    pub detector_window: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { step_h: 0.01, horizon_t: 200.0, detector_tol: 1e-6, detector_window: 5.0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step_h > 0.0
            && self.horizon_t > self.step_h
            && self.detector_tol > 0.0
            && self.detector_window > 0.0
            && self.horizon_t.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid simulation config {self:?}")))
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon_t / self.step_h).round() as usize
    }
}

/// Recorded run. Row `k` of every series belongs to `times[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    /// Differences on the retained edges, in `edge_map` order.
    pub z: Vec<Vec<f64>>,
    pub theta_dot: Vec<Vec<f64>>,
    pub v_series: Vec<f64>,
    pub sinz_inf_series: Vec<f64>,
    pub inputs: InputSet,
    /// Retained edge position → edge index in the graph.
    pub edge_map: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_theta(&self) -> &[f64] {
        self.theta.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn final_z(&self) -> &[f64] {
        self.z.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// CSV with columns `t, theta_1, …, theta_n`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let n = self.theta.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("theta_{i}")));
        w.write_record(&header)?;
        for (t, th) in self.times.iter().zip(&self.theta) {
            let mut row = vec![t.to_string()];
            row.extend(th.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Right-hand side of the pinned dynamics with precomputed edge lists.
struct VectorField {
    omega: Vec<f64>,
    /// (head, tail, weight) of every retained edge.
    edges: Vec<(usize, usize, f64)>,
}

impl VectorField {
    fn new(g: &SignedDigraph, omega: &NaturalFrequencies, s: &InputSet) -> Self {
        let w = omega.as_vector();
        let omega = (0..g.n()).map(|i| if s.contains(i) { 0.0 } else { w[i] }).collect();
        let edges = g.edges().iter().filter(|e| !s.contains(e.dst)).map(|e| (e.dst, e.src, e.weight)).collect();
        Self { omega, edges }
    }

    fn eval(&self, theta: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.omega);
        for &(h, t, k) in &self.edges {
            out[h] -= k * (theta[h] - theta[t]).sin();
        }
    }
}

pub fn storage_function(z: &[f64]) -> f64 {
    z.iter().map(|x| 1.0 - x.cos()).sum()
}

fn sin_inf(z: &[f64]) -> f64 {
    z.iter().map(|x| x.sin().abs()).fold(0.0, f64::max)
}

/// Classic RK4 at fixed step `h`; every step is recorded.
pub fn simulate(
    g: &SignedDigraph,
    omega: &NaturalFrequencies,
    s: &InputSet,
    theta0: &DVector<f64>,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = g.n();
    if theta0.len() != n {
        return Err(Error::InvalidParameter(format!("theta0 has length {}, expected {n}", theta0.len())));
    }
    if omega.len() != n {
        return Err(Error::FrequencyLength { expected: n, got: omega.len() });
    }
    for v in s.iter() {
        if v >= n {
            return Err(Error::NodeOutOfRange { id: v, n });
        }
        if theta0[v] != 0.0 {
            return Err(Error::PinnedPhaseNonzero { node: v, value: theta0[v] });
        }
    }
    let field = VectorField::new(g, omega, s);
    let edge_map: Vec<usize> = (0..g.m()).filter(|&e| !s.contains(g.edge(e).dst)).collect();
    let steps = cfg.steps();
    let h = cfg.step_h;

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        theta: Vec::with_capacity(steps + 1),
        z: Vec::with_capacity(steps + 1),
        theta_dot: Vec::with_capacity(steps + 1),
        v_series: Vec::with_capacity(steps + 1),
        sinz_inf_series: Vec::with_capacity(steps + 1),
        inputs: s.clone(),
        edge_map,
    };

    let mut theta: Vec<f64> = theta0.iter().copied().collect();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let record = |traj: &mut Trajectory, t: f64, theta: &[f64], dot: Vec<f64>| {
        let z: Vec<f64> = field.edges.iter().map(|&(hd, tl, _)| theta[hd] - theta[tl]).collect();
        traj.times.push(t);
        traj.v_series.push(storage_function(&z));
        traj.sinz_inf_series.push(sin_inf(&z));
        traj.theta.push(theta.to_vec());
        traj.z.push(z);
        traj.theta_dot.push(dot);
    };

    field.eval(&theta, &mut k1);
    record(&mut traj, 0.0, &theta, k1.clone());
    for step in 1..=steps {
        // k1 holds f(θ) from the previous record
        for i in 0..n {
            tmp[i] = theta[i] + 0.5 * h * k1[i];
        }
        field.eval(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = theta[i] + 0.5 * h * k2[i];
        }
        field.eval(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = theta[i] + h * k3[i];
        }
        field.eval(&tmp, &mut k4);
        for i in 0..n {
            theta[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = step as f64 * h;
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { time: t });
        }
        field.eval(&theta, &mut k1);
        record(&mut traj, t, &theta, k1.clone());
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub synced: bool,
    /// Largest deviation seen inside the trailing window.
    pub residual: f64,
}

/// Sup over the trailing window of `dev(row)`; `None` when the run is
/// shorter than the window.
fn trailing_sup(traj: &Trajectory, cfg: &SimConfig, series: &[Vec<f64>], dev: impl Fn(&[f64]) -> f64) -> Option<f64> {
    let t_end = *traj.times.last()?;
    if t_end + 1e-9 < cfg.detector_window {
        return None;
    }
    let start = t_end - cfg.detector_window - 1e-9;
    Some(traj.times.iter().zip(series).filter(|(t, _)| **t >= start).map(|(_, row)| dev(row)).fold(0.0, f64::max))
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

fn spread(x: &[f64]) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if x.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

fn detect(traj: &Trajectory, cfg: &SimConfig, series: &[Vec<f64>]) -> Detection {
    // pinned networks settle at 0; without inputs only a common value is required
    let dev: fn(&[f64]) -> f64 = if traj.inputs.is_empty() { spread } else { inf_norm };
    match trailing_sup(traj, cfg, series, dev) {
        Some(residual) => Detection { synced: residual < cfg.detector_tol, residual },
        None => Detection { synced: false, residual: f64::INFINITY },
    }
}

/// `θ̇ → 0` (or to a common frequency when nothing is pinned).
pub fn detect_frequency_sync(traj: &Trajectory, cfg: &SimConfig) -> Detection {
    detect(traj, cfg, &traj.theta_dot)
}

/// `θ → 0` (or to a common phase when nothing is pinned).
pub fn detect_phase_sync(traj: &Trajectory, cfg: &SimConfig) -> Detection {
    detect(traj, cfg, &traj.theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(with = "crate::serde_f64")]
    pub sup_sin_z_inf: f64,
    pub stayed_in_intervals: bool,
    pub first_violation_time: Option<f64>,
    /// Graph edge index of the first violation.
    pub first_violation_edge: Option<usize>,
}

pub fn monitor_bounds(traj: &Trajectory, g: &SignedDigraph) -> BoundReport {
    let intervals: Vec<EdgeInterval> =
        traj.edge_map.iter().map(|&e| EdgeInterval::for_weight(e, g.edge(e).weight)).collect();
    let sup = traj.sinz_inf_series.iter().copied().fold(0.0, f64::max);
    let violation = traj
        .times
        .iter()
        .zip(&traj.z)
        .find_map(|(t, z)| z.iter().zip(&intervals).find(|(v, iv)| !iv.contains(**v)).map(|(_, iv)| (*t, iv.edge)));
    BoundReport {
        sup_sin_z_inf: sup,
        stayed_in_intervals: violation.is_none(),
        first_violation_time: violation.map(|v| v.0),
        first_violation_edge: violation.map(|v| v.1),
    }
}

/// Discrete check of `∫₀ᵗ ‖sin z‖₂² ≤ ‖D(S)ᵀω(S)‖₂² t / λ²` with `λ = λ_min(R(S))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBoundReport {
    pub integral_at_horizon: f64,
    pub bound_at_horizon: f64,
    pub slack: f64,
    /// Holds at the final time within the slack.
    pub holds_at_horizon: bool,
    /// Holds at every grid time within the slack.
    pub holds_all_t: bool,
    /// Earliest time where the slackened bound fails.
    pub first_failure_time: Option<f64>,
    /// `2V(0)/λ`, the initial-storage term of the dissipation estimate.
    pub storage_offset: f64,
}

/// The integral is a left Riemann sum over the recorded grid.
pub fn energy_bound(traj: &Trajectory, lambda: f64, drive_norm: f64, slack: f64) -> EnergyBoundReport {
    let rate = drive_norm * drive_norm / (lambda * lambda);
    let mut integral = 0.0;
    let mut first_failure = None;
    for k in 1..traj.len() {
        let h = traj.times[k] - traj.times[k - 1];
        integral += traj.z[k - 1].iter().map(|x| x.sin().powi(2)).sum::<f64>() * h;
        if first_failure.is_none() && integral > (1.0 + slack) * rate * traj.times[k] {
            first_failure = Some(traj.times[k]);
        }
    }
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    let bound = rate * t_end;
    EnergyBoundReport {
        integral_at_horizon: integral,
        bound_at_horizon: bound,
        slack,
        holds_at_horizon: integral <= (1.0 + slack) * bound,
        holds_all_t: first_failure.is_none(),
        first_failure_time: first_failure,
        storage_offset: 2.0 * traj.v_series.first().copied().unwrap_or(0.0) / lambda,
    }
}

/// Largest one-step increase of `V` along the run.
pub fn max_storage_increase(traj: &Trajectory) -> f64 {
    traj.v_series.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// Effective weights `K_e cos z_e` on the retained edges.
pub fn effective_weights(g: &SignedDigraph, edge_map: &[usize], z: &[f64]) -> Vec<f64> {
    edge_map.iter().zip(z).map(|(&e, v)| g.edge(e).weight * v.cos()).collect()
}

/// `−D̂(S) K_c D(S)ᵀ` on the non-input nodes, with `K_c = diag(K_e cos z_e)`.
pub fn linearized_laplacian(g: &SignedDigraph, s: &InputSet, edge_map: &[usize], z: &[f64]) -> DMatrix<f64> {
    let free = s.complement(g.n());
    let mut row = vec![usize::MAX; g.n()];
    for (r, &v) in free.iter().enumerate() {
        row[v] = r;
    }
    let w = effective_weights(g, edge_map, z);
    let mut a = DMatrix::zeros(free.len(), free.len());
    for (&e, we) in edge_map.iter().zip(w) {
        let edge = g.edge(e);
        let h = row[edge.dst];
        a[(h, h)] -= we;
        if row[edge.src] != usize::MAX {
            a[(h, row[edge.src])] += we;
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetzlerReport {
    pub samples: usize,
    pub all_weights_positive: bool,
    pub first_nonpositive: Option<(f64, usize)>,
    pub metzler: bool,
    /// Largest |row sum| over nodes without an edge from an input.
    pub max_free_row_sum: f64,
    /// Largest row sum over pinned-adjacent nodes (non-positive when weights are).
    pub max_pinned_row_sum: f64,
}

/// Sample every `stride` steps and inspect the time-varying Laplacian.
pub fn metzler_diagnostic(traj: &Trajectory, g: &SignedDigraph, stride: usize) -> MetzlerReport {
    let s = &traj.inputs;
    let free = s.complement(g.n());
    let fed: Vec<bool> = free.iter().map(|&v| g.incoming(v).iter().any(|&e| s.contains(g.edge(e).src))).collect();
    let mut rep = MetzlerReport {
        samples: 0,
        all_weights_positive: true,
        first_nonpositive: None,
        metzler: true,
        max_free_row_sum: 0.0,
        max_pinned_row_sum: f64::NEG_INFINITY,
    };
    for k in (0..traj.len()).step_by(stride.max(1)) {
        rep.samples += 1;
        let z = &traj.z[k];
        let w = effective_weights(g, &traj.edge_map, z);
        if let Some(pos) = w.iter().position(|x| *x <= 0.0) {
            rep.all_weights_positive = false;
            rep.first_nonpositive.get_or_insert((traj.times[k], traj.edge_map[pos]));
        }
        let a = linearized_laplacian(g, s, &traj.edge_map, z);
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                if r != c && a[(r, c)] < 0.0 {
                    rep.metzler = false;
                }
            }
            let sum = a.row(r).sum();
            if fed[r] {
                rep.max_pinned_row_sum = rep.max_pinned_row_sum.max(sum);
            } else {
                rep.max_free_row_sum = rep.max_free_row_sum.max(sum.abs());
            }
        }
    }
    rep
}

/// JSON sidecar written next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub frequency_sync: Detection,
    pub phase_sync: Detection,
    pub bounds: BoundReport,
    pub metzler: MetzlerReport,
    pub max_storage_increase: f64,
    pub final_theta: Vec<f64>,
}

impl Diagnostics {
    pub fn collect(traj: &Trajectory, g: &SignedDigraph, cfg: &SimConfig) -> Self {
        Self {
            frequency_sync: detect_frequency_sync(traj, cfg),
            phase_sync: detect_phase_sync(traj, cfg),
            bounds: monitor_bounds(traj, g),
            metzler: metzler_diagnostic(traj, g, 100),
            max_storage_increase: max_storage_increase(traj),
            final_theta: traj.final_theta().to_vec(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}
