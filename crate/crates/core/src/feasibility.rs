//! Admissible initial phases.
//!
//! Every edge carries an open interval for its phase difference
//! `z_e = θ_head − θ_tail`: `(−π/2, π/2)` for positive weights and
//! `(π/2, 3π/2)` for negative ones. Intervals live on the real line.
//!
//! The constraints `lo_e < θ_h − θ_t < hi_e` form a system of difference
//! constraints, so feasibility is decided exactly by Bellman-Ford on the
//! constraint graph. The largest uniform slack is found by bisection, which
//! turns the closed-interval test into one for the open intervals and yields
//! an interior witness.
//!
//! The sign-parity checkers implement the sufficient path conditions as
//! stated; they are reported next to the exact verdict, not instead of it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{underlying_pairs, InputSet, SignedDigraph};
use crate::seed;

pub const DEFAULT_MARGIN: f64 = 0.05;
pub const DEFAULT_PATH_CAP: usize = 12;

const BF_TOL: f64 = 1e-12;
const SLACK_TOL: f64 = 1e-9;
const BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeInterval {
    pub edge: usize,
    pub lo: f64,
    pub hi: f64,
}

impl EdgeInterval {
    pub fn for_weight(edge: usize, weight: f64) -> Self {
        if weight > 0.0 {
            Self { edge, lo: -FRAC_PI_2, hi: FRAC_PI_2 }
        } else {
            Self { edge, lo: FRAC_PI_2, hi: 3.0 * FRAC_PI_2 }
        }
    }

    pub fn contains(&self, z: f64) -> bool {
        self.lo < z && z < self.hi
    }

    /// Distance of `z` to the nearer bound; negative outside.
    pub fn slack(&self, z: f64) -> f64 {
        (z - self.lo).min(self.hi - z)
    }
}

pub fn assumption1_intervals(g: &SignedDigraph) -> Vec<EdgeInterval> {
    g.edges().iter().enumerate().map(|(e, edge)| EdgeInterval::for_weight(e, edge.weight)).collect()
}

/// One interval constraint on `θ_head − θ_tail`.
#[derive(Debug, Clone, Copy)]
struct Constraint {
    head: usize,
    tail: usize,
    interval: EdgeInterval,
}

/// Difference-constraint system over `n` phases, optionally with some
/// phases fixed to zero.
struct DifferenceSystem {
    n: usize,
    constraints: Vec<Constraint>,
    pinned: Vec<usize>,
}

impl DifferenceSystem {
    /// Solution with every interval shrunk by `shrink`, or `None`.
    fn solve(&self, shrink: f64) -> Option<Vec<f64>> {
        // node n is the zero anchor for pinned phases
        let nodes = self.n + 1;
        let mut arcs: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * self.constraints.len() + 2 * self.pinned.len());
        for c in &self.constraints {
            arcs.push((c.tail, c.head, c.interval.hi - shrink));
            arcs.push((c.head, c.tail, -(c.interval.lo + shrink)));
        }
        for &s in &self.pinned {
            arcs.push((s, self.n, 0.0));
            arcs.push((self.n, s, 0.0));
        }
        let mut dist = vec![0.0; nodes];
        for round in 0..=nodes {
            let mut changed = false;
            for &(u, v, w) in &arcs {
                if dist[u] + w < dist[v] - BF_TOL {
                    dist[v] = dist[u] + w;
                    changed = true;
                }
            }
            if !changed {
                let offset = if self.pinned.is_empty() { dist[0] } else { dist[self.n] };
                return Some(dist[..self.n].iter().map(|x| x - offset).collect());
            }
            if round == nodes {
                break;
            }
        }
        None
    }

    fn slack(&self, theta: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.interval.slack(theta[c.head] - theta[c.tail])).fold(f64::INFINITY, f64::min)
    }
}

/// Outcome of the exact feasibility test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpReport {
    pub feasible: bool,
    pub witness: Option<Vec<f64>>,
    /// Smallest distance of the witness to an interval bound.
    #[serde(with = "crate::serde_f64::option")]
    pub margin: Option<f64>,
    /// Largest uniform shrink that stays feasible.
    #[serde(with = "crate::serde_f64")]
    pub max_slack: f64,
}

fn decide(system: &DifferenceSystem, margin: f64) -> Result<LpReport> {
    if !(0.0..FRAC_PI_4).contains(&margin) {
        return Err(Error::InvalidParameter("margin must lie in [0, π/4)".into()));
    }
    let infeasible = |max_slack| LpReport { feasible: false, witness: None, margin: None, max_slack };
    if system.constraints.is_empty() {
        let theta = vec![0.0; system.n];
        return Ok(LpReport {
            feasible: true,
            witness: Some(theta),
            margin: Some(f64::INFINITY),
            max_slack: f64::INFINITY,
        });
    }
    if system.solve(margin).is_none() {
        let max_slack = if system.solve(0.0).is_some() { 0.0 } else { f64::NEG_INFINITY };
        return Ok(infeasible(max_slack));
    }
    let (mut lo, mut hi) = (margin, FRAC_PI_2);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if system.solve(mid).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let max_slack = lo;
    if max_slack <= SLACK_TOL {
        return Ok(infeasible(max_slack));
    }
    let shrink = 0.5 * (margin + max_slack);
    let theta = system.solve(shrink).or_else(|| system.solve(margin)).expect("feasible at margin");
    let slack = system.slack(&theta);
    Ok(LpReport { feasible: true, witness: Some(theta), margin: Some(slack), max_slack })
}

/// Exact test for phases with every edge difference inside its interval
/// shrunk by `margin`.
pub fn lp_feasibility_oracle(g: &SignedDigraph, margin: f64) -> Result<LpReport> {
    let constraints = g
        .edges()
        .iter()
        .zip(assumption1_intervals(g))
        .map(|(e, interval)| Constraint { head: e.dst, tail: e.src, interval })
        .collect();
    decide(&DifferenceSystem { n: g.n(), constraints, pinned: Vec::new() }, margin)
}

/// Same test for the pinned network: input phases are fixed at zero and
/// only the retained edges (those entering non-input nodes) are constrained.
pub fn lp_feasibility_pinned(g: &SignedDigraph, s: &InputSet, margin: f64) -> Result<LpReport> {
    let constraints = g
        .edges()
        .iter()
        .zip(assumption1_intervals(g))
        .filter(|(e, _)| !s.contains(e.dst))
        .map(|(e, interval)| Constraint { head: e.dst, tail: e.src, interval })
        .collect();
    decide(&DifferenceSystem { n: g.n(), constraints, pinned: s.to_vec() }, margin)
}

/// Random admissible initial phases with `θ_i = 0` for `i ∈ S`.
///
/// Starts from the oracle witness and adds uniform noise, rejecting draws
/// that leave the shrunk intervals. The noise amplitude halves after every
/// 100 rejections.
pub fn sample_initial_phases(g: &SignedDigraph, s: &InputSet, rng_seed: u64, margin: f64) -> Result<DVector<f64>> {
    if !(margin > 0.0) {
        return Err(Error::InvalidParameter("margin must be positive".into()));
    }
    let report = lp_feasibility_pinned(g, s, margin)?;
    let witness = match report.witness {
        Some(w) if report.feasible => w,
        _ => return Err(Error::Infeasible),
    };
    let intervals: Vec<(usize, usize, EdgeInterval)> = g
        .edges()
        .iter()
        .zip(assumption1_intervals(g))
        .filter(|(e, _)| !s.contains(e.dst))
        .map(|(e, iv)| (e.dst, e.src, iv))
        .collect();
    let admissible = |theta: &[f64]| intervals.iter().all(|(h, t, iv)| iv.slack(theta[*h] - theta[*t]) >= margin);
    let mut rng = seed::rng(rng_seed);
    let mut amplitude = report.margin.unwrap_or(0.0).min(PI);
    let free = s.complement(g.n());
    let mut attempts = 0usize;
    while amplitude > 1e-12 {
        let mut theta = witness.clone();
        for &v in &free {
            theta[v] += rng.random_range(-amplitude..=amplitude);
        }
        if admissible(&theta) {
            return Ok(DVector::from_vec(theta));
        }
        attempts += 1;
        if attempts % 100 == 0 {
            amplitude *= 0.5;
        }
    }
    Ok(DVector::from_vec(witness))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParityMethod {
    Tree,
    Cycle,
    Paths,
}

/// One violated parity condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDiagnostic {
    /// The edge endpoints `(i, j)`.
    pub pair: (usize, usize),
    pub sign: i8,
    /// Alternative path from `i` to `j`; empty for reciprocal-pair conflicts.
    pub path: Vec<usize>,
    pub positives: usize,
    pub negatives: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityReport {
    pub verdict: bool,
    pub method: ParityMethod,
    pub failures: Vec<PathDiagnostic>,
}

/// Parity condition for one alternative path with `d = E_p − E_n`.
pub fn path_parity_ok(sign_positive: bool, positives: usize, negatives: usize) -> bool {
    let d = positives as i64 - negatives as i64;
    let fwd = d >= 0 && {
        let r = d.rem_euclid(4);
        if sign_positive {
            r <= 1
        } else {
            r >= 2
        }
    };
    let back = d <= 0 && {
        let r = (-d).rem_euclid(4);
        if sign_positive {
            r == 1 || r == 3
        } else {
            r == 1 || r == 2
        }
    };
    fwd || back
}

/// True when `g` is one directed cycle through all of its nodes.
pub fn is_directed_cycle(g: &SignedDigraph) -> bool {
    let n = g.n();
    if n < 3 || g.m() != n || !g.is_oriented() {
        return false;
    }
    let mut next = vec![usize::MAX; n];
    for e in g.edges() {
        if next[e.src] != usize::MAX {
            return false;
        }
        next[e.src] = e.dst;
    }
    let mut v = 0;
    for _ in 0..n - 1 {
        v = next[v];
        if v == 0 || v == usize::MAX {
            return false;
        }
    }
    next[v] == 0
}

pub fn is_tree(g: &SignedDigraph) -> bool {
    g.is_oriented() && g.m() + 1 == g.n() && g.is_weakly_connected()
        || g.is_undirected() && underlying_pairs(g).len() + 1 == g.n() && g.is_weakly_connected()
}

/// Sign-count condition for a directed cycle.
pub fn check_cycle_parity(g: &SignedDigraph) -> Result<bool> {
    if !is_directed_cycle(g) {
        return Err(Error::NotACycle);
    }
    let p = g.edges().iter().filter(|e| e.weight > 0.0).count() as i64;
    let n = g.m() as i64 - p;
    Ok(cycle_parity(p, n))
}

fn cycle_parity(p: i64, n: i64) -> bool {
    (p - n >= 1 && matches!((p - n) % 4, 1 | 2)) || (n - p >= 2 && matches!((n - p) % 4, 2 | 3))
}

/// Path-parity check over every edge of an undirected or oriented graph.
///
/// Cycles use the cycle condition and trees pass vacuously; other graphs
/// enumerate simple alternative paths, so `n` is capped.
pub fn check_parity_general(g: &SignedDigraph, cap: usize) -> Result<ParityReport> {
    if is_directed_cycle(g) {
        let verdict = check_cycle_parity(g)?;
        let p = g.edges().iter().filter(|e| e.weight > 0.0).count();
        let failures = if verdict {
            Vec::new()
        } else {
            vec![PathDiagnostic {
                pair: (g.edge(0).src, g.edge(0).dst),
                sign: g.edge(0).weight.signum() as i8,
                path: Vec::new(),
                positives: p,
                negatives: g.m() - p,
                reason: "cycle sign counts violate the parity condition".into(),
            }]
        };
        return Ok(ParityReport { verdict, method: ParityMethod::Cycle, failures });
    }

    let mut failures = Vec::new();
    // reciprocal pairs: one undirected edge, provided the signs agree and are positive
    let mut sign = std::collections::HashMap::new();
    for &(i, j) in &underlying_pairs(g) {
        let fwd = g.edge_index(i, j).map(|e| g.edge(e).weight);
        let back = g.edge_index(j, i).map(|e| g.edge(e).weight);
        let s = match (fwd, back) {
            (Some(a), Some(b)) => {
                if a.signum() != b.signum() {
                    failures.push(reciprocal_failure(i, j, a, "reciprocal edges with different signs"));
                } else if a < 0.0 {
                    failures.push(reciprocal_failure(i, j, a, "negative reciprocal pair"));
                }
                a.signum()
            }
            (Some(a), None) | (None, Some(a)) => a.signum(),
            (None, None) => unreachable!(),
        };
        sign.insert((i, j), s > 0.0);
    }

    if is_tree(g) {
        let verdict = failures.is_empty();
        return Ok(ParityReport { verdict, method: ParityMethod::Tree, failures });
    }
    if g.n() > cap {
        return Err(Error::CapExceeded { what: "path-parity enumeration", n: g.n(), cap });
    }

    let n = g.n();
    let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n];
    for (&(i, j), &pos) in &sign {
        adj[i].push((j, pos));
        adj[j].push((i, pos));
    }
    for a in adj.iter_mut() {
        a.sort_unstable_by_key(|x| x.0);
    }
    let mut pairs: Vec<_> = sign.iter().map(|(&k, &v)| (k, v)).collect();
    pairs.sort_unstable_by_key(|x| x.0);
    for ((i, j), positive) in pairs {
        if let Some(path) = first_violating_path(&adj, i, j, positive) {
            let (p, q) = path_counts(&adj, &path);
            failures.push(PathDiagnostic {
                pair: (i, j),
                sign: if positive { 1 } else { -1 },
                path,
                positives: p,
                negatives: q,
                reason: "alternative path violates the parity condition".into(),
            });
        }
    }
    Ok(ParityReport { verdict: failures.is_empty(), method: ParityMethod::Paths, failures })
}

fn reciprocal_failure(i: usize, j: usize, w: f64, reason: &str) -> PathDiagnostic {
    PathDiagnostic {
        pair: (i, j),
        sign: w.signum() as i8,
        path: Vec::new(),
        positives: 0,
        negatives: 0,
        reason: reason.into(),
    }
}

fn path_counts(adj: &[Vec<(usize, bool)>], path: &[usize]) -> (usize, usize) {
    let mut p = 0;
    for w in path.windows(2) {
        let pos = adj[w[0]].iter().find(|x| x.0 == w[1]).expect("path edge").1;
        p += pos as usize;
    }
    (p, path.len() - 1 - p)
}

/// DFS over simple paths `i → j` of length ≥ 2; returns the first violation.
fn first_violating_path(adj: &[Vec<(usize, bool)>], i: usize, j: usize, positive: bool) -> Option<Vec<usize>> {
    fn dfs(
        adj: &[Vec<(usize, bool)>],
        v: usize,
        target: usize,
        positive: bool,
        visited: &mut [bool],
        path: &mut Vec<usize>,
        counts: (usize, usize),
    ) -> bool {
        for &(w, pos) in &adj[v] {
            if visited[w] {
                continue;
            }
            let c = if pos { (counts.0 + 1, counts.1) } else { (counts.0, counts.1 + 1) };
            if w == target {
                if path.len() >= 2 && !path_parity_ok(positive, c.0, c.1) {
                    path.push(w);
                    return true;
                }
                continue;
            }
            visited[w] = true;
            path.push(w);
            if dfs(adj, w, target, positive, visited, path, c) {
                return true;
            }
            path.pop();
            visited[w] = false;
        }
        false
    }
    let mut visited = vec![false; adj.len()];
    visited[i] = true;
    let mut path = vec![i];
    dfs(adj, i, j, positive, &mut visited, &mut path, (0, 0)).then_some(path)
}

/// Parity verdict next to the exact verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub parity: Option<ParityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity_error: Option<String>,
    pub lp: LpReport,
    pub intervals: Vec<EdgeInterval>,
}

pub fn check(g: &SignedDigraph, margin: f64, path_cap: usize) -> Result<FeasibilityReport> {
    let lp = lp_feasibility_oracle(g, margin)?;
    let (parity, parity_error) = match check_parity_general(g, path_cap) {
        Ok(p) => (Some(p), None),
        Err(e @ Error::CapExceeded { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(FeasibilityReport { parity, parity_error, lp, intervals: assumption1_intervals(g) })
}

/// Directed cycle `0 → 1 → … → n−1 → 0` with the given edge signs.
pub fn signed_cycle(signs: &[bool]) -> Result<SignedDigraph> {
    let n = signs.len();
    let triples: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, if signs[i] { 1.0 } else { -1.0 })).collect();
    SignedDigraph::directed(n, &triples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleAuditRow {
    pub length: usize,
    /// Edge signs in cycle order, `+1` or `−1`.
    pub signs: Vec<i8>,
    pub parity: bool,
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleAudit {
    pub rows: Vec<CycleAuditRow>,
    /// Rows where the parity condition holds but the oracle finds no phases.
    pub discrepancies: Vec<CycleAuditRow>,
}

/// Compare the cycle parity condition with the exact oracle on every sign
/// pattern of every cycle length in `lengths`.
pub fn audit_signed_cycles(lengths: RangeInclusive<usize>, margin: f64) -> Result<CycleAudit> {
    let mut rows = Vec::new();
    for len in lengths {
        for mask in 0u32..(1 << len) {
            let signs: Vec<bool> = (0..len).map(|b| mask & (1 << b) == 0).collect();
            let g = signed_cycle(&signs)?;
            rows.push(CycleAuditRow {
                length: len,
                signs: signs.iter().map(|&s| if s { 1 } else { -1 }).collect(),
                parity: check_cycle_parity(&g)?,
                oracle: lp_feasibility_oracle(&g, margin)?.feasible,
            });
        }
    }
    let discrepancies = rows.iter().filter(|r| r.parity && !r.oracle).cloned().collect();
    Ok(CycleAudit { rows, discrepancies })
}

/// Write one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(signs: &[bool]) -> SignedDigraph {
        signed_cycle(signs).unwrap()
    }

    #[test]
    fn intervals_by_sign() {
        let g = SignedDigraph::directed(3, &[(0, 1, 2.0), (1, 2, -1.0)]).unwrap();
        let iv = assumption1_intervals(&g);
        assert_eq!((iv[0].lo, iv[0].hi), (-FRAC_PI_2, FRAC_PI_2));
        assert_eq!((iv[1].lo, iv[1].hi), (FRAC_PI_2, 3.0 * FRAC_PI_2));
        let lone = SignedDigraph::directed(2, &[]).unwrap();
        assert!(assumption1_intervals(&lone).is_empty());
    }

    #[test]
    fn oracle_examples() {
        let r = lp_feasibility_oracle(&cycle(&[true, true, true]), DEFAULT_MARGIN).unwrap();
        assert!(r.feasible);
        assert!(r.witness.unwrap().iter().all(|x| x.abs() < 1e-9));

        let two = SignedDigraph::directed(2, &[(0, 1, 1.0), (1, 0, -1.0)]).unwrap();
        assert!(!lp_feasibility_oracle(&two, DEFAULT_MARGIN).unwrap().feasible);
        assert!(!lp_feasibility_oracle(&two, 0.0).unwrap().feasible);

        let tree = SignedDigraph::directed(4, &[(0, 1, -1.0), (2, 1, -3.0), (2, 3, 2.0)]).unwrap();
        let r = lp_feasibility_oracle(&tree, DEFAULT_MARGIN).unwrap();
        assert!(r.feasible && r.margin.unwrap() > DEFAULT_MARGIN);
    }

    #[test]
    fn open_intervals_need_positive_slack() {
        // positive cycle sum forces z into a single point: z1 + z2 = 0 with
        // z1 ∈ (−π/2, π/2) from the positive edge and z2 ∈ (π/2, 3π/2)
        // feasible only at the closed boundary z1 = −π/2
        let g = SignedDigraph::directed(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, -1.0)]).unwrap();
        // sum z = 0, lower bounds −π/2 − π/2 + π/2 = −π/2 < 0 < upper → feasible
        assert!(lp_feasibility_oracle(&g, 0.0).unwrap().feasible);
        let g = SignedDigraph::directed(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(lp_feasibility_oracle(&g, 0.0).unwrap().feasible);
        // z and −z both in (π/2, 3π/2) is impossible even at the boundary
        let g = SignedDigraph::directed(2, &[(0, 1, -1.0), (1, 0, -1.0)]).unwrap();
        assert!(!lp_feasibility_oracle(&g, 0.0).unwrap().feasible);
    }

    #[test]
    fn margin_range_is_checked() {
        let g = cycle(&[true, true, true]);
        assert!(lp_feasibility_oracle(&g, -0.1).is_err());
        assert!(lp_feasibility_oracle(&g, FRAC_PI_4).is_err());
    }

    #[test]
    fn cycle_parity_arithmetic() {
        let mut ten = vec![true; 10];
        ten[0] = false;
        ten[3] = false;
        ten[6] = false;
        assert!(!check_cycle_parity(&cycle(&ten)).unwrap());
        let mut five = vec![true; 5];
        five[2] = false;
        assert!(!check_cycle_parity(&cycle(&five)).unwrap());
        let mut six = vec![true; 6];
        six[0] = false;
        assert!(!check_cycle_parity(&cycle(&six)).unwrap());
        assert!(check_cycle_parity(&cycle(&[true, true, false])).unwrap());
        assert!(check_cycle_parity(&cycle(&[false, false, false])).unwrap());
        assert!(check_cycle_parity(&cycle(&[true, true, true, false])).unwrap());

        let path = SignedDigraph::directed(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert!(matches!(check_cycle_parity(&path), Err(Error::NotACycle)));
    }

    #[test]
    fn general_parity_examples() {
        let tree = SignedDigraph::directed(4, &[(0, 1, -1.0), (2, 1, 1.0), (3, 2, -2.0)]).unwrap();
        let r = check_parity_general(&tree, DEFAULT_PATH_CAP).unwrap();
        assert!(r.verdict);
        assert_eq!(r.method, ParityMethod::Tree);

        let r = check_parity_general(&cycle(&[true, true, true, false]), DEFAULT_PATH_CAP).unwrap();
        assert!(r.verdict);
        assert_eq!(r.method, ParityMethod::Cycle);

        let pos3 = cycle(&[true, true, true]);
        let r = check_parity_general(&pos3, DEFAULT_PATH_CAP).unwrap();
        assert!(!r.verdict);
        assert!(lp_feasibility_oracle(&pos3, DEFAULT_MARGIN).unwrap().feasible);
    }

    #[test]
    fn parity_condition_table() {
        // positive edge: d mod 4 ∈ {0,1} forward, {1,3} backward
        assert!(path_parity_ok(true, 1, 0));
        assert!(!path_parity_ok(true, 2, 0));
        assert!(path_parity_ok(true, 0, 1));
        assert!(!path_parity_ok(true, 0, 2));
        assert!(path_parity_ok(true, 1, 1));
        // negative edge: {2,3} forward, {1,2} backward
        assert!(path_parity_ok(false, 2, 0));
        assert!(!path_parity_ok(false, 1, 0));
        assert!(path_parity_ok(false, 0, 2));
        assert!(!path_parity_ok(false, 0, 3));
        assert!(!path_parity_ok(false, 1, 1));
    }

    #[test]
    fn general_parity_enumerates_paths() {
        // square 0-1-2-3-0 plus chord 0-2, all positive and undirected
        let g =
            SignedDigraph::undirected(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0), (0, 2, 1.0)]).unwrap();
        let r = check_parity_general(&g, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(r.method, ParityMethod::Paths);
        assert!(!r.verdict);
        let f = &r.failures[0];
        assert_eq!(f.positives + f.negatives, f.path.len() - 1);
        assert!(!path_parity_ok(f.sign > 0, f.positives, f.negatives));
        assert!(matches!(check_parity_general(&g, 3), Err(Error::CapExceeded { .. })));

        let g = SignedDigraph::undirected(3, &[(0, 1, -1.0), (1, 2, 1.0)]).unwrap();
        let r = check_parity_general(&g, DEFAULT_PATH_CAP).unwrap();
        assert!(!r.verdict);
        assert_eq!(r.failures[0].reason, "negative reciprocal pair");
    }

    #[test]
    fn sampler_examples() {
        let g = SignedDigraph::undirected(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 3.0)]).unwrap();
        let s = InputSet::new(4, [2]).unwrap();
        let a = sample_initial_phases(&g, &s, 3, DEFAULT_MARGIN).unwrap();
        assert_eq!(a, sample_initial_phases(&g, &s, 3, DEFAULT_MARGIN).unwrap());
        assert_eq!(a[2], 0.0);
        for e in g.edges() {
            assert!((a[e.dst] - a[e.src]).abs() < FRAC_PI_2 - DEFAULT_MARGIN);
        }

        let two = SignedDigraph::directed(2, &[(0, 1, 1.0), (1, 0, -1.0)]).unwrap();
        assert!(matches!(sample_initial_phases(&two, &InputSet::empty(), 0, DEFAULT_MARGIN), Err(Error::Infeasible)));
        assert!(sample_initial_phases(&g, &s, 0, 0.0).is_err());
    }

    #[test]
    fn pinned_oracle_ignores_edges_into_inputs() {
        let two = SignedDigraph::directed(2, &[(0, 1, 1.0), (1, 0, -1.0)]).unwrap();
        let r = lp_feasibility_pinned(&two, &InputSet::new(2, [0]).unwrap(), DEFAULT_MARGIN).unwrap();
        assert!(r.feasible);
        assert_eq!(r.witness.unwrap()[0], 0.0);
    }
}
