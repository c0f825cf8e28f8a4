//! Signed directed graphs and their incidence machinery.
//!
//! Node ids are 0-based in the API. The JSON graph format ([`GraphFile`])
//! uses 1-based ids.
//!
//! An edge `e = (j, i)` points from its tail `j` to its head `i`; oscillator
//! `i` is influenced by `j` with weight `K_ji`. The incidence matrix `D` has
//! `+1` at the head and `−1` at the tail of every column, so
//! `z_e = (Dᵀθ)_e = θ_i − θ_j`.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::spectral::ReducedSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(src: usize, dst: usize, weight: f64) -> Self {
        Self { src, dst, weight }
    }
}

/// A signed, weighted digraph with a fixed lexicographic edge order.
///
/// Undirected graphs are stored as symmetric pairs of directed edges with
/// equal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDigraph {
    n: usize,
    edges: Vec<Edge>,
    undirected: bool,
}

impl SignedDigraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>, undirected: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut edges: Vec<Edge> = edges.into_iter().collect();
        for e in &edges {
            for id in [e.src, e.dst] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
            }
            if e.src == e.dst {
                return Err(Error::SelfLoop { node: e.src });
            }
            if !e.weight.is_finite() {
                return Err(Error::NonFiniteWeight { src: e.src, dst: e.dst });
            }
            if e.weight == 0.0 {
                return Err(Error::ZeroWeight { src: e.src, dst: e.dst });
            }
        }
        edges.sort_by_key(|e| (e.src, e.dst));
        for w in edges.windows(2) {
            if (w[0].src, w[0].dst) == (w[1].src, w[1].dst) {
                return Err(Error::DuplicateEdge { src: w[0].src, dst: w[0].dst });
            }
        }
        let g = Self { n, edges, undirected };
        if undirected {
            for e in &g.edges {
                match g.edge_index(e.dst, e.src) {
                    Some(r) if g.edges[r].weight == e.weight => {}
                    _ => return Err(Error::AsymmetricUndirected { src: e.src, dst: e.dst }),
                }
            }
        }
        Ok(g)
    }

    /// Directed graph from `(src, dst, weight)` triples.
    pub fn directed(n: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(n, triples.iter().map(|&(s, d, w)| Edge::new(s, d, w)), false)
    }

    /// Undirected graph from one `(i, j, weight)` triple per undirected edge.
    pub fn undirected(n: usize, pairs: &[(usize, usize, f64)]) -> Result<Self> {
        let edges = pairs.iter().flat_map(|&(i, j, w)| [Edge::new(i, j, w), Edge::new(j, i, w)]);
        Self::new(n, edges, true)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    pub fn edge_index(&self, src: usize, dst: usize) -> Option<usize> {
        self.edges.binary_search_by_key(&(src, dst), |e| (e.src, e.dst)).ok()
    }

    /// `E(i)`: indices of edges whose head is `i`.
    pub fn incoming(&self, i: usize) -> Vec<usize> {
        (0..self.m()).filter(|&e| self.edges[e].dst == i).collect()
    }

    /// `E(S)`: indices of edges whose head is an input node.
    pub fn incoming_to(&self, s: &InputSet) -> Vec<usize> {
        (0..self.m()).filter(|&e| s.contains(self.edges[e].dst)).collect()
    }

    /// Weighted in-degree `Σ_{(j,i) ∈ E(i)} K_ji`.
    pub fn in_strength(&self, i: usize) -> f64 {
        self.edges.iter().filter(|e| e.dst == i).map(|e| e.weight).sum()
    }

    pub fn is_weakly_connected(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut components = self.n;
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.src), find(&mut parent, e.dst));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
        components == 1
    }

    /// True when at most one of `(i,j)`, `(j,i)` is present for every pair.
    pub fn is_oriented(&self) -> bool {
        self.edges.iter().all(|e| self.edge_index(e.dst, e.src).is_none())
    }

    /// Relabel nodes: node `v` becomes `perm[v]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::InvalidParameter("permutation length mismatch".into()));
        }
        let edges = self.edges.iter().map(|e| Edge::new(perm[e.src], perm[e.dst], e.weight));
        Self::new(self.n, edges, self.undirected)
    }
}

/// Natural frequencies `ω` in rad/s, one per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalFrequencies(DVector<f64>);

impl NaturalFrequencies {
    pub fn new(g: &SignedDigraph, omega: Vec<f64>) -> Result<Self> {
        if omega.len() != g.n() {
            return Err(Error::FrequencyLength { expected: g.n(), got: omega.len() });
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("natural frequencies must be finite".into()));
        }
        Ok(Self(DVector::from_vec(omega)))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All frequencies are zero (the rotating-frame homogeneous case).
    pub fn is_homogeneous(&self) -> bool {
        self.0.iter().all(|&w| w == 0.0)
    }
}

/// The set `S` of pinned input nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputSet(BTreeSet<usize>);

impl InputSet {
    pub fn new(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = members.into_iter().collect();
        if let Some(&id) = set.iter().find(|&&id| id >= n) {
            return Err(Error::NodeOutOfRange { id, n });
        }
        Ok(Self(set))
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn all(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn insert(&mut self, v: usize) -> bool {
        self.0.insert(v)
    }

    pub fn with(&self, v: usize) -> Self {
        let mut s = self.clone();
        s.insert(v);
        s
    }

    /// Non-input nodes in ascending order.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|v| !self.contains(*v)).collect()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.0.iter().copied().collect()
    }
}

/// Incidence matrices `D`, `D̂` and the edge weights `K` of a graph.
#[derive(Debug, Clone)]
pub struct IncidenceBundle {
    pub d: DMatrix<f64>,
    pub dhat: DMatrix<f64>,
    /// Diagonal of `K`, one weight per edge column.
    pub k: DVector<f64>,
    /// Column `e` corresponds to edge `(src, dst)`.
    pub columns: Vec<(usize, usize)>,
}

impl IncidenceBundle {
    pub fn k_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.k)
    }
}

pub fn incidence_bundle(g: &SignedDigraph) -> IncidenceBundle {
    let (n, m) = (g.n(), g.m());
    let mut d = DMatrix::zeros(n, m);
    let mut dhat = DMatrix::zeros(n, m);
    for (e, edge) in g.edges().iter().enumerate() {
        d[(edge.dst, e)] = 1.0;
        d[(edge.src, e)] = -1.0;
        dhat[(edge.dst, e)] = 1.0;
    }
    IncidenceBundle {
        d,
        dhat,
        k: DVector::from_iterator(m, g.edges().iter().map(|e| e.weight)),
        columns: g.edges().iter().map(|e| (e.src, e.dst)).collect(),
    }
}

/// Re-indexing of nodes and edges around an input set.
///
/// Edge blocks follow the order `E(S̄,S̄)`, `E(S,S̄)`, `E(S̄,S)`, `E(S,S)`;
/// within a block edges keep their canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionIndex {
    pub node_order: Vec<usize>,
    pub edge_order: Vec<usize>,
    pub block_sizes: [usize; 4],
}

impl PartitionIndex {
    pub fn block(&self, b: usize) -> &[usize] {
        let start: usize = self.block_sizes[..b].iter().sum();
        &self.edge_order[start..start + self.block_sizes[b]]
    }
}

pub fn partition(g: &SignedDigraph, s: &InputSet) -> PartitionIndex {
    let mut node_order = s.complement(g.n());
    node_order.extend(s.iter());
    let mut blocks: [Vec<usize>; 4] = Default::default();
    for (e, edge) in g.edges().iter().enumerate() {
        let b = match (s.contains(edge.src), s.contains(edge.dst)) {
            (false, false) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (true, true) => 3,
        };
        blocks[b].push(e);
    }
    let block_sizes = [blocks[0].len(), blocks[1].len(), blocks[2].len(), blocks[3].len()];
    PartitionIndex { node_order, edge_order: blocks.concat(), block_sizes }
}

/// Restrict the network to its non-input nodes.
///
/// Rows of input nodes and columns of edges into input nodes are removed.
/// Retained nodes and edges keep ascending canonical order; `node_map` and
/// `edge_map` point back into `g`.
pub fn reduce(g: &SignedDigraph, omega: &NaturalFrequencies, s: &InputSet) -> ReducedSystem {
    let node_map = s.complement(g.n());
    let mut row_of = vec![None; g.n()];
    for (r, &v) in node_map.iter().enumerate() {
        row_of[v] = Some(r);
    }
    let edge_map: Vec<usize> = (0..g.m()).filter(|&e| !s.contains(g.edge(e).dst)).collect();
    let (rows, cols) = (node_map.len(), edge_map.len());

    let mut ds = DMatrix::zeros(rows, cols);
    let mut dhat_s = DMatrix::zeros(rows, cols);
    for (c, &e) in edge_map.iter().enumerate() {
        let edge = g.edge(e);
        let head = row_of[edge.dst].expect("retained edge has a non-input head");
        ds[(head, c)] = 1.0;
        dhat_s[(head, c)] = 1.0;
        if let Some(tail) = row_of[edge.src] {
            ds[(tail, c)] = -1.0;
        }
    }
    let k_s = DVector::from_iterator(cols, edge_map.iter().map(|&e| g.edge(e).weight));
    let omega_s = DVector::from_iterator(rows, node_map.iter().map(|&v| omega.as_vector()[v]));
    ReducedSystem::assemble(ds, dhat_s, k_s, omega_s, node_map, edge_map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GraphKind {
    #[serde(rename = "undirected-er")]
    UndirectedEr,
    #[serde(rename = "directed-oriented")]
    DirectedOriented,
    #[serde(rename = "directed-oriented-cycle")]
    DirectedCycle,
    #[serde(rename = "tree")]
    Tree,
}

impl GraphKind {
    pub const ALL: [GraphKind; 4] =
        [GraphKind::UndirectedEr, GraphKind::DirectedOriented, GraphKind::DirectedCycle, GraphKind::Tree];

    pub fn name(self) -> &'static str {
        match self {
            GraphKind::UndirectedEr => "undirected-er",
            GraphKind::DirectedOriented => "directed-oriented",
            GraphKind::DirectedCycle => "directed-oriented-cycle",
            GraphKind::Tree => "tree",
        }
    }
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GraphKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown graph kind '{s}'")))
    }
}

/// Parameters of a random graph ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: GraphKind,
    pub n: usize,
    #[serde(default = "default_edge_prob")]
    pub edge_prob: f64,
    #[serde(default = "default_weight_range")]
    pub weight_range: (f64, f64),
    #[serde(default)]
    pub neg_fraction: f64,
}

pub fn default_edge_prob() -> f64 {
    0.3
}

pub fn default_weight_range() -> (f64, f64) {
    (1.0, 5.0)
}

impl EnsembleSpec {
    pub fn new(kind: GraphKind, n: usize) -> Self {
        Self { kind, n, edge_prob: default_edge_prob(), weight_range: default_weight_range(), neg_fraction: 0.0 }
    }

    pub fn with_neg_fraction(mut self, f: f64) -> Self {
        self.neg_fraction = f;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let min_n = if self.kind == GraphKind::DirectedCycle { 3 } else { 2 };
        if self.n < min_n {
            return Err(Error::InvalidParameter(format!("{} graphs need at least {min_n} nodes", self.kind)));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::InvalidParameter("edge_prob must lie in [0,1]".into()));
        }
        let (lo, hi) = self.weight_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidParameter("weight_range must satisfy 0 < lo <= hi".into()));
        }
        if !(0.0..=1.0).contains(&self.neg_fraction) {
            return Err(Error::InvalidParameter("neg_fraction must lie in [0,1]".into()));
        }
        Ok(())
    }
}

const MAX_RETRIES: usize = 1000;

/// Draw a weakly connected signed graph from the ensemble.
///
/// Weights are uniform on `weight_range`; afterwards `round(neg_fraction · m)`
/// edges, chosen uniformly, are negated. For undirected graphs `m` counts
/// undirected edges and both orientations share the sign.
pub fn generate_ensemble(spec: &EnsembleSpec, rng_seed: u64) -> Result<SignedDigraph> {
    spec.validate()?;
    let mut rng = seed::rng(rng_seed);
    for _ in 0..MAX_RETRIES {
        let pairs = match spec.kind {
            GraphKind::UndirectedEr | GraphKind::DirectedOriented => {
                let mut pairs = Vec::new();
                for i in 0..spec.n {
                    for j in i + 1..spec.n {
                        if rng.random::<f64>() < spec.edge_prob {
                            pairs.push((i, j));
                        }
                    }
                }
                if spec.kind == GraphKind::DirectedOriented {
                    for p in pairs.iter_mut() {
                        if rng.random::<bool>() {
                            *p = (p.1, p.0);
                        }
                    }
                }
                pairs
            }
            GraphKind::DirectedCycle => (0..spec.n).map(|i| (i, (i + 1) % spec.n)).collect(),
            GraphKind::Tree => {
                let mut labels: Vec<usize> = (0..spec.n).collect();
                labels.shuffle(&mut rng);
                (1..spec.n)
                    .map(|k| {
                        let parent = labels[rng.random_range(0..k)];
                        let child = labels[k];
                        if rng.random::<bool>() {
                            (parent, child)
                        } else {
                            (child, parent)
                        }
                    })
                    .collect()
            }
        };
        let (lo, hi) = spec.weight_range;
        let mut weights: Vec<f64> =
            pairs.iter().map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) }).collect();
        let negatives = (spec.neg_fraction * pairs.len() as f64).round() as usize;
        for idx in index::sample(&mut rng, pairs.len(), negatives.min(pairs.len())) {
            weights[idx] = -weights[idx];
        }
        let g = if spec.kind == GraphKind::UndirectedEr {
            let triples: Vec<_> = pairs.iter().zip(&weights).map(|(&(i, j), &w)| (i, j, w)).collect();
            SignedDigraph::undirected(spec.n, &triples)?
        } else {
            let edges = pairs.iter().zip(&weights).map(|(&(i, j), &w)| Edge::new(i, j, w));
            SignedDigraph::new(spec.n, edges, false)?
        };
        if g.is_weakly_connected() {
            return Ok(g);
        }
    }
    Err(Error::Unattainable { retries: MAX_RETRIES })
}

/// Uniform natural frequencies on `[lo, hi]`.
pub fn random_frequencies(n: usize, range: (f64, f64), rng_seed: u64) -> NaturalFrequencies {
    let mut rng = seed::rng(rng_seed);
    let (lo, hi) = range;
    let v = (0..n).map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) }).collect();
    NaturalFrequencies(DVector::from_vec(v))
}

/// On-disk graph description with 1-based node ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    #[serde(default)]
    pub undirected: bool,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: usize,
    pub dst: usize,
    pub w: f64,
}

impl GraphFile {
    pub fn from_graph(g: &SignedDigraph, omega: Option<&NaturalFrequencies>) -> Self {
        Self {
            n: g.n(),
            undirected: g.is_undirected(),
            edges: g.edges().iter().map(|e| EdgeRecord { src: e.src + 1, dst: e.dst + 1, w: e.weight }).collect(),
            omega: omega.map(|w| w.as_vector().iter().copied().collect()),
        }
    }

    pub fn to_graph(&self) -> Result<(SignedDigraph, NaturalFrequencies)> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for r in &self.edges {
            for id in [r.src, r.dst] {
                if id == 0 || id > self.n {
                    return Err(Error::NodeOutOfRange { id, n: self.n });
                }
            }
            edges.push(Edge::new(r.src - 1, r.dst - 1, r.w));
        }
        let g = SignedDigraph::new(self.n, edges, self.undirected)?;
        let omega = match &self.omega {
            Some(w) => NaturalFrequencies::new(&g, w.clone())?,
            None => NaturalFrequencies::zeros(g.n()),
        };
        Ok((g, omega))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Undirected simple graph underlying `g`, as sorted pairs `(min, max)`.
pub(crate) fn underlying_pairs(g: &SignedDigraph) -> Vec<(usize, usize)> {
    let set: HashSet<(usize, usize)> = g.edges().iter().map(|e| (e.src.min(e.dst), e.src.max(e.dst))).collect();
    let mut v: Vec<_> = set.into_iter().collect();
    v.sort_unstable();
    v
}
