//! Core network types: validated directed graphs on species, positive rate
//! assignments, and the pairing of both into a kinetic system.
//!
//! Species are numbered `1..=n` in the public API, matching the on-disk
//! formats.  Matrices and vectors use the natural 0-based layout, so row `i`
//! and column `j` of a matrix refer to species `i + 1` and `j + 1`.

use nalgebra::DMatrix;
use thiserror::Error;

/// Errors from network construction and manipulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("a hyperchain needs at least one species")]
    NoSpecies,
    #[error("a hyperchain needs at least one edge")]
    EmptyEdgeSet,
    #[error("species {0} is not incident to any edge")]
    IsolatedVertex(usize),
    #[error("edge ({tail}, {head}) is out of range for {n} species")]
    IndexOutOfRange { tail: usize, head: usize, n: usize },
    #[error("edge ({0}, {1}) appears more than once")]
    DuplicateEdge(usize, usize),
    #[error("rate matrix must be {n} x {n}, got {rows} x {cols}")]
    ShapeMismatch { n: usize, rows: usize, cols: usize },
    #[error("rate matrix entry ({tail}, {head}) = {value} is positive but ({tail}, {head}) is not an edge")]
    SupportMismatch { tail: usize, head: usize, value: f64 },
    #[error("rate for edge ({tail}, {head}) must be positive, got {value}")]
    NonPositiveRate { tail: usize, head: usize, value: f64 },
    #[error("rate matrix entry ({tail}, {head}) is not finite")]
    NonFinite { tail: usize, head: usize },
    #[error("edge ({tail}, {head}) is not contained in the rate support")]
    NotASubgraph { tail: usize, head: usize },
    #[error("vertex subset is empty")]
    EmptySubset,
    #[error("vertex subset entry {0} is duplicated or out of range")]
    BadSubset(usize),
    #[error("state vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A hyperchain: a directed graph on species `1..=n` in which every species
/// is incident to at least one edge.  Self-loops are allowed, multi-edges are
/// not.  An edge `(i, j)` means that species `i` catalyses the replication of
/// species `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperchain {
    n: usize,
    /// 0-based edge list, sorted lexicographically.
    edges: Vec<(usize, usize)>,
    /// 0-based out-neighbour lists, each sorted ascending.
    out: Vec<Vec<usize>>,
    /// 0-based in-neighbour lists, each sorted ascending.
    inn: Vec<Vec<usize>>,
}

impl Hyperchain {
    /// Builds a validated hyperchain from 1-based `(tail, head)` pairs.
    ///
    /// Rejects an empty vertex or edge set, out-of-range indices, duplicate
    /// edges, and species incident to no edge at all.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::NoSpecies);
        }
        if edges.is_empty() {
            return Err(GraphError::EmptyEdgeSet);
        }
        let mut list: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(tail, head) in edges {
            if tail == 0 || head == 0 || tail > n || head > n {
                return Err(GraphError::IndexOutOfRange { tail, head, n });
            }
            list.push((tail - 1, head - 1));
        }
        list.sort_unstable();
        for w in list.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge(w[0].0 + 1, w[0].1 + 1));
            }
        }
        let mut out = vec![Vec::new(); n];
        let mut inn = vec![Vec::new(); n];
        for &(t, h) in &list {
            out[t].push(h);
            inn[h].push(t);
        }
        for v in 0..n {
            if out[v].is_empty() && inn[v].is_empty() {
                return Err(GraphError::IsolatedVertex(v + 1));
            }
            inn[v].sort_unstable();
        }
        Ok(Hyperchain { n, edges: list, out, inn })
    }

    /// Number of species.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edge list as 1-based `(tail, head)` pairs, sorted lexicographically.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|&(t, h)| (t + 1, h + 1)).collect()
    }

    /// Whether the 1-based edge `(tail, head)` is present.
    pub fn has_edge(&self, tail: usize, head: usize) -> bool {
        tail >= 1
            && head >= 1
            && tail <= self.n
            && head <= self.n
            && self.out[tail - 1].binary_search(&(head - 1)).is_ok()
    }

    /// 1-based out-neighbours of species `i`, ascending.
    pub fn out_neighbors(&self, i: usize) -> Vec<usize> {
        assert!(i >= 1 && i <= self.n, "species index {i} out of range");
        self.out[i - 1].iter().map(|&v| v + 1).collect()
    }

    /// 1-based in-neighbours of species `i`, ascending.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        assert!(i >= 1 && i <= self.n, "species index {i} out of range");
        self.inn[i - 1].iter().map(|&v| v + 1).collect()
    }

    /// Out-degree of 1-based species `i`.
    pub fn out_degree(&self, i: usize) -> usize {
        assert!(i >= 1 && i <= self.n, "species index {i} out of range");
        self.out[i - 1].len()
    }

    /// In-degree of 1-based species `i`.
    pub fn in_degree(&self, i: usize) -> usize {
        assert!(i >= 1 && i <= self.n, "species index {i} out of range");
        self.inn[i - 1].len()
    }

    /// 0/1 adjacency matrix; entry `(i, j)` is 1 exactly when species
    /// `i + 1 ⇢ j + 1` is an edge.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(t, h) in &self.edges {
            a[(t, h)] = 1.0;
        }
        a
    }

    pub(crate) fn edges0(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub(crate) fn out0(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub(crate) fn in0(&self, v: usize) -> &[usize] {
        &self.inn[v]
    }
}

/// A non-negative square matrix whose positive entries are read as edge
/// rates: entry `(i, j)` is the rate of the edge `i + 1 ⇢ j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix(DMatrix<f64>);

impl RateMatrix {
    /// Wraps a dense matrix, rejecting non-square shapes, non-finite entries,
    /// and negative entries.
    pub fn from_dense(m: DMatrix<f64>) -> Result<Self, GraphError> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(GraphError::ShapeMismatch { n: rows, rows, cols });
        }
        for i in 0..rows {
            for j in 0..cols {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(GraphError::NonFinite { tail: i + 1, head: j + 1 });
                }
                if v < 0.0 {
                    return Err(GraphError::NonPositiveRate { tail: i + 1, head: j + 1, value: v });
                }
            }
        }
        Ok(RateMatrix(m))
    }

    /// Side length.
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// The underlying dense matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Rate of the 1-based edge `(tail, head)`; zero when absent.
    pub fn rate(&self, tail: usize, head: usize) -> f64 {
        self.0[(tail - 1, head - 1)]
    }

    /// 1-based edges of the positive support, sorted lexicographically.
    pub fn support_edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.0[(i, j)] > 0.0 {
                    edges.push((i + 1, j + 1));
                }
            }
        }
        edges
    }

    /// Restriction to a subgraph on the same species set: keeps the rates of
    /// `sub`'s edges and zeroes everything else.  Every edge of `sub` must
    /// carry a positive rate here.
    pub fn restrict_to(&self, sub: &Hyperchain) -> Result<RateMatrix, GraphError> {
        if sub.n() != self.n() {
            return Err(GraphError::ShapeMismatch { n: sub.n(), rows: self.n(), cols: self.n() });
        }
        let mut m = DMatrix::zeros(self.n(), self.n());
        for &(t, h) in sub.edges0() {
            let v = self.0[(t, h)];
            if v <= 0.0 {
                return Err(GraphError::NotASubgraph { tail: t + 1, head: h + 1 });
            }
            m[(t, h)] = v;
        }
        Ok(RateMatrix(m))
    }
}

/// A hyperchain together with a rate matrix whose positive support is exactly
/// the edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperchainSystem {
    graph: Hyperchain,
    rates: RateMatrix,
}

impl HyperchainSystem {
    /// Pairs a graph with a rate matrix, checking that positive entries and
    /// edges coincide exactly.
    pub fn new(graph: Hyperchain, rates: RateMatrix) -> Result<Self, GraphError> {
        let n = graph.n();
        if rates.n() != n {
            return Err(GraphError::ShapeMismatch { n, rows: rates.n(), cols: rates.n() });
        }
        for i in 0..n {
            for j in 0..n {
                let v = rates.matrix()[(i, j)];
                let edge = graph.out[i].binary_search(&j).is_ok();
                if edge && v <= 0.0 {
                    return Err(GraphError::NonPositiveRate { tail: i + 1, head: j + 1, value: v });
                }
                if !edge && v != 0.0 {
                    return Err(GraphError::SupportMismatch { tail: i + 1, head: j + 1, value: v });
                }
            }
        }
        Ok(HyperchainSystem { graph, rates })
    }

    /// Builds graph and rates together from 1-based `(tail, head, rate)`
    /// triples.
    pub fn from_edge_rates(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let pairs: Vec<(usize, usize)> = edges.iter().map(|&(t, h, _)| (t, h)).collect();
        let graph = Hyperchain::new(n, &pairs)?;
        let mut m = DMatrix::zeros(n, n);
        for &(t, h, r) in edges {
            if !r.is_finite() {
                return Err(GraphError::NonFinite { tail: t, head: h });
            }
            if r <= 0.0 {
                return Err(GraphError::NonPositiveRate { tail: t, head: h, value: r });
            }
            m[(t - 1, h - 1)] = r;
        }
        Ok(HyperchainSystem { graph, rates: RateMatrix(m) })
    }

    /// Number of species.
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// The underlying graph.
    pub fn graph(&self) -> &Hyperchain {
        &self.graph
    }

    /// The rate matrix wrapper.
    pub fn rates(&self) -> &RateMatrix {
        &self.rates
    }

    /// The dense rate matrix `K`.
    pub fn k(&self) -> &DMatrix<f64> {
        self.rates.matrix()
    }

    /// Rate of the 1-based edge `(tail, head)`; zero when absent.
    pub fn rate(&self, tail: usize, head: usize) -> f64 {
        self.rates.rate(tail, head)
    }

    /// 1-based `(tail, head, rate)` triples, sorted lexicographically.
    pub fn edge_rates(&self) -> Vec<(usize, usize, f64)> {
        self.graph
            .edges0()
            .iter()
            .map(|&(t, h)| (t + 1, h + 1, self.rates.matrix()[(t, h)]))
            .collect()
    }

    /// The subsystem induced on a 1-based vertex subset, with rates carried
    /// over; see [`induced_subnetwork`] for the graph-level rules.
    pub fn induced_system(&self, vertices: &[usize]) -> Result<InducedSystem, GraphError> {
        match induced_subnetwork(&self.graph, vertices)? {
            InducedSubnetwork::Degenerate { vertices, .. } => {
                Ok(InducedSystem::Degenerate { vertices })
            }
            InducedSubnetwork::Proper { graph, vertices } => {
                let m = graph.n();
                let mut k = DMatrix::zeros(m, m);
                for &(t, h) in graph.edges0() {
                    k[(t, h)] = self.rates.matrix()[(vertices[t] - 1, vertices[h] - 1)];
                }
                let system = HyperchainSystem { graph, rates: RateMatrix(k) };
                Ok(InducedSystem::Proper { system, vertices })
            }
        }
    }
}

/// A vertex-induced subnetwork.  `vertices[v]` is the 1-based parent id of
/// the sub-network species `v + 1`; the map is ascending.
#[derive(Debug, Clone, PartialEq)]
pub enum InducedSubnetwork {
    /// The induced edge set satisfies the hyperchain invariants.
    Proper { graph: Hyperchain, vertices: Vec<usize> },
    /// The induced edge set is empty or leaves some vertex isolated, so it is
    /// not a hyperchain.  `edges` is in sub-network numbering.
    Degenerate { edges: Vec<(usize, usize)>, vertices: Vec<usize> },
}

impl InducedSubnetwork {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, InducedSubnetwork::Degenerate { .. })
    }

    /// 1-based parent ids of the sub-network species, ascending.
    pub fn vertices(&self) -> &[usize] {
        match self {
            InducedSubnetwork::Proper { vertices, .. } => vertices,
            InducedSubnetwork::Degenerate { vertices, .. } => vertices,
        }
    }
}

/// Outcome of [`HyperchainSystem::induced_system`].
#[derive(Debug, Clone, PartialEq)]
pub enum InducedSystem {
    Proper { system: HyperchainSystem, vertices: Vec<usize> },
    Degenerate { vertices: Vec<usize> },
}

/// The subnetwork induced on a 1-based vertex subset: the subset plus every
/// edge with both endpoints inside it, renumbered `1..=m` in ascending parent
/// order.  A result violating the hyperchain invariants is reported as
/// [`InducedSubnetwork::Degenerate`] rather than an error.
pub fn induced_subnetwork(
    h: &Hyperchain,
    vertices: &[usize],
) -> Result<InducedSubnetwork, GraphError> {
    if vertices.is_empty() {
        return Err(GraphError::EmptySubset);
    }
    let mut vs: Vec<usize> = vertices.to_vec();
    vs.sort_unstable();
    for w in vs.windows(2) {
        if w[0] == w[1] {
            return Err(GraphError::BadSubset(w[0]));
        }
    }
    for &v in &vs {
        if v == 0 || v > h.n() {
            return Err(GraphError::BadSubset(v));
        }
    }
    let mut local = vec![usize::MAX; h.n()];
    for (i, &v) in vs.iter().enumerate() {
        local[v - 1] = i;
    }
    let mut edges = Vec::new();
    for &(t, hd) in h.edges0() {
        if local[t] != usize::MAX && local[hd] != usize::MAX {
            edges.push((local[t] + 1, local[hd] + 1));
        }
    }
    match Hyperchain::new(vs.len(), &edges) {
        Ok(graph) => Ok(InducedSubnetwork::Proper { graph, vertices: vs }),
        Err(GraphError::EmptyEdgeSet) | Err(GraphError::IsolatedVertex(_)) => {
            Ok(InducedSubnetwork::Degenerate { edges, vertices: vs })
        }
        Err(e) => Err(e),
    }
}
