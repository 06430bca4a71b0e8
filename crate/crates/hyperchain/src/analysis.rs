//! Graph-theoretic classification of hyperchains: initial/terminal nodes,
//! strong connectivity, acyclicity, spanning linear subgraphs and their
//! parities, Hamiltonian cycles, and the combined [`GraphProfile`].
//!
//! A *linear* digraph has every in- and out-degree equal to one, i.e. it is a
//! permutation drawn as a disjoint union of directed cycles.  Spanning linear
//! subgraphs drive both the uniqueness theory for positive equilibria and the
//! determinant expansion `det A(H) = Σ_D sign(D)` over spanning linear
//! subgraphs `D`, where `sign(D) = (−1)^{#even cycles}`.

use crate::graph::Hyperchain;
use serde::Serialize;
use thiserror::Error;

/// Species-count bound for exhaustive spanning-linear-subgraph enumeration.
pub const SLS_ENUMERATION_BOUND: usize = 12;
/// Species-count bound for the Hamiltonian cycle search.
pub const HAMILTONIAN_BOUND: usize = 20;
/// Node-expansion budget for the Hamiltonian cycle search.
pub const HAMILTONIAN_NODE_BUDGET: u64 = 10_000_000;

/// Errors from graph analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("graph with {n} species exceeds the bound {bound} for this search")]
    TooLarge { n: usize, bound: usize },
    #[error("successor list is not a permutation of 1..={0}")]
    NotAPermutation(usize),
    #[error("graph is not a linear digraph: {0}")]
    NotLinear(String),
}

/// Species with no incoming edges (initial) and no outgoing edges (terminal),
/// both ascending.  A self-loop counts as incoming and outgoing.
pub fn initial_and_terminal_nodes(h: &Hyperchain) -> (Vec<usize>, Vec<usize>) {
    let mut initial = Vec::new();
    let mut terminal = Vec::new();
    for v in 1..=h.n() {
        if h.in_degree(v) == 0 {
            initial.push(v);
        }
        if h.out_degree(v) == 0 {
            terminal.push(v);
        }
    }
    (initial, terminal)
}

/// Whether the hyperchain has at least one initial node.
pub fn is_rooted(h: &Hyperchain) -> bool {
    (1..=h.n()).any(|v| h.in_degree(v) == 0)
}

/// Whether every ordered vertex pair is joined by a directed path.
pub fn is_strongly_connected(h: &Hyperchain) -> bool {
    let n = h.n();
    reachable_count(n, |v| h.out0(v)) == n && reachable_count(n, |v| h.in0(v)) == n
}

fn reachable_count<'a, F: Fn(usize) -> &'a [usize]>(n: usize, neighbors: F) -> usize {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count
}

/// Whether the hyperchain contains no directed cycle (self-loops count).
pub fn is_acyclic(h: &Hyperchain) -> bool {
    let n = h.n();
    let mut indeg: Vec<usize> = (1..=n).map(|v| h.in_degree(v)).collect();
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut removed = 0;
    while let Some(v) = queue.pop() {
        removed += 1;
        for &w in h.out0(v) {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push(w);
            }
        }
    }
    removed == n
}

/// Whether the hyperchain is a single directed cycle through all species.
pub fn is_cycle_graph(h: &Hyperchain) -> bool {
    (1..=h.n()).all(|v| h.out_degree(v) == 1 && h.in_degree(v) == 1)
        && is_strongly_connected(h)
}

/// Decides spanning-linear-subgraph existence via maximum bipartite matching
/// (tails against heads, one edge per pair), using Hopcroft–Karp.
pub fn has_spanning_linear_subgraph(h: &Hyperchain) -> bool {
    let n = h.n();
    let adj: Vec<&[usize]> = (0..n).map(|v| h.out0(v)).collect();
    hopcroft_karp(n, n, &adj) == n
}

/// Maximum bipartite matching size; `adj[l]` lists the right-side neighbours
/// of left vertex `l`.
fn hopcroft_karp(nl: usize, nr: usize, adj: &[&[usize]]) -> usize {
    const NIL: usize = usize::MAX;
    let mut match_l = vec![NIL; nl];
    let mut match_r = vec![NIL; nr];
    let mut dist = vec![0u32; nl];
    let mut matching = 0;
    loop {
        // BFS layers from free left vertices.
        let mut queue = std::collections::VecDeque::new();
        for l in 0..nl {
            if match_l[l] == NIL {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in adj[l] {
                let l2 = match_r[r];
                if l2 == NIL {
                    found = true;
                } else if dist[l2] == u32::MAX {
                    dist[l2] = dist[l] + 1;
                    queue.push_back(l2);
                }
            }
        }
        if !found {
            return matching;
        }
        fn dfs(
            l: usize,
            adj: &[&[usize]],
            match_l: &mut [usize],
            match_r: &mut [usize],
            dist: &mut [u32],
        ) -> bool {
            for &r in adj[l] {
                let l2 = match_r[r];
                if l2 == NIL || (dist[l2] == dist[l] + 1 && dfs(l2, adj, match_l, match_r, dist))
                {
                    match_l[l] = r;
                    match_r[r] = l;
                    return true;
                }
            }
            dist[l] = u32::MAX;
            false
        }
        const NIL: usize = usize::MAX;
        for l in 0..nl {
            if match_l[l] == NIL && dfs(l, adj, &mut match_l, &mut match_r, &mut dist) {
                matching += 1;
            }
        }
    }
}

/// Parity of a linear digraph: [`Parity::Even`] when it contains an even
/// number of even-length cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parity {
    Even,
    Odd,
}

/// A spanning linear subgraph, stored as the successor permutation together
/// with its cycle decomposition and parity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSubgraph {
    /// 0-based successor permutation.
    succ: Vec<usize>,
    /// 1-based cycles, each rotated to start at its smallest species and
    /// listed in order of that smallest species.
    cycles: Vec<Vec<usize>>,
    parity: Parity,
}

impl LinearSubgraph {
    /// Builds from a 1-based successor list, which must be a permutation.
    pub fn from_successors(successors: &[usize]) -> Result<Self, AnalysisError> {
        let n = successors.len();
        let mut seen = vec![false; n];
        for &s in successors {
            if s == 0 || s > n || seen[s - 1] {
                return Err(AnalysisError::NotAPermutation(n));
            }
            seen[s - 1] = true;
        }
        let succ: Vec<usize> = successors.iter().map(|&s| s - 1).collect();
        let mut visited = vec![false; n];
        let mut cycles = Vec::new();
        let mut even_cycles = 0;
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut v = start;
            while !visited[v] {
                visited[v] = true;
                cycle.push(v + 1);
                v = succ[v];
            }
            if cycle.len() % 2 == 0 {
                even_cycles += 1;
            }
            cycles.push(cycle);
        }
        let parity = if even_cycles % 2 == 0 { Parity::Even } else { Parity::Odd };
        Ok(LinearSubgraph { succ, cycles, parity })
    }

    pub fn n(&self) -> usize {
        self.succ.len()
    }

    /// 1-based successor of species `i`.
    pub fn successor(&self, i: usize) -> usize {
        self.succ[i - 1] + 1
    }

    /// 1-based successor list.
    pub fn successors(&self) -> Vec<usize> {
        self.succ.iter().map(|&s| s + 1).collect()
    }

    /// 1-based predecessor of species `i`.
    pub fn predecessor(&self, i: usize) -> usize {
        self.succ.iter().position(|&s| s == i - 1).expect("permutation") + 1
    }

    /// Edges `(i, successor(i))`, 1-based, ascending in `i`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.succ.iter().enumerate().map(|(v, &s)| (v + 1, s + 1)).collect()
    }

    /// Cycle decomposition; see the field notes for ordering.
    pub fn cycles(&self) -> &[Vec<usize>] {
        &self.cycles
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// `+1` for [`Parity::Even`], `−1` for [`Parity::Odd`]; equals the sign
    /// of the successor permutation.
    pub fn sign(&self) -> i32 {
        match self.parity {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    /// The subgraph as a standalone hyperchain on the same species set.
    pub fn to_hyperchain(&self) -> Hyperchain {
        Hyperchain::new(self.n(), &self.edges()).expect("linear subgraph is a valid hyperchain")
    }
}

/// Enumerates every spanning linear subgraph in lexicographic order of the
/// successor list.  Guarded by [`SLS_ENUMERATION_BOUND`] unless a larger
/// `cap` is supplied.
pub fn enumerate_spanning_linear_subgraphs(
    h: &Hyperchain,
    cap: Option<usize>,
) -> Result<Vec<LinearSubgraph>, AnalysisError> {
    let n = h.n();
    let bound = cap.unwrap_or(SLS_ENUMERATION_BOUND);
    if n > bound {
        return Err(AnalysisError::TooLarge { n, bound });
    }
    let mut used = vec![false; n];
    let mut succ = vec![0usize; n];
    let mut out = Vec::new();
    fn assign(
        v: usize,
        h: &Hyperchain,
        used: &mut [bool],
        succ: &mut [usize],
        out: &mut Vec<LinearSubgraph>,
    ) {
        let n = h.n();
        if v == n {
            let one_based: Vec<usize> = succ.iter().map(|&s| s + 1).collect();
            out.push(LinearSubgraph::from_successors(&one_based).expect("valid permutation"));
            return;
        }
        for &w in h.out0(v) {
            if !used[w] {
                used[w] = true;
                succ[v] = w;
                assign(v + 1, h, used, succ, out);
                used[w] = false;
            }
        }
    }
    assign(0, h, &mut used, &mut succ, &mut out);
    Ok(out)
}

/// The lexicographically smallest spanning linear subgraph (by successor
/// list), or `None` when there is none.  Works at any size: each successor
/// choice is validated by a matching feasibility check on the rest, so no
/// enumeration bound applies.
pub fn first_spanning_linear_subgraph(h: &Hyperchain) -> Option<LinearSubgraph> {
    let n = h.n();
    let mut used = vec![false; n];
    let mut succ = vec![0usize; n];
    for v in 0..n {
        let mut chosen = None;
        for &w in h.out0(v) {
            if used[w] {
                continue;
            }
            used[w] = true;
            succ[v] = w;
            // Remaining tails v+1.. must still match the unused heads.
            let tails: Vec<Vec<usize>> = (v + 1..n)
                .map(|t| h.out0(t).iter().copied().filter(|&x| !used[x]).collect())
                .collect();
            let refs: Vec<&[usize]> = tails.iter().map(|t| t.as_slice()).collect();
            if hopcroft_karp(n - v - 1, n, &refs) == n - v - 1 {
                chosen = Some(w);
                break;
            }
            used[w] = false;
        }
        chosen?;
    }
    let one_based: Vec<usize> = succ.iter().map(|&s| s + 1).collect();
    Some(LinearSubgraph::from_successors(&one_based).expect("valid permutation"))
}

/// Outcome of the budgeted Hamiltonian cycle search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HamiltonianSearch {
    /// A Hamiltonian cycle, 1-based, starting at species 1; the
    /// lexicographically smallest one.
    Found(Vec<usize>),
    Absent,
    /// The node budget ran out before the search space was exhausted.
    Inconclusive,
}

/// Searches for a directed Hamiltonian cycle by backtracking from species 1,
/// trying out-neighbours in ascending order.  Bounded by
/// [`HAMILTONIAN_BOUND`] species and [`HAMILTONIAN_NODE_BUDGET`] node
/// expansions.
pub fn find_hamiltonian_cycle(h: &Hyperchain) -> Result<HamiltonianSearch, AnalysisError> {
    let n = h.n();
    if n > HAMILTONIAN_BOUND {
        return Err(AnalysisError::TooLarge { n, bound: HAMILTONIAN_BOUND });
    }
    if n == 1 {
        return Ok(if h.has_edge(1, 1) {
            HamiltonianSearch::Found(vec![1])
        } else {
            HamiltonianSearch::Absent
        });
    }
    let mut visited = vec![false; n];
    visited[0] = true;
    let mut path = vec![0usize];
    let mut budget = HAMILTONIAN_NODE_BUDGET;

    fn extend(
        h: &Hyperchain,
        visited: &mut [bool],
        path: &mut Vec<usize>,
        budget: &mut u64,
    ) -> Option<bool> {
        if *budget == 0 {
            return None;
        }
        *budget -= 1;
        let n = h.n();
        let v = *path.last().expect("path never empty");
        if path.len() == n {
            return Some(h.out0(v).binary_search(&0).is_ok());
        }
        // Every unvisited vertex still needs a free in-neighbour (or the
        // current path head) and a free out-neighbour (or the start).
        for u in 0..n {
            if visited[u] {
                continue;
            }
            let out_ok = h.out0(u).iter().any(|&w| !visited[w] || w == 0);
            let in_ok = h.in0(u).iter().any(|&w| !visited[w] || w == v);
            if !out_ok || !in_ok {
                return Some(false);
            }
        }
        for &w in h.out0(v) {
            if !visited[w] {
                visited[w] = true;
                path.push(w);
                match extend(h, visited, path, budget) {
                    Some(true) => return Some(true),
                    Some(false) => {}
                    None => return None,
                }
                path.pop();
                visited[w] = false;
            }
        }
        Some(false)
    }

    match extend(h, &mut visited, &mut path, &mut budget) {
        Some(true) => Ok(HamiltonianSearch::Found(path.iter().map(|&v| v + 1).collect())),
        Some(false) => Ok(HamiltonianSearch::Absent),
        None => Ok(HamiltonianSearch::Inconclusive),
    }
}

/// Checks that the graph is linear (all in- and out-degrees one) and that its
/// adjacency matrix transposed is the expected column-selection map: each
/// column `i` of `A(D)ᵀ` is the basis vector of the successor of `i`, and
/// `A(D)ᵀ 𝟙 = 𝟙`.
pub fn verify_linear_digraph(h: &Hyperchain) -> Result<(), AnalysisError> {
    for v in 1..=h.n() {
        if h.out_degree(v) != 1 {
            return Err(AnalysisError::NotLinear(format!(
                "species {v} has out-degree {}",
                h.out_degree(v)
            )));
        }
        if h.in_degree(v) != 1 {
            return Err(AnalysisError::NotLinear(format!(
                "species {v} has in-degree {}",
                h.in_degree(v)
            )));
        }
    }
    let at = h.adjacency_matrix().transpose();
    for i in 1..=h.n() {
        let succ = h.out_neighbors(i)[0];
        for j in 1..=h.n() {
            let expected = if j == succ { 1.0 } else { 0.0 };
            debug_assert_eq!(at[(j - 1, i - 1)], expected);
        }
    }
    let ones = nalgebra::DVector::from_element(h.n(), 1.0);
    debug_assert_eq!(&at * &ones, ones);
    Ok(())
}

/// Parity tally over all spanning linear subgraphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParityCounts {
    pub even: usize,
    pub odd: usize,
}

impl ParityCounts {
    /// Whether both parities occur.
    pub fn mixed(&self) -> bool {
        self.even > 0 && self.odd > 0
    }
}

/// Serializable summary of one spanning linear subgraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinearSubgraphInfo {
    pub successors: Vec<usize>,
    pub cycles: Vec<Vec<usize>>,
    pub parity: Parity,
}

impl From<&LinearSubgraph> for LinearSubgraphInfo {
    fn from(d: &LinearSubgraph) -> Self {
        LinearSubgraphInfo {
            successors: d.successors(),
            cycles: d.cycles().to_vec(),
            parity: d.parity(),
        }
    }
}

/// Combined structural classification of a hyperchain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphProfile {
    pub n: usize,
    pub edge_count: usize,
    pub initial_nodes: Vec<usize>,
    pub terminal_nodes: Vec<usize>,
    pub is_rooted: bool,
    pub strongly_connected: bool,
    pub acyclic: bool,
    pub is_cycle_graph: bool,
    pub has_spanning_linear_subgraph: bool,
    /// Full enumeration, present when `n` is within the enumeration bound.
    pub spanning_linear_subgraphs: Option<Vec<LinearSubgraphInfo>>,
    pub parity_counts: Option<ParityCounts>,
    /// `None` when the budgeted search was inconclusive.
    pub hamiltonian: Option<bool>,
    pub hamiltonian_cycle: Option<Vec<usize>>,
}

/// Computes the full structural profile, enumerating spanning linear
/// subgraphs when the species count is within [`SLS_ENUMERATION_BOUND`] and
/// searching for a Hamiltonian cycle within [`HAMILTONIAN_BOUND`].
pub fn profile(h: &Hyperchain) -> GraphProfile {
    let (initial_nodes, terminal_nodes) = initial_and_terminal_nodes(h);
    let is_rooted = !initial_nodes.is_empty();
    let (spanning_linear_subgraphs, parity_counts) =
        match enumerate_spanning_linear_subgraphs(h, None) {
            Ok(list) => {
                let counts = ParityCounts {
                    even: list.iter().filter(|d| d.parity() == Parity::Even).count(),
                    odd: list.iter().filter(|d| d.parity() == Parity::Odd).count(),
                };
                (Some(list.iter().map(LinearSubgraphInfo::from).collect()), Some(counts))
            }
            Err(_) => (None, None),
        };
    let (hamiltonian, hamiltonian_cycle) = match find_hamiltonian_cycle(h) {
        Ok(HamiltonianSearch::Found(cycle)) => (Some(true), Some(cycle)),
        Ok(HamiltonianSearch::Absent) => (Some(false), None),
        Ok(HamiltonianSearch::Inconclusive) | Err(_) => (None, None),
    };
    GraphProfile {
        n: h.n(),
        edge_count: h.edge_count(),
        initial_nodes,
        terminal_nodes,
        is_rooted,
        strongly_connected: is_strongly_connected(h),
        acyclic: is_acyclic(h),
        is_cycle_graph: is_cycle_graph(h),
        has_spanning_linear_subgraph: has_spanning_linear_subgraph(h),
        spanning_linear_subgraphs,
        parity_counts,
        hamiltonian,
        hamiltonian_cycle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize) -> Hyperchain {
        let edges: Vec<(usize, usize)> = (1..n).map(|v| (v, v + 1)).collect();
        Hyperchain::new(n, &edges).unwrap()
    }

    #[test]
    fn chain_has_initial_and_terminal_nodes() {
        let h = chain(3);
        let (initial, terminal) = initial_and_terminal_nodes(&h);
        assert_eq!(initial, vec![1]);
        assert_eq!(terminal, vec![3]);
        assert!(is_rooted(&h));
        assert!(is_acyclic(&h));
        assert!(!is_strongly_connected(&h));
        assert!(!has_spanning_linear_subgraph(&h));
    }

    #[test]
    fn self_loop_counts_as_incoming_and_outgoing() {
        let h = Hyperchain::new(2, &[(1, 1), (1, 2)]).unwrap();
        let (initial, terminal) = initial_and_terminal_nodes(&h);
        assert_eq!(initial, Vec::<usize>::new());
        assert_eq!(terminal, vec![2]);
        assert!(!is_rooted(&h));
        assert!(!is_acyclic(&h));
    }

    #[test]
    fn hypercycle_is_unrooted_and_strongly_connected() {
        let h = networks::hypercycle_graph(4);
        let (initial, terminal) = initial_and_terminal_nodes(&h);
        assert!(initial.is_empty() && terminal.is_empty());
        assert!(is_strongly_connected(&h));
        assert!(is_cycle_graph(&h));
        assert!(has_spanning_linear_subgraph(&h));
    }

    #[test]
    fn disjoint_cycles_with_bridge_are_not_strongly_connected() {
        let h = Hyperchain::new(4, &[(1, 2), (2, 1), (3, 4), (4, 3), (2, 3)]).unwrap();
        assert!(!is_strongly_connected(&h));
        assert!(!is_cycle_graph(&h));
    }

    #[test]
    fn cycle_with_chord_is_not_a_cycle_graph() {
        let h = Hyperchain::new(3, &[(1, 2), (2, 3), (3, 1), (1, 3)]).unwrap();
        assert!(is_strongly_connected(&h));
        assert!(!is_cycle_graph(&h));
    }

    #[test]
    fn linear_subgraph_cycle_decomposition_and_parity() {
        // (1 2 3)(4 5): one even cycle → Odd, sign −1.
        let d = LinearSubgraph::from_successors(&[2, 3, 1, 5, 4]).unwrap();
        assert_eq!(d.cycles(), &[vec![1, 2, 3], vec![4, 5]]);
        assert_eq!(d.parity(), Parity::Odd);
        assert_eq!(d.sign(), -1);
        assert_eq!(d.predecessor(1), 3);

        // Single 5-cycle → no even cycles → Even.
        let d = LinearSubgraph::from_successors(&[2, 3, 4, 5, 1]).unwrap();
        assert_eq!(d.parity(), Parity::Even);

        // 5-cycle plus disjoint 3-cycle → Even.
        let d = LinearSubgraph::from_successors(&[2, 3, 4, 5, 1, 7, 8, 6]).unwrap();
        assert_eq!(d.parity(), Parity::Even);

        // Two even cycles → Even.
        let d = LinearSubgraph::from_successors(&[2, 1, 4, 3]).unwrap();
        assert_eq!(d.parity(), Parity::Even);

        assert_eq!(
            LinearSubgraph::from_successors(&[1, 1]),
            Err(AnalysisError::NotAPermutation(2))
        );
    }

    #[test]
    fn five_species_example_has_exactly_two_spanning_linear_subgraphs() {
        let h = networks::five_species_graph();
        let list = enumerate_spanning_linear_subgraphs(&h, None).unwrap();
        assert_eq!(list.len(), 2);
        // Lexicographic order: the full 5-cycle (succ 2,3,4,5,1) first.
        assert_eq!(list[0].successors(), vec![2, 3, 1, 5, 4]);
        assert_eq!(list[0].parity(), Parity::Odd);
        assert_eq!(list[1].successors(), vec![2, 3, 4, 5, 1]);
        assert_eq!(list[1].parity(), Parity::Even);
    }

    #[test]
    fn six_species_example_has_one_odd_spanning_linear_subgraph() {
        let h = networks::six_species_graph();
        let list = enumerate_spanning_linear_subgraphs(&h, None).unwrap();
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].cycles(), &[vec![1, 2], vec![3, 4], vec![5, 6]]);
        assert_eq!(list[0].parity(), Parity::Odd);
    }

    #[test]
    fn chain_has_no_spanning_linear_subgraph() {
        let list = enumerate_spanning_linear_subgraphs(&chain(3), None).unwrap();
        assert!(list.is_empty());
    }

    #[test]
    fn enumeration_respects_the_size_bound() {
        let h = networks::hypercycle_graph(13);
        assert_eq!(
            enumerate_spanning_linear_subgraphs(&h, None),
            Err(AnalysisError::TooLarge { n: 13, bound: SLS_ENUMERATION_BOUND })
        );
        assert_eq!(enumerate_spanning_linear_subgraphs(&h, Some(13)).unwrap().len(), 1);
    }

    #[test]
    fn hamiltonian_search_on_named_networks() {
        assert_eq!(
            find_hamiltonian_cycle(&networks::hypercycle_graph(5)).unwrap(),
            HamiltonianSearch::Found(vec![1, 2, 3, 4, 5])
        );
        assert_eq!(
            find_hamiltonian_cycle(&networks::six_species_graph()).unwrap(),
            HamiltonianSearch::Absent
        );
        assert_eq!(
            find_hamiltonian_cycle(&Hyperchain::new(1, &[(1, 1)]).unwrap()).unwrap(),
            HamiltonianSearch::Found(vec![1])
        );
        // Complete digraph on 3 species: smallest cycle 1→2→3→1 found first.
        let mut edges = Vec::new();
        for i in 1..=3 {
            for j in 1..=3 {
                if i != j {
                    edges.push((i, j));
                }
            }
        }
        let h = Hyperchain::new(3, &edges).unwrap();
        assert_eq!(
            find_hamiltonian_cycle(&h).unwrap(),
            HamiltonianSearch::Found(vec![1, 2, 3])
        );
    }

    #[test]
    fn linear_digraph_verification() {
        assert!(verify_linear_digraph(&networks::hypercycle_graph(4)).is_ok());
        assert!(matches!(
            verify_linear_digraph(&chain(3)),
            Err(AnalysisError::NotLinear(_))
        ));
    }

    #[test]
    fn profile_of_six_species_example() {
        let p = profile(&networks::six_species_graph());
        assert!(p.strongly_connected);
        assert_eq!(p.hamiltonian, Some(false));
        assert!(p.has_spanning_linear_subgraph);
        let subs = p.spanning_linear_subgraphs.unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].parity, Parity::Odd);
        assert_eq!(p.parity_counts.unwrap(), ParityCounts { even: 0, odd: 1 });
    }

    #[test]
    fn profile_of_rooted_chain_warns_through_fields() {
        let p = profile(&chain(2));
        assert!(p.is_rooted);
        assert!(p.acyclic);
        assert!(!p.has_spanning_linear_subgraph);
        assert_eq!(p.hamiltonian, Some(false));
    }

    // Brute-force oracle: try all permutations as candidate successor lists.
    fn brute_force_sls(h: &Hyperchain) -> Vec<Vec<usize>> {
        fn permutations(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in permutations(n - 1) {
                for slot in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(slot, n);
                    out.push(q);
                }
            }
            out
        }
        let mut found: Vec<Vec<usize>> = permutations(h.n())
            .into_iter()
            .filter(|p| p.iter().enumerate().all(|(v, &s)| h.has_edge(v + 1, s)))
            .collect();
        found.sort();
        found
    }

    #[test]
    fn enumeration_matches_brute_force_on_small_graphs() {
        let cases = vec![
            networks::five_species_graph(),
            networks::six_species_graph(),
            networks::hypercycle_graph(4),
            chain(4),
            Hyperchain::new(3, &[(1, 2), (2, 3), (3, 1), (1, 3), (2, 1)]).unwrap(),
        ];
        for h in cases {
            let enumerated: Vec<Vec<usize>> = enumerate_spanning_linear_subgraphs(&h, None)
                .unwrap()
                .iter()
                .map(|d| d.successors())
                .collect();
            assert_eq!(enumerated, brute_force_sls(&h));
            assert_eq!(has_spanning_linear_subgraph(&h), !enumerated.is_empty());
        }
    }

    #[test]
    fn first_subgraph_matches_enumeration_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cases = vec![
            networks::five_species_graph(),
            networks::six_species_graph(),
            networks::hypercycle_graph(4),
            chain(4),
        ];
        for _ in 0..40 {
            cases.push(networks::random_hyperchain(&mut rng, 6, 0.35));
        }
        for h in cases {
            let first = first_spanning_linear_subgraph(&h);
            let enumerated = enumerate_spanning_linear_subgraphs(&h, None).unwrap();
            match (first, enumerated.first()) {
                (None, None) => {}
                (Some(d), Some(e)) => assert_eq!(d.successors(), e.successors()),
                (a, b) => panic!("disagreement: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn determinant_equals_signed_subgraph_count() {
        // det A(H) = Σ_D sign(D) over spanning linear subgraphs.
        let cases = vec![
            networks::five_species_graph(),
            networks::six_species_graph(),
            networks::hypercycle_graph(5),
            Hyperchain::new(3, &[(1, 2), (2, 3), (3, 1), (1, 3), (2, 1)]).unwrap(),
        ];
        for h in cases {
            let signed: i32 = enumerate_spanning_linear_subgraphs(&h, None)
                .unwrap()
                .iter()
                .map(|d| d.sign())
                .sum();
            let det = h.adjacency_matrix().determinant();
            assert!((det - signed as f64).abs() < 1e-9, "det {det} vs signed {signed}");
        }
    }
}
