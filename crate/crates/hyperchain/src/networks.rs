//! Named network families and seeded random generation: hypercycles, the
//! five-species network whose equilibrium count switches between zero, one
//! and a continuum as two rates vary, a six-species strongly connected
//! network with no Hamiltonian cycle, and random valid hyperchains.

use crate::graph::{GraphError, Hyperchain, HyperchainSystem};
use rand::Rng;

/// The directed `n`-cycle `1 ⇢ 2 ⇢ … ⇢ n ⇢ 1`; a self-loop for `n = 1`.
pub fn hypercycle_graph(n: usize) -> Hyperchain {
    assert!(n >= 1);
    let edges: Vec<(usize, usize)> = (1..=n).map(|v| (v, v % n + 1)).collect();
    Hyperchain::new(n, &edges).expect("cycle is a valid hyperchain")
}

/// The `n`-hypercycle with all rates 1.
pub fn hypercycle(n: usize) -> HyperchainSystem {
    hypercycle_with_rates(&vec![1.0; n]).expect("unit rates are valid")
}

/// The `n`-hypercycle with `rates[i]` on the edge leaving species `i + 1`.
pub fn hypercycle_with_rates(rates: &[f64]) -> Result<HyperchainSystem, GraphError> {
    let n = rates.len();
    let edges: Vec<(usize, usize, f64)> =
        (1..=n).map(|v| (v, v % n + 1, rates[v - 1])).collect();
    HyperchainSystem::from_edge_rates(n, &edges)
}

/// Graph of the five-species network: a 3-cycle `1 ⇢ 2 ⇢ 3 ⇢ 1` and a
/// 2-cycle `4 ⇢ 5 ⇢ 4` joined by `3 ⇢ 4` and `5 ⇢ 1`.
pub fn five_species_graph() -> Hyperchain {
    Hyperchain::new(5, &[(3, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 4), (5, 1)])
        .expect("five-species graph is valid")
}

/// The five-species network with rate `k3` on `3 ⇢ 4`, rate `k5` on
/// `5 ⇢ 4`, and 1 elsewhere.  Its positive equilibria are empty, unique, or
/// a continuum depending on `(k3, k5)`.
pub fn five_species(k3: f64, k5: f64) -> Result<HyperchainSystem, GraphError> {
    HyperchainSystem::from_edge_rates(
        5,
        &[
            (3, 1, 1.0),
            (1, 2, 1.0),
            (2, 3, 1.0),
            (3, 4, k3),
            (4, 5, 1.0),
            (5, 4, k5),
            (5, 1, 1.0),
        ],
    )
}

/// Graph of the six-species network: three 2-cycles `{1,2}`, `{3,4}`,
/// `{5,6}` joined into one strongly connected component that admits no
/// Hamiltonian cycle.
pub fn six_species_graph() -> Hyperchain {
    Hyperchain::new(
        6,
        &[(1, 2), (2, 1), (2, 3), (3, 4), (4, 3), (4, 5), (5, 6), (6, 5), (6, 2), (5, 1)],
    )
    .expect("six-species graph is valid")
}

/// The six-species network with its reference rates.
pub fn six_species() -> HyperchainSystem {
    HyperchainSystem::from_edge_rates(
        6,
        &[
            (1, 2, 1.0),
            (2, 1, 2.0),
            (2, 3, 3.0),
            (3, 4, 1.0),
            (4, 3, 1.0),
            (4, 5, 3.0),
            (5, 6, 2.0),
            (6, 5, 1.0),
            (6, 2, 3.0),
            (5, 1, 1.0),
        ],
    )
    .expect("six-species system is valid")
}

/// Samples a valid hyperchain on `n` species: each of the `n²` possible
/// edges (self-loops included) is kept with probability `edge_prob`,
/// resampling until the result has no isolated vertex and at least one edge.
pub fn random_hyperchain<R: Rng>(rng: &mut R, n: usize, edge_prob: f64) -> Hyperchain {
    assert!(n >= 1);
    assert!((0.0..=1.0).contains(&edge_prob));
    loop {
        let mut edges = Vec::new();
        for t in 1..=n {
            for h in 1..=n {
                if rng.random_bool(edge_prob) {
                    edges.push((t, h));
                }
            }
        }
        if let Ok(h) = Hyperchain::new(n, &edges) {
            return h;
        }
    }
}

/// Attaches log-uniform rates from `[lo, hi]` to every edge.
pub fn random_rates<R: Rng>(
    rng: &mut R,
    h: &Hyperchain,
    lo: f64,
    hi: f64,
) -> HyperchainSystem {
    assert!(0.0 < lo && lo <= hi);
    let triples: Vec<(usize, usize, f64)> = h
        .edges()
        .iter()
        .map(|&(t, hd)| {
            let u: f64 = rng.random_range(lo.ln()..=hi.ln());
            (t, hd, u.exp())
        })
        .collect();
    HyperchainSystem::from_edge_rates(h.n(), &triples).expect("rates are positive")
}

/// A random valid system: [`random_hyperchain`] plus [`random_rates`].
pub fn random_system<R: Rng>(
    rng: &mut R,
    n: usize,
    edge_prob: f64,
    rate_lo: f64,
    rate_hi: f64,
) -> HyperchainSystem {
    let h = random_hyperchain(rng, n, edge_prob);
    random_rates(rng, &h, rate_lo, rate_hi)
}

/// The `n`-cycle plus `chords` distinct random non-cycle edges.  The result
/// is Hamiltonian by construction.
pub fn hamiltonian_with_chords<R: Rng>(rng: &mut R, n: usize, chords: usize) -> Hyperchain {
    assert!(n >= 2);
    let mut edges: Vec<(usize, usize)> = (1..=n).map(|v| (v, v % n + 1)).collect();
    let cycle: std::collections::BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    let mut pool: Vec<(usize, usize)> = (1..=n)
        .flat_map(|t| (1..=n).map(move |h| (t, h)))
        .filter(|e| !cycle.contains(e))
        .collect();
    let take = chords.min(pool.len());
    for k in 0..take {
        let j = rng.random_range(k..pool.len());
        pool.swap(k, j);
    }
    edges.extend(pool.into_iter().take(take));
    Hyperchain::new(n, &edges).expect("cycle plus chords is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn named_networks_validate() {
        assert_eq!(hypercycle_graph(3).edges(), vec![(1, 2), (2, 3), (3, 1)]);
        assert_eq!(five_species_graph().edge_count(), 7);
        assert_eq!(six_species_graph().edge_count(), 10);
        assert_eq!(six_species().rate(2, 3), 3.0);
        assert_eq!(five_species(0.5, 2.0).unwrap().rate(3, 4), 0.5);
        assert!(five_species(0.0, 2.0).is_err());
    }

    #[test]
    fn random_networks_are_valid_and_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_system(&mut rng, 5, 0.4, 0.1, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = random_system(&mut rng, 5, 0.4, 0.1, 10.0);
        assert_eq!(a, b);
        for &(_, _, r) in &a.edge_rates() {
            assert!((0.1..=10.0).contains(&r));
        }
    }

    #[test]
    fn chorded_cycles_are_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=6 {
            let h = hamiltonian_with_chords(&mut rng, n, 2);
            assert!(matches!(
                analysis::find_hamiltonian_cycle(&h).unwrap(),
                analysis::HamiltonianSearch::Found(_)
            ));
            assert_eq!(h.edge_count(), n + 2.min(n * n - n));
        }
    }
}
