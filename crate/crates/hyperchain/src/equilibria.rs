//! Equilibrium classification for the relative dynamics.
//!
//! A point `x` in the open simplex is an equilibrium exactly when all
//! per-capita rates agree, `Kᵀx = ρ̄(x)·𝟙`.  Dividing by `ρ̄ > 0` turns this
//! into the linear system `Kᵀz = 𝟙`, so the positive equilibria form an empty
//! set, a single point, or a continuum, and nothing else.  This module decides
//! which, describes continua explicitly, classifies every boundary face
//! through its induced subsystem, and builds rate assignments that force
//! existence or uniqueness on a given network.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::analysis::{first_spanning_linear_subgraph, initial_and_terminal_nodes};
use crate::graph::InducedSystem;
use crate::linalg::{self, LpOutcome};
use crate::{Hyperchain, HyperchainSystem};

/// Largest replicator speed still accepted as "at equilibrium".
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Coordinates at or below this value do not count as strictly positive.  In
/// the invertible branch the candidate is first rescaled by the largest rate,
/// which makes the verdict invariant under scaling all rates together.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Residual above which a rank-deficient linear system counts as
/// inconsistent.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// Largest network size for exhaustive boundary-face classification.
pub const BOUNDARY_FACE_BOUND: usize = 14;

/// Default off-subgraph rate for [`construct_uniqueness_rates`].
pub const DEFAULT_UNIQUENESS_EPSILON: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum EquilibriaError {
    /// The listed species have no incoming edges, so no rate assignment can
    /// give every species a positive replication rate.
    #[error("species {0:?} have no incoming edges")]
    RootedGraph(Vec<usize>),
    #[error("the network has no spanning linear subgraph")]
    NoSpanningLinearSubgraph,
    #[error("network has {n} species, above the supported bound of {bound}")]
    TooLarge { n: usize, bound: usize },
    /// The off-subgraph rate must lie strictly between 0 and 1.
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
}

/// The set of equilibria in the open simplex.
#[derive(Debug, Clone)]
pub enum PositiveEquilibria {
    Empty,
    /// The single equilibrium point.
    Unique(DVector<f64>),
    Continuum(Continuum),
}

impl PositiveEquilibria {
    pub fn is_empty(&self) -> bool {
        matches!(self, PositiveEquilibria::Empty)
    }

    pub fn unique(&self) -> Option<&DVector<f64>> {
        match self {
            PositiveEquilibria::Unique(x) => Some(x),
            _ => None,
        }
    }

    pub fn continuum(&self) -> Option<&Continuum> {
        match self {
            PositiveEquilibria::Continuum(c) => Some(c),
            _ => None,
        }
    }
}

/// Explicit description of a positive-dimensional equilibrium set: every
/// equilibrium is `base + Σ cₖ·directions[k]` with `cₖ` inside `bounds[k]`.
///
/// For a one-dimensional set the description is exact and `base` sits at the
/// midpoint of the segment.  In higher dimensions the bounds are a bounding
/// box: each entry is the exact range of that coefficient over the whole set,
/// but not every box point is an equilibrium.
#[derive(Debug, Clone)]
pub struct Continuum {
    pub base: DVector<f64>,
    /// Orthonormal directions, each summing to zero.
    pub directions: Vec<DVector<f64>>,
    /// Per-direction coefficient ranges `(low, high)` with `low ≤ 0 ≤ high`.
    pub bounds: Vec<(f64, f64)>,
}

impl Continuum {
    /// Dimension of the equilibrium set.
    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// The point `base + Σ coeffs[k]·directions[k]`.
    pub fn point(&self, coeffs: &[f64]) -> DVector<f64> {
        assert_eq!(coeffs.len(), self.directions.len(), "one coefficient per direction");
        let mut x = self.base.clone();
        for (c, dir) in coeffs.iter().zip(&self.directions) {
            x += dir * *c;
        }
        x
    }
}

/// Classification of the positive equilibria together with diagnostics.
#[derive(Debug, Clone)]
pub struct EquilibriumSet {
    pub classification: PositiveEquilibria,
    /// Replicator speed at the reported point (the unique equilibrium or the
    /// continuum base); `None` when the set is empty.
    pub residual: Option<f64>,
    /// Set when the verdict hinged on a quantity within [`POSITIVITY_TOL`] of
    /// zero, so a tiny rate perturbation could flip the classification.
    pub near_degenerate: bool,
}

/// `‖x ∘ (Kᵀx − ρ̄(x)·𝟙)‖∞`, the speed of the relative dynamics at `x`.
/// Meaningful for nonnegative `x` on the simplex; no validation is performed.
pub fn equilibrium_defect(sys: &HyperchainSystem, x: &DVector<f64>) -> f64 {
    sys.relative_rhs_unchecked(x).amax()
}

/// Classifies the equilibria of `sys` in the open simplex.
///
/// When the rate matrix is invertible the only candidate is the rescaling of
/// `(Kᵀ)⁻¹𝟙`, accepted if strictly positive.  When it is rank-deficient the
/// equilibrium condition is solved directly on the simplex: writing `P` for
/// the projection onto sum-zero vectors, equilibria are the positive solutions
/// of `P·Kᵀx = 0, Σx = 1`, an affine set that a small linear program tests for
/// a strictly positive point.  A consistent rank-deficient system always has
/// solution directions, so a feasible one yields a continuum.
pub fn positive_equilibria(sys: &HyperchainSystem) -> EquilibriumSet {
    let n = sys.n();
    let kt = sys.k().transpose();
    let ones = DVector::repeat(n, 1.0);
    let z_sol = linalg::solve_with_kernel(&kt, &ones);

    if z_sol.kernel.is_empty() {
        let z = z_sol.particular;
        let scaled_min = z.min() * sys.k().amax();
        if scaled_min > POSITIVITY_TOL {
            let x = &z / z.sum();
            let residual = equilibrium_defect(sys, &x);
            return EquilibriumSet {
                classification: PositiveEquilibria::Unique(x),
                residual: Some(residual),
                near_degenerate: false,
            };
        }
        return EquilibriumSet {
            classification: PositiveEquilibria::Empty,
            residual: None,
            near_degenerate: scaled_min.abs() <= POSITIVITY_TOL,
        };
    }

    // Rank-deficient rates: solve the simplex-side system
    //   [P·Kᵀ; 𝟙ᵀ] x = (0, …, 0, 1)
    // whose kernel spans the directions along which equilibria persist.
    let projector = DMatrix::identity(n, n) - DMatrix::repeat(n, n, 1.0 / n as f64);
    let mut m = DMatrix::zeros(n + 1, n);
    m.view_mut((0, 0), (n, n)).copy_from(&(&projector * &kt));
    m.view_mut((n, 0), (1, n)).copy_from(&DMatrix::repeat(1, n, 1.0));
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let sol = linalg::solve_with_kernel(&m, &rhs);

    if sol.residual > CONSISTENCY_TOL {
        return EquilibriumSet {
            classification: PositiveEquilibria::Empty,
            residual: None,
            near_degenerate: false,
        };
    }
    if sol.kernel.is_empty() {
        // Only reachable on borderline rank decisions where the two solves
        // disagree about the kernel; fall back to a point test.
        let x = sol.particular;
        let min = x.min();
        if min > POSITIVITY_TOL {
            let residual = equilibrium_defect(sys, &x);
            return EquilibriumSet {
                classification: PositiveEquilibria::Unique(x),
                residual: Some(residual),
                near_degenerate: true,
            };
        }
        return EquilibriumSet {
            classification: PositiveEquilibria::Empty,
            residual: None,
            near_degenerate: min.abs() <= POSITIVITY_TOL,
        };
    }

    let dirs = sol.kernel;
    let (coeffs, margin) = linalg::maximize_min_coordinate(&sol.particular, &dirs, 1.0);
    if margin <= POSITIVITY_TOL {
        return EquilibriumSet {
            classification: PositiveEquilibria::Empty,
            residual: None,
            near_degenerate: margin.abs() <= POSITIVITY_TOL,
        };
    }

    let mut base = sol.particular;
    for (k, dir) in dirs.iter().enumerate() {
        base += dir * coeffs[k];
    }
    let continuum = describe_continuum(base, dirs);
    let residual = equilibrium_defect(sys, &continuum.base);
    EquilibriumSet {
        classification: PositiveEquilibria::Continuum(continuum),
        residual: Some(residual),
        near_degenerate: false,
    }
}

/// Attaches coefficient bounds to a feasible base point: the exact interval
/// for a segment (re-centering the base to its midpoint), or per-direction
/// extents over the solution polytope in higher dimensions.
fn describe_continuum(base: DVector<f64>, directions: Vec<DVector<f64>>) -> Continuum {
    if directions.len() == 1 {
        let dir = &directions[0];
        let (lo, hi) = linalg::ray_bounds(&base, dir);
        debug_assert!(lo.is_finite() && hi.is_finite(), "simplex segments are bounded");
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let base = base + dir * mid;
        return Continuum { base, directions, bounds: vec![(-half, half)] };
    }

    let n = base.len();
    let d = directions.len();
    // Feasible coefficients satisfy −Σₖ tₖ·dirₖ[i] ≤ base[i]; the polytope is
    // bounded because the underlying points stay in the simplex.
    let mut a = DMatrix::zeros(n, d);
    for i in 0..n {
        for (k, dir) in directions.iter().enumerate() {
            a[(i, k)] = -dir[i];
        }
    }
    let b = base.clone();
    let mut bounds = Vec::with_capacity(d);
    for k in 0..d {
        let mut c = DVector::zeros(d);
        c[k] = 1.0;
        let hi = match linalg::linprog_max(&c, &a, &b) {
            LpOutcome::Optimal(_, v) => v,
            other => panic!("coefficient extent program must be solvable, got {other:?}"),
        };
        c[k] = -1.0;
        let lo = match linalg::linprog_max(&c, &a, &b) {
            LpOutcome::Optimal(_, v) => -v,
            other => panic!("coefficient extent program must be solvable, got {other:?}"),
        };
        bounds.push((lo, hi));
    }
    Continuum { base, directions, bounds }
}

/// Rates under which the uniform distribution is an equilibrium: every edge
/// into species `i` gets rate `1/d_in(i)`.  Fails on networks where some
/// species has no incoming edge, since such a species can never keep up.
pub fn construct_existence_rates(h: &Hyperchain) -> Result<HyperchainSystem, EquilibriaError> {
    let (initial, _) = initial_and_terminal_nodes(h);
    if !initial.is_empty() {
        return Err(EquilibriaError::RootedGraph(initial));
    }
    let rates: Vec<(usize, usize, f64)> = h
        .edges()
        .iter()
        .map(|&(tail, head)| (tail, head, 1.0 / h.in_degree(head) as f64))
        .collect();
    Ok(HyperchainSystem::from_edge_rates(h.n(), &rates).expect("rates cover the edge set"))
}

/// Rates with a single dominant spanning linear subgraph: edges on the
/// lexicographically smallest one get rate 1, all others `epsilon`.  For small
/// `epsilon` the resulting system has exactly one positive equilibrium
/// candidate.
pub fn construct_uniqueness_rates(
    h: &Hyperchain,
    epsilon: f64,
) -> Result<HyperchainSystem, EquilibriaError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(EquilibriaError::BadEpsilon(epsilon));
    }
    let sls =
        first_spanning_linear_subgraph(h).ok_or(EquilibriaError::NoSpanningLinearSubgraph)?;
    let rates: Vec<(usize, usize, f64)> = h
        .edges()
        .iter()
        .map(|&(tail, head)| {
            let rate = if sls.successor(tail) == head { 1.0 } else { epsilon };
            (tail, head, rate)
        })
        .collect();
    Ok(HyperchainSystem::from_edge_rates(h.n(), &rates).expect("rates cover the edge set"))
}

/// One boundary face of the simplex together with its equilibria.
#[derive(Debug, Clone)]
pub struct BoundaryFace {
    /// The face's support: 1-based species indices, ascending.
    pub support: Vec<usize>,
    pub outcome: FaceOutcome,
}

/// What the induced subsystem on a face looks like.
#[derive(Debug, Clone)]
pub enum FaceOutcome {
    /// The induced edge set is empty or leaves a vertex isolated, so the face
    /// carries no subsystem of the same kind and is left unclassified.
    Degenerate,
    /// Equilibria of the induced subsystem, embedded back into the full
    /// coordinate space (zeros off the support).
    Classified(EquilibriumSet),
}

/// Classifies the equilibria on every proper boundary face, ordered by
/// (size, lexicographic support).  Vertex faces are always equilibria and are
/// reported directly; larger faces go through their induced subsystem.
pub fn boundary_equilibria(
    sys: &HyperchainSystem,
) -> Result<Vec<BoundaryFace>, EquilibriaError> {
    let n = sys.n();
    if n > BOUNDARY_FACE_BOUND {
        return Err(EquilibriaError::TooLarge { n, bound: BOUNDARY_FACE_BOUND });
    }
    let mut supports: Vec<Vec<usize>> = (1u32..((1u32 << n) - 1))
        .map(|mask| (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect())
        .collect();
    supports.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

    let mut faces = Vec::with_capacity(supports.len());
    for support in supports {
        if support.len() == 1 {
            let mut x = DVector::zeros(n);
            x[support[0] - 1] = 1.0;
            let residual = equilibrium_defect(sys, &x);
            faces.push(BoundaryFace {
                support,
                outcome: FaceOutcome::Classified(EquilibriumSet {
                    classification: PositiveEquilibria::Unique(x),
                    residual: Some(residual),
                    near_degenerate: false,
                }),
            });
            continue;
        }
        let outcome = match sys.induced_system(&support).expect("valid support") {
            InducedSystem::Degenerate { .. } => FaceOutcome::Degenerate,
            InducedSystem::Proper { system, vertices } => {
                let set = positive_equilibria(&system);
                FaceOutcome::Classified(embed_set(n, &vertices, set))
            }
        };
        faces.push(BoundaryFace { support, outcome });
    }
    Ok(faces)
}

/// Zero-pads a face-local vector into the full coordinate space.
fn embed_vector(n: usize, support: &[usize], v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (local, &vertex) in support.iter().enumerate() {
        out[vertex - 1] = v[local];
    }
    out
}

fn embed_set(n: usize, support: &[usize], set: EquilibriumSet) -> EquilibriumSet {
    let EquilibriumSet { classification, residual, near_degenerate } = set;
    let classification = match classification {
        PositiveEquilibria::Empty => PositiveEquilibria::Empty,
        PositiveEquilibria::Unique(x) => {
            PositiveEquilibria::Unique(embed_vector(n, support, &x))
        }
        PositiveEquilibria::Continuum(c) => PositiveEquilibria::Continuum(Continuum {
            base: embed_vector(n, support, &c.base),
            directions: c.directions.iter().map(|d| embed_vector(n, support, d)).collect(),
            bounds: c.bounds,
        }),
    };
    EquilibriumSet { classification, residual, near_degenerate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn assert_close(x: &DVector<f64>, expected: &[f64], tol: f64) {
        assert_eq!(x.len(), expected.len());
        for (i, (&got, &want)) in x.iter().zip(expected).enumerate() {
            assert!(
                (got - want).abs() <= tol,
                "coordinate {i}: got {got}, expected {want}"
            );
        }
    }

    #[test]
    fn five_species_closed_forms() {
        let cases: Vec<(f64, f64, Vec<f64>)> = vec![
            (0.5, 2.0, vec![0.25, 0.25, 1.0 / 6.0, 0.25, 1.0 / 12.0]),
            (2.0, 0.5, vec![0.25, 0.25, 1.0 / 12.0, 0.25, 1.0 / 6.0]),
            (0.9, 1.1, vec![0.25, 0.25, 0.125, 0.25, 0.125]),
        ];
        for (k3, k5, expected) in cases {
            let sys = networks::five_species(k3, k5).unwrap();
            let set = positive_equilibria(&sys);
            let x = set.classification.unique().expect("unique equilibrium");
            assert_close(x, &expected, 1e-10);
            assert!(set.residual.unwrap() <= RESIDUAL_TOL);
            assert!(!set.near_degenerate);
        }
    }

    #[test]
    fn five_species_equal_rates_gives_segment() {
        let sys = networks::five_species(1.0, 1.0).unwrap();
        let set = positive_equilibria(&sys);
        let c = set.classification.continuum().expect("continuum");
        assert_eq!(c.dim(), 1);
        assert_close(&c.base, &[0.25, 0.25, 0.125, 0.25, 0.125], 1e-9);
        let dir = &c.directions[0];
        let s = 1.0 / 2f64.sqrt();
        let expected_abs = [0.0, 0.0, s, 0.0, s];
        for (i, &e) in expected_abs.iter().enumerate() {
            assert_abs_diff_eq!(dir[i].abs(), e, epsilon = 1e-9);
        }
        let (lo, hi) = c.bounds[0];
        let half = 2f64.sqrt() / 8.0;
        assert_abs_diff_eq!(lo, -half, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, half, epsilon = 1e-9);
        // Endpoints of the segment sit on the simplex boundary and are still
        // equilibria of the closure.
        for t in [lo, hi] {
            let p = c.point(&[t]);
            assert!(p.min().abs() <= 1e-9);
            assert!(equilibrium_defect(&sys, &p) <= RESIDUAL_TOL);
        }
        assert!(set.residual.unwrap() <= RESIDUAL_TOL);
        assert!(!set.near_degenerate);
    }

    #[test]
    fn five_species_doubled_rates_is_inconsistent() {
        let sys = networks::five_species(2.0, 2.0).unwrap();
        let set = positive_equilibria(&sys);
        assert!(set.classification.is_empty());
        assert!(set.residual.is_none());
        assert!(!set.near_degenerate);
    }

    #[test]
    fn barely_negative_coordinate_flags_near_degeneracy() {
        let sys = networks::five_species(1.0 - 1e-13, 2.0).unwrap();
        let set = positive_equilibria(&sys);
        assert!(set.classification.is_empty());
        assert!(set.near_degenerate);
    }

    #[test]
    fn cycle_equilibrium_weights_inverse_rates() {
        let sys = networks::hypercycle_with_rates(&[2.0, 3.0, 4.0]).unwrap();
        let set = positive_equilibria(&sys);
        let x = set.classification.unique().expect("unique equilibrium");
        assert_close(x, &[6.0 / 13.0, 4.0 / 13.0, 3.0 / 13.0], 1e-12);
    }

    #[test]
    fn uniform_cycles_balance_at_the_center() {
        for n in 1..=6 {
            let sys = networks::hypercycle(n);
            let set = positive_equilibria(&sys);
            let x = set.classification.unique().expect("unique equilibrium");
            assert_close(x, &vec![1.0 / n as f64; n], 1e-12);
        }
    }

    #[test]
    fn duplicated_influence_column_gives_segment() {
        // Species 2 and 3 receive identical influence, so their share is free.
        let sys = HyperchainSystem::from_edge_rates(
            3,
            &[(1, 2, 1.0), (1, 3, 1.0), (2, 1, 1.0), (3, 1, 1.0)],
        )
        .unwrap();
        let set = positive_equilibria(&sys);
        let c = set.classification.continuum().expect("continuum");
        assert_eq!(c.dim(), 1);
        assert_close(&c.base, &[0.5, 0.25, 0.25], 1e-9);
        let half = 2f64.sqrt() / 4.0;
        assert_abs_diff_eq!(c.bounds[0].0, -half, epsilon = 1e-9);
        assert_abs_diff_eq!(c.bounds[0].1, half, epsilon = 1e-9);
    }

    #[test]
    fn hub_network_gives_two_dimensional_set() {
        // Everything feeds the hub and the hub feeds everything, so only the
        // hub's share is pinned: x₁ = 1/2, the rest split the remainder.
        let sys = HyperchainSystem::from_edge_rates(
            4,
            &[
                (1, 2, 1.0),
                (1, 3, 1.0),
                (1, 4, 1.0),
                (2, 1, 1.0),
                (3, 1, 1.0),
                (4, 1, 1.0),
            ],
        )
        .unwrap();
        let set = positive_equilibria(&sys);
        let c = set.classification.continuum().expect("continuum");
        assert_eq!(c.dim(), 2);
        assert_close(&c.base, &[0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0], 1e-9);
        for dir in &c.directions {
            assert_abs_diff_eq!(dir.norm(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(dir.sum(), 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(dir[0], 0.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(c.directions[0].dot(&c.directions[1]), 0.0, epsilon = 1e-10);
        // The polytope {x₁ = 1/2, x₂ + x₃ + x₄ = 1/2, x ≥ 0} extends along any
        // unit direction u exactly to (max_i u_i)/2 and (min_i u_i)/2.
        for (dir, &(lo, hi)) in c.directions.iter().zip(&c.bounds) {
            let max = dir.iter().skip(1).cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = dir.iter().skip(1).cloned().fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(hi, max / 2.0, epsilon = 1e-9);
            assert_abs_diff_eq!(lo, min / 2.0, epsilon = 1e-9);
        }
        // Points partway towards a coefficient extreme stay feasible by
        // convexity and must still balance the rates.
        for t in [
            vec![0.3 * c.bounds[0].1, 0.0],
            vec![0.0, 0.3 * c.bounds[1].0],
        ] {
            let p = c.point(&t);
            assert!(p.min() >= -1e-12);
            assert!(equilibrium_defect(&sys, &p) <= RESIDUAL_TOL);
        }
    }

    #[test]
    fn consistent_but_infeasible_system_is_empty() {
        // Solutions force z₁ + z₂ = 0, so no strictly positive one exists,
        // but the boundary point e₃ still closes the gap: near-degenerate.
        let sys = HyperchainSystem::from_edge_rates(
            3,
            &[(1, 1, 1.0), (2, 1, 1.0), (3, 1, 1.0), (3, 2, 1.0), (3, 3, 1.0)],
        )
        .unwrap();
        let set = positive_equilibria(&sys);
        assert!(set.classification.is_empty());
        assert!(set.near_degenerate);
    }

    #[test]
    fn invertible_branch_agrees_with_direct_inverse() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut uniques = 0;
        for _ in 0..60 {
            let sys = networks::random_system(&mut rng, 5, 0.4, 0.5, 2.0);
            let kt = sys.k().transpose();
            let Some(inv) = kt.clone().try_inverse() else { continue };
            let z = inv * DVector::repeat(5, 1.0);
            let set = positive_equilibria(&sys);
            if z.min() > 1e-6 {
                let x = set.classification.unique().expect("unique equilibrium");
                assert_close(x, (&z / z.sum()).as_slice(), 1e-8);
                uniques += 1;
            } else if z.min() < -1e-6 {
                assert!(set.classification.is_empty());
            }
        }
        assert!(uniques > 0, "sample should contain positive candidates");
    }

    #[test]
    fn existence_rates_balance_the_uniform_point() {
        let h = networks::five_species_graph();
        let sys = construct_existence_rates(&h).unwrap();
        for (tail, head, rate) in sys.edge_rates() {
            assert_abs_diff_eq!(rate, 1.0 / h.in_degree(head) as f64, epsilon = 1e-15);
            assert!(h.has_edge(tail, head));
        }
        let n = h.n();
        let uniform = DVector::repeat(n, 1.0 / n as f64);
        assert!(equilibrium_defect(&sys, &uniform) <= RESIDUAL_TOL);
        assert!(!positive_equilibria(&sys).classification.is_empty());
    }

    #[test]
    fn existence_rates_reject_species_without_influence() {
        let h = Hyperchain::new(3, &[(1, 2), (2, 3), (3, 2)]).unwrap();
        assert_eq!(
            construct_existence_rates(&h).unwrap_err(),
            EquilibriaError::RootedGraph(vec![1])
        );
    }

    #[test]
    fn uniqueness_rates_single_out_one_subgraph() {
        let h = networks::five_species_graph();
        let sys = construct_uniqueness_rates(&h, DEFAULT_UNIQUENESS_EPSILON).unwrap();
        let sls = first_spanning_linear_subgraph(&h).unwrap();
        for (tail, head, rate) in sys.edge_rates() {
            if sls.successor(tail) == head {
                assert_abs_diff_eq!(rate, 1.0, epsilon = 1e-15);
            } else {
                assert_abs_diff_eq!(rate, DEFAULT_UNIQUENESS_EPSILON, epsilon = 1e-15);
            }
        }
        let set = positive_equilibria(&sys);
        assert!(set.classification.unique().is_some());
        assert!(set.residual.unwrap() <= RESIDUAL_TOL);
    }

    #[test]
    fn uniqueness_rates_validate_inputs() {
        let chain = Hyperchain::new(3, &[(1, 2), (2, 3)]).unwrap();
        assert_eq!(
            construct_uniqueness_rates(&chain, 1e-3).unwrap_err(),
            EquilibriaError::NoSpanningLinearSubgraph
        );
        let h = networks::five_species_graph();
        for bad in [0.0, -1.0, 1.0, 1.5, f64::NAN] {
            assert!(matches!(
                construct_uniqueness_rates(&h, bad),
                Err(EquilibriaError::BadEpsilon(_))
            ));
        }
    }

    fn face<'a>(faces: &'a [BoundaryFace], support: &[usize]) -> &'a BoundaryFace {
        faces.iter().find(|f| f.support == support).expect("face present")
    }

    fn classified(face: &BoundaryFace) -> &EquilibriumSet {
        match &face.outcome {
            FaceOutcome::Classified(set) => set,
            FaceOutcome::Degenerate => panic!("face {:?} is degenerate", face.support),
        }
    }

    #[test]
    fn boundary_catalogue_of_the_five_species_example() {
        let sys = networks::five_species(1.0, 1.0).unwrap();
        let faces = boundary_equilibria(&sys).unwrap();
        assert_eq!(faces.len(), 30);

        // Ordered by size then lexicographically.
        for w in faces.windows(2) {
            let key = |f: &BoundaryFace| (f.support.len(), f.support.clone());
            assert!(key(&w[0]) < key(&w[1]));
        }

        // Every vertex is an equilibrium.
        for j in 1..=5 {
            let set = classified(face(&faces, &[j]));
            let x = set.classification.unique().unwrap();
            assert_abs_diff_eq!(x[j - 1], 1.0, epsilon = 1e-15);
            assert!(set.residual.unwrap() <= RESIDUAL_TOL);
        }

        let set = classified(face(&faces, &[4, 5]));
        assert_close(set.classification.unique().unwrap(), &[0.0, 0.0, 0.0, 0.5, 0.5], 1e-12);

        let set = classified(face(&faces, &[1, 2, 3]));
        let third = 1.0 / 3.0;
        assert_close(
            set.classification.unique().unwrap(),
            &[third, third, third, 0.0, 0.0],
            1e-12,
        );

        // Face {1, 4, 5}: points (a, 0, 0, (1−a)/2, (1−a)/2).
        let set = classified(face(&faces, &[1, 4, 5]));
        let c = set.classification.continuum().expect("continuum");
        assert_eq!(c.dim(), 1);
        assert_close(&c.base, &[0.5, 0.0, 0.0, 0.25, 0.25], 1e-9);
        let half = 1.5f64.sqrt() / 2.0;
        assert_abs_diff_eq!(c.bounds[0].0, -half, epsilon = 1e-9);
        assert_abs_diff_eq!(c.bounds[0].1, half, epsilon = 1e-9);

        // Face {1, 2, 3, 4}: points (a, a, a, 1−3a, 0).
        let set = classified(face(&faces, &[1, 2, 3, 4]));
        let c = set.classification.continuum().expect("continuum");
        assert_eq!(c.dim(), 1);
        let sixth = 1.0 / 6.0;
        assert_close(&c.base, &[sixth, sixth, sixth, 0.5, 0.0], 1e-9);
        let half = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(c.bounds[0].0, -half, epsilon = 1e-9);
        assert_abs_diff_eq!(c.bounds[0].1, half, epsilon = 1e-9);

        // Face {1, 2, 4, 5}: points (a, 1−3a, 0, a, a).
        let set = classified(face(&faces, &[1, 2, 4, 5]));
        let c = set.classification.continuum().expect("continuum");
        assert_eq!(c.dim(), 1);
        assert_close(&c.base, &[sixth, 0.5, 0.0, sixth, sixth], 1e-9);
        assert_abs_diff_eq!(c.bounds[0].0, -half, epsilon = 1e-9);
        assert_abs_diff_eq!(c.bounds[0].1, half, epsilon = 1e-9);

        // Everything else on the boundary is degenerate or carries nothing.
        let catalogued: Vec<Vec<usize>> = vec![
            vec![1],
            vec![2],
            vec![3],
            vec![4],
            vec![5],
            vec![4, 5],
            vec![1, 2, 3],
            vec![1, 4, 5],
            vec![1, 2, 3, 4],
            vec![1, 2, 4, 5],
        ];
        for f in &faces {
            if catalogued.contains(&f.support) {
                continue;
            }
            match &f.outcome {
                FaceOutcome::Degenerate => {}
                FaceOutcome::Classified(set) => {
                    assert!(
                        set.classification.is_empty(),
                        "unexpected equilibria on face {:?}",
                        f.support
                    );
                }
            }
        }
    }

    #[test]
    fn boundary_classification_respects_the_size_bound() {
        let sys = networks::hypercycle(BOUNDARY_FACE_BOUND + 1);
        assert!(matches!(
            boundary_equilibria(&sys),
            Err(EquilibriaError::TooLarge { .. })
        ));
    }

    #[test]
    fn embedded_face_points_keep_their_defect() {
        let sys = networks::five_species(1.0, 1.0).unwrap();
        for f in boundary_equilibria(&sys).unwrap() {
            if let FaceOutcome::Classified(set) = f.outcome {
                match set.classification {
                    PositiveEquilibria::Unique(x) => {
                        assert!(equilibrium_defect(&sys, &x) <= RESIDUAL_TOL);
                    }
                    PositiveEquilibria::Continuum(c) => {
                        assert!(equilibrium_defect(&sys, &c.base) <= RESIDUAL_TOL);
                    }
                    PositiveEquilibria::Empty => {}
                }
            }
        }
    }

    #[test]
    fn defect_vanishes_only_near_equilibria() {
        let sys = networks::hypercycle(3);
        let uniform = dvector![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        assert!(equilibrium_defect(&sys, &uniform) <= 1e-15);
        let off = dvector![0.5, 0.3, 0.2];
        assert!(equilibrium_defect(&sys, &off) > 1e-3);
    }
}
