//! Numeric permanence testing and the implication audit.
//!
//! Permanence — every interior orbit of the relative dynamics eventually
//! keeps all coordinates above some fixed δ > 0 — is an asymptotic property,
//! so any finite computation yields evidence rather than proof.  The verdict
//! here is deliberately three-valued: a trajectory battery from near-boundary
//! starts either clears the pass threshold everywhere (`LikelyPermanent`),
//! produces a collapsing trajectory or a structural obstruction
//! (`NotPermanent`, always with a concrete witness), or stays ambiguous
//! (`Inconclusive`).  Two theorem-backed short-circuits run first: a
//! permanent system must be strongly connected and must have a positive
//! equilibrium, so either failure settles the verdict without integrating.
//!
//! The module also builds the two constructive rate certificates — one that
//! makes any graph with a Hamiltonian cycle numerically permanent, one that
//! removes the positive equilibrium from any strongly connected non-cycle
//! graph with a spanning linear subgraph — plus the product-growth average
//! `Ψ = Σᵢ(fᵢ − ρ̄)` used as a boundary diagnostic, and an audit that checks
//! the expected implications between graph structure and dynamics on seeded
//! random instances.

use crate::analysis::{
    enumerate_spanning_linear_subgraphs, find_hamiltonian_cycle, first_spanning_linear_subgraph,
    has_spanning_linear_subgraph, is_cycle_graph, is_rooted, is_strongly_connected,
    HamiltonianSearch, LinearSubgraph,
};
use crate::dynamics::{self, IntegrateOptions, Mode, Termination};
use crate::equilibria::{
    self, boundary_equilibria, construct_existence_rates, construct_uniqueness_rates,
    equilibrium_defect, positive_equilibria, EquilibriumSet, FaceOutcome, PositiveEquilibria,
};
use crate::graph::{Hyperchain, HyperchainSystem};
use crate::io;
use crate::networks;
use crate::stability::{candidate_inertia, classify_positive_stability, StabilityClass};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Default integration horizon for one battery trial.
pub const DEFAULT_T_END: f64 = 500.0;
/// Default fraction of the horizon forming the late observation window.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.2;
/// Default inward offset for near-boundary starts.
pub const DEFAULT_BOUNDARY_OFFSET: f64 = 1e-3;
/// Late-window minimum every trial must clear for `LikelyPermanent`.
pub const DEFAULT_PASS_DELTA: f64 = 1e-4;
/// Late-window minimum below which a still-decreasing trial is a collapse.
pub const DEFAULT_FAIL_DELTA: f64 = 1e-8;
/// Default number of seeded random near-boundary starts.
pub const DEFAULT_RANDOM_TRIALS: usize = 20;
/// Residual bound for the internal checks of the rate constructions.
pub const CONSTRUCTION_RESIDUAL_TOL: f64 = 1e-10;
/// Factor by which an undecided trial's horizon is stretched before retrying.
pub const HORIZON_EXTENSION_FACTOR: f64 = 4.0;
/// Maximum number of per-trial horizon extensions; transients that outlast
/// the default horizon get up to 16 times as long before final judgment.
pub const MAX_HORIZON_EXTENSIONS: usize = 2;
/// A trial whose late-window floor keeps at least this fraction of its
/// first-half value counts as stabilized: the recurrent dips of a
/// boundary-avoiding attractor repeat at the same depth, while an orbit
/// sliding into the boundary keeps losing ground between the halves.
pub const STABILIZED_RATIO: f64 = 0.9;
/// Floors below this are indistinguishable from a numerically dead
/// coordinate, so stabilization alone is not trusted there.
pub const STABILIZED_FLOOR_MIN: f64 = 1e-14;
/// A floor that loses more than half its value between the window halves is
/// decaying; together with a sub-`fail_delta` level that is a collapse.
pub const DECAY_RATIO: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum PermanenceError {
    #[error("the network has no Hamiltonian cycle")]
    NotHamiltonian,
    #[error("the Hamiltonian search ran out of budget before deciding")]
    HamiltonicityUndecided,
    #[error("the construction does not apply: {0}")]
    Inapplicable(&'static str),
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
}

/// Thresholds and horizons for [`numeric_permanence_test`].  These are
/// heuristics, not proof parameters; all of them are exposed so reports can
/// record exactly what was asked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermanenceOptions {
    pub t_end: f64,
    /// The late observation window is the final `window_fraction` of the
    /// horizon, split in half to detect a still-decreasing minimum.
    pub window_fraction: f64,
    /// Inward offset from each boundary face for the deterministic starts.
    pub boundary_offset: f64,
    pub pass_delta: f64,
    pub fail_delta: f64,
    /// Seeded random near-boundary mixtures added to the deterministic
    /// face battery.
    pub random_trials: usize,
    pub seed: u64,
}

impl Default for PermanenceOptions {
    fn default() -> Self {
        PermanenceOptions {
            t_end: DEFAULT_T_END,
            window_fraction: DEFAULT_WINDOW_FRACTION,
            boundary_offset: DEFAULT_BOUNDARY_OFFSET,
            pass_delta: DEFAULT_PASS_DELTA,
            fail_delta: DEFAULT_FAIL_DELTA,
            random_trials: DEFAULT_RANDOM_TRIALS,
            seed: 0,
        }
    }
}

/// Concrete evidence behind a `NotPermanent` verdict.
#[derive(Debug, Clone)]
pub enum PermanenceWitness {
    /// No directed path from `from` to `to`, so the graph is not strongly
    /// connected and the system cannot be permanent.
    NotStronglyConnected { from: usize, to: usize },
    /// The open simplex holds no equilibrium, which permanence requires.
    NoPositiveEquilibrium(EquilibriumSet),
    /// A battery trajectory whose late-window minimum fell below the failure
    /// bound and was still not recovering.
    CollapsingTrajectory { start: DVector<f64>, early_min: f64, late_min: f64 },
}

/// Three-valued outcome of the numeric test.
#[derive(Debug, Clone)]
pub enum PermanenceOutcome {
    LikelyPermanent,
    NotPermanent(PermanenceWitness),
    Inconclusive,
}

impl PermanenceOutcome {
    pub fn is_likely_permanent(&self) -> bool {
        matches!(self, PermanenceOutcome::LikelyPermanent)
    }

    pub fn is_not_permanent(&self) -> bool {
        matches!(self, PermanenceOutcome::NotPermanent(_))
    }
}

/// Result of [`numeric_permanence_test`].
#[derive(Debug, Clone)]
pub struct PermanenceVerdict {
    pub outcome: PermanenceOutcome,
    /// Smallest late-window minimum coordinate over all integrated trials;
    /// `None` when a structural short-circuit decided before integrating.
    pub delta_estimate: Option<f64>,
    /// Number of integrated trials.
    pub trials: usize,
    /// The thresholds the verdict was computed under.
    pub options: PermanenceOptions,
}

/// Late-window statistics of one integrated battery trial.
#[derive(Debug, Clone)]
enum TrialResult {
    Observed {
        start: DVector<f64>,
        /// Minimum coordinate over the first half of the late window.
        early_min: f64,
        /// Minimum coordinate over the second half of the late window.
        late_min: f64,
        /// The vector field went quiet and the integrator stopped on a frozen
        /// state before the horizon.
        converged: bool,
    },
    /// The integrator gave up (blow-up or step failure); no window data.
    Unknown,
}

impl TrialResult {
    fn window_min(&self) -> Option<f64> {
        match self {
            TrialResult::Observed { early_min, late_min, .. } => Some(early_min.min(*late_min)),
            TrialResult::Unknown => None,
        }
    }
}

/// What one trial says about permanence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TrialCall {
    /// The orbit's minimum coordinate either stays above the pass threshold
    /// or has a stabilized positive floor with recurrent recoveries above it.
    Pass,
    /// The floor is below the failure bound and still decaying (or the orbit
    /// froze on the boundary).
    Collapse,
    Ambiguous,
}

/// Judges one observed trial.  A clean pass keeps the whole window at or
/// above the pass threshold.  A permanent system can still dip far below it
/// on a recurrent orbit, so a stabilized floor — the second half-window no
/// lower than [`STABILIZED_RATIO`] times the first, at a level clearly above
/// numerical extinction — also passes: repeated dips bottom out at the same
/// depth on a boundary-avoiding attractor, while an orbit headed for the
/// boundary keeps losing ground.  A collapse needs the floor below the
/// failure bound and decaying across the halves.
fn judge_trial(result: &TrialResult, opts: &PermanenceOptions) -> TrialCall {
    let TrialResult::Observed { early_min, late_min, converged, .. } = result else {
        return TrialCall::Ambiguous;
    };
    let floor = early_min.min(*late_min);
    if *converged {
        return if floor >= opts.pass_delta {
            TrialCall::Pass
        } else if floor < opts.fail_delta {
            TrialCall::Collapse
        } else {
            TrialCall::Ambiguous
        };
    }
    if floor >= opts.pass_delta {
        return TrialCall::Pass;
    }
    if floor >= STABILIZED_FLOOR_MIN && *late_min >= STABILIZED_RATIO * early_min {
        return TrialCall::Pass;
    }
    if floor < opts.fail_delta && (floor == 0.0 || *late_min < DECAY_RATIO * early_min) {
        return TrialCall::Collapse;
    }
    TrialCall::Ambiguous
}

/// A vertex pair with no directed path between them, if one exists.
fn unreachable_pair(h: &Hyperchain) -> Option<(usize, usize)> {
    let n = h.n();
    for from in 1..=n {
        let mut seen = vec![false; n];
        seen[from - 1] = true;
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            for w in h.out_neighbors(v) {
                if !seen[w - 1] {
                    seen[w - 1] = true;
                    stack.push(w);
                }
            }
        }
        if let Some(to0) = seen.iter().position(|&s| !s) {
            return Some((from, to0 + 1));
        }
    }
    None
}

/// Builds the deterministic near-boundary battery: one inward-offset start
/// per proper face of dimension ≤ 2 or codimension ≤ 2, one start next to
/// every classified boundary equilibrium, and `random_trials` seeded random
/// face mixtures.
fn battery_starts(sys: &HyperchainSystem, opts: &PermanenceOptions) -> Vec<DVector<f64>> {
    let n = sys.n();
    let offset = opts.boundary_offset;
    let mut starts = Vec::new();

    let mut supports: Vec<Vec<usize>> = (1u64..((1u64 << n) - 1))
        .map(|mask| (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect::<Vec<usize>>())
        .filter(|s| s.len() <= 3 || n - s.len() <= 2)
        .collect();
    supports.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    for support in &supports {
        starts.push(face_start(n, support, offset));
    }

    if let Ok(faces) = boundary_equilibria(sys) {
        for face in faces {
            let FaceOutcome::Classified(set) = face.outcome else { continue };
            let anchor = match set.classification {
                PositiveEquilibria::Unique(z) => z,
                PositiveEquilibria::Continuum(c) => c.base,
                PositiveEquilibria::Empty => continue,
            };
            starts.push(pull_inward(&anchor, offset));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_trials {
        let mask: u64 = rng.random_range(1..(1u64 << n) - 1);
        let support: Vec<usize> = (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect();
        let mut x = DVector::zeros(n);
        let mut total = 0.0;
        for &i in &support {
            let w = -rng.random_range(1e-12..1.0f64).ln();
            x[i - 1] = w;
            total += w;
        }
        x /= total;
        starts.push(pull_inward(&x, offset));
    }
    starts
}

/// Uniform mass on `support`, `offset` on every other coordinate.
fn face_start(n: usize, support: &[usize], offset: f64) -> DVector<f64> {
    let m = support.len();
    let off_mass = offset * (n - m) as f64;
    let mut x = DVector::from_element(n, offset);
    for &i in support {
        x[i - 1] = (1.0 - off_mass) / m as f64;
    }
    x
}

/// Mixes a simplex point with the barycenter so every coordinate is at least
/// of order `offset`.
fn pull_inward(x: &DVector<f64>, offset: f64) -> DVector<f64> {
    let n = x.len();
    let blend = (offset * n as f64).min(0.5);
    let uniform = DVector::from_element(n, 1.0 / n as f64);
    x * (1.0 - blend) + uniform * blend
}

/// Integrates one start to `t_end` and records the minimum-coordinate
/// statistics over the late window.
fn run_trial(
    sys: &HyperchainSystem,
    start: &DVector<f64>,
    opts: &PermanenceOptions,
    t_end: f64,
) -> TrialResult {
    let window_start = t_end * (1.0 - opts.window_fraction);
    let window_mid = t_end * (1.0 - opts.window_fraction / 2.0);
    let mut early_min = f64::INFINITY;
    let mut late_min = f64::INFINITY;
    let integ = IntegrateOptions::default();
    let outcome = dynamics::integrate_observed(sys, Mode::Relative, start, t_end, &integ, |t, x| {
        if t >= window_start {
            let m = x.min();
            if t < window_mid {
                early_min = early_min.min(m);
            } else {
                late_min = late_min.min(m);
            }
        }
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(_) => return TrialResult::Unknown,
    };
    match outcome.termination {
        Termination::Completed => {
            if !early_min.is_finite() {
                early_min = late_min;
            }
            TrialResult::Observed { start: start.clone(), early_min, late_min, converged: false }
        }
        // The vector field went quiet early: the state is frozen, so its
        // minimum stands in for the whole unobserved window.
        Termination::Converged { .. } => {
            let m = outcome.final_state.min();
            TrialResult::Observed { start: start.clone(), early_min: m, late_min: m, converged: true }
        }
        Termination::BlowUp { .. } | Termination::StepFailure { .. } => TrialResult::Unknown,
    }
}

/// Runs one start through the horizon ladder: anything short of a clean pass
/// is retried at a stretched horizon, so a transient that merely outlasts
/// `t_end` is not mistaken for a collapse.  The last stage's statistics and
/// judgment are returned.
fn run_trial_ladder(
    sys: &HyperchainSystem,
    start: &DVector<f64>,
    opts: &PermanenceOptions,
) -> (TrialResult, TrialCall) {
    let mut t_end = opts.t_end;
    let mut result = run_trial(sys, start, opts, t_end);
    let mut call = judge_trial(&result, opts);
    for _ in 0..MAX_HORIZON_EXTENSIONS {
        if call == TrialCall::Pass || matches!(result, TrialResult::Unknown) {
            break;
        }
        t_end *= HORIZON_EXTENSION_FACTOR;
        result = run_trial(sys, start, opts, t_end);
        call = judge_trial(&result, opts);
    }
    (result, call)
}

/// Integrates the whole battery.  With `ladder` set, each trial goes through
/// the horizon-extension ladder and carries its judgment; otherwise a single
/// pass at `opts.t_end` is made.
fn run_battery(
    sys: &HyperchainSystem,
    opts: &PermanenceOptions,
    ladder: bool,
) -> Vec<(TrialResult, TrialCall)> {
    let starts = battery_starts(sys, opts);
    starts
        .par_iter()
        .map(|s| {
            if ladder {
                run_trial_ladder(sys, s, opts)
            } else {
                let r = run_trial(sys, s, opts, opts.t_end);
                let call = judge_trial(&r, opts);
                (r, call)
            }
        })
        .collect()
}

/// Tests permanence numerically.
///
/// Two structural short-circuits settle the verdict without integrating: a
/// graph that is not strongly connected, or a system with no positive
/// equilibrium, cannot be permanent.  Otherwise a deterministic battery of
/// near-boundary starts runs through the horizon ladder; the verdict is
/// `LikelyPermanent` when every trial passes — its late-window minimum
/// coordinate clears `pass_delta`, or its floor has stabilized at a positive
/// level while the orbit recurrently recovers above `pass_delta` —
/// `NotPermanent` with a trajectory witness when some trial's floor is below
/// `fail_delta` and still decaying at the longest horizon, and
/// `Inconclusive` otherwise.
pub fn numeric_permanence_test(
    sys: &HyperchainSystem,
    opts: &PermanenceOptions,
) -> PermanenceVerdict {
    if let Some((from, to)) = unreachable_pair(sys.graph()) {
        return PermanenceVerdict {
            outcome: PermanenceOutcome::NotPermanent(PermanenceWitness::NotStronglyConnected {
                from,
                to,
            }),
            delta_estimate: None,
            trials: 0,
            options: opts.clone(),
        };
    }
    let set = positive_equilibria(sys);
    if set.classification.is_empty() {
        return PermanenceVerdict {
            outcome: PermanenceOutcome::NotPermanent(PermanenceWitness::NoPositiveEquilibrium(set)),
            delta_estimate: None,
            trials: 0,
            options: opts.clone(),
        };
    }

    let results = run_battery(sys, opts, true);
    let trials = results.len();
    let mut delta_estimate = f64::INFINITY;
    let mut all_pass = true;
    let mut collapse: Option<(f64, &TrialResult)> = None;
    for (result, call) in &results {
        if *call != TrialCall::Pass {
            all_pass = false;
        }
        match result {
            TrialResult::Observed { .. } => {
                let w = result.window_min().expect("observed trial has window data");
                delta_estimate = delta_estimate.min(w);
                if *call == TrialCall::Collapse {
                    match collapse {
                        Some((best, _)) if best <= w => {}
                        _ => collapse = Some((w, result)),
                    }
                }
            }
            TrialResult::Unknown => {}
        }
    }
    let delta_estimate = delta_estimate.is_finite().then_some(delta_estimate);
    let outcome = if let Some((_, TrialResult::Observed { start, early_min, late_min, .. })) =
        collapse
    {
        PermanenceOutcome::NotPermanent(PermanenceWitness::CollapsingTrajectory {
            start: start.clone(),
            early_min: *early_min,
            late_min: *late_min,
        })
    } else if all_pass && trials > 0 {
        PermanenceOutcome::LikelyPermanent
    } else {
        PermanenceOutcome::Inconclusive
    };
    PermanenceVerdict { outcome, delta_estimate, trials, options: opts.clone() }
}

/// Rates that make a graph with a Hamiltonian cycle numerically permanent:
/// 1 along the cycle, `1/(4n)` on every other edge.
pub fn hamiltonian_permanence_rates(
    h: &Hyperchain,
) -> Result<HyperchainSystem, PermanenceError> {
    let cycle = match find_hamiltonian_cycle(h) {
        Ok(HamiltonianSearch::Found(c)) => c,
        Ok(HamiltonianSearch::Absent) => return Err(PermanenceError::NotHamiltonian),
        Ok(HamiltonianSearch::Inconclusive) | Err(_) => {
            return Err(PermanenceError::HamiltonicityUndecided)
        }
    };
    let n = h.n();
    let on_cycle: std::collections::BTreeSet<(usize, usize)> =
        (0..cycle.len()).map(|i| (cycle[i], cycle[(i + 1) % cycle.len()])).collect();
    let off_rate = 1.0 / (4 * n) as f64;
    let rates: Vec<(usize, usize, f64)> = h
        .edges()
        .iter()
        .map(|&(t, hd)| (t, hd, if on_cycle.contains(&(t, hd)) { 1.0 } else { off_rate }))
        .collect();
    Ok(HyperchainSystem::from_edge_rates(n, &rates).expect("rates cover the edge set"))
}

/// The non-permanence certificate: rates plus the sign-obstructed solution
/// they are built around.
#[derive(Debug, Clone)]
pub struct NonpermanenceCertificate {
    /// The graph with the constructed rates attached.
    pub system: HyperchainSystem,
    /// The unique solution of the limiting equilibrium equation; it has a
    /// negative coordinate, so the limit system has no positive equilibrium.
    pub witness: DVector<f64>,
    /// The spanning linear subgraph whose edges carry rate 1.
    pub subgraph: LinearSubgraph,
    /// The one extra edge carrying rate 2.
    pub special_edge: (usize, usize),
    /// The vertex whose witness coordinate is negative: the subgraph
    /// predecessor of the special edge's head.
    pub displaced: usize,
}

/// Builds rates under which a strongly connected non-cycle graph with a
/// spanning linear subgraph loses its positive equilibrium as `epsilon → 0`:
/// rate 1 on the lexicographically smallest spanning linear subgraph, rate 2
/// on the smallest edge outside it, `epsilon` elsewhere.
///
/// In the `epsilon = 0` limit the equilibrium equation has the unique
/// solution `z = (𝟙 − 2·e_c)/(n − 2)` with `z_c < 0`; both defining
/// identities are re-verified here to [`CONSTRUCTION_RESIDUAL_TOL`].
pub fn nonpermanence_rates(
    h: &Hyperchain,
    epsilon: f64,
) -> Result<NonpermanenceCertificate, PermanenceError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(PermanenceError::BadEpsilon(epsilon));
    }
    let n = h.n();
    if n < 3 {
        return Err(PermanenceError::Inapplicable("at least three species"));
    }
    if !is_strongly_connected(h) {
        return Err(PermanenceError::Inapplicable("a strongly connected graph"));
    }
    if is_cycle_graph(h) {
        return Err(PermanenceError::Inapplicable("a graph that is not a single cycle"));
    }
    let Some(sls) = first_spanning_linear_subgraph(h) else {
        return Err(PermanenceError::Inapplicable("a spanning linear subgraph"));
    };
    let on_sls: std::collections::BTreeSet<(usize, usize)> = sls.edges().into_iter().collect();
    let special_edge = h
        .edges()
        .into_iter()
        .find(|e| !on_sls.contains(e))
        .expect("a strongly connected non-cycle graph has an edge off any spanning linear subgraph");
    let (_, b) = special_edge;
    let displaced = sls.predecessor(b);

    let scale = 1.0 / (n - 2) as f64;
    let mut witness = DVector::from_element(n, scale);
    witness[displaced - 1] = -scale;

    let mut k0t = nalgebra::DMatrix::zeros(n, n);
    for (t, hd) in sls.edges() {
        k0t[(hd - 1, t - 1)] = 1.0;
    }
    k0t[(special_edge.1 - 1, special_edge.0 - 1)] += 2.0;
    let image = &k0t * &witness;
    let mean = witness.dot(&image);
    assert!(
        image.iter().all(|&v| (v - scale).abs() <= CONSTRUCTION_RESIDUAL_TOL),
        "limit rates must map the witness to a constant vector"
    );
    assert!(
        (mean - scale).abs() <= CONSTRUCTION_RESIDUAL_TOL,
        "witness mean rate must equal the constant"
    );
    assert!(witness.min() < 0.0, "witness must leave the nonnegative orthant");

    let rates: Vec<(usize, usize, f64)> = h
        .edges()
        .into_iter()
        .map(|(t, hd)| {
            let rate = if on_sls.contains(&(t, hd)) {
                1.0
            } else if (t, hd) == special_edge {
                2.0
            } else {
                epsilon
            };
            (t, hd, rate)
        })
        .collect();
    let system = HyperchainSystem::from_edge_rates(n, &rates).expect("rates cover the edge set");
    Ok(NonpermanenceCertificate { system, witness, subgraph: sls, special_edge, displaced })
}

/// Time average of the product growth rate `Ψ(x) = Σᵢ (fᵢ(x) − ρ̄(x))` along
/// the trajectory from `x0`: `(1/T)·∫₀ᵀ Ψ(x(t)) dt` by the trapezoid rule
/// over accepted steps.  If the integrator stops early on a quiet vector
/// field, the frozen state's `Ψ` extends the integral to the full horizon.
/// Positive averages along boundary orbits support permanence.
pub fn psi_average(
    sys: &HyperchainSystem,
    x0: &DVector<f64>,
    t_end: f64,
) -> Result<f64, dynamics::DynamicsError> {
    let n = sys.n();
    let psi = |x: &DVector<f64>| -> f64 {
        let f = sys.k().transpose() * x;
        let rho = x.dot(&f);
        f.sum() - n as f64 * rho
    };
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let outcome =
        dynamics::integrate_observed(sys, Mode::Relative, x0, t_end, &IntegrateOptions::default(), |t, x| {
            let value = psi(x);
            if let Some((t0, v0)) = prev {
                integral += 0.5 * (v0 + value) * (t - t0);
            }
            prev = Some((t, value));
        })?;
    if outcome.final_time < t_end {
        integral += psi(&outcome.final_state) * (t_end - outcome.final_time);
    }
    Ok(integral / t_end)
}

/// The implications the audit checks on every sampled instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Implication {
    /// A cycle graph is numerically permanent under the sampled rates.
    CycleGraphPermanent,
    /// The certificate rates on a Hamiltonian graph are numerically
    /// permanent.
    HamiltonianCertificatePermanent,
    /// Numeric permanence entails strong connectivity and a positive
    /// equilibrium.
    PermanenceNecessities,
    /// Unrooted graphs admit an equilibrium by construction; rooted graphs
    /// never have one.
    UnrootedMatchesExistence,
    /// A spanning linear subgraph exists exactly when some rate choice gives
    /// a unique equilibrium.
    SubgraphMatchesUniqueness,
    /// Linear stability of the unique equilibrium coincides with the
    /// candidate inertia test on the rate matrix alone.
    StabilityMatchesInertia,
    /// Linear stability entails uniqueness, which entails a spanning linear
    /// subgraph.
    StabilityUniquenessChain,
    /// A Hamiltonian graph has a spanning linear subgraph and is strongly
    /// connected.
    HamiltonianStructure,
    /// When every spanning linear subgraph has the same parity, no rate
    /// choice yields a continuum of equilibria.
    UniformParityForbidsContinuum,
}

impl Implication {
    pub const ALL: [Implication; 9] = [
        Implication::CycleGraphPermanent,
        Implication::HamiltonianCertificatePermanent,
        Implication::PermanenceNecessities,
        Implication::UnrootedMatchesExistence,
        Implication::SubgraphMatchesUniqueness,
        Implication::StabilityMatchesInertia,
        Implication::StabilityUniquenessChain,
        Implication::HamiltonianStructure,
        Implication::UniformParityForbidsContinuum,
    ];
}

/// Result of one implication check on one sample.
#[derive(Debug, Clone, PartialEq)]
enum CheckResult {
    Pass,
    Violated(String),
    Inconclusive,
}

/// Per-implication counts over the samples whose premise applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImplicationTally {
    pub implication: Implication,
    pub checked: usize,
    pub passed: usize,
    pub violated: usize,
    /// Numeric checks that ended ambiguous (permanence `Inconclusive`,
    /// tolerance-straddling classifications); neither pass nor fail.
    pub inconclusive: usize,
}

/// A violated implication with everything needed to re-run it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditViolation {
    pub implication: Implication,
    pub n: usize,
    pub sample_index: usize,
    /// Seed the sample's own permanence batteries ran under.
    pub sample_seed: u64,
    /// The full network in its text format.
    pub network: String,
    pub detail: String,
}

/// Outcome counts for the soft reachability check: on samples that are not
/// strongly connected, the trajectory battery is run anyway and counted as
/// corroborating when some start's late-window minimum falls below the pass
/// threshold.  A lack of corroboration is reported but is not a violation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SoftCheckTally {
    pub checked: usize,
    pub corroborated: usize,
    pub uncorroborated: usize,
}

/// Everything the audit produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub n_lo: usize,
    pub n_hi: usize,
    pub samples: usize,
    pub seed: u64,
    pub tallies: Vec<ImplicationTally>,
    pub soft: SoftCheckTally,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn tally(&self, implication: Implication) -> &ImplicationTally {
        self.tallies
            .iter()
            .find(|t| t.implication == implication)
            .expect("every implication is tallied")
    }
}

/// Audit configuration; [`implication_audit`] covers the common case.
#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub n_lo: usize,
    pub n_hi: usize,
    pub samples: usize,
    pub seed: u64,
    /// Edge probability range the per-sample density is drawn from.
    pub edge_prob: (f64, f64),
    /// Log-uniform rate range.
    pub rates: (f64, f64),
    /// Testing hook: falsely record one violation on the first sample, to
    /// exercise the reporting and dump path without a real violation.
    pub debug_force_violation: bool,
}

impl AuditConfig {
    pub fn new(n_lo: usize, n_hi: usize, samples: usize, seed: u64) -> Self {
        AuditConfig {
            n_lo,
            n_hi,
            samples,
            seed,
            edge_prob: (0.2, 0.6),
            rates: (0.1, 10.0),
            debug_force_violation: false,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

fn sample_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64 + 1))
}

/// One sample's network plus where it came from.
struct Sample {
    index: usize,
    sys: HyperchainSystem,
}

/// Checks every implication on seeded random instances plus a fixed set of
/// reference networks, and reports per-implication tallies with re-runnable
/// dumps for any violation.  `n` cycles through `n_lo..=n_hi` across the
/// random samples; each sample draws its own edge density and log-uniform
/// rates from its own seeded generator, so any single sample can be
/// reproduced from the report alone.
pub fn implication_audit(
    n_range: std::ops::RangeInclusive<usize>,
    samples: usize,
    seed: u64,
) -> AuditReport {
    implication_audit_with(&AuditConfig::new(*n_range.start(), *n_range.end(), samples, seed))
}

/// [`implication_audit`] with full control over the configuration.
pub fn implication_audit_with(config: &AuditConfig) -> AuditReport {
    assert!(
        2 <= config.n_lo && config.n_lo <= config.n_hi && config.n_hi <= 6,
        "audit sizes must satisfy 2 <= n_lo <= n_hi <= 6"
    );
    assert!(config.samples >= 1, "the audit needs at least one sample");

    let span = config.n_hi - config.n_lo + 1;
    let mut specs: Vec<Sample> = Vec::new();
    for index in 0..config.samples {
        let n = config.n_lo + index % span;
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(config.seed, index));
        let p = rng.random_range(config.edge_prob.0..=config.edge_prob.1);
        let h = networks::random_hyperchain(&mut rng, n, p);
        let sys = networks::random_rates(&mut rng, &h, config.rates.0, config.rates.1);
        specs.push(Sample { index, sys });
    }
    let mut extra = config.samples;
    for n in config.n_lo..=config.n_hi {
        specs.push(Sample { index: extra, sys: networks::hypercycle(n) });
        extra += 1;
    }
    if (config.n_lo..=config.n_hi).contains(&5) {
        let sys = networks::five_species(1.0, 1.0).expect("reference rates are positive");
        specs.push(Sample { index: extra, sys });
        extra += 1;
    }
    if (config.n_lo..=config.n_hi).contains(&6) {
        specs.push(Sample { index: extra, sys: networks::six_species() });
    }

    let outcomes: Vec<(usize, Vec<(Implication, CheckResult)>, Option<bool>)> = specs
        .par_iter()
        .map(|sample| {
            let results = check_sample(sample, config);
            let soft = soft_reachability_check(&sample.sys, sample_seed(config.seed, sample.index));
            (sample.index, results, soft)
        })
        .collect();

    let mut tallies: std::collections::BTreeMap<Implication, ImplicationTally> = Implication::ALL
        .iter()
        .map(|&implication| {
            (implication, ImplicationTally { implication, checked: 0, passed: 0, violated: 0, inconclusive: 0 })
        })
        .collect();
    let mut soft = SoftCheckTally::default();
    let mut violations = Vec::new();
    for (spec, (index, results, soft_result)) in specs.iter().zip(&outcomes) {
        for (implication, result) in results {
            let tally = tallies.get_mut(implication).expect("all implications are present");
            tally.checked += 1;
            match result {
                CheckResult::Pass => tally.passed += 1,
                CheckResult::Inconclusive => tally.inconclusive += 1,
                CheckResult::Violated(detail) => {
                    tally.violated += 1;
                    violations.push(AuditViolation {
                        implication: *implication,
                        n: spec.sys.n(),
                        sample_index: *index,
                        sample_seed: sample_seed(config.seed, *index),
                        network: io::network_to_text(&spec.sys),
                        detail: detail.clone(),
                    });
                }
            }
        }
        if let Some(corroborated) = soft_result {
            soft.checked += 1;
            if *corroborated {
                soft.corroborated += 1;
            } else {
                soft.uncorroborated += 1;
            }
        }
    }
    if config.debug_force_violation {
        if let Some(spec) = specs.first() {
            let tally = tallies
                .get_mut(&Implication::HamiltonianStructure)
                .expect("all implications are present");
            tally.checked += 1;
            tally.violated += 1;
            violations.push(AuditViolation {
                implication: Implication::HamiltonianStructure,
                n: spec.sys.n(),
                sample_index: spec.index,
                sample_seed: sample_seed(config.seed, spec.index),
                network: io::network_to_text(&spec.sys),
                detail: "forced by the audit's debug flag; not a real violation".to_string(),
            });
        }
    }

    AuditReport {
        n_lo: config.n_lo,
        n_hi: config.n_hi,
        samples: config.samples,
        seed: config.seed,
        tallies: tallies.into_values().collect(),
        soft,
        violations,
    }
}

/// On a sample that is not strongly connected, runs the battery anyway and
/// reports whether some start's window minimum corroborates the expected
/// persistence failure.  `None` when the sample is strongly connected.
fn soft_reachability_check(sys: &HyperchainSystem, seed: u64) -> Option<bool> {
    if is_strongly_connected(sys.graph()) {
        return None;
    }
    let opts = PermanenceOptions { seed, ..PermanenceOptions::default() };
    let results = run_battery(sys, &opts, false);
    let corroborated = results
        .iter()
        .filter_map(|(result, _)| result.window_min())
        .any(|w| w < opts.pass_delta);
    Some(corroborated)
}

fn check_sample(sample: &Sample, config: &AuditConfig) -> Vec<(Implication, CheckResult)> {
    let sys = &sample.sys;
    let h = sys.graph();
    let n = h.n();
    let seed = sample_seed(config.seed, sample.index);
    let opts = PermanenceOptions { seed, ..PermanenceOptions::default() };

    let strongly_connected = is_strongly_connected(h);
    let rooted = is_rooted(h);
    let has_sls = has_spanning_linear_subgraph(h);
    let hamiltonian = matches!(find_hamiltonian_cycle(h), Ok(HamiltonianSearch::Found(_)));
    let set = positive_equilibria(sys);
    let verdict = numeric_permanence_test(sys, &opts);

    let mut results: Vec<(Implication, CheckResult)> = Vec::new();

    if is_cycle_graph(h) {
        let result = match &verdict.outcome {
            PermanenceOutcome::LikelyPermanent => CheckResult::Pass,
            PermanenceOutcome::Inconclusive => CheckResult::Inconclusive,
            PermanenceOutcome::NotPermanent(_) => CheckResult::Violated(format!(
                "cycle graph judged not permanent (delta estimate {:?})",
                verdict.delta_estimate
            )),
        };
        results.push((Implication::CycleGraphPermanent, result));
    }

    if hamiltonian {
        let cert = hamiltonian_permanence_rates(h).expect("the cycle was just found");
        let cert_verdict = numeric_permanence_test(&cert, &opts);
        let result = match &cert_verdict.outcome {
            PermanenceOutcome::LikelyPermanent => CheckResult::Pass,
            PermanenceOutcome::Inconclusive => CheckResult::Inconclusive,
            PermanenceOutcome::NotPermanent(_) => CheckResult::Violated(format!(
                "certificate rates judged not permanent (delta estimate {:?})",
                cert_verdict.delta_estimate
            )),
        };
        results.push((Implication::HamiltonianCertificatePermanent, result));

        let structure_ok = has_sls && strongly_connected;
        results.push((
            Implication::HamiltonianStructure,
            if structure_ok {
                CheckResult::Pass
            } else {
                CheckResult::Violated(format!(
                    "hamiltonian graph with spanning-subgraph={has_sls}, strongly-connected={strongly_connected}"
                ))
            },
        ));
    }

    if verdict.outcome.is_likely_permanent() {
        let ok = strongly_connected && !set.classification.is_empty();
        results.push((
            Implication::PermanenceNecessities,
            if ok {
                CheckResult::Pass
            } else {
                CheckResult::Violated(format!(
                    "likely permanent but strongly-connected={strongly_connected}, \
                     equilibrium-empty={}",
                    set.classification.is_empty()
                ))
            },
        ));
    }

    let existence = if rooted {
        match (construct_existence_rates(h), set.classification.is_empty()) {
            (Err(_), true) => CheckResult::Pass,
            (Ok(_), _) => {
                CheckResult::Violated("existence construction accepted a rooted graph".to_string())
            }
            (_, false) => CheckResult::Violated(
                "rooted graph has a positive equilibrium under the sampled rates".to_string(),
            ),
        }
    } else {
        match construct_existence_rates(h) {
            Err(e) => CheckResult::Violated(format!(
                "existence construction rejected an unrooted graph: {e}"
            )),
            Ok(built) => {
                let uniform = DVector::from_element(n, 1.0 / n as f64);
                let defect = equilibrium_defect(&built, &uniform);
                if defect <= equilibria::RESIDUAL_TOL {
                    CheckResult::Pass
                } else {
                    CheckResult::Violated(format!(
                        "constructed equilibrium has defect {defect:.3e}"
                    ))
                }
            }
        }
    };
    results.push((Implication::UnrootedMatchesExistence, existence));

    let uniqueness = if has_sls {
        let mut outcome = None;
        let mut near_degenerate = false;
        for factor in [1.0, 1e-2, 1e-4] {
            let eps = equilibria::DEFAULT_UNIQUENESS_EPSILON * factor;
            let built = construct_uniqueness_rates(h, eps).expect("subgraph exists");
            let built_set = positive_equilibria(&built);
            near_degenerate |= built_set.near_degenerate;
            if matches!(built_set.classification, PositiveEquilibria::Unique(_)) {
                outcome = Some(CheckResult::Pass);
                break;
            }
        }
        outcome.unwrap_or(if near_degenerate {
            CheckResult::Inconclusive
        } else {
            CheckResult::Violated(
                "no uniqueness-construction epsilon produced a unique equilibrium".to_string(),
            )
        })
    } else {
        let construction_refused = construct_uniqueness_rates(h, 0.5).is_err();
        match (&set.classification, construction_refused) {
            (PositiveEquilibria::Unique(_), _) if set.near_degenerate => CheckResult::Inconclusive,
            (PositiveEquilibria::Unique(_), _) => CheckResult::Violated(
                "unique equilibrium without a spanning linear subgraph".to_string(),
            ),
            (_, false) => CheckResult::Violated(
                "uniqueness construction accepted a graph without a spanning linear subgraph"
                    .to_string(),
            ),
            _ => CheckResult::Pass,
        }
    };
    results.push((Implication::SubgraphMatchesUniqueness, uniqueness));

    if let PositiveEquilibria::Unique(z) = &set.classification {
        if set.near_degenerate {
            results.push((Implication::StabilityMatchesInertia, CheckResult::Inconclusive));
        } else {
            let result = match (classify_positive_stability(sys, z), candidate_inertia(sys)) {
                (Ok(StabilityClass::Marginal), _) => CheckResult::Inconclusive,
                (Ok(_), Ok(inertia)) if inertia.zero > 0 => CheckResult::Inconclusive,
                (Ok(class), Ok(inertia)) => {
                    let stable = class == StabilityClass::LinearlyStable;
                    if stable == inertia.is_stable() {
                        CheckResult::Pass
                    } else {
                        CheckResult::Violated(format!(
                            "classification {class:?} vs inertia {inertia:?}"
                        ))
                    }
                }
                _ => CheckResult::Inconclusive,
            };
            results.push((Implication::StabilityMatchesInertia, result));
        }
    }

    match &set.classification {
        PositiveEquilibria::Unique(_) => {
            results.push((
                Implication::StabilityUniquenessChain,
                if has_sls {
                    CheckResult::Pass
                } else {
                    CheckResult::Violated(
                        "unique equilibrium on a graph without a spanning linear subgraph"
                            .to_string(),
                    )
                },
            ));
        }
        PositiveEquilibria::Continuum(c) => {
            let result = match classify_positive_stability(sys, &c.base) {
                Ok(StabilityClass::LinearlyStable) => CheckResult::Violated(
                    "a continuum point classified as linearly stable".to_string(),
                ),
                Ok(_) => CheckResult::Pass,
                Err(_) => CheckResult::Inconclusive,
            };
            results.push((Implication::StabilityUniquenessChain, result));
        }
        PositiveEquilibria::Empty => {}
    }

    if n <= crate::analysis::SLS_ENUMERATION_BOUND {
        let list = enumerate_spanning_linear_subgraphs(h, None).expect("size is within the bound");
        let parities: std::collections::BTreeSet<i32> = list.iter().map(|d| d.sign()).collect();
        if !list.is_empty() && parities.len() == 1 {
            let sampled_continuum =
                matches!(set.classification, PositiveEquilibria::Continuum(_));
            let constructed_continuum = {
                let built = construct_uniqueness_rates(h, equilibria::DEFAULT_UNIQUENESS_EPSILON)
                    .expect("subgraph exists");
                matches!(
                    positive_equilibria(&built).classification,
                    PositiveEquilibria::Continuum(_)
                )
            };
            let result = if sampled_continuum || constructed_continuum {
                if set.near_degenerate {
                    CheckResult::Inconclusive
                } else {
                    CheckResult::Violated(
                        "continuum of equilibria despite uniform subgraph parity".to_string(),
                    )
                }
            } else {
                CheckResult::Pass
            };
            results.push((Implication::UniformParityForbidsContinuum, result));
        }
    }

    results
}
