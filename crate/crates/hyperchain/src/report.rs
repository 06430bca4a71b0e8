//! Serializable report structures for whole-network analyses.
//!
//! The computation types elsewhere in the crate hold dense vectors and
//! complex numbers that do not serialize on their own; this module mirrors
//! them into plain structures with deterministic JSON encodings.  Vectors
//! become arrays, complex numbers become `[re, im]` pairs, and every float
//! is rounded to 12 significant digits before encoding so that sub-noise
//! digits never churn the output.  A report also embeds the provenance —
//! input hash, seed, tool version, and every numeric threshold the verdicts
//! depend on — so a result can be interpreted without the invocation that
//! produced it.

use crate::analysis::{profile, GraphProfile};
use crate::dynamics;
use crate::equilibria::{
    self, boundary_equilibria, positive_equilibria, EquilibriumSet, FaceOutcome,
    PositiveEquilibria, BOUNDARY_FACE_BOUND,
};
use crate::graph::HyperchainSystem;
use crate::permanence::{
    numeric_permanence_test, PermanenceOptions, PermanenceOutcome, PermanenceVerdict,
    PermanenceWitness,
};
use crate::stability::{
    self, boundary_stability, classify_positive_stability, equilibrium_eigenvalues,
    StabilityClass,
};
use nalgebra::{Complex, DVector};
use serde::Serialize;
use std::collections::BTreeMap;

/// Rounds to 12 significant digits, the precision reports are written at.
pub fn rounded(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("scientific notation round-trips")
}

fn rounded_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().map(rounded).collect()
}

fn rounded_pairs(eig: &[Complex<f64>]) -> Vec<[f64; 2]> {
    eig.iter().map(|e| [rounded(e.re), rounded(e.im)]).collect()
}

/// Equilibrium classification with plain-array points.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum EquilibriumReport {
    Empty,
    Unique { point: Vec<f64> },
    Continuum { base: Vec<f64>, directions: Vec<Vec<f64>>, bounds: Vec<[f64; 2]>, dimension: usize },
}

/// Mirror of an equilibrium computation outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSetReport {
    pub classification: EquilibriumReport,
    pub residual: Option<f64>,
    pub near_degenerate: bool,
}

impl From<&EquilibriumSet> for EquilibriumSetReport {
    fn from(set: &EquilibriumSet) -> Self {
        let classification = match &set.classification {
            PositiveEquilibria::Empty => EquilibriumReport::Empty,
            PositiveEquilibria::Unique(z) => EquilibriumReport::Unique { point: rounded_vec(z) },
            PositiveEquilibria::Continuum(c) => EquilibriumReport::Continuum {
                base: rounded_vec(&c.base),
                directions: c.directions.iter().map(rounded_vec).collect(),
                bounds: c.bounds.iter().map(|&(lo, hi)| [rounded(lo), rounded(hi)]).collect(),
                dimension: c.dim(),
            },
        };
        EquilibriumSetReport {
            classification,
            residual: set.residual.map(rounded),
            near_degenerate: set.near_degenerate,
        }
    }
}

/// One boundary face and what sits on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryFaceReport {
    /// 1-based support of the face, ascending.
    pub support: Vec<usize>,
    /// `None` when the face induces a degenerate subsystem.
    pub equilibria: Option<EquilibriumSetReport>,
}

/// Linearization summary at the interior equilibrium (or a continuum base).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorStabilityReport {
    pub point: Vec<f64>,
    pub classification: StabilityClass,
    /// Mean rate at the point; `−lambda1` is the radial eigenvalue.
    pub lambda1: f64,
    /// The `n − 1` eigenvalues that decide stability, as `[re, im]` pairs.
    pub secondary: Vec<[f64; 2]>,
}

/// Linearization summary at one boundary equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryStabilityReport {
    pub support: Vec<usize>,
    pub point: Vec<f64>,
    pub classification: StabilityClass,
    pub lambda1: f64,
    /// Off-support species with their transverse growth rates.
    pub transverse: Vec<(usize, f64)>,
    /// Eigenvalues tangent to the face, as `[re, im]` pairs.
    pub face_spectrum: Vec<[f64; 2]>,
}

/// Witness mirror for a negative permanence verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum WitnessReport {
    NotStronglyConnected { from: usize, to: usize },
    NoPositiveEquilibrium { equilibria: EquilibriumSetReport },
    CollapsingTrajectory { start: Vec<f64>, early_min: f64, late_min: f64 },
}

/// Mirror of a permanence verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermanenceReport {
    pub outcome: &'static str,
    pub witness: Option<WitnessReport>,
    pub delta_estimate: Option<f64>,
    pub trials: usize,
    pub options: PermanenceOptions,
}

impl From<&PermanenceVerdict> for PermanenceReport {
    fn from(verdict: &PermanenceVerdict) -> Self {
        let (outcome, witness) = match &verdict.outcome {
            PermanenceOutcome::LikelyPermanent => ("likely_permanent", None),
            PermanenceOutcome::Inconclusive => ("inconclusive", None),
            PermanenceOutcome::NotPermanent(w) => (
                "not_permanent",
                Some(match w {
                    PermanenceWitness::NotStronglyConnected { from, to } => {
                        WitnessReport::NotStronglyConnected { from: *from, to: *to }
                    }
                    PermanenceWitness::NoPositiveEquilibrium(set) => {
                        WitnessReport::NoPositiveEquilibrium { equilibria: set.into() }
                    }
                    PermanenceWitness::CollapsingTrajectory { start, early_min, late_min } => {
                        WitnessReport::CollapsingTrajectory {
                            start: rounded_vec(start),
                            early_min: rounded(*early_min),
                            late_min: rounded(*late_min),
                        }
                    }
                }),
            ),
        };
        PermanenceReport {
            outcome,
            witness,
            delta_estimate: verdict.delta_estimate.map(rounded),
            trials: verdict.trials,
            options: verdict.options.clone(),
        }
    }
}

/// Where a report came from and which tolerances it was computed under.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    /// Hex SHA-256 of the input file bytes, when the analysis came from one.
    pub input_sha256: Option<String>,
    pub seed: Option<u64>,
    pub version: String,
    /// Every numeric threshold the verdicts depend on, by name.
    pub thresholds: BTreeMap<&'static str, f64>,
}

impl Provenance {
    pub fn new(input_sha256: Option<String>, seed: Option<u64>) -> Self {
        let thresholds = BTreeMap::from([
            ("consistency_tol", equilibria::CONSISTENCY_TOL),
            ("eigen_sign_tol", stability::EIGEN_SIGN_TOL),
            ("eigenpair_tol", stability::EIGENPAIR_TOL),
            ("lambda1_match_tol", stability::LAMBDA1_MATCH_TOL),
            ("positivity_tol", equilibria::POSITIVITY_TOL),
            ("residual_tol", equilibria::RESIDUAL_TOL),
        ]);
        Provenance {
            input_sha256,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            thresholds,
        }
    }
}

/// Full analysis of one network: structure, equilibria, stability, and
/// optionally permanence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub graph_profile: GraphProfile,
    pub equilibria: EquilibriumSetReport,
    /// One entry per proper face, present when the size admits enumeration.
    pub boundary_equilibria: Option<Vec<BoundaryFaceReport>>,
    pub interior_stability: Option<InteriorStabilityReport>,
    pub boundary_stability: Vec<BoundaryStabilityReport>,
    pub permanence: Option<PermanenceReport>,
    pub provenance: Provenance,
}

/// What [`analyze`] should compute and record.
#[derive(Debug, Clone, Default)]
pub struct AnalysisConfig {
    pub input_sha256: Option<String>,
    pub seed: Option<u64>,
    /// Run the permanence battery with these options.
    pub permanence: Option<PermanenceOptions>,
}

/// Runs the full pipeline on one system and assembles the report.
pub fn analyze(sys: &HyperchainSystem, config: &AnalysisConfig) -> AnalysisReport {
    let graph_profile = profile(sys.graph());
    let set = positive_equilibria(sys);

    let interior_point = match &set.classification {
        PositiveEquilibria::Unique(z) => Some(z.clone()),
        PositiveEquilibria::Continuum(c) => Some(c.base.clone()),
        PositiveEquilibria::Empty => None,
    };
    let interior_stability = interior_point.and_then(|z| {
        let spectrum = equilibrium_eigenvalues(sys, &z).ok()?;
        let classification = classify_positive_stability(sys, &z).ok()?;
        Some(InteriorStabilityReport {
            point: rounded_vec(&z),
            classification,
            lambda1: rounded(spectrum.lambda1),
            secondary: rounded_pairs(&spectrum.secondary),
        })
    });

    let mut boundary_reports = None;
    let mut boundary_stability_reports = Vec::new();
    if sys.n() <= BOUNDARY_FACE_BOUND {
        if let Ok(faces) = boundary_equilibria(sys) {
            let mut entries = Vec::new();
            for face in &faces {
                let equilibria = match &face.outcome {
                    FaceOutcome::Degenerate => None,
                    FaceOutcome::Classified(set) => Some(EquilibriumSetReport::from(set)),
                };
                entries.push(BoundaryFaceReport { support: face.support.clone(), equilibria });

                let FaceOutcome::Classified(set) = &face.outcome else { continue };
                let anchor = match &set.classification {
                    PositiveEquilibria::Unique(z) => z.clone(),
                    PositiveEquilibria::Continuum(c) => c.base.clone(),
                    PositiveEquilibria::Empty => continue,
                };
                let Ok(bs) = boundary_stability(sys, &face.support, &anchor) else { continue };
                boundary_stability_reports.push(BoundaryStabilityReport {
                    support: bs.support,
                    point: rounded_vec(&anchor),
                    classification: bs.classification,
                    lambda1: rounded(bs.lambda1),
                    transverse: bs
                        .transverse
                        .into_iter()
                        .map(|(i, r)| (i, rounded(r)))
                        .collect(),
                    face_spectrum: rounded_pairs(&bs.face_spectrum),
                });
            }
            boundary_reports = Some(entries);
        }
    }

    let permanence = config
        .permanence
        .as_ref()
        .map(|opts| PermanenceReport::from(&numeric_permanence_test(sys, opts)));

    AnalysisReport {
        graph_profile,
        equilibria: EquilibriumSetReport::from(&set),
        boundary_equilibria: boundary_reports,
        interior_stability,
        boundary_stability: boundary_stability_reports,
        permanence,
        provenance: Provenance::new(config.input_sha256.clone(), config.seed),
    }
}

/// Mirror of a trajectory's termination with rounded numbers, used by the
/// simulation sidecar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub termination: dynamics::Termination,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub steps: usize,
}

impl SimulationReport {
    pub fn from_trajectory(tr: &dynamics::Trajectory) -> Self {
        SimulationReport {
            termination: tr.termination.clone(),
            final_time: rounded(tr.final_time()),
            final_state: rounded_vec(tr.final_state()),
            steps: tr.times.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks;

    #[test]
    fn rounding_trims_sub_noise_digits() {
        assert_eq!(rounded(0.249_999_999_999_999_97), 0.25);
        assert_eq!(rounded(1.0 / 3.0), 0.333333333333);
        assert_eq!(rounded(0.0), 0.0);
        assert_eq!(rounded(-1e-300), -1e-300);
        assert!(rounded(f64::NAN).is_nan());
    }

    #[test]
    fn cycle_report_has_unique_equilibrium_and_interior_stability() {
        let sys = networks::hypercycle(3);
        let report = analyze(&sys, &AnalysisConfig::default());
        let EquilibriumReport::Unique { point } = &report.equilibria.classification else {
            panic!("expected a unique equilibrium")
        };
        assert_eq!(point, &vec![1.0 / 3.0; 3].iter().map(|&v| rounded(v)).collect::<Vec<_>>());
        let interior = report.interior_stability.expect("interior spectrum present");
        assert_eq!(interior.classification, StabilityClass::LinearlyStable);
        assert_eq!(interior.secondary.len(), 2);
        assert!(report.boundary_equilibria.is_some());
        assert!(report.permanence.is_none());
    }

    #[test]
    fn permanence_section_appears_only_when_requested() {
        let sys = networks::hypercycle(3);
        let config = AnalysisConfig {
            permanence: Some(PermanenceOptions { t_end: 60.0, ..PermanenceOptions::default() }),
            ..AnalysisConfig::default()
        };
        let report = analyze(&sys, &config);
        let perm = report.permanence.expect("permanence requested");
        assert_eq!(perm.outcome, "likely_permanent");
        assert!(perm.trials > 0);
    }

    #[test]
    fn empty_classification_keeps_interior_sections_absent() {
        let sys = networks::five_species(2.0, 2.0).unwrap();
        let report = analyze(&sys, &AnalysisConfig::default());
        assert_eq!(report.equilibria.classification, EquilibriumReport::Empty);
        assert!(report.interior_stability.is_none());
    }

    #[test]
    fn report_json_is_deterministic_and_uses_sorted_threshold_keys() {
        let sys = networks::five_species(0.5, 2.0).unwrap();
        let config = AnalysisConfig {
            input_sha256: Some("00".repeat(32)),
            seed: Some(7),
            ..AnalysisConfig::default()
        };
        let a = serde_json::to_string(&analyze(&sys, &config)).unwrap();
        let b = serde_json::to_string(&analyze(&sys, &config)).unwrap();
        assert_eq!(a, b);
        let keys: Vec<&str> = ["consistency_tol", "eigen_sign_tol", "eigenpair_tol"].to_vec();
        let mut last = 0;
        for key in keys {
            let pos = a.find(key).expect("threshold key present");
            assert!(pos > last, "threshold keys must appear in sorted order");
            last = pos;
        }
    }

    #[test]
    fn complex_eigenvalues_serialize_as_pairs() {
        let sys = networks::hypercycle(5);
        let report = analyze(&sys, &AnalysisConfig::default());
        let json = serde_json::to_value(&report).unwrap();
        let secondary = json["interior_stability"]["secondary"].as_array().unwrap();
        assert_eq!(secondary.len(), 4);
        assert!(secondary.iter().all(|pair| pair.as_array().unwrap().len() == 2));
    }

    #[test]
    fn collapsing_witness_round_trips_into_the_report() {
        let verdict = PermanenceVerdict {
            outcome: PermanenceOutcome::NotPermanent(PermanenceWitness::CollapsingTrajectory {
                start: nalgebra::dvector![0.5, 0.5],
                early_min: 1e-9,
                late_min: 1e-12,
            }),
            delta_estimate: Some(1e-12),
            trials: 10,
            options: PermanenceOptions::default(),
        };
        let report = PermanenceReport::from(&verdict);
        assert_eq!(report.outcome, "not_permanent");
        let Some(WitnessReport::CollapsingTrajectory { late_min, .. }) = report.witness else {
            panic!("expected a trajectory witness")
        };
        assert_eq!(late_min, 1e-12);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("CollapsingTrajectory"));
    }
}
