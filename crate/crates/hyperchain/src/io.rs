//! Reading and writing networks and trajectories.
//!
//! Networks travel in either of two equivalent formats: the plain-text
//! "HYPERCHAIN v1" layout or a JSON object.  The text layout is line based:
//! the first non-comment line is `n <count>`, every following line is
//! `<tail> <head> <rate>` with 1-indexed species and a positive rate, and `#`
//! starts a comment that runs to the end of the line.  The JSON layout is
//! `{"n": int, "edges": [{"tail": int, "head": int, "rate": float}]}`.
//! Parse failures carry the 1-based line they were detected on wherever a
//! single line is to blame.
//!
//! Trajectories export as CSV with a `t,x1,...,xn` header, one row per
//! accepted step at 15 significant digits, plus a small JSON sidecar holding
//! the termination status.

use crate::dynamics::Trajectory;
use crate::graph::{GraphError, HyperchainSystem};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Why a network file failed to parse.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("no header line found; expected `n <count>`")]
    MissingHeader,
    #[error("line {line}: expected header `n <count>`, got `{content}`")]
    BadHeader { line: usize, content: String },
    #[error("line {line}: expected `<tail> <head> <rate>`, got `{content}`")]
    BadEdgeLine { line: usize, content: String },
    #[error("line {line}: {source}")]
    BadEdge { line: usize, source: GraphError },
    #[error("edge list is not a valid network: {0}")]
    Network(#[from] GraphError),
    #[error("invalid JSON network: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonEdge {
    tail: usize,
    head: usize,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonNetwork {
    n: usize,
    edges: Vec<JsonEdge>,
}

/// Parses either supported format, deciding by the first non-whitespace
/// character: `{` selects JSON, anything else the text layout.
pub fn parse_network(text: &str) -> Result<HyperchainSystem, IoError> {
    if text.trim_start().starts_with('{') {
        parse_json_network(text)
    } else {
        parse_text_network(text)
    }
}

/// Parses the line-based text layout.
pub fn parse_text_network(text: &str) -> Result<HyperchainSystem, IoError> {
    let mut n: Option<usize> = None;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut seen: std::collections::BTreeSet<(usize, usize)> = std::collections::BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some(count) = n else {
            if tokens.len() == 2 && tokens[0] == "n" {
                if let Ok(c) = tokens[1].parse::<usize>() {
                    n = Some(c);
                    continue;
                }
            }
            return Err(IoError::BadHeader { line, content: content.to_string() });
        };
        if tokens.len() != 3 {
            return Err(IoError::BadEdgeLine { line, content: content.to_string() });
        }
        let (Ok(tail), Ok(head), Ok(rate)) = (
            tokens[0].parse::<usize>(),
            tokens[1].parse::<usize>(),
            tokens[2].parse::<f64>(),
        ) else {
            return Err(IoError::BadEdgeLine { line, content: content.to_string() });
        };
        if tail < 1 || tail > count || head < 1 || head > count {
            return Err(IoError::BadEdge {
                line,
                source: GraphError::IndexOutOfRange { tail, head, n: count },
            });
        }
        if !seen.insert((tail, head)) {
            return Err(IoError::BadEdge { line, source: GraphError::DuplicateEdge(tail, head) });
        }
        if !rate.is_finite() {
            return Err(IoError::BadEdge { line, source: GraphError::NonFinite { tail, head } });
        }
        if rate <= 0.0 {
            return Err(IoError::BadEdge {
                line,
                source: GraphError::NonPositiveRate { tail, head, value: rate },
            });
        }
        edges.push((tail, head, rate));
    }
    let n = n.ok_or(IoError::MissingHeader)?;
    Ok(HyperchainSystem::from_edge_rates(n, &edges)?)
}

/// Parses the JSON layout.
pub fn parse_json_network(text: &str) -> Result<HyperchainSystem, IoError> {
    let net: JsonNetwork = serde_json::from_str(text)?;
    let edges: Vec<(usize, usize, f64)> =
        net.edges.iter().map(|e| (e.tail, e.head, e.rate)).collect();
    Ok(HyperchainSystem::from_edge_rates(net.n, &edges)?)
}

/// Renders the text layout.  Edges appear in ascending `(tail, head)` order
/// and rates use the shortest representation that round-trips, so the output
/// is deterministic and parses back to the identical system.
pub fn network_to_text(sys: &HyperchainSystem) -> String {
    let mut out = format!("n {}\n", sys.n());
    for (tail, head, rate) in sys.edge_rates() {
        out.push_str(&format!("{tail} {head} {rate}\n"));
    }
    out
}

/// Renders the JSON layout, deterministically.
pub fn network_to_json(sys: &HyperchainSystem) -> String {
    let net = JsonNetwork {
        n: sys.n(),
        edges: sys
            .edge_rates()
            .into_iter()
            .map(|(tail, head, rate)| JsonEdge { tail, head, rate })
            .collect(),
    };
    serde_json::to_string_pretty(&net).expect("network serialization cannot fail")
}

/// Renders a trajectory as CSV: header `t,x1,...,xn`, one row per accepted
/// step, values at 15 significant digits.
pub fn trajectory_to_csv(tr: &Trajectory) -> String {
    let n = tr.states.first().map_or(0, |s| s.len());
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (t, state) in tr.times.iter().zip(&tr.states) {
        out.push_str(&format!("{t:.14e}"));
        for v in state.iter() {
            out.push_str(&format!(",{v:.14e}"));
        }
        out.push('\n');
    }
    out
}

/// JSON sidecar for a trajectory export: termination status, final time, and
/// the number of recorded rows.
pub fn trajectory_sidecar_json(tr: &Trajectory) -> String {
    #[derive(Serialize)]
    struct Sidecar<'a> {
        termination: &'a crate::dynamics::Termination,
        final_time: f64,
        rows: usize,
    }
    let sidecar = Sidecar {
        termination: &tr.termination,
        final_time: tr.final_time(),
        rows: tr.times.len(),
    };
    serde_json::to_string_pretty(&sidecar).expect("sidecar serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{self, IntegrateOptions, Mode};
    use crate::networks;
    use nalgebra::dvector;

    fn same_system(a: &HyperchainSystem, b: &HyperchainSystem) -> bool {
        a.n() == b.n() && a.edge_rates() == b.edge_rates()
    }

    #[test]
    fn text_round_trip_preserves_the_system() {
        let sys = networks::five_species(0.5, 2.0).unwrap();
        let text = network_to_text(&sys);
        let back = parse_text_network(&text).unwrap();
        assert!(same_system(&sys, &back));
    }

    #[test]
    fn json_round_trip_preserves_the_system() {
        let sys = networks::six_species();
        let json = network_to_json(&sys);
        let back = parse_json_network(&json).unwrap();
        assert!(same_system(&sys, &back));
    }

    #[test]
    fn parse_network_sniffs_both_formats() {
        let sys = networks::hypercycle(3);
        assert!(same_system(&sys, &parse_network(&network_to_text(&sys)).unwrap()));
        assert!(same_system(&sys, &parse_network(&format!("  \n {}", network_to_json(&sys))).unwrap()));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a 2-cycle\n\n  n 2   # two species\n1 2 1.0\n# middle\n2 1 0.5\n";
        let sys = parse_text_network(text).unwrap();
        assert_eq!(sys.n(), 2);
        assert_eq!(sys.rate(2, 1), 0.5);
    }

    #[test]
    fn header_must_come_first_and_be_well_formed() {
        assert!(matches!(parse_text_network(""), Err(IoError::MissingHeader)));
        assert!(matches!(parse_text_network("# only comments\n"), Err(IoError::MissingHeader)));
        let err = parse_text_network("species 2\n1 2 1.0\n").unwrap_err();
        assert!(matches!(err, IoError::BadHeader { line: 1, .. }));
        let err = parse_text_network("# lead\nn two\n").unwrap_err();
        assert!(matches!(err, IoError::BadHeader { line: 2, .. }));
    }

    #[test]
    fn malformed_edge_lines_report_their_line_number() {
        let err = parse_text_network("n 2\n1 2\n").unwrap_err();
        assert!(matches!(err, IoError::BadEdgeLine { line: 2, .. }));
        let err = parse_text_network("n 2\n1 2 1.0\n2 one 1.0\n").unwrap_err();
        assert!(matches!(err, IoError::BadEdgeLine { line: 3, .. }));
    }

    #[test]
    fn out_of_range_duplicate_and_bad_rates_report_their_line_number() {
        let err = parse_text_network("n 2\n1 3 1.0\n").unwrap_err();
        assert!(matches!(
            err,
            IoError::BadEdge { line: 2, source: GraphError::IndexOutOfRange { .. } }
        ));
        let err = parse_text_network("n 2\n1 2 1.0\n1 2 2.0\n").unwrap_err();
        assert!(matches!(
            err,
            IoError::BadEdge { line: 3, source: GraphError::DuplicateEdge(1, 2) }
        ));
        let err = parse_text_network("n 2\n1 2 0.0\n").unwrap_err();
        assert!(matches!(
            err,
            IoError::BadEdge { line: 2, source: GraphError::NonPositiveRate { .. } }
        ));
        let err = parse_text_network("n 2\n1 2 inf\n").unwrap_err();
        assert!(matches!(err, IoError::BadEdge { line: 2, source: GraphError::NonFinite { .. } }));
    }

    #[test]
    fn whole_file_properties_are_rejected_without_a_line() {
        let err = parse_text_network("n 3\n1 2 1.0\n2 1 1.0\n").unwrap_err();
        assert!(matches!(err, IoError::Network(GraphError::IsolatedVertex(3))));
        let err = parse_text_network("n 2\n").unwrap_err();
        assert!(matches!(err, IoError::Network(GraphError::EmptyEdgeSet)));
    }

    #[test]
    fn json_rejects_invalid_rates_through_the_same_validation() {
        let text = r#"{"n": 2, "edges": [{"tail": 1, "head": 2, "rate": -1.0},
                                          {"tail": 2, "head": 1, "rate": 1.0}]}"#;
        let err = parse_json_network(text).unwrap_err();
        assert!(matches!(err, IoError::Network(GraphError::NonPositiveRate { .. })));
        assert!(parse_json_network("{\"n\": 2}").is_err());
    }

    #[test]
    fn csv_has_header_one_row_per_step_and_full_precision() {
        let sys = networks::hypercycle(3);
        let x0 = dvector![0.5, 0.3, 0.2];
        let tr =
            dynamics::integrate(&sys, Mode::Relative, &x0, 1.0, &IntegrateOptions::default())
                .unwrap();
        let csv = trajectory_to_csv(&tr);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,x2,x3");
        assert_eq!(csv.lines().count(), tr.times.len() + 1);
        let first = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[0].parse::<f64>().unwrap(), 0.0);
        assert_eq!(fields[1].parse::<f64>().unwrap(), 0.5);
        assert!(fields[1].contains('e'), "scientific notation expected, got {}", fields[1]);
    }

    #[test]
    fn sidecar_records_termination_kind() {
        let sys = networks::hypercycle(2);
        let x0 = dvector![0.9, 0.1];
        let tr =
            dynamics::integrate(&sys, Mode::Relative, &x0, 200.0, &IntegrateOptions::default())
                .unwrap();
        let sidecar = trajectory_sidecar_json(&tr);
        let value: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
        assert!(value["termination"]["kind"].is_string());
        assert!(value["rows"].as_u64().unwrap() >= 2);
    }
}
