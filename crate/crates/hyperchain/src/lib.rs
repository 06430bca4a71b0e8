//! Catalytic influence networks ("hyperchains"): directed graphs of species in
//! which every edge X_i ⇢ X_j means that X_i catalyses the replication of X_j
//! at some positive rate.  The crate builds and validates such networks,
//! classifies their graph structure, computes and classifies equilibria of the
//! induced replicator dynamics, analyses linear stability, integrates the
//! absolute and relative kinetics, and tests numerically for permanence.

pub mod analysis;
pub mod dynamics;
pub mod equilibria;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod networks;
pub mod permanence;
pub mod report;
pub mod stability;

pub use graph::{Hyperchain, HyperchainSystem, RateMatrix};
