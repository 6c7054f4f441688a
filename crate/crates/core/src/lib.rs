//! Electric flow sampling (elfs) on weighted graphs.
//!
//! A unit electric flow from a source to a sink set induces a distribution over edges,
//! `p_e = f_e^2 / (R_s w_e)`. The elfs process repeatedly samples an edge from the flow of
//! the current source and moves to a uniformly random endpoint until it reaches a sink.
//! The crate provides exact linear-algebra oracles for the process, Monte-Carlo simulators,
//! couplings with the random walk, tree bounds, and a dense simulator of the quantum-walk
//! procedures built on the flow state.

pub mod coupling;
pub mod electric;
pub mod elfs;
pub mod error;
pub mod estimators;
pub mod generators;
pub mod graph;
pub mod qwsim;
pub mod rng;
pub mod stats;
pub mod tree;

pub use electric::{effective_resistance, sample_dist, solve_flow, ElectricFlow, FlowSampleDist};
pub use elfs::{
    check_step_identities, elfs_arrival_distribution, elfs_transition_matrix, exact_functionals, simulate_elfs,
    ArrivalDistribution, ElfsChain, ElfsSampler, ElfsTrace, VertexFunctionals,
};
pub use error::{ElfsError, Result};
pub use graph::{Edge, EdgeId, FlowProblem, Graph, SinkSet, Vertex};
