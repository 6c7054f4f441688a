//! Dense simulation of the absorbing quantum walk on the directed-edge space.
//!
//! Phase estimation is not simulated on an ancilla register. Its zero-outcome probability
//! and post-measurement state follow in closed form from the spectrum of the walk operator
//! (see [`phase`]). Costs count controlled applications of the operator.

pub mod eta;
pub mod operator;
pub mod phase;
pub mod process;
pub mod resistance;
pub mod space;

pub use eta::{eta_modified_prepare, eta_modified_prepare_with, eta_output_analysis, AeMode, EtaAnalysis, EtaPreparation};
pub use operator::{build_operator, build_operator_with_cap, invariant_subspace_check, InvariantReport, QWalkOperator};
pub use phase::{prepare_flow_state, FlowPreparation, PhaseEstModel};
pub use process::{budget_doubling_search, quantum_elfs_process, QuantumElfs, QuantumElfsRun, SearchReport, Termination};
pub use resistance::{qw_resistance_probability, ResistanceProbability};
pub use space::{flow_state, phi_minus, star_state, EdgeSpace, EdgeState};
