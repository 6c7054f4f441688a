mod classical;
mod quantum;
mod trees;

use elfs_core::{Graph, Vertex};

use crate::args::{Experiment, Variant};
use crate::error::Result;
use crate::report::Outcome;

/// Single Monte-Carlo comparisons are judged at this many standard errors, so a correct
/// run fails for fewer than one seed in ten thousand.
pub const SIGMA: f64 = 4.0;

pub struct Ctx {
    pub graph: Graph,
    pub source: Vertex,
    pub sink: Vec<Vertex>,
    pub eps: f64,
    pub replicas: Option<usize>,
    pub seed: u64,
    pub variant: Variant,
}

impl Ctx {
    pub fn replicas(&self, default: usize) -> usize {
        self.replicas.unwrap_or(default)
    }
}

/// Plain statement of the claim each experiment checks.
pub fn anchor(exp: Experiment) -> &'static str {
    match exp {
        Experiment::GraphInfo => "input graph is connected with a reachable sink set",
        Experiment::ElectricSolve => "unit electric flow: energy equals effective resistance and equals the source voltage",
        Experiment::ElfsEht => "electric hitting time from the fundamental matrix of the elfs chain",
        Experiment::ArrivalCompare => "elfs arrival law equals the random-walk absorption law",
        Experiment::Identities => "one-step identities E[HT] = HT - ET/2, E[sum ET] = 2 HT and the sqrt-ET Jensen chain",
        Experiment::CouplingVertex => "random walk stopped by the vertex rule lands on the next elfs source with mean ET/2 steps",
        Experiment::CouplingEdge => "lazy walk stopped by the edge rule samples the electric flow distribution",
        Experiment::EscapeTime => "expected last exit time from the source equals ET_s",
        Experiment::Doob => "walk conditioned to return to s has mean excursion (ET_s - 1)/(R_s d_s - 1)",
        Experiment::EstimateRd => "mean number of visits to s before absorption equals R_s d_s",
        Experiment::SchurCheck => "Schur complement preserves voltages and the walk watched on the kept set",
        Experiment::Pba => "at a cut vertex, a later A sample after the first B sample has probability f_A/(1+f_A)",
        Experiment::TreeRecurrence => "two-sided tree recurrence for the samples on one edge",
        Experiment::TreeBound => "on trees EHT <= 2 + sum_m f_m log2(R_s w_m / f_m^2)",
        Experiment::CompleteGraphScan => "on K_n with |M| sinks, EHT = 1/p with p = (1/(|M|+1) + |M|/n)/2",
        Experiment::QwInvariants => "phase-zero space of the absorbing walk has dimension 1 + cycles + |M| - 1 and overlap 1/(R_s d_s)",
        Experiment::QwFlowstate => "phase estimation from the source star returns the flow state within delta sqrt(2 ET)",
        Experiment::QwEta => "halving the attached weight until the flow state is likely yields an eps-close edge sample",
        Experiment::QwElfs => "elfs driven by flow-state preparation reproduces the arrival law within its cost budget",
        Experiment::QwSearch => "budget doubling finds a marked vertex without knowing HT or EHT",
        Experiment::QwResistance => "zero-outcome probability lies in [1, 1 + eps]/(R_s d_s)",
    }
}

pub fn run(exp: Experiment, ctx: &Ctx) -> Result<Outcome> {
    match exp {
        Experiment::GraphInfo => classical::graph_info(ctx),
        Experiment::ElectricSolve => classical::electric_solve(ctx),
        Experiment::ElfsEht => classical::elfs_eht(ctx),
        Experiment::ArrivalCompare => classical::arrival_compare(ctx),
        Experiment::Identities => classical::identities(ctx),
        Experiment::CouplingVertex => classical::coupling_vertex(ctx),
        Experiment::CouplingEdge => classical::coupling_edge(ctx),
        Experiment::EscapeTime => classical::escape_time(ctx),
        Experiment::Doob => classical::doob(ctx),
        Experiment::EstimateRd => classical::estimate_rd(ctx),
        Experiment::CompleteGraphScan => classical::complete_graph_scan(ctx),
        Experiment::SchurCheck => trees::schur_check(ctx),
        Experiment::Pba => trees::pba(ctx),
        Experiment::TreeRecurrence => trees::tree_recurrence(ctx),
        Experiment::TreeBound => trees::tree_bound(ctx),
        Experiment::QwInvariants => quantum::invariants(ctx),
        Experiment::QwFlowstate => quantum::flowstate(ctx),
        Experiment::QwEta => quantum::eta(ctx),
        Experiment::QwElfs => quantum::elfs(ctx),
        Experiment::QwSearch => quantum::search(ctx),
        Experiment::QwResistance => quantum::resistance(ctx),
    }
}
