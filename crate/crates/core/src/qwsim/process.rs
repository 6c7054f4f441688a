//! The elfs process driven by simulated flow-state preparation, and budget-doubling search.

use rand::Rng;
use serde::Serialize;

use super::eta::{AeMode, CostMeter, EtaSampler};
use super::phase::PhaseEstModel;
use crate::elfs::exact_functionals;
use crate::error::{ElfsError, Result};
use crate::graph::{FlowProblem, Graph, SinkSet, Vertex};

/// Constant in front of the cumulative cost cap.
pub const COST_CONSTANT: f64 = 64.0;
/// Accuracy used by every search attempt.
pub const SEARCH_EPSILON: f64 = 0.1;
const MAX_BUDGET_EXPONENT: u32 = 60;

/// `log2(2 + ht / eht)`, positive even when `ht <= eht`.
pub fn log_factor(ht: f64, eht: f64) -> f64 {
    (2.0 + ht / eht).log2()
}

/// Cumulative walk-step cap `kappa (T / eps) eht log2(2 + ht/eht)` with
/// `T = sqrt(2 ht eht) / eps`, i.e. `kappa sqrt(2 ht) eht^{3/2} log2(2 + ht/eht) / eps^2`.
pub fn cost_cap(ht: f64, eht: f64, epsilon: f64) -> f64 {
    COST_CONSTANT * (2.0 * ht).sqrt() * eht.powf(1.5) * log_factor(ht, eht) / (epsilon * epsilon)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    Absorbed,
    /// More than `Gamma` elfs steps.
    StepLimit,
    /// The cumulative cost cap was reached.
    CostLimit,
}

/// One run of the process.
#[derive(Clone, Debug, Serialize)]
pub struct QuantumElfsRun {
    /// The sink reached, or the current vertex on truncation.
    pub arrival: Vertex,
    pub termination: Termination,
    pub steps: usize,
    /// Walk steps spent in each elfs step.
    pub ledger: Vec<u64>,
    pub total_cost: u64,
}

/// Process parameters and the shared stage cache.
pub struct QuantumElfs<'g> {
    graph: &'g Graph,
    sink: SinkSet,
    epsilon: f64,
    /// Per-step budget `T = sqrt(2 ht eht) / eps`.
    pub budget: f64,
    /// `Gamma = ceil(eht / eps)`.
    pub gamma: usize,
    pub cap: u64,
    sampler: EtaSampler<'g>,
}

impl<'g> QuantumElfs<'g> {
    /// Builds the process without checking the bounds against the true values.
    pub fn unchecked(graph: &'g Graph, sink: &[Vertex], ht_upper: f64, eht_upper: f64, epsilon: f64, ae: AeMode) -> Result<QuantumElfs<'g>> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(ElfsError::InvalidConfig(format!("epsilon {epsilon} not in (0, 1)")));
        }
        if !(ht_upper > 0.0 && ht_upper.is_finite()) || !(eht_upper > 0.0 && eht_upper.is_finite()) {
            return Err(ElfsError::InvalidConfig("bounds must be positive and finite".into()));
        }
        let sink = SinkSet::new(graph, sink)?;
        let budget = (2.0 * ht_upper * eht_upper).sqrt() / epsilon;
        let coarse = PhaseEstModel::for_precision(1.0 / (2.0 * (4.0 * ht_upper).sqrt()))?;
        let fine = PhaseEstModel::for_precision(1.0 / budget)?;
        let cap = cost_cap(ht_upper, eht_upper, epsilon);
        Ok(QuantumElfs {
            graph,
            sampler: EtaSampler::new(graph, &sink, coarse, fine, ae),
            sink,
            epsilon,
            budget,
            gamma: (eht_upper / epsilon).ceil() as usize,
            cap: if cap >= u64::MAX as f64 { u64::MAX } else { cap.floor() as u64 },
        })
    }

    /// Builds the process after checking `ht_upper >= HT_s` and `eht_upper >= EHT_s`.
    pub fn new(graph: &'g Graph, s: Vertex, sink: &[Vertex], ht_upper: f64, eht_upper: f64, epsilon: f64) -> Result<QuantumElfs<'g>> {
        FlowProblem::new(graph, s, sink)?;
        let exact = exact_functionals(graph, s, sink)?;
        if !(ht_upper >= exact.ht * (1.0 - 1e-12)) {
            return Err(ElfsError::InvalidBound { what: "ht_upper".into(), supplied: ht_upper, actual: exact.ht });
        }
        if !(eht_upper >= exact.eht * (1.0 - 1e-12)) {
            return Err(ElfsError::InvalidBound { what: "eht_upper".into(), supplied: eht_upper, actual: exact.eht });
        }
        QuantumElfs::unchecked(graph, sink, ht_upper, eht_upper, epsilon, AeMode::Exact)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn fine_bits(&self) -> u32 {
        self.sampler.fine().bits()
    }

    pub fn coarse_bits(&self) -> u32 {
        self.sampler.coarse().bits()
    }

    pub fn run<R: Rng + ?Sized>(&self, s: Vertex, rng: &mut R) -> Result<QuantumElfsRun> {
        self.graph.check_vertex(s)?;
        let mut meter = CostMeter::with_cap(self.cap);
        let mut z = s;
        let mut ledger = Vec::new();
        while !self.sink.contains(z) {
            if ledger.len() >= self.gamma {
                return Ok(QuantumElfsRun { arrival: z, termination: Termination::StepLimit, steps: ledger.len(), ledger, total_cost: meter.spent });
            }
            let draw = self.sampler.draw(z, &mut meter, rng)?;
            ledger.push(draw.cost);
            let Some(edge) = draw.edge else {
                return Ok(QuantumElfsRun { arrival: z, termination: Termination::CostLimit, steps: ledger.len(), ledger, total_cost: meter.spent });
            };
            let e = self.graph.edge(edge);
            z = if rng.random::<bool>() { e.u } else { e.v };
        }
        Ok(QuantumElfsRun { arrival: z, termination: Termination::Absorbed, steps: ledger.len(), ledger, total_cost: meter.spent })
    }
}

/// One run from `s` with validated bounds.
pub fn quantum_elfs_process<R: Rng + ?Sized>(
    g: &Graph,
    s: Vertex,
    sink: &[Vertex],
    ht_upper: f64,
    eht_upper: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<QuantumElfsRun> {
    QuantumElfs::new(g, s, sink, ht_upper, eht_upper, epsilon)?.run(s, rng)
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchAttempt {
    pub budget_exponent: u32,
    pub ht_guess: f64,
    pub eht_guess: f64,
    pub cost: u64,
    pub found: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchReport {
    pub marked: Vertex,
    pub total_cost: u64,
    pub attempts: Vec<SearchAttempt>,
    pub final_exponent: u32,
    /// Exact `cost_cap(HT_s, EHT_s, 1/10)`.
    pub exact_cost: f64,
    /// First exponent with `2^i >= exact_cost`.
    pub i_star: u32,
}

/// `eht` with `cost_cap(ht, eht, eps)` in `[budget, 2 budget)`, or `None` when even
/// `eht = 1` costs at least twice the budget.
pub fn eht_guess(ht: f64, budget: f64, epsilon: f64) -> Option<f64> {
    let f = |e: f64| cost_cap(ht, e, epsilon);
    if f(1.0) >= 2.0 * budget {
        return None;
    }
    if f(1.0) >= budget {
        return Some(1.0);
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    while f(hi) < budget {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Budgets `2^i`; for each, guesses `ht = 2^i / 2^j` with the matching `eht`. Uses only
/// membership queries on the sink: an attempt succeeds when its output is a sink vertex.
pub fn budget_doubling_search<R: Rng + ?Sized>(g: &Graph, s: Vertex, sink: &[Vertex], rng: &mut R) -> Result<SearchReport> {
    let problem = FlowProblem::new(g, s, sink)?;
    let exact = exact_functionals(g, s, sink)?;
    let exact_cost = cost_cap(exact.ht, exact.eht, SEARCH_EPSILON);
    let i_star = exact_cost.log2().ceil().max(0.0) as u32;
    let mut attempts = Vec::new();
    let mut total = 0u64;
    for i in 0..=MAX_BUDGET_EXPONENT {
        let budget = 2f64.powi(i as i32);
        for j in 0..=i {
            let ht = budget / 2f64.powi(j as i32);
            if ht < 1.0 {
                continue;
            }
            let Some(eht) = eht_guess(ht, budget, SEARCH_EPSILON) else { continue };
            let process = QuantumElfs::unchecked(g, sink, ht, eht, SEARCH_EPSILON, AeMode::Exact)?;
            let run = process.run(s, rng)?;
            total += run.total_cost;
            let found = problem.sink.contains(run.arrival);
            attempts.push(SearchAttempt { budget_exponent: i, ht_guess: ht, eht_guess: eht, cost: run.total_cost, found });
            if found {
                return Ok(SearchReport { marked: run.arrival, total_cost: total, attempts, final_exponent: i, exact_cost, i_star });
            }
        }
    }
    Err(ElfsError::StepLimitExceeded { limit: MAX_BUDGET_EXPONENT as usize })
}
