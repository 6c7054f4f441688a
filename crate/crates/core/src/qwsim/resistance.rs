//! Zero-outcome probability behind quantum estimation of `R_s d_s`.

use serde::Serialize;

use super::operator::build_operator;
use super::phase::{zero_outcome, PhaseEstModel};
use super::space::phi_minus;
use crate::electric::solve_flow;
use crate::error::{ElfsError, Result};
use crate::graph::{FlowProblem, Graph, Vertex};

#[derive(Clone, Debug, Serialize)]
pub struct ResistanceProbability {
    pub probability: f64,
    /// Requested precision `sqrt(eps / et_upper)`.
    pub delta: f64,
    /// Realized precision `2 pi / 2^t`.
    pub delta_realized: f64,
    pub bits: u32,
    pub rd: f64,
    pub et: f64,
    /// Certified interval `[1, 1 + eps] / (R_s d_s)`.
    pub lower: f64,
    pub upper: f64,
    /// `(1 + delta_t^2 2 ET_s) / (R_s d_s)`, the phase-estimation upper bound.
    pub sandwich_upper: f64,
    /// `1 / p'`, a `(1 + eps)`-multiplicative estimate of `R_s d_s`.
    pub estimate: f64,
    /// Walk steps per phase-estimation round, `2^t`.
    pub round_cost: u64,
    /// `sqrt(et_upper) (eps^{-3/2} + log2(R_s d_s))`, the walk-step count up to constants.
    pub cost_formula: f64,
    /// Walk steps of amplitude estimation without the modified graph: `2^t / (p' eps)`.
    pub direct_cost: f64,
}

pub fn qw_resistance_probability(g: &Graph, s: Vertex, sink: &[Vertex], et_upper: f64, epsilon: f64) -> Result<ResistanceProbability> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ElfsError::InvalidConfig(format!("epsilon {epsilon} not in (0, 1)")));
    }
    let flow = solve_flow(&FlowProblem::new(g, s, sink)?)?;
    let r = flow.resistance();
    let v = flow.voltages();
    let et = (0..g.n()).map(|x| v[x] * v[x] * g.degree(x)).sum::<f64>() / r;
    if !(et_upper >= et * (1.0 - 1e-12)) {
        return Err(ElfsError::InvalidBound { what: "et_upper".into(), supplied: et_upper, actual: et });
    }
    let delta = (epsilon / et_upper).sqrt();
    resistance_probability_at(g, s, sink, et, delta, epsilon)
}

/// Same computation at an arbitrary requested precision.
pub fn resistance_probability_at(g: &Graph, s: Vertex, sink: &[Vertex], et_upper: f64, delta: f64, epsilon: f64) -> Result<ResistanceProbability> {
    let op = build_operator(g, s, sink)?;
    let flow = solve_flow(&FlowProblem::new(g, s, sink)?)?;
    let r = flow.resistance();
    let v = flow.voltages();
    let et = (0..g.n()).map(|x| v[x] * v[x] * g.degree(x)).sum::<f64>() / r;
    let rd = r * g.degree(s);
    let model = PhaseEstModel::for_precision(delta)?;
    let psi = phi_minus(g, op.space(), s);
    let p = zero_outcome(&op, &model, psi.amps())?.probability;
    let dt = model.precision();
    let lower = 1.0 / rd;
    let upper = (1.0 + epsilon) / rd;
    let sandwich_upper = (1.0 + dt * dt * 2.0 * et) / rd;
    let tol = 1e-9;
    if p < lower - tol || p > upper + tol {
        return Err(ElfsError::IdentityViolation { what: format!("p' in [1, 1 + eps] / (R_s d_s), eps = {epsilon}"), lhs: p, rhs: upper });
    }
    Ok(ResistanceProbability {
        probability: p,
        delta,
        delta_realized: dt,
        bits: model.bits(),
        rd,
        et,
        lower,
        upper,
        sandwich_upper,
        estimate: 1.0 / p,
        round_cost: model.rounds(),
        cost_formula: et_upper.sqrt() * (epsilon.powf(-1.5) + rd.log2()),
        direct_cost: model.rounds() as f64 / (p * epsilon),
    })
}
