//! Flow-state preparation on the graph with a pendant vertex `s'` joined to `s` by weight
//! `eta d_s`, with `eta` found by halving.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::Serialize;

use super::operator::build_operator;
use super::phase::{analyze_flow_preparation, zero_outcome, PhaseEstModel};
use super::space::phi_minus;
use crate::electric::{sample_dist, solve_flow, FlowSampleDist};
use crate::error::{ElfsError, Result};
use crate::graph::{EdgeId, FlowProblem, Graph, SinkSet, Vertex};
use crate::stats::total_variation;

/// Coarse rounds charged for one amplitude estimate at precision 1/8.
pub const AE_ROUNDS: u64 = 8;
/// The branch threshold on the estimated success probability.
pub const AE_THRESHOLD: f64 = 0.125;
/// Samples behind one noisy amplitude estimate; the standard error is at most 1/24.
const AE_SHOTS: usize = 144;
const MAX_ITERATIONS: usize = 100_000;
const MAX_HALVINGS: u32 = 200;

/// How the success probability of the coarse round is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AeMode {
    /// The exact value.
    Exact,
    /// Binomial noise of roughly the amplitude-estimation precision.
    Sampled,
}

/// Exact electric quantities of the modified graph, each from its own solve.
#[derive(Clone, Debug, Serialize)]
pub struct ModifiedGraphReport {
    pub eta: f64,
    pub resistance: f64,
    pub degree: f64,
    pub et: f64,
    pub resistance_prime: f64,
    /// `R_s + 1/(eta d_s)`.
    pub resistance_prime_formula: f64,
    pub degree_prime: f64,
    pub rd_prime: f64,
    /// `1 + eta R_s d_s`.
    pub rd_prime_formula: f64,
    pub et_prime: f64,
    /// `1 + x + x^2/(1+x) + x ET_s/(1+x)` with `x = eta R_s d_s`.
    pub et_prime_formula: f64,
    /// `1 + 2 eta R_s d_s + ET_s`.
    pub et_prime_bound: f64,
    /// `R_s / R_s'`, the probability of keeping a measured sample.
    pub keep_probability: f64,
}

fn escape_time(g: &Graph, v: &[f64], r: f64) -> f64 {
    (0..g.n()).map(|x| v[x] * v[x] * g.degree(x)).sum::<f64>() / r
}

fn close(what: &str, a: f64, b: f64) -> Result<()> {
    let tol = 1e-9 * a.abs().max(b.abs()).max(1.0);
    if (a - b).abs() <= tol {
        Ok(())
    } else {
        Err(ElfsError::IdentityViolation { what: what.into(), lhs: a, rhs: b })
    }
}

/// Builds the modified graph for `eta` and checks its resistance and escape-time arithmetic.
pub fn modified_graph_report(g: &Graph, s: Vertex, sink: &SinkSet, eta: f64) -> Result<(Graph, Vertex, ModifiedGraphReport)> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(ElfsError::InvalidConfig(format!("eta {eta} not in (0, 1]")));
    }
    let flow = solve_flow(&FlowProblem::with_sink(g, s, sink.clone())?)?;
    let r = flow.resistance();
    let d = g.degree(s);
    let et = escape_time(g, flow.voltages(), r);
    let (gp, sp) = g.append_vertex(s, eta * d)?;
    let flow_p = solve_flow(&FlowProblem::with_sink(&gp, sp, SinkSet::new(&gp, sink.members())?)?)?;
    let rp = flow_p.resistance();
    let dp = gp.degree(sp);
    let et_p = escape_time(&gp, flow_p.voltages(), rp);
    let x = eta * r * d;
    let rep = ModifiedGraphReport {
        eta,
        resistance: r,
        degree: d,
        et,
        resistance_prime: rp,
        resistance_prime_formula: r + 1.0 / (eta * d),
        degree_prime: dp,
        rd_prime: rp * dp,
        rd_prime_formula: 1.0 + x,
        et_prime: et_p,
        et_prime_formula: 1.0 + x + x * x / (1.0 + x) + x * et / (1.0 + x),
        et_prime_bound: 1.0 + 2.0 * x + et,
        keep_probability: r / rp,
    };
    close("R_s' = R_s + 1/(eta d_s)", rep.resistance_prime, rep.resistance_prime_formula)?;
    close("d_s' = eta d_s", rep.degree_prime, eta * d)?;
    close("R_s' d_s' = 1 + eta R_s d_s", rep.rd_prime, rep.rd_prime_formula)?;
    close("ET_s' closed form", rep.et_prime, rep.et_prime_formula)?;
    if rep.et_prime > rep.et_prime_bound * (1.0 + 1e-12) || rep.et_prime > 4.0 * et * (1.0 + 1e-12) {
        return Err(ElfsError::IdentityViolation { what: "ET_s' <= 1 + 2 eta R_s d_s + ET_s <= 4 ET_s".into(), lhs: rep.et_prime, rhs: rep.et_prime_bound });
    }
    Ok((gp, sp, rep))
}

/// Everything one halving level needs, computed once.
#[derive(Clone, Debug, Serialize)]
pub struct EtaStage {
    pub halvings: u32,
    pub eta: f64,
    /// Zero-outcome probability of the coarse round.
    pub coarse_probability: f64,
    /// Zero-outcome probability of the fine round.
    pub fine_probability: f64,
    /// Probability that the measured edge of the fine output is not `(s, s')`.
    pub keep_probability: f64,
    /// Fine-round trace distance to the flow state of `G'` and its bound.
    pub trace_distance: f64,
    pub trace_bound: f64,
    pub modified: ModifiedGraphReport,
    /// Edge law of the kept samples, over the original edges.
    #[serde(skip)]
    pub kept: FlowSampleDist,
}

pub fn eta_stage(g: &Graph, s: Vertex, sink: &SinkSet, halvings: u32, coarse: &PhaseEstModel, fine: &PhaseEstModel) -> Result<EtaStage> {
    let eta = 0.5f64.powi(halvings as i32);
    let (gp, sp, modified) = modified_graph_report(g, s, sink, eta)?;
    let op = build_operator(&gp, sp, sink.members())?;
    let flow_p = solve_flow(&FlowProblem::new(&gp, sp, sink.members())?)?;
    let psi = phi_minus(&gp, op.space(), sp);
    let coarse_probability = zero_outcome(&op, coarse, psi.amps())?.probability;
    let (prep, out) = analyze_flow_preparation(&op, &flow_p, fine)?;
    let probs = out.edge_probabilities();
    let pendant = gp.edge_between(s, sp).expect("pendant edge exists");
    let keep_probability = 1.0 - probs[pendant];
    let kept: Vec<f64> = (0..g.num_edges()).map(|e| probs[e] / keep_probability).collect();
    Ok(EtaStage {
        halvings,
        eta,
        coarse_probability,
        fine_probability: prep.probability,
        keep_probability,
        trace_distance: prep.trace_distance,
        trace_bound: prep.trace_bound,
        modified,
        kept: FlowSampleDist::from_weights(kept)?,
    })
}

/// Cumulative walk-step counter with an optional ceiling.
#[derive(Clone, Copy, Debug)]
pub struct CostMeter {
    pub spent: u64,
    pub cap: u64,
}

impl CostMeter {
    pub fn unlimited() -> CostMeter {
        CostMeter { spent: 0, cap: u64::MAX }
    }

    pub fn with_cap(cap: u64) -> CostMeter {
        CostMeter { spent: 0, cap }
    }

    /// Charges `c` unless that would pass the ceiling.
    pub fn charge(&mut self, c: u64) -> bool {
        match self.spent.checked_add(c) {
            Some(total) if total <= self.cap => {
                self.spent = total;
                true
            }
            _ => false,
        }
    }
}

/// One edge sample drawn through the halving loop.
#[derive(Clone, Debug, Serialize)]
pub struct EtaDraw {
    /// `None` when the cost meter ran out first.
    pub edge: Option<EdgeId>,
    pub halvings: u32,
    pub coarse_rounds: u64,
    pub fine_rounds: u64,
    pub postselection_failures: u64,
    pub cost: u64,
}

/// Halving-loop sampler with per-(vertex, level) stage cache.
pub struct EtaSampler<'g> {
    graph: &'g Graph,
    sink: SinkSet,
    coarse: PhaseEstModel,
    fine: PhaseEstModel,
    ae: AeMode,
    stages: Mutex<HashMap<(Vertex, u32), Arc<EtaStage>>>,
}

impl<'g> EtaSampler<'g> {
    pub fn new(graph: &'g Graph, sink: &SinkSet, coarse: PhaseEstModel, fine: PhaseEstModel, ae: AeMode) -> EtaSampler<'g> {
        EtaSampler { graph, sink: sink.clone(), coarse, fine, ae, stages: Mutex::new(HashMap::new()) }
    }

    pub fn coarse(&self) -> &PhaseEstModel {
        &self.coarse
    }

    pub fn fine(&self) -> &PhaseEstModel {
        &self.fine
    }

    pub fn stage(&self, z: Vertex, halvings: u32) -> Result<Arc<EtaStage>> {
        if let Some(st) = self.stages.lock().expect("stage cache").get(&(z, halvings)) {
            return Ok(st.clone());
        }
        let st = Arc::new(eta_stage(self.graph, z, &self.sink, halvings, &self.coarse, &self.fine)?);
        self.stages.lock().expect("stage cache").insert((z, halvings), st.clone());
        Ok(st)
    }

    /// The level at which the exact estimate first reaches the threshold.
    pub fn exact_exit_level(&self, z: Vertex) -> Result<u32> {
        for h in 0..MAX_HALVINGS {
            if self.stage(z, h)?.coarse_probability >= AE_THRESHOLD {
                return Ok(h);
            }
        }
        Err(ElfsError::StepLimitExceeded { limit: MAX_HALVINGS as usize })
    }

    fn estimate<R: Rng + ?Sized>(&self, p: f64, rng: &mut R) -> f64 {
        match self.ae {
            AeMode::Exact => p,
            AeMode::Sampled => (0..AE_SHOTS).filter(|_| rng.random::<f64>() < p).count() as f64 / AE_SHOTS as f64,
        }
    }

    /// Runs the loop from `z` until a kept sample or until `meter` refuses a charge.
    pub fn draw<R: Rng + ?Sized>(&self, z: Vertex, meter: &mut CostMeter, rng: &mut R) -> Result<EtaDraw> {
        let coarse_cost = AE_ROUNDS * self.coarse.rounds();
        let fine_cost = self.fine.rounds();
        let start = meter.spent;
        let mut draw = EtaDraw { edge: None, halvings: 0, coarse_rounds: 0, fine_rounds: 0, postselection_failures: 0, cost: 0 };
        for _ in 0..MAX_ITERATIONS {
            if draw.halvings >= MAX_HALVINGS {
                break;
            }
            let st = self.stage(z, draw.halvings)?;
            if !meter.charge(coarse_cost) {
                draw.cost = meter.spent - start;
                return Ok(draw);
            }
            draw.coarse_rounds += 1;
            if self.estimate(st.coarse_probability, rng) < AE_THRESHOLD {
                draw.halvings += 1;
                continue;
            }
            if !meter.charge(fine_cost) {
                draw.cost = meter.spent - start;
                return Ok(draw);
            }
            draw.fine_rounds += 1;
            if rng.random::<f64>() >= st.fine_probability {
                continue;
            }
            if rng.random::<f64>() >= st.keep_probability {
                draw.postselection_failures += 1;
                continue;
            }
            draw.edge = Some(st.kept.draw(rng));
            draw.cost = meter.spent - start;
            return Ok(draw);
        }
        Err(ElfsError::StepLimitExceeded { limit: MAX_ITERATIONS })
    }
}

/// Precisions of the coarse and fine rounds for the bound `et_upper`.
pub fn eta_models(et_upper: f64, epsilon: f64) -> Result<(PhaseEstModel, PhaseEstModel)> {
    let base = 2.0 * (4.0 * et_upper).sqrt();
    Ok((PhaseEstModel::for_precision(1.0 / base)?, PhaseEstModel::for_precision(epsilon / base)?))
}

fn validate(g: &Graph, s: Vertex, sink: &[Vertex], et_upper: f64, epsilon: f64) -> Result<(SinkSet, f64, f64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ElfsError::InvalidConfig(format!("epsilon {epsilon} not in (0, 1)")));
    }
    let problem = FlowProblem::new(g, s, sink)?;
    let flow = solve_flow(&problem)?;
    let et = escape_time(g, flow.voltages(), flow.resistance());
    if !(et_upper >= et * (1.0 - 1e-12)) {
        return Err(ElfsError::InvalidBound { what: "et_upper".into(), supplied: et_upper, actual: et });
    }
    Ok((problem.sink, flow.resistance() * g.degree(s), et))
}

/// Result of [`eta_modified_prepare`].
#[derive(Clone, Debug, Serialize)]
pub struct EtaPreparation {
    pub edge: EdgeId,
    pub draw: EtaDraw,
    pub final_eta: f64,
    pub rd: f64,
    /// `log2(R_s d_s) + 2`.
    pub halving_limit: f64,
    pub coarse_bits: u32,
    pub fine_bits: u32,
    pub stage: EtaStage,
}

pub fn eta_modified_prepare<R: Rng + ?Sized>(g: &Graph, s: Vertex, sink: &[Vertex], et_upper: f64, epsilon: f64, rng: &mut R) -> Result<EtaPreparation> {
    eta_modified_prepare_with(g, s, sink, et_upper, epsilon, AeMode::Exact, rng)
}

pub fn eta_modified_prepare_with<R: Rng + ?Sized>(
    g: &Graph,
    s: Vertex,
    sink: &[Vertex],
    et_upper: f64,
    epsilon: f64,
    ae: AeMode,
    rng: &mut R,
) -> Result<EtaPreparation> {
    let (sink, rd, _) = validate(g, s, sink, et_upper, epsilon)?;
    let (coarse, fine) = eta_models(et_upper, epsilon)?;
    let sampler = EtaSampler::new(g, &sink, coarse, fine, ae);
    let draw = sampler.draw(s, &mut CostMeter::unlimited(), rng)?;
    let halving_limit = rd.log2() + 2.0;
    if ae == AeMode::Exact && draw.halvings as f64 > halving_limit {
        return Err(ElfsError::IdentityViolation { what: "halving count <= log2(R_s d_s) + 2".into(), lhs: draw.halvings as f64, rhs: halving_limit });
    }
    let stage = (*sampler.stage(s, draw.halvings)?).clone();
    Ok(EtaPreparation {
        edge: draw.edge.expect("unlimited meter"),
        final_eta: stage.eta,
        rd,
        halving_limit,
        coarse_bits: coarse.bits(),
        fine_bits: fine.bits(),
        draw,
        stage,
    })
}

/// Exact law of the sample returned with exact amplitude estimates.
#[derive(Clone, Debug, Serialize)]
pub struct EtaAnalysis {
    pub halvings: u32,
    pub halving_limit: f64,
    pub final_eta: f64,
    pub distribution: Vec<f64>,
    pub exact: Vec<f64>,
    pub total_variation: f64,
    /// `2 D / q`: trace distance `D` of the fine state, inflated by postselection on an
    /// event of ideal probability `q = R_s / R_s'`.
    pub tv_bound: f64,
    pub stage: EtaStage,
}

pub fn eta_output_analysis(g: &Graph, s: Vertex, sink: &[Vertex], et_upper: f64, epsilon: f64) -> Result<EtaAnalysis> {
    let (sink_set, rd, _) = validate(g, s, sink, et_upper, epsilon)?;
    let (coarse, fine) = eta_models(et_upper, epsilon)?;
    let sampler = EtaSampler::new(g, &sink_set, coarse, fine, AeMode::Exact);
    let h = sampler.exact_exit_level(s)?;
    let stage = (*sampler.stage(s, h)?).clone();
    let exact = sample_dist(&solve_flow(&FlowProblem::new(g, s, sink)?)?)?.probs().to_vec();
    let distribution = stage.kept.probs().to_vec();
    let tv = total_variation(&distribution, &exact);
    let tv_bound = 2.0 * stage.trace_distance / stage.modified.keep_probability;
    Ok(EtaAnalysis {
        halvings: h,
        halving_limit: rd.log2() + 2.0,
        final_eta: stage.eta,
        distribution,
        exact,
        total_variation: tv,
        tv_bound,
        stage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::rng::stream;

    #[test]
    fn appendix_arithmetic() {
        let g = generators::cycle(6).unwrap();
        let sink = SinkSet::new(&g, &[3]).unwrap();
        for h in 0..4 {
            let (_, _, rep) = modified_graph_report(&g, 0, &sink, 0.5f64.powi(h)).unwrap();
            assert!(rep.et_prime <= 4.0 * rep.et);
        }
    }

    #[test]
    fn single_edge_exits_immediately() {
        let g = generators::path(2).unwrap();
        let prep = eta_modified_prepare(&g, 0, &[1], 1.0, 0.1, &mut stream(3, 0)).unwrap();
        assert_eq!(prep.draw.halvings, 0);
        assert_eq!(prep.edge, 0);
    }

    #[test]
    fn path_three_halves_at_most_twice() {
        let g = generators::path(3).unwrap();
        let an = eta_output_analysis(&g, 0, &[2], 3.0, 0.05).unwrap();
        assert!(an.halvings <= 2);
        assert!(an.total_variation <= an.tv_bound);
        let prep = eta_modified_prepare(&g, 0, &[2], 3.0, 0.05, &mut stream(4, 0)).unwrap();
        assert!(prep.draw.halvings <= 2);
    }

    #[test]
    fn rejects_low_bound() {
        let g = generators::path(3).unwrap();
        assert!(matches!(eta_modified_prepare(&g, 0, &[2], 2.0, 0.1, &mut stream(0, 0)), Err(ElfsError::InvalidBound { .. })));
    }
}
