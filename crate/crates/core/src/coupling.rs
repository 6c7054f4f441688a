//! Random walks, the stopping rules that couple them with elfs steps, escape times and the
//! Doob transform.

use rand::Rng;
use serde::Serialize;

use crate::electric::{solve_flow, ElectricFlow, GroundedInverse};
use crate::elfs::{ElfsChain, STEP_LIMIT};
use crate::error::{ElfsError, Result};
use crate::graph::{EdgeId, FlowProblem, Graph, SinkSet, Vertex};
use crate::rng::replicas;
use crate::stats::MeanEstimate;

/// Weighted random walk with per-vertex inversion tables.
#[derive(Clone, Debug)]
pub struct RandomWalk<'g> {
    graph: &'g Graph,
    cdf: Vec<Vec<f64>>,
}

impl<'g> RandomWalk<'g> {
    pub fn new(graph: &'g Graph) -> RandomWalk<'g> {
        let cdf = (0..graph.n())
            .map(|x| {
                let mut acc = 0.0;
                graph
                    .neighbors(x)
                    .iter()
                    .map(|&(_, id)| {
                        acc += graph.edge(id).weight;
                        acc
                    })
                    .collect()
            })
            .collect();
        RandomWalk { graph, cdf }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    /// Picks an incident edge of `x` with probability `w_xy / d_x`.
    pub fn pick<R: Rng + ?Sized>(&self, x: Vertex, rng: &mut R) -> (Vertex, EdgeId) {
        let cdf = &self.cdf[x];
        let u = rng.random::<f64>() * cdf[cdf.len() - 1];
        let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        self.graph.neighbors(x)[i]
    }

    pub fn step<R: Rng + ?Sized>(&self, x: Vertex, rng: &mut R) -> Vertex {
        self.pick(x, rng).0
    }
}

/// A walk trajectory `X_0, X_1, ...` ending at the first sink visit.
#[derive(Clone, Debug, Serialize)]
pub struct RwTrace {
    pub vertices: Vec<Vertex>,
}

impl RwTrace {
    /// Hitting time of the sink.
    pub fn tau(&self) -> usize {
        self.vertices.len() - 1
    }

    /// `1 + max{t : X_t = s}` for the start vertex `s`.
    pub fn escape_time(&self) -> usize {
        let s = self.vertices[0];
        1 + self.vertices.iter().rposition(|&x| x == s).expect("start is visited")
    }

    /// Visits to the start vertex, including time zero.
    pub fn start_visits(&self) -> usize {
        let s = self.vertices[0];
        self.vertices.iter().filter(|&&x| x == s).count()
    }
}

/// Simulates the random walk from `s` until it hits the sink.
pub fn simulate_rw<R: Rng + ?Sized>(g: &Graph, s: Vertex, sink: &[Vertex], rng: &mut R) -> Result<RwTrace> {
    let problem = FlowProblem::new(g, s, sink)?;
    walk_to_sink(&RandomWalk::new(g), &problem.sink, s, rng)
}

pub(crate) fn walk_to_sink<R: Rng + ?Sized>(walk: &RandomWalk<'_>, sink: &SinkSet, s: Vertex, rng: &mut R) -> Result<RwTrace> {
    let mut vertices = vec![s];
    let mut x = s;
    while !sink.contains(x) {
        if vertices.len() > STEP_LIMIT {
            return Err(ElfsError::StepLimitExceeded { limit: STEP_LIMIT });
        }
        x = walk.step(x, rng);
        vertices.push(x);
    }
    Ok(vertices).map(|vertices| RwTrace { vertices })
}

/// Vertex stopping rule: at every visit to `x`, including time zero, stop with probability
/// `p_x = w_xx' / (w_xx' + d_x)` where `w_xx' = sum_y ((v_x - v_y) / v_x)^2 w_xy`.
#[derive(Clone, Debug, Serialize)]
pub struct VertexStoppingRule {
    pub extra_weight: Vec<f64>,
    pub stop_prob: Vec<f64>,
}

pub fn vertex_rule(flow: &ElectricFlow<'_>) -> VertexStoppingRule {
    let g = flow.graph();
    let v = flow.voltages();
    let mut extra_weight = vec![0.0; g.n()];
    let mut stop_prob = vec![0.0; g.n()];
    for x in 0..g.n() {
        if flow.sink().contains(x) || v[x] <= 0.0 {
            continue;
        }
        let w: f64 = g
            .neighbors(x)
            .iter()
            .map(|&(y, id)| {
                let r = (v[x] - v[y]) / v[x];
                r * r * g.edge(id).weight
            })
            .sum();
        extra_weight[x] = w;
        stop_prob[x] = w / (w + g.degree(x));
    }
    VertexStoppingRule { extra_weight, stop_prob }
}

/// Outcome of one coupled step: where the walk stopped and how many walk steps it took.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoupledStep {
    pub stop: Vertex,
    pub steps: usize,
}

/// Random walk from a fixed source run under the vertex stopping rule.
pub struct VertexCoupler<'g> {
    walk: RandomWalk<'g>,
    sink: SinkSet,
    source: Vertex,
    rule: VertexStoppingRule,
}

impl<'g> VertexCoupler<'g> {
    pub fn new(problem: &FlowProblem<'g>) -> Result<VertexCoupler<'g>> {
        let flow = solve_flow(problem)?;
        Ok(VertexCoupler::from_flow(&flow))
    }

    pub fn from_flow(flow: &ElectricFlow<'g>) -> VertexCoupler<'g> {
        VertexCoupler {
            walk: RandomWalk::new(flow.graph()),
            sink: flow.sink().clone(),
            source: flow.source(),
            rule: vertex_rule(flow),
        }
    }

    pub fn rule(&self) -> &VertexStoppingRule {
        &self.rule
    }

    /// Appends visited vertices (after the start) to `path` if given.
    fn run_into<R: Rng + ?Sized>(&self, rng: &mut R, mut path: Option<&mut Vec<Vertex>>) -> Result<CoupledStep> {
        let mut x = self.source;
        let mut steps = 0;
        loop {
            if self.sink.contains(x) || rng.random::<f64>() < self.rule.stop_prob[x] {
                return Ok(CoupledStep { stop: x, steps });
            }
            if steps >= STEP_LIMIT {
                return Err(ElfsError::StepLimitExceeded { limit: STEP_LIMIT });
            }
            x = self.walk.step(x, rng);
            steps += 1;
            if let Some(p) = path.as_deref_mut() {
                p.push(x);
            }
        }
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CoupledStep> {
        self.run_into(rng, None)
    }
}

/// One coupled step from `s`: a realisation of the next elfs source.
pub fn run_coupled_step<R: Rng + ?Sized>(g: &Graph, s: Vertex, sink: &[Vertex], rng: &mut R) -> Result<CoupledStep> {
    VertexCoupler::new(&FlowProblem::new(g, s, sink)?)?.run(rng)
}

/// Exact law of the vertex-coupled stop, computed as the arrival distribution of the
/// walk on the graph with a pendant sink `x'` of weight `w_xx'` hung on every non-sink
/// `x`. Indexed by vertex of the original graph.
pub fn vertex_rule_stop_law(flow: &ElectricFlow<'_>) -> Result<Vec<f64>> {
    let g = flow.graph();
    let rule = vertex_rule(flow);
    let n = g.n();
    let mut edges: Vec<(Vertex, Vertex, f64)> = g.edges().iter().map(|e| (e.u, e.v, e.weight)).collect();
    let mut pendant = Vec::new();
    for x in 0..n {
        if rule.extra_weight[x] > 0.0 {
            pendant.push(x);
            edges.push((x, n + pendant.len() - 1, rule.extra_weight[x]));
        }
    }
    let big = Graph::new(n + pendant.len(), edges)?;
    let mut sinks: Vec<Vertex> = flow.sink().members().to_vec();
    sinks.extend((0..pendant.len()).map(|i| n + i));
    let big_sink = SinkSet::new(&big, &sinks)?;
    let inv = GroundedInverse::new(&big, &big_sink)?;
    let mut law = vec![0.0; n];
    for &m in big_sink.members() {
        let into: f64 = big.neighbors(m).iter().map(|&(x, id)| inv.voltage(flow.source(), x) * big.edge(id).weight).sum();
        let target = if m < n { m } else { pendant[m - n] };
        law[target] += into;
    }
    Ok(law)
}

/// Edge stopping rule for the lazy walk: stop on edge `(x, y)` with probability
/// `(v_x - v_y)^2 / (v_x^2 + v_y^2)`.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeStoppingRule {
    pub stop_prob: Vec<f64>,
}

pub fn edge_rule(flow: &ElectricFlow<'_>) -> EdgeStoppingRule {
    let v = flow.voltages();
    let stop_prob = flow
        .graph()
        .edges()
        .iter()
        .map(|e| {
            let den = v[e.u] * v[e.u] + v[e.v] * v[e.v];
            if den > 0.0 {
                (v[e.u] - v[e.v]).powi(2) / den
            } else {
                0.0
            }
        })
        .collect();
    EdgeStoppingRule { stop_prob }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EdgeCoupledStep {
    pub edge: EdgeId,
    pub steps: usize,
}

/// Lazy walk from a fixed source run under the edge stopping rule.
pub struct EdgeCoupler<'g> {
    walk: RandomWalk<'g>,
    source: Vertex,
    rule: EdgeStoppingRule,
}

impl<'g> EdgeCoupler<'g> {
    pub fn new(problem: &FlowProblem<'g>) -> Result<EdgeCoupler<'g>> {
        let flow = solve_flow(problem)?;
        Ok(EdgeCoupler { walk: RandomWalk::new(problem.graph), source: problem.source, rule: edge_rule(&flow) })
    }

    pub fn rule(&self) -> &EdgeStoppingRule {
        &self.rule
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<EdgeCoupledStep> {
        let g = self.walk.graph();
        let mut x = self.source;
        let mut steps = 0;
        loop {
            let (_, id) = self.walk.pick(x, rng);
            if rng.random::<f64>() < self.rule.stop_prob[id] {
                return Ok(EdgeCoupledStep { edge: id, steps });
            }
            if steps >= STEP_LIMIT {
                return Err(ElfsError::StepLimitExceeded { limit: STEP_LIMIT });
            }
            let e = g.edge(id);
            x = if rng.random_bool(0.5) { e.u } else { e.v };
            steps += 1;
        }
    }
}

/// One lazy-walk step stopped under the edge rule; its law is the flow sampling law.
pub fn run_edge_coupled_step<R: Rng + ?Sized>(g: &Graph, s: Vertex, sink: &[Vertex], rng: &mut R) -> Result<EdgeCoupledStep> {
    EdgeCoupler::new(&FlowProblem::new(g, s, sink)?)?.run(rng)
}

/// Exact law of the edge-coupled stop. Each edge is subdivided at a midpoint `m_e`
/// (halves of weight `w`, so the walk crosses to `m_e` with probability `w / d_x`), and a
/// pendant sink of weight `w (v_x - v_y)^2 / (v_x v_y)` is hung on `m_e`; when an endpoint
/// is grounded the stop is certain and `m_e` itself becomes a sink.
pub fn edge_rule_stop_law(flow: &ElectricFlow<'_>) -> Result<Vec<f64>> {
    let g = flow.graph();
    let (split, mids) = g.split_edges();
    let v = flow.voltages();
    let n0 = split.n();
    let mut edges: Vec<(Vertex, Vertex, f64)> = split.edges().iter().map(|e| (e.u, e.v, e.weight)).collect();
    let mut sinks: Vec<Vertex> = flow.sink().members().to_vec();
    let mut owner: Vec<(Vertex, EdgeId)> = Vec::new();
    for (id, e) in g.edges().iter().enumerate() {
        let (a, b) = (v[e.u], v[e.v]);
        if a == 0.0 || b == 0.0 {
            if a != b {
                sinks.push(mids[id]);
                owner.push((mids[id], id));
            }
        } else if a != b {
            let w = e.weight * (a - b).powi(2) / (a * b);
            let pend = n0 + owner.iter().filter(|(m, _)| *m >= n0).count();
            edges.push((mids[id], pend, w));
            sinks.push(pend);
            owner.push((pend, id));
        }
    }
    let extra = owner.iter().filter(|(m, _)| *m >= n0).count();
    let big = Graph::new(n0 + extra, edges)?;
    // Midpoints of edges with both endpoints grounded are unreachable; ground them too.
    for (id, e) in g.edges().iter().enumerate() {
        if v[e.u] == 0.0 && v[e.v] == 0.0 {
            sinks.push(mids[id]);
        }
    }
    let big_sink = SinkSet::new(&big, &sinks)?;
    let inv = GroundedInverse::new(&big, &big_sink)?;
    let mut law = vec![0.0; g.num_edges()];
    for &(m, id) in &owner {
        law[id] += big.neighbors(m).iter().map(|&(x, eid)| inv.voltage(flow.source(), x) * big.edge(eid).weight).sum::<f64>();
    }
    Ok(law)
}

/// A walk trajectory together with the elfs trajectory read off it by repeated vertex
/// stopping rules. `stops[j]` is the walk index at which `path[j]` was reached.
#[derive(Clone, Debug, Serialize)]
pub struct FullCoupling {
    pub walk: RwTrace,
    pub path: Vec<Vertex>,
    pub stops: Vec<usize>,
}

/// Runs the full coupling from `s`: after each stop the rule is recomputed for the new
/// source, and the walk continues from where it stopped.
pub fn full_coupling<R: Rng + ?Sized>(g: &Graph, s: Vertex, sink: &[Vertex], rng: &mut R) -> Result<FullCoupling> {
    let problem = FlowProblem::new(g, s, sink)?;
    let inv = GroundedInverse::new(g, &problem.sink)?;
    let mut couplers: Vec<Option<VertexCoupler<'_>>> = (0..g.n()).map(|_| None).collect();
    let mut walk = vec![s];
    let mut path = vec![s];
    let mut stops = vec![0];
    let mut z = s;
    while !problem.sink.contains(z) {
        if couplers[z].is_none() {
            let p = FlowProblem::with_sink(g, z, problem.sink.clone())?;
            couplers[z] = Some(VertexCoupler::from_flow(&inv.flow(&p)?));
        }
        let c = couplers[z].as_ref().expect("just built");
        let step = c.run_into(rng, Some(&mut walk))?;
        z = step.stop;
        path.push(z);
        stops.push(walk.len() - 1);
        if path.len() > STEP_LIMIT {
            return Err(ElfsError::StepLimitExceeded { limit: STEP_LIMIT });
        }
    }
    Ok(FullCoupling { walk: RwTrace { vertices: walk }, path, stops })
}

/// Quantities of the Doob transform by the hitting probability of `s` before the sink.
#[derive(Clone, Debug, Serialize)]
pub struct DoobReport {
    pub resistance: f64,
    pub degree: f64,
    pub et: f64,
    /// `2 W_hat` summed edge by edge from `w v_x v_y / R^2`.
    pub doubled_weight_edges: f64,
    /// `(ET - 1) / R`.
    pub doubled_weight_formula: f64,
    /// `d_s - 1/R`.
    pub source_degree: f64,
    /// Conditional mean return time `(ET - 1) / (R d - 1)`.
    pub return_time: f64,
}

/// Doob-transform identities at `s`. `NotApplicable` when `R_s d_s = 1`, i.e. when the walk
/// can never return to `s` before the sink.
pub fn doob_check(g: &Graph, s: Vertex, sink: &[Vertex]) -> Result<DoobReport> {
    let problem = FlowProblem::new(g, s, sink)?;
    let chain = ElfsChain::new(g, &problem.sink)?;
    let flow = solve_flow(&problem)?;
    let r = flow.resistance();
    let d = g.degree(s);
    if (r * d - 1.0).abs() <= 1e-12 {
        return Err(ElfsError::NotApplicable(format!("R_s d_s = 1 at vertex {s}")));
    }
    let v = flow.voltages();
    let doubled_weight_edges: f64 = 2.0 * g.edges().iter().map(|e| e.weight * v[e.u] * v[e.v] / (r * r)).sum::<f64>();
    let et = chain.et(s);
    let doubled_weight_formula = (et - 1.0) / r;
    let tol = 1e-8 * doubled_weight_formula.abs().max(1.0);
    if (doubled_weight_edges - doubled_weight_formula).abs() > tol {
        return Err(ElfsError::OracleMismatch {
            what: "Doob total weight".into(),
            discrepancy: (doubled_weight_edges - doubled_weight_formula).abs(),
            tolerance: tol,
        });
    }
    Ok(DoobReport {
        resistance: r,
        degree: d,
        et,
        doubled_weight_edges,
        doubled_weight_formula,
        source_degree: d - 1.0 / r,
        return_time: (et - 1.0) / (r * d - 1.0),
    })
}

/// Mean length of walk excursions from `s` that return to `s` before the sink, over
/// `runs` independent walks (each contributes all its returning excursions).
pub fn simulate_conditional_return(g: &Graph, s: Vertex, sink: &[Vertex], runs: usize, seed: u64) -> Result<MeanEstimate> {
    let problem = FlowProblem::new(g, s, sink)?;
    let walk = RandomWalk::new(g);
    let per_run: Vec<Result<Vec<f64>>> = replicas(seed, runs, |_, rng| {
        let trace = walk_to_sink(&walk, &problem.sink, s, rng)?;
        let visits: Vec<usize> = trace.vertices.iter().enumerate().filter(|(_, &x)| x == s).map(|(t, _)| t).collect();
        Ok(visits.windows(2).map(|w| (w[1] - w[0]) as f64).collect())
    });
    let mut all = Vec::new();
    for r in per_run {
        all.extend(r?);
    }
    Ok(MeanEstimate::from_samples(all))
}

/// Mean escape time over `runs` walks.
pub fn simulate_escape_time(g: &Graph, s: Vertex, sink: &[Vertex], runs: usize, seed: u64) -> Result<MeanEstimate> {
    let problem = FlowProblem::new(g, s, sink)?;
    let walk = RandomWalk::new(g);
    let esc: Result<Vec<f64>> = replicas(seed, runs, |_, rng| {
        walk_to_sink(&walk, &problem.sink, s, rng).map(|t| t.escape_time() as f64)
    })
    .into_iter()
    .collect();
    Ok(MeanEstimate::from_samples(esc?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::rng::stream;

    #[test]
    fn vertex_law_matches_chain_row() {
        let g = generators::from_spec("random_graph:8,0.4,0.5,3", 2).unwrap();
        let sink = [0, 7];
        let chain = crate::elfs_transition_matrix(&g, &sink).unwrap();
        for s in 1..7 {
            let flow = solve_flow(&FlowProblem::new(&g, s, &sink).unwrap()).unwrap();
            let law = vertex_rule_stop_law(&flow).unwrap();
            for x in 0..g.n() {
                assert!((law[x] - chain.prob(s, x)).abs() < 1e-10, "s={s} x={x}");
            }
        }
    }

    #[test]
    fn edge_law_matches_flow_sampling() {
        let g = generators::cycle(6).unwrap();
        let flow = solve_flow(&FlowProblem::new(&g, 2, &[0]).unwrap()).unwrap();
        let p = crate::sample_dist(&flow).unwrap();
        let law = edge_rule_stop_law(&flow).unwrap();
        for id in 0..g.num_edges() {
            assert!((law[id] - p.prob(id)).abs() < 1e-10);
        }
    }

    #[test]
    fn escape_on_p3_centre_is_one() {
        let g = generators::path(3).unwrap();
        let mut rng = stream(1, 0);
        let t = simulate_rw(&g, 1, &[0, 2], &mut rng).unwrap();
        assert_eq!(t.escape_time(), 1);
        assert_eq!(t.tau(), 1);
    }

    #[test]
    fn doob_not_applicable_on_p3_centre() {
        let g = generators::path(3).unwrap();
        assert!(matches!(doob_check(&g, 1, &[0, 2]), Err(ElfsError::NotApplicable(_))));
        let r = doob_check(&g, 0, &[2]).unwrap();
        assert!((r.doubled_weight_edges - r.doubled_weight_formula).abs() < 1e-12);
    }

    #[test]
    fn full_coupling_path_is_consistent() {
        let g = generators::path(5).unwrap();
        let mut rng = stream(3, 0);
        let c = full_coupling(&g, 0, &[4], &mut rng).unwrap();
        assert_eq!(c.path.len(), c.stops.len());
        for (z, &t) in c.path.iter().zip(&c.stops) {
            assert_eq!(c.walk.vertices[t], *z);
        }
        assert_eq!(*c.path.last().unwrap(), 4);
        assert!(c.stops.windows(2).all(|w| w[0] <= w[1]));
    }
}
