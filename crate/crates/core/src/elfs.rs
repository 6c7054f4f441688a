//! The electric flow sampling process: its exact transition matrix, walk functionals,
//! arrival distribution and a Monte-Carlo simulator.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::electric::{sample_dist, FlowSampleDist, GroundedInverse};
use crate::error::{ElfsError, Result};
use crate::graph::{EdgeId, FlowProblem, Graph, SinkSet, Vertex};

/// Hard cap on simulated steps for any single trajectory.
pub const STEP_LIMIT: usize = 10_000_000;

/// Exact Markov chain of the elfs process for a fixed sink set.
///
/// Sink rows are absorbing (identity). All per-source voltages come from one inverse of
/// the grounded Laplacian.
#[derive(Clone, Debug)]
pub struct ElfsChain {
    sink: SinkSet,
    inverse: GroundedInverse,
    transition: DMatrix<f64>,
    degrees: Vec<f64>,
    fundamental: DMatrix<f64>,
}

/// Builds the elfs chain from the per-entry formula
/// `Q_sx = (1 / 2R_s) sum_y (v_x - v_y)^2 w_xy`.
pub fn elfs_transition_matrix(g: &Graph, sink: &[Vertex]) -> Result<ElfsChain> {
    ElfsChain::new(g, &SinkSet::new(g, sink)?)
}

impl ElfsChain {
    pub fn new(g: &Graph, sink: &SinkSet) -> Result<ElfsChain> {
        let inverse = GroundedInverse::new(g, sink)?;
        let n = g.n();
        let mut transition = DMatrix::zeros(n, n);
        for &m in sink.members() {
            transition[(m, m)] = 1.0;
        }
        for &s in &inverse.free {
            let v = inverse.voltages(s);
            let r = v[s];
            for x in 0..n {
                let mut acc = 0.0;
                for &(y, id) in g.neighbors(x) {
                    let dv = v[x] - v[y];
                    acc += dv * dv * g.edge(id).weight;
                }
                transition[(s, x)] = acc / (2.0 * r);
            }
            clamp_row(&mut transition, s)?;
        }
        let u = inverse.free.len();
        let mut i_minus_q = DMatrix::<f64>::identity(u, u);
        for (i, &x) in inverse.free.iter().enumerate() {
            for (j, &y) in inverse.free.iter().enumerate() {
                i_minus_q[(i, j)] -= transition[(x, y)];
            }
        }
        let fundamental = i_minus_q
            .lu()
            .try_inverse()
            .ok_or_else(|| ElfsError::SingularSystem("I - Q_UU is singular".into()))?;
        Ok(ElfsChain { sink: sink.clone(), inverse, transition, degrees: g.degrees().to_vec(), fundamental })
    }

    pub fn n(&self) -> usize {
        self.transition.nrows()
    }

    pub fn sink(&self) -> &SinkSet {
        &self.sink
    }

    pub fn free(&self) -> &[Vertex] {
        &self.inverse.free
    }

    pub fn inverse(&self) -> &GroundedInverse {
        &self.inverse
    }

    /// Full `n x n` transition matrix.
    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn prob(&self, x: Vertex, y: Vertex) -> f64 {
        self.transition[(x, y)]
    }

    /// `(I - Q_UU)^{-1}`, indexed by positions in [`Self::free`].
    pub fn fundamental(&self) -> &DMatrix<f64> {
        &self.fundamental
    }

    /// Effective resistance `R_x` between `x` and the sink (zero on sinks).
    pub fn resistance(&self, x: Vertex) -> f64 {
        self.inverse.voltage(x, x)
    }

    fn pos(&self, x: Vertex) -> Result<usize> {
        self.inverse.index.get(x).copied().flatten().ok_or(ElfsError::SourceInSink(x))
    }

    /// `E_s[ sum_{t < rho} g(Y_t) ]` for a function on vertices.
    pub fn expected_sum(&self, s: Vertex, values: &[f64]) -> Result<f64> {
        let i = self.pos(s)?;
        Ok(self.inverse.free.iter().enumerate().map(|(j, &x)| self.fundamental[(i, j)] * values[x]).sum())
    }

    /// Expected number of visits to each vertex before absorption, starting at `s`
    /// (the visit at time zero counts).
    pub fn expected_visits(&self, s: Vertex) -> Result<Vec<f64>> {
        let i = self.pos(s)?;
        let mut out = vec![0.0; self.n()];
        for (j, &x) in self.inverse.free.iter().enumerate() {
            out[x] = self.fundamental[(i, j)];
        }
        Ok(out)
    }

    /// Expected number of elfs steps `EHT_s`.
    pub fn eht(&self, s: Vertex) -> Result<f64> {
        let i = self.pos(s)?;
        Ok(self.fundamental.row(i).sum())
    }

    /// Absorption probabilities on every vertex (non-zero only on sinks) through the chain.
    pub fn absorption(&self, s: Vertex) -> Result<Vec<f64>> {
        let visits = self.expected_visits(s)?;
        let mut out = vec![0.0; self.n()];
        for &m in self.sink.members() {
            out[m] = self.inverse.free.iter().map(|&x| visits[x] * self.transition[(x, m)]).sum();
        }
        Ok(out)
    }

    /// `HT_s = sum_x v_x d_x`.
    pub fn ht(&self, s: Vertex) -> f64 {
        let v = self.inverse.voltages(s);
        v.iter().zip(&self.degrees).map(|(v, d)| v * d).sum()
    }

    /// `ET_s = (1/R_s) sum_x v_x^2 d_x`.
    pub fn et(&self, s: Vertex) -> f64 {
        let v = self.inverse.voltages(s);
        let r = v[s];
        if r == 0.0 {
            return 0.0;
        }
        v.iter().zip(&self.degrees).map(|(v, d)| v * v * d).sum::<f64>() / r
    }
}

/// Clamps roundoff negatives and renormalizes a stochastic row; larger negatives are errors.
fn clamp_row(q: &mut DMatrix<f64>, row: usize) -> Result<()> {
    let mut total = 0.0;
    for x in 0..q.ncols() {
        let p = q[(row, x)];
        if p < -1e-12 {
            return Err(ElfsError::OracleMismatch {
                what: format!("negative transition probability Q[{row},{x}]"),
                discrepancy: -p,
                tolerance: 1e-12,
            });
        }
        if p < 0.0 {
            q[(row, x)] = 0.0;
        }
        total += q[(row, x)];
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(ElfsError::OracleMismatch {
            what: format!("row {row} of Q sums to {total}"),
            discrepancy: (total - 1.0).abs(),
            tolerance: 1e-9,
        });
    }
    for x in 0..q.ncols() {
        q[(row, x)] /= total;
    }
    Ok(())
}

/// Block form `Q_UU = I - (1/2) R^{-1} (V o V) L_UU`, `Q_UM = -(1/2) R^{-1} (V o V) L_UM`,
/// evaluated with matrix products. Returned as a full `n x n` matrix with absorbing sinks.
pub fn block_form_transition(g: &Graph, chain: &ElfsChain) -> DMatrix<f64> {
    let free = chain.free();
    let u = free.len();
    let v = &chain.inverse().inverse;
    let vv = v.component_mul(v);
    let l = g.laplacian();
    let free_l = DMatrix::from_fn(u, g.n(), |i, j| l[(free[i], j)]);
    // Rows of (V o V) L over all columns; columns in U are L_UU, in M are L_UM.
    let prod = &vv * free_l;
    let mut q = DMatrix::zeros(g.n(), g.n());
    for &m in chain.sink().members() {
        q[(m, m)] = 1.0;
    }
    for (i, &s) in free.iter().enumerate() {
        let r = v[(i, i)];
        for x in 0..g.n() {
            let delta = if x == s { 1.0 } else { 0.0 };
            q[(s, x)] = delta - prod[(i, x)] / (2.0 * r);
        }
    }
    q
}

/// Per-vertex walk functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VertexFunctionals {
    pub vertex: Vertex,
    pub resistance: f64,
    pub degree: f64,
    /// Random-walk hitting time of the sink.
    pub ht: f64,
    /// Escape time `(1/R) sum v^2 d`.
    pub et: f64,
    /// Expected number of elfs steps.
    pub eht: f64,
}

/// Exact functionals at `s` for the sink set `sink`.
pub fn exact_functionals(g: &Graph, s: Vertex, sink: &[Vertex]) -> Result<VertexFunctionals> {
    let problem = FlowProblem::new(g, s, sink)?;
    let chain = ElfsChain::new(g, &problem.sink)?;
    functionals_from_chain(g, &chain, s)
}

pub fn functionals_from_chain(g: &Graph, chain: &ElfsChain, s: Vertex) -> Result<VertexFunctionals> {
    Ok(VertexFunctionals {
        vertex: s,
        resistance: chain.resistance(s),
        degree: g.degree(s),
        ht: chain.ht(s),
        et: chain.et(s),
        eht: chain.eht(s)?,
    })
}

/// Law of the absorbing sink vertex.
#[derive(Clone, Debug, Serialize)]
pub struct ArrivalDistribution {
    pub sinks: Vec<Vertex>,
    pub probs: Vec<f64>,
}

impl ArrivalDistribution {
    pub fn prob(&self, m: Vertex) -> f64 {
        self.sinks.iter().position(|&x| x == m).map_or(0.0, |i| self.probs[i])
    }
}

/// Random-walk arrival distribution `-(L_UU^{-1} L_UM)` row `s`, which is the net flow
/// into each sink. Cross-checked against absorption of the elfs chain.
pub fn elfs_arrival_distribution(g: &Graph, s: Vertex, sink: &[Vertex]) -> Result<ArrivalDistribution> {
    let problem = FlowProblem::new(g, s, sink)?;
    let chain = ElfsChain::new(g, &problem.sink)?;
    arrival_from_chain(g, &chain, s)
}

pub fn arrival_from_chain(g: &Graph, chain: &ElfsChain, s: Vertex) -> Result<ArrivalDistribution> {
    let inv = chain.inverse();
    let sinks = chain.sink().members().to_vec();
    let electric: Vec<f64> = sinks
        .iter()
        .map(|&m| g.neighbors(m).iter().map(|&(x, id)| inv.voltage(s, x) * g.edge(id).weight).sum())
        .collect();
    let absorbed = chain.absorption(s)?;
    let tol = 1e-8;
    for (k, &m) in sinks.iter().enumerate() {
        let d = (electric[k] - absorbed[m]).abs();
        if d > tol {
            return Err(ElfsError::OracleMismatch {
                what: format!("arrival probability at sink {m}"),
                discrepancy: d,
                tolerance: tol,
            });
        }
    }
    Ok(ArrivalDistribution { sinks, probs: electric })
}

/// One elfs trajectory: `sources[0] = s`, `sources[t+1]` an endpoint of `edges[t]`.
#[derive(Clone, Debug, Serialize)]
pub struct ElfsTrace {
    pub sources: Vec<Vertex>,
    pub edges: Vec<EdgeId>,
}

impl ElfsTrace {
    /// Number of steps until absorption.
    pub fn rho(&self) -> usize {
        self.edges.len()
    }

    pub fn arrival(&self) -> Vertex {
        *self.sources.last().expect("trace is non-empty")
    }
}

/// Monte-Carlo simulator of the elfs process. The sampling distribution of each source is
/// computed on first use and cached, so each vertex is solved at most once.
pub struct ElfsSampler<'g> {
    graph: &'g Graph,
    sink: SinkSet,
    inverse: GroundedInverse,
    cache: Vec<OnceLock<FlowSampleDist>>,
}

impl<'g> ElfsSampler<'g> {
    pub fn new(graph: &'g Graph, sink: &SinkSet) -> Result<ElfsSampler<'g>> {
        let inverse = GroundedInverse::new(graph, sink)?;
        let cache = (0..graph.n()).map(|_| OnceLock::new()).collect();
        Ok(ElfsSampler { graph, sink: sink.clone(), inverse, cache })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn sink(&self) -> &SinkSet {
        &self.sink
    }

    /// Edge-sampling distribution for source `z`.
    pub fn dist(&self, z: Vertex) -> Result<&FlowSampleDist> {
        if let Some(d) = self.cache[z].get() {
            return Ok(d);
        }
        let problem = FlowProblem::with_sink(self.graph, z, self.sink.clone())?;
        let d = sample_dist(&self.inverse.flow(&problem)?)?;
        Ok(self.cache[z].get_or_init(|| d))
    }

    /// One elfs step from `z`: the sampled edge and the new source.
    pub fn step<R: Rng + ?Sized>(&self, z: Vertex, rng: &mut R) -> Result<(EdgeId, Vertex)> {
        let id = self.dist(z)?.draw(rng);
        let e = self.graph.edge(id);
        let next = if rng.random_bool(0.5) { e.u } else { e.v };
        Ok((id, next))
    }

    pub fn run<R: Rng + ?Sized>(&self, s: Vertex, rng: &mut R) -> Result<ElfsTrace> {
        if self.sink.contains(s) {
            return Err(ElfsError::SourceInSink(s));
        }
        let mut trace = ElfsTrace { sources: vec![s], edges: Vec::new() };
        let mut z = s;
        while !self.sink.contains(z) {
            if trace.edges.len() >= STEP_LIMIT {
                return Err(ElfsError::StepLimitExceeded { limit: STEP_LIMIT });
            }
            let (id, next) = self.step(z, rng)?;
            trace.edges.push(id);
            trace.sources.push(next);
            z = next;
        }
        Ok(trace)
    }
}

/// Simulates one elfs trajectory from `s`.
pub fn simulate_elfs<R: Rng + ?Sized>(g: &Graph, s: Vertex, sink: &[Vertex], rng: &mut R) -> Result<ElfsTrace> {
    let problem = FlowProblem::new(g, s, sink)?;
    ElfsSampler::new(g, &problem.sink)?.run(s, rng)
}

/// Values of every one-step identity at a source, all verified to `1e-8` relative.
#[derive(Clone, Debug, Serialize)]
pub struct StepIdentityReport {
    pub source: Vertex,
    pub functionals: VertexFunctionals,
    /// `sum_x Q_sx HT_x`, expected to equal `HT_s - ET_s / 2`.
    pub ht_after_step: f64,
    pub ht_minus_half_et: f64,
    /// Largest deviation of `E_x[v^s_Y]` from `v^s_x (1 - v^s_x / 2R_x)` over `x`.
    pub potential_halving_deviation: f64,
    /// `E_s[sum_t ET_{Y_t}]`, expected to equal `2 HT_s`.
    pub et_sum: f64,
    /// `E_s[sum_t sqrt(ET_{Y_t})]`, the middle term of the Jensen chain.
    pub sqrt_et_sum: f64,
    /// `sqrt(2 HT_s EHT_s)`.
    pub jensen_upper: f64,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn at_most(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * a.abs().max(b.abs()).max(1.0)
}

/// Checks the one-step identities and the chain `1 <= R d <= ET <= HT`,
/// `EHT <= E[sum sqrt(ET)] <= sqrt(2 HT EHT) <= 2 HT` at source `s`.
pub fn check_step_identities(g: &Graph, s: Vertex, sink: &[Vertex]) -> Result<StepIdentityReport> {
    let problem = FlowProblem::new(g, s, sink)?;
    let chain = ElfsChain::new(g, &problem.sink)?;
    identities_from_chain(g, &chain, s)
}

pub fn identities_from_chain(g: &Graph, chain: &ElfsChain, s: Vertex) -> Result<StepIdentityReport> {
    let tol = 1e-8;
    let n = g.n();
    let f = functionals_from_chain(g, chain, s)?;
    let ht: Vec<f64> = (0..n).map(|x| chain.ht(x)).collect();
    let et: Vec<f64> = (0..n).map(|x| chain.et(x)).collect();
    let ht_after_step: f64 = (0..n).map(|x| chain.prob(s, x) * ht[x]).sum();
    let ht_minus_half_et = f.ht - f.et / 2.0;
    let vs = chain.inverse().voltages(s);
    let mut potential_halving_deviation: f64 = 0.0;
    for &x in chain.free() {
        let lhs: f64 = (0..n).map(|y| chain.prob(x, y) * vs[y]).sum();
        let rhs = vs[x] * (1.0 - vs[x] / (2.0 * chain.resistance(x)));
        potential_halving_deviation = potential_halving_deviation.max((lhs - rhs).abs());
    }
    let et_sum = chain.expected_sum(s, &et)?;
    let sqrt_et: Vec<f64> = et.iter().map(|v| v.sqrt()).collect();
    let sqrt_et_sum = chain.expected_sum(s, &sqrt_et)?;
    let jensen_upper = (2.0 * f.ht * f.eht).sqrt();
    let report = StepIdentityReport {
        source: s,
        functionals: f,
        ht_after_step,
        ht_minus_half_et,
        potential_halving_deviation,
        et_sum,
        sqrt_et_sum,
        jensen_upper,
    };
    let violation = |what: &str, lhs: f64, rhs: f64| {
        Err(ElfsError::IdentityViolation { what: what.into(), lhs, rhs })
    };
    if !close(ht_after_step, ht_minus_half_et, tol) {
        return violation("E_s[HT_Y] = HT_s - ET_s/2", ht_after_step, ht_minus_half_et);
    }
    if potential_halving_deviation > tol * f.resistance.max(1.0) {
        return violation("potential halving", potential_halving_deviation, 0.0);
    }
    if !close(et_sum, 2.0 * f.ht, tol) {
        return violation("E[sum ET] = 2 HT", et_sum, 2.0 * f.ht);
    }
    let rd = f.resistance * f.degree;
    let chain_checks = [
        ("1 <= R d", 1.0, rd),
        ("R d <= ET", rd, f.et),
        ("ET <= HT", f.et, f.ht),
        ("EHT <= 2 HT", f.eht, 2.0 * f.ht),
        ("EHT <= E[sum sqrt ET]", f.eht, sqrt_et_sum),
        ("E[sum sqrt ET] <= sqrt(2 HT EHT)", sqrt_et_sum, jensen_upper),
        ("sqrt(2 HT EHT) <= 2 HT", jensen_upper, 2.0 * f.ht),
    ];
    for (what, lhs, rhs) in chain_checks {
        if !at_most(lhs, rhs, tol) {
            return violation(what, lhs, rhs);
        }
    }
    Ok(report)
}

/// Random-walk hitting times `(I - P_UU)^{-1} 1`, used as an independent route to `HT`.
pub fn rw_hitting_times(g: &Graph, sink: &SinkSet) -> Result<Vec<f64>> {
    let free = sink.complement();
    let p = g.walk_matrix();
    let u = free.len();
    let a = DMatrix::from_fn(u, u, |i, j| if i == j { 1.0 } else { 0.0 } - p[(free[i], free[j])]);
    let sol = a
        .lu()
        .solve(&DVector::from_element(u, 1.0))
        .ok_or_else(|| ElfsError::SingularSystem("I - P_UU".into()))?;
    let mut out = vec![0.0; g.n()];
    for (i, &x) in free.iter().enumerate() {
        out[x] = sol[i];
    }
    Ok(out)
}
