//! Unit electric flows, effective resistances and the edge-sampling distribution.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{ElfsError, Result};
use crate::graph::{EdgeId, FlowProblem, Graph, SinkSet, Vertex};

/// Unit electric flow from `source` to the sink set, with the sink grounded at zero.
#[derive(Clone, Debug)]
pub struct ElectricFlow<'g> {
    graph: &'g Graph,
    source: Vertex,
    sink: SinkSet,
    voltages: Vec<f64>,
    /// Flow along each edge from `u` to `v`.
    edge_flows: Vec<f64>,
    resistance: f64,
}

/// The grounded Laplacian `L_UU` restricted to the non-sink vertices `U`.
pub fn grounded_laplacian(g: &Graph, sink: &SinkSet) -> (DMatrix<f64>, Vec<Vertex>, Vec<Option<usize>>) {
    let free = sink.complement();
    let mut index = vec![None; g.n()];
    for (i, &x) in free.iter().enumerate() {
        index[x] = Some(i);
    }
    let mut l = DMatrix::zeros(free.len(), free.len());
    for (i, &x) in free.iter().enumerate() {
        l[(i, i)] = g.degree(x);
        for &(y, id) in g.neighbors(x) {
            if let Some(j) = index[y] {
                l[(i, j)] -= g.edge(id).weight;
            }
        }
    }
    (l, free, index)
}

/// Solves `L_UU v = e_s` and returns the resulting flow.
pub fn solve_flow<'g>(problem: &FlowProblem<'g>) -> Result<ElectricFlow<'g>> {
    let g = problem.graph;
    let (l, free, index) = grounded_laplacian(g, &problem.sink);
    let chol = l
        .cholesky()
        .ok_or_else(|| ElfsError::SingularSystem("grounded Laplacian is not positive definite".into()))?;
    let mut rhs = DVector::zeros(free.len());
    rhs[index[problem.source].expect("source is not a sink")] = 1.0;
    let sol = chol.solve(&rhs);
    let mut voltages = vec![0.0; g.n()];
    for (i, &x) in free.iter().enumerate() {
        voltages[x] = sol[i];
    }
    ElectricFlow::from_voltages(problem, voltages)
}

/// Effective resistance between `a` and `b`.
pub fn effective_resistance(g: &Graph, a: Vertex, b: Vertex) -> Result<f64> {
    Ok(solve_flow(&FlowProblem::new(g, a, &[b])?)?.resistance())
}

impl<'g> ElectricFlow<'g> {
    /// Builds the flow from precomputed voltages and verifies conservation and energy.
    pub(crate) fn from_voltages(problem: &FlowProblem<'g>, voltages: Vec<f64>) -> Result<ElectricFlow<'g>> {
        let g = problem.graph;
        let s = problem.source;
        let resistance = voltages[s];
        if !(resistance > 0.0 && resistance.is_finite()) {
            return Err(ElfsError::SingularSystem(format!("source voltage {resistance}")));
        }
        let edge_flows: Vec<f64> =
            g.edges().iter().map(|e| e.weight * (voltages[e.u] - voltages[e.v])).collect();
        let flow = ElectricFlow { graph: g, source: s, sink: problem.sink.clone(), voltages, edge_flows, resistance };
        flow.verify()?;
        Ok(flow)
    }

    fn verify(&self) -> Result<()> {
        let tol = 1e-8;
        let slack = tol * self.resistance.max(1.0);
        if let Some(x) = (0..self.graph.n()).find(|&x| self.voltages[x] < -slack || self.voltages[x] > self.resistance + slack) {
            return Err(ElfsError::OracleMismatch {
                what: format!("voltage at {x} outside [0, R_s]"),
                discrepancy: self.voltages[x],
                tolerance: slack,
            });
        }
        for x in 0..self.graph.n() {
            if self.sink.contains(x) {
                continue;
            }
            let expected = if x == self.source { 1.0 } else { 0.0 };
            let div = self.net_outflow(x) - expected;
            if div.abs() > tol {
                return Err(ElfsError::OracleMismatch {
                    what: format!("flow conservation at vertex {x}"),
                    discrepancy: div.abs(),
                    tolerance: tol,
                });
            }
        }
        let gap = (self.energy() - self.resistance).abs();
        if gap > tol * self.resistance.max(1.0) {
            return Err(ElfsError::OracleMismatch {
                what: "energy versus source voltage".into(),
                discrepancy: gap,
                tolerance: tol * self.resistance.max(1.0),
            });
        }
        Ok(())
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn source(&self) -> Vertex {
        self.source
    }

    pub fn sink(&self) -> &SinkSet {
        &self.sink
    }

    pub fn voltages(&self) -> &[f64] {
        &self.voltages
    }

    pub fn voltage(&self, x: Vertex) -> f64 {
        self.voltages[x]
    }

    /// `R_s`, equal to the source voltage.
    pub fn resistance(&self) -> f64 {
        self.resistance
    }

    /// Flow on edge `id` oriented from its `u` endpoint to its `v` endpoint.
    pub fn edge_flow(&self, id: EdgeId) -> f64 {
        self.edge_flows[id]
    }

    pub fn edge_flows(&self) -> &[f64] {
        &self.edge_flows
    }

    /// Antisymmetric flow from `x` to `y`; zero for non-adjacent pairs.
    pub fn flow(&self, x: Vertex, y: Vertex) -> f64 {
        self.graph.weight(x, y) * (self.voltages[x] - self.voltages[y])
    }

    /// Flow leaving `x` minus flow entering it.
    pub fn net_outflow(&self, x: Vertex) -> f64 {
        self.graph.neighbors(x).iter().map(|&(y, id)| self.graph.edge(id).weight * (self.voltages[x] - self.voltages[y])).sum()
    }

    /// `sum_e f_e^2 / w_e`.
    pub fn energy(&self) -> f64 {
        self.graph.edges().iter().zip(&self.edge_flows).map(|(e, f)| f * f / e.weight).sum()
    }
}

/// The distribution `p_e = f_e^2 / (R_s w_e)` over edges.
#[derive(Clone, Debug)]
pub struct FlowSampleDist {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

/// Edge-sampling distribution of `flow`.
pub fn sample_dist(flow: &ElectricFlow<'_>) -> Result<FlowSampleDist> {
    let g = flow.graph();
    let r = flow.resistance();
    let raw: Vec<f64> = g.edges().iter().zip(flow.edge_flows()).map(|(e, f)| f * f / (r * e.weight)).collect();
    FlowSampleDist::from_weights(raw)
}

impl FlowSampleDist {
    pub(crate) fn from_weights(raw: Vec<f64>) -> Result<FlowSampleDist> {
        let total: f64 = raw.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ElfsError::OracleMismatch {
                what: "edge sampling probabilities sum".into(),
                discrepancy: (total - 1.0).abs(),
                tolerance: 1e-9,
            });
        }
        let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(FlowSampleDist { probs, cdf })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, id: EdgeId) -> f64 {
        self.probs[id]
    }

    /// Draws one edge by inversion.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> EdgeId {
        let total = *self.cdf.last().expect("graph has edges");
        let u: f64 = rng.random::<f64>() * total;
        // The first index whose cdf exceeds u always carries positive mass.
        let i = self.cdf.partition_point(|&c| c <= u);
        if i < self.probs.len() {
            i
        } else {
            self.probs.iter().rposition(|&p| p > 0.0).expect("some edge has mass")
        }
    }
}

/// `L_UU^{-1}` for a fixed sink set. Row `s` holds the voltages of the unit flow from `s`.
#[derive(Clone, Debug)]
pub struct GroundedInverse {
    pub free: Vec<Vertex>,
    pub index: Vec<Option<usize>>,
    pub inverse: DMatrix<f64>,
}

impl GroundedInverse {
    pub fn new(g: &Graph, sink: &SinkSet) -> Result<GroundedInverse> {
        let (l, free, index) = grounded_laplacian(g, sink);
        let chol = l
            .cholesky()
            .ok_or_else(|| ElfsError::SingularSystem("grounded Laplacian is not positive definite".into()))?;
        Ok(GroundedInverse { free, index, inverse: chol.inverse() })
    }

    /// Voltage at `x` for the unit flow from `s` (zero on sinks).
    pub fn voltage(&self, s: Vertex, x: Vertex) -> f64 {
        match (self.index[s], self.index[x]) {
            (Some(i), Some(j)) => self.inverse[(i, j)],
            _ => 0.0,
        }
    }

    /// Full voltage vector for source `s`.
    pub fn voltages(&self, s: Vertex) -> Vec<f64> {
        let mut v = vec![0.0; self.index.len()];
        if let Some(i) = self.index[s] {
            for (j, &x) in self.free.iter().enumerate() {
                v[x] = self.inverse[(i, j)];
            }
        }
        v
    }

    pub fn flow<'g>(&self, problem: &FlowProblem<'g>) -> Result<ElectricFlow<'g>> {
        ElectricFlow::from_voltages(problem, self.voltages(problem.source))
    }
}
