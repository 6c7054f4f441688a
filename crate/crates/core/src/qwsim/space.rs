//! The directed-edge space and the states living in it.
//!
//! Basis position `2e` is `|uv>` and `2e + 1` is `|vu>` for edge `e = (u, v)` with `u < v`,
//! so the swap is `i ^ 1`. Every state used by the simulator is real.

use nalgebra::DVector;

use crate::electric::ElectricFlow;
use crate::error::{ElfsError, Result};
use crate::graph::{EdgeId, Graph, Vertex};

#[derive(Clone, Debug)]
pub struct EdgeSpace {
    ends: Vec<(Vertex, Vertex)>,
}

impl EdgeSpace {
    pub fn new(g: &Graph) -> EdgeSpace {
        EdgeSpace { ends: g.edges().iter().map(|e| (e.u, e.v)).collect() }
    }

    pub fn dim(&self) -> usize {
        2 * self.ends.len()
    }

    pub fn num_edges(&self) -> usize {
        self.ends.len()
    }

    /// Position of `|from, other>` for edge `id`.
    pub fn index(&self, id: EdgeId, from: Vertex) -> usize {
        let (u, v) = self.ends[id];
        debug_assert!(from == u || from == v);
        if from == u {
            2 * id
        } else {
            2 * id + 1
        }
    }

    /// The directed edge `(x, y)` at basis position `i`.
    pub fn directed(&self, i: usize) -> (Vertex, Vertex) {
        let (u, v) = self.ends[i / 2];
        if i % 2 == 0 {
            (u, v)
        } else {
            (v, u)
        }
    }

    pub fn swap(i: usize) -> usize {
        i ^ 1
    }

    pub fn edge_of(i: usize) -> EdgeId {
        i / 2
    }

    pub fn apply_swap(&self, amps: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(amps.len(), |i, _| amps[i ^ 1])
    }
}

/// A real amplitude vector on the edge space. `normalized` records whether it is a state.
#[derive(Clone, Debug)]
pub struct EdgeState {
    amps: DVector<f64>,
    normalized: bool,
}

impl EdgeState {
    pub fn unnormalized(amps: DVector<f64>) -> EdgeState {
        EdgeState { amps, normalized: false }
    }

    /// Rescales to unit norm; the zero vector is rejected.
    pub fn normalized(amps: DVector<f64>) -> Result<EdgeState> {
        let norm = amps.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(ElfsError::SingularSystem("cannot normalize a zero edge vector".into()));
        }
        Ok(EdgeState { amps: amps / norm, normalized: true })
    }

    pub fn amps(&self) -> &DVector<f64> {
        &self.amps
    }

    pub fn into_amps(self) -> DVector<f64> {
        self.amps
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn dot(&self, other: &EdgeState) -> f64 {
        self.amps.dot(&other.amps)
    }

    /// `|<a|b>|^2 / (|a|^2 |b|^2)`.
    pub fn fidelity(&self, other: &EdgeState) -> f64 {
        let d = self.dot(other);
        d * d / (self.amps.norm_squared() * other.amps.norm_squared())
    }

    /// Trace distance between the pure states, `sqrt(1 - fidelity)`.
    pub fn trace_distance(&self, other: &EdgeState) -> f64 {
        (1.0 - self.fidelity(other)).max(0.0).sqrt()
    }

    /// Probability of measuring each undirected edge (both orientations merged).
    pub fn edge_probabilities(&self) -> Vec<f64> {
        let total = self.amps.norm_squared();
        (0..self.amps.len() / 2).map(|e| (self.amps[2 * e].powi(2) + self.amps[2 * e + 1].powi(2)) / total).collect()
    }
}

/// `|phi_x> = d_x^{-1/2} sum_y sqrt(w_xy) |xy>`.
pub fn star_state(g: &Graph, space: &EdgeSpace, x: Vertex) -> EdgeState {
    let mut amps = DVector::zeros(space.dim());
    let d = g.degree(x);
    for &(_, id) in g.neighbors(x) {
        amps[space.index(id, x)] = (g.edge(id).weight / d).sqrt();
    }
    EdgeState { amps, normalized: true }
}

/// `|phi_s^-> = (I - swap) |phi_s> / sqrt 2`.
pub fn phi_minus(g: &Graph, space: &EdgeSpace, s: Vertex) -> EdgeState {
    let star = star_state(g, space, s);
    let swapped = space.apply_swap(star.amps());
    EdgeState { amps: (star.amps() - swapped) / 2f64.sqrt(), normalized: true }
}

/// Edge vector of an antisymmetric flow given per edge in the `u -> v` orientation:
/// amplitude `h_xy / sqrt(w_xy)` on `|xy>`. Not normalized.
pub fn flow_vector(g: &Graph, space: &EdgeSpace, flow_uv: &[f64]) -> EdgeState {
    let mut amps = DVector::zeros(space.dim());
    for (id, e) in g.edges().iter().enumerate() {
        let a = flow_uv[id] / e.weight.sqrt();
        amps[2 * id] = a;
        amps[2 * id + 1] = -a;
    }
    EdgeState { amps, normalized: false }
}

/// The flow state `|f>` with amplitude `f_xy / sqrt(2 R_s w_xy)`.
pub fn flow_state(flow: &ElectricFlow<'_>, space: &EdgeSpace) -> EdgeState {
    let raw = flow_vector(flow.graph(), space, flow.edge_flows());
    EdgeState { amps: raw.amps / (2.0 * flow.resistance()).sqrt(), normalized: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::electric::solve_flow;
    use crate::generators;
    use crate::graph::FlowProblem;

    #[test]
    fn basis_layout() {
        let g = generators::path(3).unwrap();
        let space = EdgeSpace::new(&g);
        assert_eq!(space.dim(), 4);
        assert_eq!(space.directed(3), (2, 1));
        assert_eq!(space.index(1, 2), 3);
        assert_eq!(EdgeSpace::swap(3), 2);
    }

    #[test]
    fn flow_state_is_unit_and_overlaps_phi_minus() {
        let g = generators::path(3).unwrap();
        let space = EdgeSpace::new(&g);
        let flow = solve_flow(&FlowProblem::new(&g, 0, &[2]).unwrap()).unwrap();
        let f = flow_state(&flow, &space);
        assert!((f.norm() - 1.0).abs() < 1e-14);
        let phi = phi_minus(&g, &space, 0);
        assert!((f.dot(&phi).powi(2) - 0.5).abs() < 1e-14);
        let p = f.edge_probabilities();
        assert!((p[0] - 0.5).abs() < 1e-14 && (p[1] - 0.5).abs() < 1e-14);
    }
}
