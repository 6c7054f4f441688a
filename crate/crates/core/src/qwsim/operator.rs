//! The absorbing walk operator and its phase-zero eigenspace.
//!
//! `U = swap * R` where `R` reflects around `|phi_x>` on the star of every vertex outside
//! `{s} + M` and acts as `-I` on the stars of `s` and the sinks. Equivalently
//! `U = (2 Pi^- - I)(2 Pi_A - I)` with `Pi_A` the complement of the interior star span.
//!
//! `U` is real orthogonal, so the spectrum is recovered from the symmetric part
//! `H = (U + U^T)/2`: an eigenvector `h` of `H` lies in the span of the `+theta` and `-theta`
//! eigenvectors of `U`, and `theta = 2 atan2(|(U - I)h|, |(U + I)h|)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::space::{flow_state, flow_vector, phi_minus, star_state, EdgeSpace, EdgeState};
use crate::electric::ElectricFlow;
use crate::error::{ElfsError, Result};
use crate::graph::{EdgeId, FlowProblem, Graph, SinkSet, Vertex};

pub const DEFAULT_DIMENSION_CAP: usize = 2048;
/// Eigenvectors with `|theta|` at most this belong to the phase-zero space.
pub const ZERO_PHASE_TOL: f64 = 1e-9;
const UNITARITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct QWalkOperator {
    graph: Graph,
    space: EdgeSpace,
    source: Vertex,
    sink: SinkSet,
    matrix: DMatrix<f64>,
    /// Orthonormal eigenvectors of `H`, one per column.
    basis: DMatrix<f64>,
    /// `(U - U^T)/2` applied to `basis`.
    rotated: DMatrix<f64>,
    /// `|theta_k|` of each column of `basis`.
    phases: Vec<f64>,
    unitarity_error: f64,
}

pub fn build_operator(g: &Graph, s: Vertex, sink: &[Vertex]) -> Result<QWalkOperator> {
    build_operator_with_cap(g, s, sink, DEFAULT_DIMENSION_CAP)
}

pub fn build_operator_with_cap(g: &Graph, s: Vertex, sink: &[Vertex], cap: usize) -> Result<QWalkOperator> {
    let problem = FlowProblem::new(g, s, sink)?;
    let comp = g.components();
    if let Some(x) = (0..g.n()).find(|&x| comp[x] != comp[s]) {
        return Err(ElfsError::Disconnected { vertex: x });
    }
    let space = EdgeSpace::new(g);
    let dim = space.dim();
    if dim > cap {
        return Err(ElfsError::DimensionOverflow { dim, cap });
    }
    let mut reflect = DMatrix::<f64>::zeros(dim, dim);
    for x in 0..g.n() {
        let star: Vec<usize> = g.neighbors(x).iter().map(|&(_, id)| space.index(id, x)).collect();
        if x == s || problem.sink.contains(x) {
            for &i in &star {
                reflect[(i, i)] = -1.0;
            }
            continue;
        }
        let phi = star_state(g, &space, x);
        for &i in &star {
            for &j in &star {
                reflect[(i, j)] = 2.0 * phi.amps()[i] * phi.amps()[j] - if i == j { 1.0 } else { 0.0 };
            }
        }
    }
    let matrix = DMatrix::from_fn(dim, dim, |i, j| reflect[(i ^ 1, j)]);
    let unitarity_error = (matrix.transpose() * &matrix - DMatrix::<f64>::identity(dim, dim)).amax();
    if unitarity_error > UNITARITY_TOL {
        return Err(ElfsError::IdentityViolation {
            what: "walk operator unitarity".into(),
            lhs: unitarity_error,
            rhs: UNITARITY_TOL,
        });
    }
    let t = matrix.transpose();
    let sym = (&matrix + &t) * 0.5;
    let anti = (&matrix - &t) * 0.5;
    let basis = SymmetricEigen::new(sym).eigenvectors;
    let minus = &matrix * &basis - &basis;
    let plus = &matrix * &basis + &basis;
    let phases = (0..dim).map(|k| 2.0 * minus.column(k).norm().atan2(plus.column(k).norm())).collect();
    let rotated = anti * &basis;
    Ok(QWalkOperator { graph: g.clone(), space, source: s, sink: problem.sink, matrix, basis, rotated, phases, unitarity_error })
}

impl QWalkOperator {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn space(&self) -> &EdgeSpace {
        &self.space
    }

    pub fn source(&self) -> Vertex {
        self.source
    }

    pub fn sink(&self) -> &SinkSet {
        &self.sink
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `max |U^T U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        self.unitarity_error
    }

    pub(crate) fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub(crate) fn rotated(&self) -> &DMatrix<f64> {
        &self.rotated
    }

    /// Eigenphase magnitudes, one per eigenvector of the symmetric part.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn is_zero_phase(&self, k: usize) -> bool {
        self.phases[k] <= ZERO_PHASE_TOL
    }

    pub fn fixed_dimension(&self) -> usize {
        (0..self.dim()).filter(|&k| self.is_zero_phase(k)).count()
    }

    /// Kernel dimension of `U - I` from its singular values, as a cross-check.
    pub fn fixed_dimension_svd(&self) -> usize {
        let dim = self.dim();
        let svd = (&self.matrix - DMatrix::<f64>::identity(dim, dim)).svd(false, false);
        svd.singular_values.iter().filter(|&&s| s <= ZERO_PHASE_TOL).count()
    }

    /// The orthogonal projector `Pi_0` onto the phase-zero eigenspace.
    pub fn zero_projector(&self) -> DMatrix<f64> {
        let cols: Vec<usize> = (0..self.dim()).filter(|&k| self.is_zero_phase(k)).collect();
        let b = self.basis.select_columns(&cols);
        &b * b.transpose()
    }

    pub fn project_zero(&self, state: &EdgeState) -> EdgeState {
        let coeffs = self.basis.tr_mul(state.amps());
        let mut out = DVector::zeros(self.dim());
        for k in (0..self.dim()).filter(|&k| self.is_zero_phase(k)) {
            out.axpy(coeffs[k], &self.basis.column(k), 1.0);
        }
        EdgeState::unnormalized(out)
    }

    pub fn apply(&self, state: &EdgeState) -> EdgeState {
        EdgeState::unnormalized(&self.matrix * state.amps())
    }

    /// Orthogonal projector onto the span of the interior star states.
    pub fn interior_star_projector(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut p = DMatrix::zeros(dim, dim);
        for x in (0..self.graph.n()).filter(|&x| x != self.source && !self.sink.contains(x)) {
            let phi = star_state(&self.graph, &self.space, x);
            p += phi.amps() * phi.amps().transpose();
        }
        p
    }
}

/// Outcome of the invariant-subspace verification.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub dimension: usize,
    pub fixed_dimension: usize,
    pub fixed_dimension_svd: usize,
    /// `1 + (|E| - n + 1) + (|M| - 1)`.
    pub expected_fixed_dimension: usize,
    pub cycle_rank: usize,
    pub sink_flows: usize,
    pub unitarity_error: f64,
    /// `|U f - f|`.
    pub flow_residual: f64,
    /// Largest `|U g - g|` over the combinatorial closed-flow basis.
    pub closed_residual: f64,
    /// Largest `|Pi_0 g - g|` over the same basis.
    pub closed_projection_residual: f64,
    /// `<f|phi_s^->^2`.
    pub overlap: f64,
    /// `1 / (d_s R_s)`.
    pub overlap_target: f64,
    /// `|Pi_0 phi_s^- - (d_s R_s)^{-1/2} f|`.
    pub projection_error: f64,
    /// `|U - (2 Pi^- - I)(2 Pi_A - I)|` in max norm.
    pub reflection_form_error: f64,
    /// `|(I - Pi_int) nu|`.
    pub nu_star_residual: f64,
    /// `|Pi^- nu - (f - sqrt(R_s d_s) phi_s^-)|`.
    pub nu_minus_residual: f64,
    /// `|phi_s^- - sqrt(p) f + Pi^- nu / sqrt(R_s d_s)|`.
    pub decomposition_residual: f64,
    /// `|phi|^2 = |nu|^2 / (R_s d_s)`.
    pub phi_norm_sq: f64,
    /// `2 ET_s / (R_s d_s)`.
    pub phi_norm_bound: f64,
}

fn tol_check(what: &str, value: f64, tol: f64) -> Result<()> {
    if value <= tol {
        Ok(())
    } else {
        Err(ElfsError::IdentityViolation { what: what.into(), lhs: value, rhs: tol })
    }
}

/// BFS spanning tree: parent, parent edge and depth of every vertex.
fn spanning_tree(g: &Graph, root: Vertex) -> (Vec<Option<(Vertex, EdgeId)>>, Vec<usize>, Vec<bool>) {
    let mut parent = vec![None; g.n()];
    let mut depth = vec![0; g.n()];
    let mut seen = vec![false; g.n()];
    let mut in_tree = vec![false; g.num_edges()];
    let mut queue = std::collections::VecDeque::from([root]);
    seen[root] = true;
    while let Some(x) = queue.pop_front() {
        for &(y, id) in g.neighbors(x) {
            if !seen[y] {
                seen[y] = true;
                parent[y] = Some((x, id));
                depth[y] = depth[x] + 1;
                in_tree[id] = true;
                queue.push_back(y);
            }
        }
    }
    (parent, depth, in_tree)
}

/// Adds a unit flow from `a` to `b` along the tree path.
fn route(g: &Graph, parent: &[Option<(Vertex, EdgeId)>], depth: &[usize], a: Vertex, b: Vertex, flow: &mut [f64]) {
    let push = |flow: &mut [f64], from: Vertex, id: EdgeId| {
        // Unit flow leaving `from` along `id`.
        flow[id] += if g.edge(id).u == from { 1.0 } else { -1.0 };
    };
    let (mut x, mut y) = (a, b);
    let mut tail = Vec::new();
    while x != y {
        if depth[x] >= depth[y] {
            let (p, id) = parent[x].expect("non-root has a parent");
            push(flow, x, id);
            x = p;
        } else {
            let (p, id) = parent[y].expect("non-root has a parent");
            tail.push((p, id));
            y = p;
        }
    }
    for (p, id) in tail {
        push(flow, p, id);
    }
}

/// Fundamental-cycle flows plus `|M| - 1` sink-to-sink tree flows.
pub fn closed_flow_basis(g: &Graph, sink: &SinkSet) -> Vec<Vec<f64>> {
    let root = sink.members()[0];
    let (parent, depth, in_tree) = spanning_tree(g, root);
    let mut out = Vec::new();
    for (id, e) in g.edges().iter().enumerate().filter(|(id, _)| !in_tree[*id]) {
        let mut flow = vec![0.0; g.num_edges()];
        flow[id] = 1.0;
        route(g, &parent, &depth, e.v, e.u, &mut flow);
        out.push(flow);
    }
    for &m in &sink.members()[1..] {
        let mut flow = vec![0.0; g.num_edges()];
        route(g, &parent, &depth, root, m, &mut flow);
        out.push(flow);
    }
    out
}

/// Verifies the structure of the phase-zero space of `op` against the electric flow.
pub fn invariant_subspace_check(op: &QWalkOperator, flow: &ElectricFlow<'_>) -> Result<InvariantReport> {
    let g = op.graph();
    let space = op.space();
    if flow.source() != op.source() || flow.sink() != op.sink() || flow.graph().n() != g.n() {
        return Err(ElfsError::InvalidConfig("flow and operator are for different problems".into()));
    }
    let dim = op.dim();
    let s = op.source();
    let tol = 1e-9;
    let f = flow_state(flow, space);

    let flow_residual = (op.apply(&f).amps() - f.amps()).norm();
    tol_check("U f = f", flow_residual, tol)?;

    let basis = closed_flow_basis(g, op.sink());
    let mut closed_residual: f64 = 0.0;
    let mut closed_projection_residual: f64 = 0.0;
    for h in &basis {
        let v = flow_vector(g, space, h);
        let v = EdgeState::normalized(v.into_amps())?;
        closed_residual = closed_residual.max((op.apply(&v).amps() - v.amps()).norm());
        closed_projection_residual = closed_projection_residual.max((op.project_zero(&v).amps() - v.amps()).norm());
    }
    tol_check("U g = g on closed flows", closed_residual, tol)?;
    tol_check("closed flows inside the phase-zero space", closed_projection_residual, tol)?;

    let cycle_rank = g.num_edges() + 1 - g.n();
    let sink_flows = op.sink().len() - 1;
    let expected = 1 + cycle_rank + sink_flows;
    let fixed = op.fixed_dimension();
    let fixed_svd = op.fixed_dimension_svd();
    if fixed != expected || fixed_svd != expected {
        return Err(ElfsError::IdentityViolation {
            what: format!("fixed-space dimension (svd count {fixed_svd})"),
            lhs: fixed as f64,
            rhs: expected as f64,
        });
    }

    let r = flow.resistance();
    let d = g.degree(s);
    let phi = phi_minus(g, space, s);
    let overlap = f.dot(&phi).powi(2);
    let overlap_target = 1.0 / (d * r);
    tol_check("<f|phi_s^->^2 = 1/(d_s R_s)", (overlap - overlap_target).abs(), tol)?;
    let projected = op.project_zero(&phi);
    let projection_error = (projected.amps() - f.amps() * overlap_target.sqrt()).norm();
    tol_check("Pi_0 phi_s^- = (d_s R_s)^{-1/2} f", projection_error, tol)?;

    let identity = DMatrix::<f64>::identity(dim, dim);
    let swap = DMatrix::from_fn(dim, dim, |i, j| if j == (i ^ 1) { 1.0 } else { 0.0 });
    let pi_minus = (&identity - &swap) * 0.5;
    let pi_int = op.interior_star_projector();
    let pi_a = &identity - &pi_int;
    let reflection_form_error = (op.matrix() - (&pi_minus * 2.0 - &identity) * (&pi_a * 2.0 - &identity)).amax();
    tol_check("U = (2 Pi^- - I)(2 Pi_A - I)", reflection_form_error, tol)?;

    let v = flow.voltages();
    let mut nu = DVector::zeros(dim);
    for x in (0..g.n()).filter(|&x| x != s) {
        let star = star_state(g, space, x);
        nu.axpy((2.0 / r).sqrt() * v[x] * g.degree(x).sqrt(), star.amps(), 1.0);
    }
    let nu_star_residual = (&pi_a * &nu).norm();
    tol_check("(I - Pi_int) nu = 0", nu_star_residual, tol)?;
    let rd = r * d;
    let minus_nu = &pi_minus * &nu;
    let nu_minus_residual = (&minus_nu - (f.amps() - phi.amps() * rd.sqrt())).norm();
    tol_check("Pi^- nu = f - sqrt(R_s d_s) phi_s^-", nu_minus_residual, tol)?;
    let decomposition_residual = (phi.amps() - f.amps() / rd.sqrt() + &minus_nu / rd.sqrt()).norm();
    tol_check("phi_s^- = sqrt(p) f - Pi^- nu / sqrt(R_s d_s)", decomposition_residual, tol)?;
    let phi_norm_sq = nu.norm_squared() / rd;
    let et: f64 = (0..g.n()).map(|x| v[x] * v[x] * g.degree(x)).sum::<f64>() / r;
    let phi_norm_bound = 2.0 * et / rd;
    tol_check("|phi|^2 <= 2 ET_s / (R_s d_s)", phi_norm_sq - phi_norm_bound, tol)?;

    Ok(InvariantReport {
        dimension: dim,
        fixed_dimension: fixed,
        fixed_dimension_svd: fixed_svd,
        expected_fixed_dimension: expected,
        cycle_rank,
        sink_flows,
        unitarity_error: op.unitarity_error(),
        flow_residual,
        closed_residual,
        closed_projection_residual,
        overlap,
        overlap_target,
        projection_error,
        reflection_form_error,
        nu_star_residual,
        nu_minus_residual,
        decomposition_residual,
        phi_norm_sq,
        phi_norm_bound,
    })
}
