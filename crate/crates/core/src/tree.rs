//! Schur complements, the edge-level elfs chain, cut-vertex quantities and the tree bound on
//! the electric hitting time.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::electric::{sample_dist, solve_flow, GroundedInverse};
use crate::elfs::ElfsChain;
use crate::error::{ElfsError, Result};
use crate::graph::{EdgeId, FlowProblem, Graph, SinkSet, Vertex};

/// Laplacian Schur complement onto a kept vertex set.
#[derive(Clone, Debug)]
pub struct SchurResult {
    /// Reduced graph on `0..kept.len()`.
    pub graph: Graph,
    /// Reduced vertex id to original vertex id.
    pub kept: Vec<Vertex>,
    /// Original vertex id to reduced id.
    pub map: Vec<Option<Vertex>>,
    /// `L_SS - L_SC L_CC^{-1} L_CS`.
    pub laplacian: DMatrix<f64>,
    /// Self-loop weight per kept vertex, `d_x - L^c_xx`, which the reduced graph omits.
    pub self_loops: Vec<f64>,
}

pub fn schur_complement(g: &Graph, keep: &[Vertex]) -> Result<SchurResult> {
    if keep.is_empty() {
        return Err(ElfsError::EmptyKeepSet);
    }
    let mut map = vec![None; g.n()];
    let mut kept = Vec::new();
    for &x in keep {
        g.check_vertex(x)?;
        if map[x].is_none() {
            map[x] = Some(kept.len());
            kept.push(x);
        }
    }
    let elim: Vec<Vertex> = (0..g.n()).filter(|&x| map[x].is_none()).collect();
    let l = g.laplacian();
    let k = kept.len();
    let lss = DMatrix::from_fn(k, k, |i, j| l[(kept[i], kept[j])]);
    let laplacian = if elim.is_empty() {
        lss
    } else {
        let c = elim.len();
        let lcc = DMatrix::from_fn(c, c, |i, j| l[(elim[i], elim[j])]);
        let lcs = DMatrix::from_fn(c, k, |i, j| l[(elim[i], kept[j])]);
        let chol = lcc.cholesky().ok_or(ElfsError::SingularBlock)?;
        let x = chol.solve(&lcs);
        lss - lcs.transpose() * x
    };
    let scale = laplacian.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let a = 0.5 * (laplacian[(i, j)] + laplacian[(j, i)]);
            if a > 1e-12 * scale {
                return Err(ElfsError::OracleMismatch {
                    what: format!("positive off-diagonal in Schur complement at ({i}, {j})"),
                    discrepancy: a,
                    tolerance: 1e-12 * scale,
                });
            }
            if -a > 1e-12 * scale {
                edges.push((i, j, -a));
            }
        }
    }
    let self_loops = (0..k).map(|i| (g.degree(kept[i]) - laplacian[(i, i)]).max(0.0)).collect();
    Ok(SchurResult { graph: Graph::new(k, edges)?, kept, map, laplacian, self_loops })
}

#[derive(Clone, Debug, Serialize)]
pub struct SchurInvarianceReport {
    pub probes: usize,
    /// Largest voltage disagreement on kept vertices over all probes.
    pub max_voltage_diff: f64,
    /// Largest entry of the difference between the watched walk and the reduced walk.
    pub max_walk_diff: f64,
}

/// Checks that electric flows between kept vertices keep their voltages, and that the
/// walk watched on the kept set `P_SS + P_SC (I - P_CC)^{-1} P_CS` equals the walk on the
/// reduced graph with its dropped self-loops put back.
pub fn check_schur_invariance(g: &Graph, keep: &[Vertex], probes: &[(Vertex, Vertex)]) -> Result<SchurInvarianceReport> {
    let schur = schur_complement(g, keep)?;
    let mut max_voltage_diff: f64 = 0.0;
    for &(a, b) in probes {
        let (ra, rb) = match (schur.map[a], schur.map[b]) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(ElfsError::InvalidConfig(format!("probe ({a}, {b}) is not inside the kept set"))),
        };
        let full = solve_flow(&FlowProblem::new(g, a, &[b])?)?;
        let red = solve_flow(&FlowProblem::new(&schur.graph, ra, &[rb])?)?;
        for (i, &x) in schur.kept.iter().enumerate() {
            max_voltage_diff = max_voltage_diff.max((full.voltage(x) - red.voltage(i)).abs());
        }
    }
    let p = g.walk_matrix();
    let kept = &schur.kept;
    let elim: Vec<Vertex> = (0..g.n()).filter(|&x| schur.map[x].is_none()).collect();
    let k = kept.len();
    let mut watched = DMatrix::from_fn(k, k, |i, j| p[(kept[i], kept[j])]);
    if !elim.is_empty() {
        let c = elim.len();
        let i_pcc = DMatrix::from_fn(c, c, |i, j| if i == j { 1.0 } else { 0.0 } - p[(elim[i], elim[j])]);
        let pcs = DMatrix::from_fn(c, k, |i, j| p[(elim[i], kept[j])]);
        let psc = DMatrix::from_fn(k, c, |i, j| p[(kept[i], elim[j])]);
        let x = i_pcc.lu().solve(&pcs).ok_or(ElfsError::SingularBlock)?;
        watched += psc * x;
    }
    let mut max_walk_diff: f64 = 0.0;
    for i in 0..k {
        let d = g.degree(kept[i]);
        for j in 0..k {
            let reduced = if i == j { schur.self_loops[i] / d } else { schur.graph.weight(i, j) / d };
            max_walk_diff = max_walk_diff.max((watched[(i, j)] - reduced).abs());
        }
    }
    let report = SchurInvarianceReport { probes: probes.len(), max_voltage_diff, max_walk_diff };
    if max_voltage_diff > 1e-8 {
        return Err(ElfsError::IdentityViolation { what: "Schur voltages".into(), lhs: max_voltage_diff, rhs: 0.0 });
    }
    if max_walk_diff > 1e-8 {
        return Err(ElfsError::IdentityViolation { what: "watched walk".into(), lhs: max_walk_diff, rhs: 0.0 });
    }
    Ok(report)
}

/// The elfs process viewed as a chain on sampled edges. From edge `(x, y)` the next source
/// is `x` or `y` with probability 1/2 each; a sink endpoint absorbs.
#[derive(Clone, Debug)]
pub struct EdgeChain {
    sink: SinkSet,
    /// `p^z` for every vertex (all zeros on sinks).
    dists: Vec<Vec<f64>>,
    transition: DMatrix<f64>,
}

impl EdgeChain {
    pub fn new(g: &Graph, sink: &SinkSet) -> Result<EdgeChain> {
        let inv = GroundedInverse::new(g, sink)?;
        let m = g.num_edges();
        let mut dists = vec![vec![0.0; m]; g.n()];
        for &z in &inv.free {
            let p = FlowProblem::with_sink(g, z, sink.clone())?;
            dists[z] = sample_dist(&inv.flow(&p)?)?.probs().to_vec();
        }
        let mut transition = DMatrix::zeros(m, m);
        for (e, edge) in g.edges().iter().enumerate() {
            for z in [edge.u, edge.v] {
                if sink.contains(z) {
                    continue;
                }
                for (f, &pf) in dists[z].iter().enumerate() {
                    transition[(e, f)] += 0.5 * pf;
                }
            }
        }
        Ok(EdgeChain { sink: sink.clone(), dists, transition })
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// First-sample distribution from source `z`.
    pub fn first_sample(&self, z: Vertex) -> &[f64] {
        &self.dists[z]
    }

    pub fn sink(&self) -> &SinkSet {
        &self.sink
    }

    /// States reachable from the support of `start`.
    fn reachable(&self, start: &[f64]) -> Vec<usize> {
        let m = start.len();
        let mut seen = vec![false; m];
        let mut queue: VecDeque<usize> = (0..m).filter(|&e| start[e] > 0.0).collect();
        for &e in &queue {
            seen[e] = true;
        }
        while let Some(e) = queue.pop_front() {
            for f in 0..m {
                if !seen[f] && self.transition[(e, f)] > 0.0 {
                    seen[f] = true;
                    queue.push_back(f);
                }
            }
        }
        (0..m).filter(|&e| seen[e]).collect()
    }

    /// Expected number of times each edge is sampled, for a process whose first sample is
    /// drawn from `start`. Unreachable edges are exactly zero.
    pub fn expected_counts_from(&self, start: &[f64]) -> Result<Vec<f64>> {
        let states = self.reachable(start);
        let k = states.len();
        // n = start (I - T)^{-1}, i.e. (I - T)^T n = start on the reachable set.
        let a = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 } - self.transition[(states[j], states[i])]);
        let b = DVector::from_fn(k, |i, _| start[states[i]]);
        let sol = a.lu().solve(&b).ok_or_else(|| ElfsError::SingularSystem("edge chain".into()))?;
        let mut out = vec![0.0; start.len()];
        for (i, &e) in states.iter().enumerate() {
            out[e] = sol[i];
        }
        Ok(out)
    }

    /// Expected edge counts for the process started at vertex `s`.
    pub fn expected_counts(&self, s: Vertex) -> Result<Vec<f64>> {
        if self.sink.contains(s) {
            return Err(ElfsError::SourceInSink(s));
        }
        self.expected_counts_from(&self.dists[s].clone())
    }

    /// Probability that, after a sample drawn from `start`, a later sample lands in
    /// `target`.
    pub fn later_hit_probability(&self, start: &[f64], target: &[bool]) -> Result<f64> {
        let m = start.len();
        let free: Vec<usize> = (0..m).filter(|&e| !target[e]).collect();
        let k = free.len();
        let a = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 } - self.transition[(free[i], free[j])]);
        let b = DVector::from_fn(k, |i, _| (0..m).filter(|&f| target[f]).map(|f| self.transition[(free[i], f)]).sum());
        let h = a.lu().solve(&b).ok_or_else(|| ElfsError::SingularSystem("edge hitting".into()))?;
        let mut total = 0.0;
        for (i, &e) in free.iter().enumerate() {
            total += start[e] * h[i];
        }
        for e in 0..m {
            if target[e] && start[e] > 0.0 {
                let after: f64 = (0..m).filter(|&f| target[f]).map(|f| self.transition[(e, f)]).sum::<f64>()
                    + free.iter().enumerate().map(|(i, &f)| self.transition[(e, f)] * h[i]).sum::<f64>();
                total += start[e] * after;
            }
        }
        Ok(total)
    }
}

/// Exact expected number of elfs samples from `s` that land in `edge_set`.
pub fn expected_edge_counts(g: &Graph, s: Vertex, sink: &[Vertex], edge_set: &[EdgeId]) -> Result<f64> {
    let problem = FlowProblem::new(g, s, sink)?;
    let counts = EdgeChain::new(g, &problem.sink)?.expected_counts(s)?;
    Ok(edge_set.iter().map(|&e| counts[e]).sum())
}

/// Component labels of the graph with `cut` removed, for vertices other than `cut`.
fn components_without(g: &Graph, cut: Vertex) -> Vec<usize> {
    let mut label = vec![usize::MAX; g.n()];
    let mut next = 0;
    for start in 0..g.n() {
        if start == cut || label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for &(y, _) in g.neighbors(x) {
                if y != cut && label[y] == usize::MAX {
                    label[y] = next;
                    queue.push_back(y);
                }
            }
        }
        next += 1;
    }
    label
}

/// Splits the edges at `s` into the given side `A` and the rest, checking that `s` separates
/// them. Returns the side mask over edges and the vertex-side mask (true on the A side).
fn cut_sides(g: &Graph, s: Vertex, a_edges: &[EdgeId]) -> Result<(Vec<bool>, Vec<bool>)> {
    let mut in_a = vec![false; g.num_edges()];
    for &e in a_edges {
        if e >= g.num_edges() {
            return Err(ElfsError::InvalidConfig(format!("edge id {e} out of range")));
        }
        in_a[e] = true;
    }
    let comp = components_without(g, s);
    let ncomp = comp.iter().filter(|&&c| c != usize::MAX).max().map_or(0, |c| c + 1);
    let mut comp_side: Vec<Option<bool>> = vec![None; ncomp];
    for (id, e) in g.edges().iter().enumerate() {
        let x = if e.u == s { e.v } else { e.u };
        if e.u != s && e.v != s && comp[e.u] != comp[e.v] {
            return Err(ElfsError::NotACutVertex(s));
        }
        match comp_side[comp[x]] {
            None => comp_side[comp[x]] = Some(in_a[id]),
            Some(side) if side != in_a[id] => return Err(ElfsError::NotACutVertex(s)),
            _ => {}
        }
    }
    if !in_a.iter().any(|&b| b) || in_a.iter().all(|&b| b) {
        return Err(ElfsError::NotACutVertex(s));
    }
    let vertex_a = (0..g.n()).map(|x| x != s && comp[x] != usize::MAX && comp_side[comp[x]] == Some(true)).collect();
    Ok((in_a, vertex_a))
}

#[derive(Clone, Debug, Serialize)]
pub struct PbaReport {
    /// Net flow into the sinks on the A side.
    pub f_a: f64,
    /// `Pr(first sample in A)` from the edge-sampling distribution.
    pub first_sample_in_a: f64,
    /// `f_A / (1 + f_A)`.
    pub p_ba_formula: f64,
    /// Probability of a later A sample after the first B sample, from the edge chain.
    pub p_ba_exact: f64,
    /// `Pr(last sample in A)` from the edge chain.
    pub last_sample_in_a: f64,
}

/// Cut-vertex quantities at `s`, with `A` the given edges and `B` all other edges.
pub fn pba_quantities(g: &Graph, s: Vertex, sink: &[Vertex], a_edges: &[EdgeId]) -> Result<PbaReport> {
    let problem = FlowProblem::new(g, s, sink)?;
    let (in_a, vertex_a) = cut_sides(g, s, a_edges)?;
    let flow = solve_flow(&problem)?;
    let f_a: f64 = problem
        .sink
        .members()
        .iter()
        .filter(|&&m| vertex_a[m])
        .map(|&m| -flow.net_outflow(m))
        .sum();
    let chain = EdgeChain::new(g, &problem.sink)?;
    let p = chain.first_sample(s);
    let first_sample_in_a: f64 = (0..g.num_edges()).filter(|&e| in_a[e]).map(|e| p[e]).sum();
    let b_total = 1.0 - first_sample_in_a;
    let start_b: Vec<f64> = (0..g.num_edges()).map(|e| if in_a[e] { 0.0 } else { p[e] / b_total }).collect();
    let p_ba_exact = if b_total > 0.0 { chain.later_hit_probability(&start_b, &in_a)? } else { f64::NAN };
    // Last sample in A: absorption through an A edge.
    let counts = chain.expected_counts(s)?;
    let last_sample_in_a: f64 = g
        .edges()
        .iter()
        .enumerate()
        .filter(|&(e, _)| in_a[e])
        .map(|(e, edge)| counts[e] * 0.5 * [edge.u, edge.v].iter().filter(|&&z| problem.sink.contains(z)).count() as f64)
        .sum();
    let report = PbaReport { f_a, first_sample_in_a, p_ba_formula: f_a / (1.0 + f_a), p_ba_exact, last_sample_in_a };
    let tol = 1e-8;
    for (what, lhs, rhs) in [
        ("Pr(Y_1 in A) = f_A", report.first_sample_in_a, f_a),
        ("p_BA = f_A / (1 + f_A)", report.p_ba_exact, report.p_ba_formula),
        ("Pr(Y_rho in A) = f_A", report.last_sample_in_a, f_a),
    ] {
        if b_total > 0.0 && (lhs - rhs).abs() > tol {
            return Err(ElfsError::IdentityViolation { what: what.into(), lhs, rhs });
        }
    }
    Ok(report)
}

/// Edge counts on `A` before and after replacing the `B` side of the cut vertex `s` by a
/// single edge `(s, b)` to a merged sink `b`, the Schur complement onto `V_A + {s, b}`.
#[derive(Clone, Debug, Serialize)]
pub struct SchurEdgeCountReport {
    pub edges: Vec<EdgeId>,
    pub original: Vec<f64>,
    pub reduced: Vec<f64>,
    pub max_diff: f64,
    /// Weight of the new `(s, b)` edge and `1 / R_{s,b}` computed on the B side.
    pub contracted_weight: Option<f64>,
    pub inverse_resistance: Option<f64>,
}

pub fn schur_edge_count_invariance(g: &Graph, s: Vertex, sink: &[Vertex], a_edges: &[EdgeId]) -> Result<SchurEdgeCountReport> {
    let problem = FlowProblem::new(g, s, sink)?;
    let (in_a, vertex_a) = cut_sides(g, s, a_edges)?;
    let n = g.n();
    let is_b_sink: Vec<bool> = (0..n).map(|x| problem.sink.contains(x) && !vertex_a[x]).collect();
    let has_b = is_b_sink.iter().any(|&b| b);
    // Relabel with all B-side sinks merged into one vertex `b` (the last id).
    let mut id = vec![0; n];
    let mut count = 0;
    for x in 0..n {
        if !is_b_sink[x] {
            id[x] = count;
            count += 1;
        }
    }
    let b = count;
    for x in 0..n {
        if is_b_sink[x] {
            id[x] = b;
        }
    }
    let edges = g.edges().iter().filter(|e| id[e.u] != id[e.v]).map(|e| (id[e.u], id[e.v], e.weight));
    let h = Graph::new(count + usize::from(has_b), edges)?;
    let mut keep: Vec<Vertex> = (0..n).filter(|&x| vertex_a[x]).map(|x| id[x]).collect();
    keep.push(id[s]);
    if has_b {
        keep.push(b);
    }
    let schur = schur_complement(&h, &keep)?;
    let reduced = &schur.graph;
    let pos = |x: Vertex| schur.map[id[x]].expect("kept vertex");
    let mut red_sink: Vec<Vertex> = problem.sink.members().iter().filter(|&&m| vertex_a[m]).map(|&m| pos(m)).collect();
    if has_b {
        red_sink.push(schur.map[b].expect("kept"));
    }
    let red_problem = FlowProblem::new(reduced, pos(s), &red_sink)?;
    let original_counts = EdgeChain::new(g, &problem.sink)?.expected_counts(s)?;
    let reduced_counts = EdgeChain::new(reduced, &red_problem.sink)?.expected_counts(pos(s))?;
    let mut report = SchurEdgeCountReport {
        edges: Vec::new(),
        original: Vec::new(),
        reduced: Vec::new(),
        max_diff: 0.0,
        contracted_weight: None,
        inverse_resistance: None,
    };
    for (eid, e) in g.edges().iter().enumerate() {
        if !in_a[eid] {
            continue;
        }
        let rid = reduced.edge_between(pos(e.u), pos(e.v)).ok_or_else(|| ElfsError::OracleMismatch {
            what: format!("A edge {eid} missing after reduction"),
            discrepancy: f64::INFINITY,
            tolerance: 0.0,
        })?;
        report.edges.push(eid);
        report.original.push(original_counts[eid]);
        report.reduced.push(reduced_counts[rid]);
        report.max_diff = report.max_diff.max((original_counts[eid] - reduced_counts[rid]).abs());
    }
    if has_b {
        let rb = schur.map[b].expect("kept");
        report.contracted_weight = Some(reduced.weight(pos(s), rb));
        let mut b_part: Vec<Vertex> = (0..n).filter(|&x| x == s || (!vertex_a[x] && !is_b_sink[x])).map(|x| id[x]).collect();
        b_part.push(b);
        let (b_graph, b_map) = h.induced(&b_part)?;
        let r = crate::electric::effective_resistance(&b_graph, b_map[id[s]].unwrap(), b_map[b].unwrap())?;
        report.inverse_resistance = Some(1.0 / r);
    }
    if report.max_diff > 1e-8 {
        return Err(ElfsError::IdentityViolation { what: "edge counts under Schur contraction".into(), lhs: report.max_diff, rhs: 0.0 });
    }
    Ok(report)
}

/// A tree rooted at a vertex.
#[derive(Clone, Debug)]
pub struct TreeDecomposition {
    pub root: Vertex,
    pub parent: Vec<Option<Vertex>>,
    /// Edge to the parent.
    pub parent_edge: Vec<Option<EdgeId>>,
    pub children: Vec<Vec<Vertex>>,
    /// Vertices in BFS order from the root.
    pub order: Vec<Vertex>,
}

impl TreeDecomposition {
    pub fn new(g: &Graph, root: Vertex) -> Result<TreeDecomposition> {
        if !g.is_tree() {
            return Err(ElfsError::NotATree);
        }
        g.check_vertex(root)?;
        let n = g.n();
        let mut parent = vec![None; n];
        let mut parent_edge = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut order = vec![root];
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut i = 0;
        while i < order.len() {
            let x = order[i];
            for &(y, id) in g.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some(x);
                    parent_edge[y] = Some(id);
                    children[x].push(y);
                    order.push(y);
                }
            }
            i += 1;
        }
        Ok(TreeDecomposition { root, parent, parent_edge, children, order })
    }

    /// Vertices of the subtree below `x`, including `x`.
    pub fn subtree(&self, x: Vertex) -> Vec<Vertex> {
        let mut out = vec![x];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.children[out[i]].iter().copied());
            i += 1;
        }
        out
    }

    /// Edges of the subtree below `x`.
    pub fn subtree_edges(&self, x: Vertex) -> Vec<EdgeId> {
        self.subtree(x).into_iter().filter(|&y| y != x).map(|y| self.parent_edge[y].expect("non-root")).collect()
    }
}

/// Leaf-split form of a tree for the bound: every sink edge gets its own sink leaf, edges
/// between sinks are dropped, and only the component of `s` is kept.
#[derive(Clone, Debug)]
pub struct SplitTree {
    pub graph: Graph,
    pub source: Vertex,
    pub sinks: Vec<Vertex>,
    /// Split-tree vertex to original vertex.
    pub origin: Vec<Vertex>,
}

pub fn leaf_split(g: &Graph, s: Vertex, sink: &SinkSet) -> Result<SplitTree> {
    let mut id = vec![None; g.n()];
    let mut origin = Vec::new();
    // Non-sink vertices in the component of s once sinks are removed.
    let mut queue = VecDeque::from([s]);
    id[s] = Some(0);
    origin.push(s);
    let mut edges = Vec::new();
    let mut sinks = Vec::new();
    while let Some(x) = queue.pop_front() {
        for &(y, eid) in g.neighbors(x) {
            let w = g.edge(eid).weight;
            if sink.contains(y) {
                let leaf = origin.len();
                origin.push(y);
                sinks.push(leaf);
                edges.push((id[x].unwrap(), leaf, w));
            } else if id[y].is_none() {
                id[y] = Some(origin.len());
                origin.push(y);
                edges.push((id[x].unwrap(), id[y].unwrap(), w));
                queue.push_back(y);
            }
        }
    }
    let graph = Graph::new(origin.len(), edges)?;
    Ok(SplitTree { graph, source: 0, sinks, origin })
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeBound {
    pub bound: f64,
    pub exact_eht: f64,
    pub margin: f64,
    pub resistance: f64,
    /// `(f_m, w_m)` per sink leaf of the split tree.
    pub sink_terms: Vec<(f64, f64)>,
    /// `2 + log(R_s d_M) + H(mu) - D(mu || sigma_M)`.
    pub weighted_form: f64,
    /// `2 + log R_s + 2 H(mu)`, present when every sink edge has unit weight.
    pub unweighted_form: Option<f64>,
    /// True when the component of `s` is a single edge, where the bound is tight.
    pub single_edge: bool,
    pub split_vertices: usize,
}

/// Evaluates `2 + sum_m f_m log2(R_s w_m / f_m^2)` on the leaf-split tree and the exact
/// EHT. Fails with `IdentityViolation` if the bound is violated.
pub fn tree_eht_bound(g: &Graph, s: Vertex, sink: &[Vertex]) -> Result<TreeBound> {
    if !g.is_tree() {
        return Err(ElfsError::NotATree);
    }
    let problem = FlowProblem::new(g, s, sink)?;
    let split = leaf_split(g, s, &problem.sink)?;
    let t = &split.graph;
    let tp = FlowProblem::new(t, split.source, &split.sinks)?;
    let flow = solve_flow(&tp)?;
    let r = flow.resistance();
    let chain = ElfsChain::new(t, &tp.sink)?;
    let exact_eht = chain.eht(split.source)?;
    let mut sink_terms = Vec::new();
    for &m in &split.sinks {
        let (_, eid) = t.neighbors(m)[0];
        sink_terms.push((-flow.net_outflow(m), t.edge(eid).weight));
    }
    let active = sink_terms.iter().filter(|(f, _)| *f > 0.0);
    let bound = 2.0 + active.clone().map(|&(f, w)| f * (r * w / (f * f)).log2()).sum::<f64>();
    let entropy: f64 = -active.clone().map(|&(f, _)| f * f.log2()).sum::<f64>();
    let d_m: f64 = sink_terms.iter().map(|&(_, w)| w).sum();
    let kl: f64 = active.clone().map(|&(f, w)| f * (f / (w / d_m)).log2()).sum();
    let weighted_form = 2.0 + (r * d_m).log2() + entropy - kl;
    let unweighted_form =
        sink_terms.iter().all(|&(_, w)| w == 1.0).then(|| 2.0 + r.log2() + 2.0 * entropy);
    let single_edge = t.num_edges() == 1;
    let report = TreeBound {
        bound,
        exact_eht,
        margin: bound - exact_eht,
        resistance: r,
        sink_terms,
        weighted_form,
        unweighted_form,
        single_edge,
        split_vertices: t.n(),
    };
    if exact_eht > bound + 1e-9 * bound.abs().max(1.0) {
        return Err(ElfsError::IdentityViolation { what: "EHT <= tree bound".into(), lhs: exact_eht, rhs: bound });
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct SubtreeCheck {
    pub vertex: Vertex,
    /// `E_x(T_x)`.
    pub lhs: f64,
    /// `sum_{m in M_x} f_{x->m} (2 + log2(R_x w_m / f_{x->m}^2))`.
    pub rhs: f64,
}

/// The subtree inequality at every non-sink vertex of the leaf-split tree rooted at `s`.
/// Vertex ids in the result refer to the split tree.
pub fn subtree_checks(g: &Graph, s: Vertex, sink: &[Vertex]) -> Result<Vec<SubtreeCheck>> {
    if !g.is_tree() {
        return Err(ElfsError::NotATree);
    }
    let problem = FlowProblem::new(g, s, sink)?;
    let split = leaf_split(g, s, &problem.sink)?;
    let t = &split.graph;
    let tsink = SinkSet::new(t, &split.sinks)?;
    let dec = TreeDecomposition::new(t, split.source)?;
    let chain = EdgeChain::new(t, &tsink)?;
    let inv = GroundedInverse::new(t, &tsink)?;
    let mut out = Vec::new();
    for x in 0..t.n() {
        if tsink.contains(x) {
            continue;
        }
        let counts = chain.expected_counts(x)?;
        let lhs: f64 = dec.subtree_edges(x).iter().map(|&e| counts[e]).sum();
        let rx = inv.voltage(x, x);
        let mut rhs = 0.0;
        for m in dec.subtree(x) {
            if !tsink.contains(m) {
                continue;
            }
            let pe = dec.parent_edge[m].expect("sink below x");
            let pm = dec.parent[m].expect("sink below x");
            let w = t.edge(pe).weight;
            let f = w * inv.voltage(x, pm);
            if f > 0.0 {
                rhs += f * (2.0 + (rx * w / (f * f)).log2());
            }
        }
        out.push(SubtreeCheck { vertex: x, lhs, rhs });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceReport {
    pub p: f64,
    pub q: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    /// `2q (1-p-q) / (1-p-q+2pq)`, the solution of the two-state linear system for the
    /// expected `e_2` count from `b`.
    pub e_b_e2_formula: f64,
    /// `q (1-p-q) / (1-p-q+2pq)`, the frequently quoted form, which is half the true value.
    pub e_b_e2_half_form: f64,
    pub e_b_e2_exact: f64,
    pub e_a_e2_formula: f64,
    pub e_a_e2_exact: f64,
    /// `q log2((1-p)(1-q)/(pq))`.
    pub e_b_e2_log_bound: f64,
    pub e_a_t1: f64,
    pub e_b_t1: f64,
    /// `(q / (1-p)) E_a(T_1)`.
    pub e_b_t1_formula: f64,
    /// First-sample probabilities `[P_a(T1), P_a(e2), P_a(T3), P_b(T1), P_b(e2), P_b(T3)]`,
    /// computed directly and by the closed forms.
    pub table_direct: [f64; 6],
    pub table_formula: [f64; 6],
}

/// Recurrence quantities for the tree edge `(a, b)`.
pub fn recurrence_quantities(g: &Graph, a: Vertex, b: Vertex, sink: &[Vertex]) -> Result<RecurrenceReport> {
    if !g.is_tree() {
        return Err(ElfsError::NotATree);
    }
    let sink_set = SinkSet::new(g, sink)?;
    for x in [a, b] {
        g.check_vertex(x)?;
        if sink_set.contains(x) {
            return Err(ElfsError::EndpointInSink(x));
        }
    }
    let e2 = g.edge_between(a, b).ok_or_else(|| ElfsError::InvalidConfig(format!("({a}, {b}) is not an edge")))?;
    // Sides: T_1 hangs off a, T_3 off b.
    let dec = TreeDecomposition::new(g, a)?;
    let b_side = dec.subtree(b);
    let mut on_b = vec![false; g.n()];
    for &x in &b_side {
        on_b[x] = true;
    }
    let side_of_edge = |id: EdgeId| {
        let e = g.edge(id);
        on_b[e.u] && on_b[e.v]
    };
    let t1: Vec<EdgeId> = (0..g.num_edges()).filter(|&id| id != e2 && !side_of_edge(id)).collect();
    let t3: Vec<EdgeId> = (0..g.num_edges()).filter(|&id| side_of_edge(id)).collect();
    let sinks_a: Vec<Vertex> = sink_set.members().iter().copied().filter(|&m| !on_b[m]).collect();
    let sinks_b: Vec<Vertex> = sink_set.members().iter().copied().filter(|&m| on_b[m]).collect();
    if sinks_a.is_empty() || sinks_b.is_empty() {
        return Err(ElfsError::NotApplicable("both sides of the edge need sinks".into()));
    }
    let fa = solve_flow(&FlowProblem::with_sink(g, a, sink_set.clone())?)?;
    let fb = solve_flow(&FlowProblem::with_sink(g, b, sink_set.clone())?)?;
    let p = fa.flow(a, b);
    let q = fb.flow(b, a);
    let side_resistance = |root: Vertex, on_root_side: bool, sinks: &[Vertex]| -> Result<f64> {
        let verts: Vec<Vertex> = (0..g.n()).filter(|&x| on_b[x] != on_root_side).collect();
        let (sub, map) = g.induced(&verts)?;
        let mapped: Vec<Vertex> = sinks.iter().map(|&m| map[m].unwrap()).collect();
        let pr = FlowProblem::new(&sub, map[root].unwrap(), &mapped)?;
        Ok(solve_flow(&pr)?.resistance())
    };
    // Restricting to a component can leave vertices unreachable from the sinks only if
    // they hang beyond other sinks; those cannot occur inside one side of a tree.
    let r1 = side_resistance(a, true, &sinks_a)?;
    let r3 = side_resistance(b, false, &sinks_b)?;
    let r2 = 1.0 / g.edge(e2).weight;
    let total = r1 + r2 + r3;
    let chain = EdgeChain::new(g, &sink_set)?;
    let ca = chain.expected_counts(a)?;
    let cb = chain.expected_counts(b)?;
    let sum = |c: &[f64], set: &[EdgeId]| set.iter().map(|&e| c[e]).sum::<f64>();
    let pa = chain.first_sample(a);
    let pb = chain.first_sample(b);
    let mass = |pd: &[f64], set: &[EdgeId]| set.iter().map(|&e| pd[e]).sum::<f64>();
    let den = 1.0 - p - q + 2.0 * p * q;
    let report = RecurrenceReport {
        p,
        q,
        r1,
        r2,
        r3,
        e_b_e2_formula: 2.0 * q * (1.0 - p - q) / den,
        e_b_e2_half_form: q * (1.0 - p - q) / den,
        e_b_e2_exact: cb[e2],
        e_a_e2_formula: 2.0 * p * (1.0 - p - q) / den,
        e_a_e2_exact: ca[e2],
        e_b_e2_log_bound: q * ((1.0 - p) * (1.0 - q) / (p * q)).log2(),
        e_a_t1: sum(&ca, &t1),
        e_b_t1: sum(&cb, &t1),
        e_b_t1_formula: q / (1.0 - p) * sum(&ca, &t1),
        table_direct: [mass(pa, &t1), pa[e2], mass(pa, &t3), mass(pb, &t1), pb[e2], mass(pb, &t3)],
        table_formula: [
            1.0 - p,
            p * (1.0 - p - q) / (1.0 - p),
            p * q / (1.0 - p),
            q * p / (1.0 - q),
            q * (1.0 - p - q) / (1.0 - q),
            1.0 - q,
        ],
    };
    let tol = 1e-8;
    let mut checks = vec![
        ("p = r1 / (r1 + r2 + r3)", p, r1 / total),
        ("q = r3 / (r1 + r2 + r3)", q, r3 / total),
        ("E_b(e2) closed form", report.e_b_e2_exact, report.e_b_e2_formula),
        ("E_a(e2) closed form", report.e_a_e2_exact, report.e_a_e2_formula),
        ("E_b(T1) = q/(1-p) E_a(T1)", report.e_b_t1, report.e_b_t1_formula),
    ];
    for i in 0..6 {
        checks.push(("first-sample table", report.table_direct[i], report.table_formula[i]));
    }
    for (what, lhs, rhs) in checks {
        if (lhs - rhs).abs() > tol * lhs.abs().max(rhs.abs()).max(1.0) {
            return Err(ElfsError::IdentityViolation { what: what.into(), lhs, rhs });
        }
    }
    if !(p > 0.0 && q > 0.0 && p + q <= 1.0 + tol) {
        return Err(ElfsError::IdentityViolation { what: "0 < p, q and p + q <= 1".into(), lhs: p + q, rhs: 1.0 });
    }
    if report.e_b_e2_exact > report.e_b_e2_log_bound + tol {
        return Err(ElfsError::IdentityViolation {
            what: "E_b(e2) <= q log((1-p)(1-q)/(pq))".into(),
            lhs: report.e_b_e2_exact,
            rhs: report.e_b_e2_log_bound,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    #[test]
    fn p3_schur_onto_endpoints() {
        let g = generators::path(3).unwrap();
        let r = schur_complement(&g, &[0, 2]).unwrap();
        assert_eq!(r.graph.num_edges(), 1);
        assert!((r.graph.weight(0, 1) - 0.5).abs() < 1e-14);
        assert!((r.self_loops[0] - 0.5).abs() < 1e-14);
        let rep = check_schur_invariance(&g, &[0, 2], &[(0, 2)]).unwrap();
        assert!(rep.max_voltage_diff < 1e-12);
    }

    #[test]
    fn keep_all_is_identity() {
        let g = generators::cycle(5).unwrap();
        let r = schur_complement(&g, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(r.graph.num_edges(), 5);
        assert!(r.self_loops.iter().all(|&l| l.abs() < 1e-14));
        assert_eq!(schur_complement(&g, &[]).unwrap_err(), ElfsError::EmptyKeepSet);
    }

    #[test]
    fn edge_counts_sum_to_eht() {
        let g = generators::path(3).unwrap();
        let c = EdgeChain::new(&g, &SinkSet::new(&g, &[2]).unwrap()).unwrap().expected_counts(0).unwrap();
        assert!((c[0] + c[1] - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn three_edge_path_recurrence() {
        let g = generators::path(4).unwrap();
        let r = recurrence_quantities(&g, 1, 2, &[0, 3]).unwrap();
        assert!((r.p - 1.0 / 3.0).abs() < 1e-12 && (r.q - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.e_b_e2_exact - 0.4).abs() < 1e-12);
        assert!((r.e_b_e2_half_form - 0.2).abs() < 1e-12);
        assert!(matches!(recurrence_quantities(&g, 0, 1, &[0, 3]), Err(ElfsError::EndpointInSink(0))));
    }

    #[test]
    fn star_pba() {
        let g = generators::star(2).unwrap();
        let r = pba_quantities(&g, 0, &[1, 2], &[0]).unwrap();
        assert!((r.f_a - 0.5).abs() < 1e-12);
        assert!((r.p_ba_exact - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tree_bound_examples() {
        let p3 = generators::path(3).unwrap();
        let b = tree_eht_bound(&p3, 0, &[2]).unwrap();
        assert!((b.bound - 3.0).abs() < 1e-12);
        assert!((b.exact_eht - 8.0 / 3.0).abs() < 1e-12);
        let e = generators::path(2).unwrap();
        let b = tree_eht_bound(&e, 0, &[1]).unwrap();
        assert!((b.bound - 2.0).abs() < 1e-12 && (b.exact_eht - 2.0).abs() < 1e-12);
        assert!(b.single_edge);
        assert_eq!(tree_eht_bound(&generators::cycle(4).unwrap(), 0, &[2]).unwrap_err(), ElfsError::NotATree);
    }
}
