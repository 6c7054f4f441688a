use elfs_core::rng::replicas;
use elfs_core::stats::frequency_z;
use elfs_core::tree::{check_schur_invariance, pba_quantities, recurrence_quantities, schur_complement, subtree_checks, tree_eht_bound};
use elfs_core::*;
use serde_json::json;

use super::{Ctx, SIGMA};
use crate::error::{CliError, Result};
use crate::report::{Checks, Outcome};

/// Keeps the source and the sinks and probes every source-sink pair.
pub fn schur_check(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    FlowProblem::new(g, ctx.source, &ctx.sink)?;
    let mut keep = vec![ctx.source];
    keep.extend(&ctx.sink);
    let probes: Vec<(Vertex, Vertex)> = ctx.sink.iter().map(|&m| (ctx.source, m)).collect();
    let schur = schur_complement(g, &keep)?;
    let rep = check_schur_invariance(g, &keep, &probes)?;
    let mut checks = Checks::default();
    checks.at_most("voltage difference on kept vertices", rep.max_voltage_diff, 0.0, 1e-8);
    checks.at_most("watched walk vs reduced walk", rep.max_walk_diff, 0.0, 1e-8);
    let edges: Vec<_> = schur.graph.edges().iter().map(|e| json!([schur.kept[e.u], schur.kept[e.v], e.weight])).collect();
    let metrics = json!({
        "kept": schur.kept,
        "reduced_edges": edges,
        "self_loops": schur.self_loops,
        "report": rep,
    });
    Ok(Outcome { metrics, checks, table: None })
}

/// Edges of the component of `g - s` that contains `start`, with the edges joining it to `s`.
fn component_edges(g: &Graph, s: Vertex, start: Vertex) -> Vec<EdgeId> {
    let mut seen = vec![false; g.n()];
    seen[s] = true;
    seen[start] = true;
    let mut stack = vec![start];
    let mut edges = Vec::new();
    while let Some(x) = stack.pop() {
        for &(y, id) in g.neighbors(x) {
            edges.push(id);
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Cut vertex `s`; `A` is the side through the first neighbour of `s`.
pub fn pba(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let problem = FlowProblem::new(g, ctx.source, &ctx.sink)?;
    let first = g.neighbors(ctx.source).first().map(|&(y, _)| y).ok_or(ElfsError::NotACutVertex(ctx.source))?;
    let a_edges = component_edges(g, ctx.source, first);
    let rep = pba_quantities(g, ctx.source, &ctx.sink, &a_edges)?;
    let mut in_a = vec![false; g.num_edges()];
    for &e in &a_edges {
        in_a[e] = true;
    }
    let sampler = ElfsSampler::new(g, &problem.sink)?;
    let k = ctx.replicas(20_000);
    let runs: std::result::Result<Vec<Option<bool>>, ElfsError> = replicas(ctx.seed, k, |_, rng| {
        let trace = sampler.run(ctx.source, rng)?;
        Ok(trace.edges.iter().position(|&e| !in_a[e]).map(|j| trace.edges[j + 1..].iter().any(|&e| in_a[e])))
    })
    .into_iter()
    .collect();
    let runs = runs?;
    let with_b = runs.iter().filter(|r| r.is_some()).count();
    let later_a = runs.iter().filter(|r| **r == Some(true)).count();
    let mut checks = Checks::default();
    checks.close("Pr(first sample in A) = f_A", rep.first_sample_in_a, rep.f_a, 1e-8);
    checks.close("p_BA = f_A/(1 + f_A)", rep.p_ba_exact, rep.p_ba_formula, 1e-8);
    checks.close("Pr(last sample in A) = f_A", rep.last_sample_in_a, rep.f_a, 1e-8);
    if with_b > 0 {
        checks.at_most("simulated p_BA (z-score)", frequency_z(later_a, with_b, rep.p_ba_exact), SIGMA, 0.0);
    }
    let metrics = json!({
        "a_edges": a_edges,
        "report": rep,
        "runs": k,
        "runs_with_b_sample": with_b,
        "later_a_after_b": later_a,
    });
    Ok(Outcome { metrics, checks, table: None })
}

/// Edge `(a, b)` with `a` the source and `b` its first non-sink neighbour.
pub fn tree_recurrence(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let a = ctx.source;
    g.check_vertex(a)?;
    let b = g
        .neighbors(a)
        .iter()
        .map(|&(y, _)| y)
        .find(|y| !ctx.sink.contains(y))
        .ok_or_else(|| CliError::BadSpec(format!("vertex {a} has no non-sink neighbour")))?;
    let rep = recurrence_quantities(g, a, b, &ctx.sink)?;
    let mut checks = Checks::default();
    checks.close("E_b(e2) closed form", rep.e_b_e2_exact, rep.e_b_e2_formula, 1e-8);
    checks.close("E_a(e2) closed form", rep.e_a_e2_exact, rep.e_a_e2_formula, 1e-8);
    checks.close("E_b(T1) = q/(1-p) E_a(T1)", rep.e_b_t1, rep.e_b_t1_formula, 1e-8);
    for (i, (d, f)) in rep.table_direct.iter().zip(&rep.table_formula).enumerate() {
        checks.close(&format!("first-sample table entry {i}"), *d, *f, 1e-8);
    }
    checks.at_most("E_b(e2) <= q log2((1-p)(1-q)/(pq))", rep.e_b_e2_exact, rep.e_b_e2_log_bound, 1e-9);
    let metrics = json!({ "a": a, "b": b, "report": rep });
    Ok(Outcome { metrics, checks, table: None })
}

pub fn tree_bound(ctx: &Ctx) -> Result<Outcome> {
    let bound = tree_eht_bound(&ctx.graph, ctx.source, &ctx.sink)?;
    let subtrees = subtree_checks(&ctx.graph, ctx.source, &ctx.sink)?;
    let violated = subtrees.iter().filter(|c| c.lhs > c.rhs * (1.0 + 1e-9) + 1e-9).count();
    let mut checks = Checks::default();
    checks.at_most("EHT <= 2 + sum f_m log2(R w_m / f_m^2)", bound.exact_eht, bound.bound, 1e-9);
    checks.close("weighted entropy form", bound.weighted_form, bound.bound, 1e-9);
    checks.at_most("subtree inequality violations", violated as f64, 0.0, 0.0);
    let metrics = json!({ "bound": bound, "subtree_checks": subtrees.len() });
    Ok(Outcome { metrics, checks, table: None })
}
