use elfs_core::coupling::{
    doob_check, edge_rule_stop_law, simulate_conditional_return, simulate_escape_time, vertex_rule_stop_law, EdgeCoupler,
    VertexCoupler,
};
use elfs_core::estimators::{estimate_rd_escape, estimate_rd_hitting, EstimatorConfig};
use elfs_core::rng::replicas;
use elfs_core::stats::{chi_square, frequency_z, MeanEstimate};
use elfs_core::tree::tree_eht_bound;
use elfs_core::*;
use serde_json::json;

use super::{Ctx, SIGMA};
use crate::args::Variant;
use crate::error::Result;
use crate::report::{Checks, Outcome, Table};

fn problem(ctx: &Ctx) -> Result<FlowProblem<'_>> {
    Ok(FlowProblem::new(&ctx.graph, ctx.source, &ctx.sink)?)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn graph_info(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let leaves: Vec<Vertex> = (0..g.n()).filter(|&x| g.valence(x) == 1).collect();
    let mut checks = Checks::default();
    checks.holds("connected", g.is_connected());
    checks.holds("valid source and sink", FlowProblem::new(g, ctx.source, &ctx.sink).is_ok());
    let metrics = json!({
        "n": g.n(),
        "edges": g.num_edges(),
        "total_weight": g.total_weight(),
        "degrees": g.degrees(),
        "leaves": leaves,
        "is_tree": g.is_tree(),
        "components": g.components().iter().max().map_or(0, |&c| c + 1),
    });
    Ok(Outcome { metrics, checks, table: None })
}

pub fn electric_solve(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let problem = problem(ctx)?;
    let flow = solve_flow(&problem)?;
    let dist = sample_dist(&flow)?;
    let merged = g.merge_sink(&problem.sink)?;
    let r_merged = effective_resistance(&merged.graph, merged.map[ctx.source], merged.merged)?;
    let r = flow.resistance();
    let mut checks = Checks::default();
    checks.close("energy = R_s", flow.energy(), r, 1e-9);
    checks.close("v_s = R_s", flow.voltage(ctx.source), r, 1e-9);
    checks.close("net outflow at s = 1", flow.net_outflow(ctx.source), 1.0, 1e-9);
    checks.close("R_s on the merged-sink graph", r_merged, r, 1e-9);
    checks.close("sampling law sums to 1", dist.probs().iter().sum(), 1.0, 1e-12);
    checks.at_least("R_s d_s >= 1", r * g.degree(ctx.source) * (1.0 + 1e-12), 1.0);
    let mut table = Table::new(&["edge", "u", "v", "weight", "flow", "prob"]);
    for (id, e) in g.edges().iter().enumerate() {
        table.push(vec![json!(id), json!(e.u), json!(e.v), json!(e.weight), json!(flow.edge_flow(id)), json!(dist.prob(id))]);
    }
    let metrics = json!({
        "resistance": r,
        "source_degree": g.degree(ctx.source),
        "rd": r * g.degree(ctx.source),
        "energy": flow.energy(),
        "voltages": flow.voltages(),
        "edge_flows": flow.edge_flows(),
        "sample_probs": dist.probs(),
    });
    Ok(Outcome { metrics, checks, table: Some(table) })
}

pub fn elfs_eht(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let problem = problem(ctx)?;
    let f = exact_functionals(g, ctx.source, &ctx.sink)?;
    let sampler = ElfsSampler::new(g, &problem.sink)?;
    let k = ctx.replicas(10_000);
    let lengths: std::result::Result<Vec<usize>, ElfsError> =
        replicas(ctx.seed, k, |_, rng| sampler.run(ctx.source, rng).map(|t| t.rho())).into_iter().collect();
    let lengths = lengths?;
    let mc = MeanEstimate::from_samples(lengths.iter().map(|&l| l as f64));
    let bound = if g.is_tree() { Some(tree_eht_bound(g, ctx.source, &ctx.sink)?.bound) } else { None };
    let mut checks = Checks::default();
    checks.within_sigma("Monte-Carlo EHT", &mc, f.eht, SIGMA);
    checks.at_most("EHT <= 2 HT", f.eht, 2.0 * f.ht, 1e-9);
    if let Some(b) = bound {
        checks.at_most("EHT <= tree bound", f.eht, b, 1e-9);
    }
    let mut table = Table::new(&["replica", "samples"]);
    for (i, l) in lengths.iter().enumerate() {
        table.push(vec![json!(i), json!(l)]);
    }
    let metrics = json!({
        "exact": f,
        "monte_carlo": mc,
        "tree_bound": bound,
    });
    Ok(Outcome { metrics, checks, table: Some(table) })
}

pub fn arrival_compare(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let problem = problem(ctx)?;
    let chain = ElfsChain::new(g, &problem.sink)?;
    let electric = elfs_arrival_distribution(g, ctx.source, &ctx.sink)?;
    let absorbed = chain.absorption(ctx.source)?;
    let sinks = problem.sink.members().to_vec();
    let via_chain: Vec<f64> = sinks.iter().map(|&m| absorbed[m]).collect();
    let via_flow: Vec<f64> = sinks.iter().map(|&m| electric.prob(m)).collect();
    let sampler = ElfsSampler::new(g, &problem.sink)?;
    let k = ctx.replicas(10_000);
    let arrivals: std::result::Result<Vec<Vertex>, ElfsError> =
        replicas(ctx.seed, k, |_, rng| sampler.run(ctx.source, rng).map(|t| t.arrival())).into_iter().collect();
    let arrivals = arrivals?;
    let counts: Vec<usize> = sinks.iter().map(|&m| arrivals.iter().filter(|&&a| a == m).count()).collect();
    let mut checks = Checks::default();
    checks.at_most("net flow into sinks = chain absorption", max_abs_diff(&via_flow, &via_chain), 0.0, 1e-8);
    for (i, &m) in sinks.iter().enumerate() {
        let z = frequency_z(counts[i], k, via_flow[i]);
        checks.at_most(&format!("arrival frequency at {m} (z-score)"), z, SIGMA, 0.0);
    }
    let metrics = json!({
        "sinks": sinks,
        "net_flow": via_flow,
        "chain_absorption": via_chain,
        "counts": counts,
        "runs": k,
    });
    Ok(Outcome { metrics, checks, table: None })
}

pub fn identities(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let problem = problem(ctx)?;
    let chain = ElfsChain::new(g, &problem.sink)?;
    let at_source = elfs::identities_from_chain(g, &chain, ctx.source)?;
    let mut violations = Vec::new();
    let free = problem.sink.complement();
    for &x in &free {
        if let Err(e) = elfs::identities_from_chain(g, &chain, x) {
            violations.push(json!({"vertex": x, "error": e.to_string()}));
        }
    }
    let mut checks = Checks::default();
    checks.close("E_s[HT_Y] = HT_s - ET_s/2", at_source.ht_after_step, at_source.ht_minus_half_et, 1e-8);
    checks.close("E_s[sum ET] = 2 HT_s", at_source.et_sum, 2.0 * at_source.functionals.ht, 1e-8);
    checks.at_most("EHT <= E[sum sqrt ET]", at_source.functionals.eht, at_source.sqrt_et_sum, 1e-8);
    checks.at_most("E[sum sqrt ET] <= sqrt(2 HT EHT)", at_source.sqrt_et_sum, at_source.jensen_upper, 1e-8);
    checks.at_most("violations over all non-sink sources", violations.len() as f64, 0.0, 0.0);
    let metrics = json!({
        "source": at_source,
        "sources_checked": free.len(),
        "violations": violations,
    });
    Ok(Outcome { metrics, checks, table: None })
}

pub fn coupling_vertex(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let problem = problem(ctx)?;
    let flow = solve_flow(&problem)?;
    let chain = ElfsChain::new(g, &problem.sink)?;
    let coupler = VertexCoupler::from_flow(&flow);
    let k = ctx.replicas(100_000);
    let steps: std::result::Result<Vec<_>, ElfsError> = replicas(ctx.seed, k, |_, rng| coupler.run(rng)).into_iter().collect();
    let steps = steps?;
    let mut counts = vec![0usize; g.n()];
    for s in &steps {
        counts[s.stop] += 1;
    }
    let row: Vec<f64> = (0..g.n()).map(|y| chain.prob(ctx.source, y)).collect();
    let law = vertex_rule_stop_law(&flow)?;
    let chi = chi_square(&counts, &row);
    let nu = MeanEstimate::from_samples(steps.iter().map(|s| s.steps as f64));
    let et = chain.et(ctx.source);
    let mut checks = Checks::default();
    checks.at_most("exact stop law = Q row", max_abs_diff(&law, &row), 0.0, 1e-8);
    checks.at_least("chi-square p-value", chi.p_value, 0.001);
    checks.at_most("samples on zero-probability vertices", chi.forbidden_hits as f64, 0.0, 0.0);
    checks.within_sigma("mean walk steps = ET_s/2", &nu, et / 2.0, SIGMA);
    let mut table = Table::new(&["replica", "stop", "steps"]);
    for (i, s) in steps.iter().enumerate() {
        table.push(vec![json!(i), json!(s.stop), json!(s.steps)]);
    }
    let metrics = json!({
        "q_row": row,
        "stop_law": law,
        "counts": counts,
        "chi_square": chi,
        "mean_steps": nu,
        "et": et,
    });
    Ok(Outcome { metrics, checks, table: Some(table) })
}

pub fn coupling_edge(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let problem = problem(ctx)?;
    let flow = solve_flow(&problem)?;
    let dist = sample_dist(&flow)?;
    let coupler = EdgeCoupler::new(&problem)?;
    let k = ctx.replicas(100_000);
    let steps: std::result::Result<Vec<_>, ElfsError> = replicas(ctx.seed, k, |_, rng| coupler.run(rng)).into_iter().collect();
    let steps = steps?;
    let mut counts = vec![0usize; g.num_edges()];
    for s in &steps {
        counts[s.edge] += 1;
    }
    let law = edge_rule_stop_law(&flow)?;
    let chi = chi_square(&counts, dist.probs());
    let mean = MeanEstimate::from_samples(steps.iter().map(|s| s.steps as f64));
    let mut checks = Checks::default();
    checks.at_most("exact stop law = flow sampling law", max_abs_diff(&law, dist.probs()), 0.0, 1e-8);
    checks.at_least("chi-square p-value", chi.p_value, 0.001);
    checks.at_most("samples on zero-flow edges", chi.forbidden_hits as f64, 0.0, 0.0);
    let mut table = Table::new(&["replica", "edge", "steps"]);
    for (i, s) in steps.iter().enumerate() {
        table.push(vec![json!(i), json!(s.edge), json!(s.steps)]);
    }
    let metrics = json!({
        "flow_law": dist.probs(),
        "stop_law": law,
        "counts": counts,
        "chi_square": chi,
        "mean_steps": mean,
    });
    Ok(Outcome { metrics, checks, table: Some(table) })
}

pub fn escape_time(ctx: &Ctx) -> Result<Outcome> {
    let f = exact_functionals(&ctx.graph, ctx.source, &ctx.sink)?;
    let k = ctx.replicas(100_000);
    let sim = simulate_escape_time(&ctx.graph, ctx.source, &ctx.sink, k, ctx.seed)?;
    let mut checks = Checks::default();
    checks.within_sigma("mean escape time = ET_s", &sim, f.et, SIGMA);
    checks.at_most("ET_s <= HT_s", f.et, f.ht, 1e-9);
    let metrics = json!({ "et": f.et, "ht": f.ht, "simulated": sim });
    Ok(Outcome { metrics, checks, table: None })
}

pub fn doob(ctx: &Ctx) -> Result<Outcome> {
    let mut checks = Checks::default();
    let rep = match doob_check(&ctx.graph, ctx.source, &ctx.sink) {
        Ok(rep) => rep,
        Err(ElfsError::NotApplicable(why)) => {
            checks.holds("walk never returns to s before the sink", true);
            return Ok(Outcome { metrics: json!({ "applicable": false, "reason": why }), checks, table: None });
        }
        Err(e) => return Err(e.into()),
    };
    let k = ctx.replicas(100_000);
    let sim = simulate_conditional_return(&ctx.graph, ctx.source, &ctx.sink, k, ctx.seed)?;
    checks.close("2 W from edges = (ET - 1)/R", rep.doubled_weight_edges, rep.doubled_weight_formula, 1e-8);
    checks.within_sigma("mean return excursion = (ET - 1)/(R d - 1)", &sim, rep.return_time, SIGMA);
    let metrics = json!({ "applicable": true, "report": rep, "simulated": sim });
    Ok(Outcome { metrics, checks, table: None })
}

pub fn estimate_rd(ctx: &Ctx) -> Result<Outcome> {
    let f = exact_functionals(&ctx.graph, ctx.source, &ctx.sink)?;
    let rd = f.resistance * f.degree;
    let mut cfg = EstimatorConfig::new(ctx.eps, ctx.seed);
    if let Some(k) = ctx.replicas {
        cfg = cfg.with_replicas(k);
    }
    let mut checks = Checks::default();
    let rep = match ctx.variant {
        Variant::Hitting => estimate_rd_hitting(&ctx.graph, ctx.source, &ctx.sink, &cfg)?,
        Variant::Escape => {
            let rep = estimate_rd_escape(&ctx.graph, ctx.source, &ctx.sink, &cfg, f.et)?;
            let budget = rep.replicas as f64 * (f.et / ctx.eps).ceil();
            checks.at_most("walk steps <= k ceil(ET/eps)", rep.total_steps as f64, budget, 0.0);
            rep
        }
    };
    checks.at_most("relative error <= eps", (rep.estimate - rd).abs() / rd, ctx.eps, 0.0);
    let mut table = Table::new(&["replica", "visits"]);
    for (i, v) in rep.visits.iter().enumerate() {
        table.push(vec![json!(i), json!(v)]);
    }
    let metrics = json!({
        "variant": ctx.variant,
        "estimate": rep.estimate,
        "exact_rd": rd,
        "et": f.et,
        "replicas": rep.replicas,
        "total_steps": rep.total_steps,
        "steps_per_walk": rep.steps_per_walk,
    });
    Ok(Outcome { metrics, checks, table: Some(table) })
}

/// Every `(n, |M|)` with `2 <= n <= N`, `N` the size of the input graph.
pub fn complete_graph_scan(ctx: &Ctx) -> Result<Outcome> {
    let top = ctx.graph.n();
    let mut table = Table::new(&["n", "sinks", "eht", "formula"]);
    let mut worst: f64 = 0.0;
    for n in 2..=top {
        let g = generators::complete(n)?;
        for k in 1..n {
            let sink: Vec<Vertex> = (n - k..n).collect();
            let eht = exact_functionals(&g, 0, &sink)?.eht;
            let p = 0.5 * (1.0 / (k as f64 + 1.0) + k as f64 / n as f64);
            worst = worst.max((eht - 1.0 / p).abs());
            table.push(vec![json!(n), json!(k), json!(eht), json!(1.0 / p)]);
        }
    }
    let mut checks = Checks::default();
    checks.at_most("max |EHT - 1/p|", worst, 0.0, 1e-8);
    let metrics = json!({ "max_n": top, "cases": table.rows.len(), "max_abs_diff": worst });
    Ok(Outcome { metrics, checks, table: Some(table) })
}
