use elfs_core::qwsim::eta::{eta_modified_prepare, eta_output_analysis};
use elfs_core::qwsim::phase::{analyze_flow_preparation, prepare_flow_state};
use elfs_core::qwsim::process::COST_CONSTANT;
use elfs_core::qwsim::*;
use elfs_core::rng::{replicas, stream};
use elfs_core::stats::{normalize, total_variation};
use elfs_core::*;
use serde_json::json;

use super::Ctx;
use crate::error::Result;
use crate::report::{Checks, Outcome, Table};

const MAX_ATTEMPTS: usize = 100_000;

fn escape_time(ctx: &Ctx) -> Result<f64> {
    Ok(exact_functionals(&ctx.graph, ctx.source, &ctx.sink)?.et)
}

pub fn invariants(ctx: &Ctx) -> Result<Outcome> {
    let op = build_operator(&ctx.graph, ctx.source, &ctx.sink)?;
    let flow = solve_flow(&FlowProblem::new(&ctx.graph, ctx.source, &ctx.sink)?)?;
    let rep = invariant_subspace_check(&op, &flow)?;
    let mut checks = Checks::default();
    checks.at_most("unitarity error", rep.unitarity_error, 0.0, 1e-10);
    checks.close("fixed-space dimension", rep.fixed_dimension as f64, rep.expected_fixed_dimension as f64, 0.0);
    checks.close("fixed-space dimension by SVD", rep.fixed_dimension_svd as f64, rep.expected_fixed_dimension as f64, 0.0);
    checks.close("<f|phi_s^->^2 = 1/(R_s d_s)", rep.overlap, rep.overlap_target, 1e-9);
    checks.at_most("|phi|^2 <= 2 ET/(R d)", rep.phi_norm_sq, rep.phi_norm_bound, 1e-9);
    Ok(Outcome { metrics: json!({ "report": rep }), checks, table: None })
}

/// One preparation at `delta = eps / sqrt(2 ET)`, repeated until the zero outcome.
pub fn flowstate(ctx: &Ctx) -> Result<Outcome> {
    let op = build_operator(&ctx.graph, ctx.source, &ctx.sink)?;
    let flow = solve_flow(&FlowProblem::new(&ctx.graph, ctx.source, &ctx.sink)?)?;
    let et = escape_time(ctx)?;
    let model = PhaseEstModel::for_precision(ctx.eps / (2.0 * et).sqrt())?;
    let (prep, _) = analyze_flow_preparation(&op, &flow, &model)?;
    let mut rng = stream(ctx.seed, 0);
    let mut attempts = 0;
    let mut cost = 0u64;
    let mut success = false;
    while attempts < MAX_ATTEMPTS && !success {
        let round = prepare_flow_state(&op, &flow, model.bits(), &mut rng)?;
        attempts += 1;
        cost += round.cost;
        success = round.success;
    }
    let mut checks = Checks::default();
    checks.at_least("p' >= 1/(R_s d_s)", prep.probability + 1e-9, prep.lower);
    checks.at_most("p' <= (1 + 2 delta^2 ET)/(R_s d_s)", prep.probability, prep.upper, 1e-9);
    checks.at_most("trace distance <= delta sqrt(2 ET)", prep.trace_distance, prep.trace_bound, 1e-9);
    checks.at_most("trace distance <= eps", prep.trace_distance, ctx.eps, 1e-9);
    checks.holds("zero outcome observed", success);
    let metrics = json!({
        "p_prime": prep.probability,
        "lower": prep.lower,
        "upper": prep.upper,
        "fidelity": prep.fidelity,
        "trace_distance": prep.trace_distance,
        "bits": prep.bits,
        "delta": prep.delta,
        "round_cost": prep.cost,
        "attempts": attempts,
        "total_cost": cost,
    });
    Ok(Outcome { metrics, checks, table: None })
}

pub fn eta(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let et = escape_time(ctx)?;
    let an = eta_output_analysis(g, ctx.source, &ctx.sink, et, ctx.eps)?;
    let k = ctx.replicas(1_000);
    let draws: std::result::Result<Vec<_>, ElfsError> =
        replicas(ctx.seed, k, |_, rng| eta_modified_prepare(g, ctx.source, &ctx.sink, et, ctx.eps, rng)).into_iter().collect();
    let draws = draws?;
    let mut counts = vec![0usize; g.num_edges()];
    for d in &draws {
        counts[d.edge] += 1;
    }
    let max_halvings = draws.iter().map(|d| d.draw.halvings).max().unwrap_or(0);
    let mean_cost = draws.iter().map(|d| d.draw.cost as f64).sum::<f64>() / k as f64;
    let empirical = normalize(&counts);
    let mut checks = Checks::default();
    checks.at_most("halvings <= log2(R_s d_s) + 2", max_halvings as f64, an.halving_limit, 0.0);
    checks.at_most("TV of the output law to the flow law", an.total_variation, an.tv_bound, 1e-12);
    checks.at_most("ET_s' <= 1 + 2 eta R_s d_s + ET_s", an.stage.modified.et_prime, an.stage.modified.et_prime_bound, 1e-9);
    let mut table = Table::new(&["replica", "edge", "halvings", "cost"]);
    for (i, d) in draws.iter().enumerate() {
        table.push(vec![json!(i), json!(d.edge), json!(d.draw.halvings), json!(d.draw.cost)]);
    }
    let metrics = json!({
        "halvings": an.halvings,
        "halving_limit": an.halving_limit,
        "final_eta": an.final_eta,
        "output_law": an.distribution,
        "flow_law": an.exact,
        "total_variation": an.total_variation,
        "tv_bound": an.tv_bound,
        "modified_graph": an.stage.modified,
        "empirical_tv": total_variation(&empirical, &an.exact),
        "mean_cost": mean_cost,
    });
    Ok(Outcome { metrics, checks, table: Some(table) })
}

pub fn elfs(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let problem = FlowProblem::new(g, ctx.source, &ctx.sink)?;
    let f = exact_functionals(g, ctx.source, &ctx.sink)?;
    let process = QuantumElfs::new(g, ctx.source, &ctx.sink, f.ht, f.eht, ctx.eps)?;
    let exact = ElfsChain::new(g, &problem.sink)?.absorption(ctx.source)?;
    let k = ctx.replicas(1_000);
    let runs: std::result::Result<Vec<_>, ElfsError> = replicas(ctx.seed, k, |_, rng| process.run(ctx.source, rng)).into_iter().collect();
    let runs = runs?;
    let mut counts = vec![0usize; g.n()];
    for r in &runs {
        counts[r.arrival] += 1;
    }
    let empirical = normalize(&counts);
    let tv = total_variation(&empirical, &exact);
    let sigma = 0.5 * exact.iter().map(|p| (p * (1.0 - p) / k as f64).sqrt()).sum::<f64>();
    let over_cap = runs.iter().filter(|r| r.total_cost > process.cap).count();
    let absorbed = runs.iter().filter(|r| r.termination == Termination::Absorbed).count();
    let mut checks = Checks::default();
    checks.at_most("TV to the walk arrival law", tv, 4.0 * ctx.eps + 3.0 * sigma, 0.0);
    checks.at_most("runs over the cost cap", over_cap as f64, 0.0, 0.0);
    let mut table = Table::new(&["replica", "arrival", "termination", "steps", "cost"]);
    for (i, r) in runs.iter().enumerate() {
        table.push(vec![json!(i), json!(r.arrival), json!(r.termination), json!(r.steps), json!(r.total_cost)]);
    }
    let metrics = json!({
        "arrival_exact": exact,
        "arrival_counts": counts,
        "total_variation": tv,
        "absorbed_runs": absorbed,
        "budget": process.budget,
        "gamma": process.gamma,
        "cap": process.cap,
        "cost_constant": COST_CONSTANT,
        "max_cost": runs.iter().map(|r| r.total_cost).max(),
        "mean_cost": runs.iter().map(|r| r.total_cost as f64).sum::<f64>() / k as f64,
        "coarse_bits": process.coarse_bits(),
        "fine_bits": process.fine_bits(),
    });
    Ok(Outcome { metrics, checks, table: Some(table) })
}

pub fn search(ctx: &Ctx) -> Result<Outcome> {
    let g = &ctx.graph;
    let problem = FlowProblem::new(g, ctx.source, &ctx.sink)?;
    let k = ctx.replicas(20);
    let reports = replicas(ctx.seed, k, |_, rng| budget_doubling_search(g, ctx.source, &ctx.sink, rng));
    let mut table = Table::new(&["replica", "found", "marked", "attempts", "final_exponent", "total_cost"]);
    let mut found = 0;
    let mut exact_cost = None;
    for (i, r) in reports.iter().enumerate() {
        match r {
            Ok(rep) => {
                let hit = problem.sink.contains(rep.marked);
                found += usize::from(hit);
                exact_cost = Some((rep.exact_cost, rep.i_star));
                table.push(vec![json!(i), json!(hit), json!(rep.marked), json!(rep.attempts.len()), json!(rep.final_exponent), json!(rep.total_cost)]);
            }
            Err(ElfsError::StepLimitExceeded { .. }) => {
                table.push(vec![json!(i), json!(false), json!(null), json!(null), json!(null), json!(null)]);
            }
            Err(e) => return Err(e.clone().into()),
        }
    }
    let rate = found as f64 / k as f64;
    let mut checks = Checks::default();
    checks.at_least("success rate >= 0.9", rate, 0.9);
    let metrics = json!({
        "runs": k,
        "found": found,
        "success_rate": rate,
        "exact_cost": exact_cost.map(|c| c.0),
        "i_star": exact_cost.map(|c| c.1),
    });
    Ok(Outcome { metrics, checks, table: Some(table) })
}

pub fn resistance(ctx: &Ctx) -> Result<Outcome> {
    let et = escape_time(ctx)?;
    let rep = qw_resistance_probability(&ctx.graph, ctx.source, &ctx.sink, et, ctx.eps)?;
    let mut checks = Checks::default();
    checks.at_least("p' >= 1/(R_s d_s)", rep.probability + 1e-12, rep.lower);
    checks.at_most("p' <= (1 + eps)/(R_s d_s)", rep.probability, rep.upper, 1e-12);
    checks.at_most("1/p' within a (1 + eps) factor of R_s d_s", rep.rd / rep.estimate, 1.0 + ctx.eps, 1e-12);
    Ok(Outcome { metrics: json!({ "report": rep }), checks, table: None })
}
