//! Classical random-walk estimators of `R_s d_s`.
//!
//! Both estimators average visit counts to `s` (the start counts as a visit). The hitting
//! variant runs each walk to absorption; the escape variant truncates each walk after
//! `ceil(et_upper / eps)` steps. Replica `i` uses `stream(seed, i)` in both variants, so the
//! truncated walk is a prefix of the untruncated one.

use rand::Rng;
use serde::Serialize;

use crate::coupling::RandomWalk;
use crate::elfs::STEP_LIMIT;
use crate::error::{ElfsError, Result};
use crate::graph::{FlowProblem, Graph, SinkSet, Vertex};
use crate::rng::replicas_batched;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EstimatorConfig {
    pub epsilon: f64,
    /// Replica count; `None` means `ceil(c / eps^2)`.
    pub replicas: Option<usize>,
    /// The constant `c` in `k = ceil(c / eps^2)`.
    pub c: f64,
    pub seed: u64,
    /// Median of three group means instead of the plain mean.
    pub median_of_means: bool,
}

impl EstimatorConfig {
    pub fn new(epsilon: f64, seed: u64) -> EstimatorConfig {
        EstimatorConfig { epsilon, replicas: None, c: 16.0, seed, median_of_means: false }
    }

    pub fn with_replicas(mut self, k: usize) -> EstimatorConfig {
        self.replicas = Some(k);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ElfsError::InvalidConfig(format!("epsilon {} not in (0, 1)", self.epsilon)));
        }
        if self.replicas == Some(0) || !(self.c > 0.0) {
            return Err(ElfsError::InvalidConfig("need at least one replica".into()));
        }
        Ok(())
    }

    pub fn replica_count(&self) -> usize {
        self.replicas.unwrap_or_else(|| (self.c / (self.epsilon * self.epsilon)).ceil() as usize)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub replicas: usize,
    /// Total walk steps over all replicas.
    pub total_steps: u64,
    /// Per-walk truncation, when the escape variant is used.
    pub steps_per_walk: Option<usize>,
    /// Visit counts of every replica, in replica order.
    pub visits: Vec<u32>,
}

struct WalkCount {
    visits: u32,
    steps: u64,
}

fn count_visits<R: Rng + ?Sized>(walk: &RandomWalk<'_>, sink: &SinkSet, s: Vertex, cap: usize, rng: &mut R) -> Result<WalkCount> {
    let mut x = s;
    let mut visits = 1u32;
    let mut steps = 0usize;
    while steps < cap && !sink.contains(x) {
        if steps >= STEP_LIMIT {
            return Err(ElfsError::StepLimitExceeded { limit: STEP_LIMIT });
        }
        x = walk.step(x, rng);
        steps += 1;
        if x == s {
            visits += 1;
        }
    }
    Ok(WalkCount { visits, steps: steps as u64 })
}

fn aggregate(visits: &[u32], median_of_means: bool) -> f64 {
    let mean = |xs: &[u32]| xs.iter().map(|&v| v as f64).sum::<f64>() / xs.len().max(1) as f64;
    if !median_of_means || visits.len() < 3 {
        return mean(visits);
    }
    let g = visits.len() / 3;
    let mut m = [mean(&visits[..g]), mean(&visits[g..2 * g]), mean(&visits[2 * g..])];
    m.sort_by(f64::total_cmp);
    m[1]
}

fn run(g: &Graph, s: Vertex, sink: &[Vertex], cfg: &EstimatorConfig, cap: Option<usize>) -> Result<EstimateReport> {
    cfg.validate()?;
    let problem = FlowProblem::new(g, s, sink)?;
    let walk = RandomWalk::new(g);
    let k = cfg.replica_count();
    let limit = cap.unwrap_or(usize::MAX);
    let counts: Result<Vec<WalkCount>> =
        replicas_batched(cfg.seed, k, 256, |_, rng| count_visits(&walk, &problem.sink, s, limit, rng)).into_iter().collect();
    let counts = counts?;
    let visits: Vec<u32> = counts.iter().map(|c| c.visits).collect();
    Ok(EstimateReport {
        estimate: aggregate(&visits, cfg.median_of_means),
        replicas: k,
        total_steps: counts.iter().map(|c| c.steps).sum(),
        steps_per_walk: cap,
        visits,
    })
}

/// Mean visit count over walks run to absorption; `E[S] = R_s d_s`.
pub fn estimate_rd_hitting(g: &Graph, s: Vertex, sink: &[Vertex], cfg: &EstimatorConfig) -> Result<EstimateReport> {
    run(g, s, sink, cfg, None)
}

/// Mean visit count over walks truncated at `ceil(et_upper / eps)` steps; biased low by
/// at most a factor `1 - eps` when `et_upper >= ET_s`.
pub fn estimate_rd_escape(g: &Graph, s: Vertex, sink: &[Vertex], cfg: &EstimatorConfig, et_upper: f64) -> Result<EstimateReport> {
    // ET >= 1 always; allow for rounding in computed values.
    if !(et_upper >= 1.0 - 1e-9) || !et_upper.is_finite() {
        return Err(ElfsError::InvalidBound { what: "et_upper".into(), supplied: et_upper, actual: 1.0 });
    }
    let et_upper = et_upper.max(1.0);
    cfg.validate()?;
    let cap = (et_upper / cfg.epsilon).ceil() as usize;
    run(g, s, sink, cfg, Some(cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    #[test]
    fn single_edge_is_exact() {
        let g = generators::path(2).unwrap();
        let cfg = EstimatorConfig::new(0.2, 1);
        assert_eq!(estimate_rd_hitting(&g, 0, &[1], &cfg).unwrap().estimate, 1.0);
        assert_eq!(estimate_rd_escape(&g, 0, &[1], &cfg, 1.0).unwrap().estimate, 1.0);
        assert_eq!(cfg.replica_count(), 400);
    }

    #[test]
    fn escape_is_prefix_of_hitting() {
        let g = generators::path(4).unwrap();
        let cfg = EstimatorConfig::new(0.3, 8);
        let hit = estimate_rd_hitting(&g, 0, &[3], &cfg).unwrap();
        let esc = estimate_rd_escape(&g, 0, &[3], &cfg, 2.0).unwrap();
        assert!(hit.visits.iter().zip(&esc.visits).all(|(h, e)| e <= h));
        assert!(esc.total_steps <= (esc.replicas * esc.steps_per_walk.unwrap()) as u64);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = generators::path(3).unwrap();
        let cfg = EstimatorConfig::new(0.1, 0);
        assert!(matches!(estimate_rd_escape(&g, 0, &[2], &cfg, 0.5), Err(ElfsError::InvalidBound { .. })));
        assert!(estimate_rd_hitting(&g, 0, &[2], &EstimatorConfig::new(1.5, 0)).is_err());
    }
}
