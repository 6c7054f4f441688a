//! Small statistics helpers shared by the experiment runners and the test suites.

use serde::Serialize;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

/// Sample mean and standard error of the mean.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> MeanEstimate {
        let mut n = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for x in samples {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        MeanEstimate { mean, std_err: (var / n.max(1) as f64).sqrt(), count: n }
    }

    /// `|mean - target| / std_err`; infinite when the error is zero and the means differ.
    pub fn z_score(&self, target: f64) -> f64 {
        z(self.mean - target, self.std_err)
    }

    pub fn within_sigma(&self, target: f64, k: f64) -> bool {
        self.z_score(target) <= k
    }
}

fn z(diff: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        diff.abs() / sd
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// z-score of an empirical frequency `count / total` against probability `p`.
pub fn frequency_z(count: usize, total: usize, p: f64) -> f64 {
    let freq = count as f64 / total as f64;
    let p = p.clamp(0.0, 1.0);
    z(freq - p, (p * (1.0 - p) / total as f64).sqrt())
}

/// Pearson chi-square goodness of fit. Bins with expected probability below `1e-12` must
/// be empty; bins whose expected count is below 5 are pooled into one.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub forbidden_hits: usize,
}

pub fn chi_square(counts: &[usize], probs: &[f64]) -> ChiSquareResult {
    assert_eq!(counts.len(), probs.len());
    let total: usize = counts.iter().sum();
    let nf = total as f64;
    let mut forbidden_hits = 0;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        if p < 1e-12 {
            forbidden_hits += c;
            continue;
        }
        let e = p * nf;
        if e < 5.0 {
            pool_obs += c as f64;
            pool_exp += e;
        } else {
            bins.push((c as f64, e));
        }
    }
    if pool_exp > 0.0 {
        bins.push((pool_obs, pool_exp));
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if forbidden_hits > 0 {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic)
    };
    ChiSquareResult { statistic, dof, p_value, forbidden_hits }
}

/// Total-variation distance between two distributions on the same index set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Empirical distribution of `counts`.
pub fn normalize(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
}

/// Aggregates many independent `k`-sigma comparisons.
///
/// Requiring every one of thousands of comparisons to land inside `3 sigma` fails almost
/// surely even for a correct sampler, so the family passes when the number of exceedances is
/// at most the `0.999` quantile of `Binomial(m, alpha)` and no comparison exceeds
/// `hard_limit` sigma. A single comparison (m = 1) is then the plain k-sigma test.
#[derive(Clone, Debug, Serialize)]
pub struct SigmaFamily {
    pub k: f64,
    pub alpha: f64,
    pub hard_limit: f64,
    pub comparisons: usize,
    pub exceedances: usize,
    pub max_z: f64,
}

impl SigmaFamily {
    pub fn three_sigma() -> SigmaFamily {
        SigmaFamily::new(3.0, 0.0027, 5.0)
    }

    pub fn new(k: f64, alpha: f64, hard_limit: f64) -> SigmaFamily {
        SigmaFamily { k, alpha, hard_limit, comparisons: 0, exceedances: 0, max_z: 0.0 }
    }

    pub fn push(&mut self, z: f64) {
        self.comparisons += 1;
        if z > self.k {
            self.exceedances += 1;
        }
        if z > self.max_z || z.is_nan() {
            self.max_z = if z.is_nan() { f64::INFINITY } else { z };
        }
    }

    /// Records a pass/fail outcome of a test with false-alarm rate `alpha`.
    pub fn push_outcome(&mut self, pass: bool) {
        self.comparisons += 1;
        if !pass {
            self.exceedances += 1;
        }
    }

    pub fn allowed_exceedances(&self) -> usize {
        if self.comparisons <= 1 {
            return 0;
        }
        let b = Binomial::new(self.alpha, self.comparisons as u64).expect("valid binomial");
        b.inverse_cdf(0.999) as usize
    }

    pub fn pass(&self) -> bool {
        self.exceedances <= self.allowed_exceedances() && self.max_z <= self.hard_limit
    }
}
