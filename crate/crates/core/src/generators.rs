//! Standard graph families and seeded random generators.

use rand::Rng;

use crate::error::{ElfsError, Result};
use crate::graph::{Graph, Vertex};
use crate::rng::stream;

/// Path `0 - 1 - ... - (n-1)` with unit weights.
pub fn path(n: usize) -> Result<Graph> {
    Graph::new(n, (1..n).map(|i| (i - 1, i, 1.0)))
}

/// Cycle on `n >= 3` vertices with unit weights.
pub fn cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(ElfsError::InvalidConfig(format!("cycle needs n >= 3, got {n}")));
    }
    Graph::new(n, (0..n).map(|i| (i, (i + 1) % n, 1.0)))
}

/// Complete graph `K_n` with unit weights.
pub fn complete(n: usize) -> Result<Graph> {
    Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0))))
}

/// Star with centre `0` and leaves `1..=k`.
pub fn star(k: usize) -> Result<Graph> {
    Graph::new(k + 1, (1..=k).map(|i| (0, i, 1.0)))
}

fn draw_weight<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn check_range(lo: f64, hi: f64) -> Result<()> {
    if lo > 0.0 && hi >= lo && hi.is_finite() {
        Ok(())
    } else {
        Err(ElfsError::InvalidConfig(format!("bad weight range [{lo}, {hi}]")))
    }
}

/// Uniform labelled tree on `n` vertices (via a random Prüfer sequence) with weights
/// drawn uniformly from `[lo, hi]`.
pub fn random_tree<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Graph> {
    check_range(lo, hi)?;
    if n < 2 {
        return Graph::new(n, std::iter::empty());
    }
    if n == 2 {
        return Graph::new(2, [(0, 1, draw_weight(rng, lo, hi))]);
    }
    let code: Vec<Vertex> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut count = vec![0usize; n];
    for &c in &code {
        count[c] += 1;
    }
    let mut leaves: std::collections::BTreeSet<Vertex> =
        (0..n).filter(|&x| count[x] == 0).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in &code {
        let leaf = *leaves.iter().next().expect("a leaf always exists");
        leaves.remove(&leaf);
        edges.push((leaf, c, draw_weight(rng, lo, hi)));
        count[c] -= 1;
        if count[c] == 0 {
            leaves.insert(c);
        }
    }
    let rest: Vec<Vertex> = leaves.into_iter().collect();
    edges.push((rest[0], rest[1], draw_weight(rng, lo, hi)));
    Graph::new(n, edges)
}

/// Random connected graph: a random tree plus each remaining pair independently with
/// probability `p`, all weights uniform in `[lo, hi]`.
pub fn random_connected<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<Graph> {
    let tree = random_tree(n, lo, hi, rng)?;
    let mut edges: Vec<(Vertex, Vertex, f64)> =
        tree.edges().iter().map(|e| (e.u, e.v, e.weight)).collect();
    for i in 0..n {
        for j in i + 1..n {
            if tree.edge_between(i, j).is_none() && rng.random_bool(p.clamp(0.0, 1.0)) {
                edges.push((i, j, draw_weight(rng, lo, hi)));
            }
        }
    }
    Graph::new(n, edges)
}

/// Parses `NAME:ARGS`, e.g. `path:16`, `cycle:8`, `complete:5`, `star:4`,
/// `random_tree:12,0.5,2` or `random_graph:10,0.3,0.1,10`. Random families draw from `seed`.
pub fn from_spec(spec: &str, seed: u64) -> Result<Graph> {
    let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
    let nums: Vec<&str> = args.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let bad = |msg: &str| ElfsError::Parse(format!("generator '{spec}': {msg}"));
    let int = |i: usize| -> Result<usize> {
        nums.get(i).ok_or_else(|| bad("missing argument"))?.parse().map_err(|_| bad("bad integer"))
    };
    let float = |i: usize, default: f64| -> Result<f64> {
        match nums.get(i) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| bad("bad number")),
        }
    };
    let mut rng = stream(seed, 0x6e6e);
    match name {
        "path" => path(int(0)?),
        "cycle" => cycle(int(0)?),
        "complete" => complete(int(0)?),
        "star" => star(int(0)?),
        "random_tree" => {
            let lo = float(1, 1.0)?;
            random_tree(int(0)?, lo, float(2, lo)?, &mut rng)
        }
        "random_graph" => {
            let lo = float(2, 1.0)?;
            random_connected(int(0)?, float(1, 0.3)?, lo, float(3, lo)?, &mut rng)
        }
        _ => Err(bad("unknown generator")),
    }
}
