#![allow(dead_code)]

use elfs_core::generators;
use elfs_core::rng::stream;
use elfs_core::{Graph, Vertex};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

/// A random connected weighted graph on at most `max_n` vertices with a source and a
/// sink set of size 1..=3, weights in `[0.1, 10]`.
pub fn random_instance(seed: u64, index: u64, max_n: usize) -> (Graph, Vertex, Vec<Vertex>) {
    let mut rng = stream(seed, index);
    let n = rng.random_range(3..=max_n);
    let p = rng.random_range(0.05..0.5);
    let g = generators::random_connected(n, p, 0.1, 10.0, &mut rng).unwrap();
    let (s, sink) = pick_roles(n, &mut rng);
    (g, s, sink)
}

pub fn pick_roles<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vertex, Vec<Vertex>) {
    let mut order: Vec<Vertex> = (0..n).collect();
    order.shuffle(rng);
    let k = rng.random_range(1..=3.min(n - 1));
    let mut sink = order[1..=k].to_vec();
    sink.sort_unstable();
    (order[0], sink)
}

/// Leaves of a tree, in increasing order.
pub fn leaves(g: &Graph) -> Vec<Vertex> {
    (0..g.n()).filter(|&x| g.valence(x) == 1).collect()
}

/// Dense Laplacian assembled from the edge list.
pub fn laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.n();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for e in g.edges() {
        l[(e.u, e.u)] += e.weight;
        l[(e.v, e.v)] += e.weight;
        l[(e.u, e.v)] -= e.weight;
        l[(e.v, e.u)] -= e.weight;
    }
    l
}

/// Voltages of the unit flow from `s` to `sink` with the sink grounded, from an LU solve
/// of the grounded Laplacian.
pub fn voltages(g: &Graph, s: Vertex, sink: &[Vertex]) -> Vec<f64> {
    let free: Vec<Vertex> = (0..g.n()).filter(|x| !sink.contains(x)).collect();
    let l = laplacian(g);
    let luu = DMatrix::from_fn(free.len(), free.len(), |i, j| l[(free[i], free[j])]);
    let b = DVector::from_fn(free.len(), |i, _| if free[i] == s { 1.0 } else { 0.0 });
    let x = luu.lu().solve(&b).unwrap();
    let mut v = vec![0.0; g.n()];
    for (i, &y) in free.iter().enumerate() {
        v[y] = x[i];
    }
    v
}

/// Effective resistance between the vertex `a` and the set `sink` from the Laplacian
/// pseudoinverse of the graph with the sink set collapsed to one vertex.
pub fn pinv_resistance(g: &Graph, a: Vertex, sink: &[Vertex]) -> f64 {
    let n = g.n();
    let mut id = vec![0; n];
    let mut next = 0;
    for x in 0..n {
        if !sink.contains(&x) {
            id[x] = next;
            next += 1;
        }
    }
    for &m in sink {
        id[m] = next;
    }
    let k = next + 1;
    let mut l = DMatrix::<f64>::zeros(k, k);
    for e in g.edges() {
        let (u, v) = (id[e.u], id[e.v]);
        if u == v {
            continue;
        }
        l[(u, u)] += e.weight;
        l[(v, v)] += e.weight;
        l[(u, v)] -= e.weight;
        l[(v, u)] -= e.weight;
    }
    let pinv = l.pseudo_inverse(1e-12).unwrap();
    let (i, j) = (id[a], next);
    pinv[(i, i)] + pinv[(j, j)] - 2.0 * pinv[(i, j)]
}

/// Elfs transition matrix from per-source voltage solves, independent of the library.
pub fn transition_oracle(g: &Graph, sink: &[Vertex]) -> DMatrix<f64> {
    let n = g.n();
    let mut q = DMatrix::zeros(n, n);
    for s in 0..n {
        if sink.contains(&s) {
            q[(s, s)] = 1.0;
            continue;
        }
        let v = voltages(g, s, sink);
        for e in g.edges() {
            let p = (v[e.u] - v[e.v]).powi(2) * e.weight / v[s];
            q[(s, e.u)] += 0.5 * p;
            q[(s, e.v)] += 0.5 * p;
        }
    }
    q
}

/// `(I - Q_UU)^{-1} b` restricted to non-sink vertices, returned over all vertices.
pub fn absorbing_sum(q: &DMatrix<f64>, sink: &[Vertex], b: &[f64]) -> Vec<f64> {
    let n = q.nrows();
    let free: Vec<Vertex> = (0..n).filter(|x| !sink.contains(x)).collect();
    let a = DMatrix::from_fn(free.len(), free.len(), |i, j| if i == j { 1.0 } else { 0.0 } - q[(free[i], free[j])]);
    let rhs = DVector::from_fn(free.len(), |i, _| b[free[i]]);
    let x = a.lu().solve(&rhs).unwrap();
    let mut out = vec![0.0; n];
    for (i, &y) in free.iter().enumerate() {
        out[y] = x[i];
    }
    out
}

/// Random-walk absorption probabilities `-(L_UU^{-1} L_UM)` row `s`, one entry per sink.
pub fn walk_arrival(g: &Graph, s: Vertex, sink: &[Vertex]) -> Vec<f64> {
    let l = laplacian(g);
    let free: Vec<Vertex> = (0..g.n()).filter(|x| !sink.contains(x)).collect();
    let luu = DMatrix::from_fn(free.len(), free.len(), |i, j| l[(free[i], free[j])]);
    let lum = DMatrix::from_fn(free.len(), sink.len(), |i, j| l[(free[i], sink[j])]);
    let h = -(luu.lu().solve(&lum).unwrap());
    let row = free.iter().position(|&x| x == s).unwrap();
    (0..sink.len()).map(|j| h[(row, j)]).collect()
}

/// Binomial z-score of `count` successes out of `total` against `p`; infinite when `p`
/// is zero or one and the count disagrees.
pub fn binomial_z(count: usize, total: usize, p: f64) -> f64 {
    elfs_core::stats::frequency_z(count, total, p)
}

pub fn report(name: &str, pass: bool, detail: &str) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}
