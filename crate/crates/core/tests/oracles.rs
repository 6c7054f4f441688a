//! Library results against independent dense computations in the test code.

mod common;

use common::*;
use elfs_core::coupling::{edge_rule_stop_law, vertex_rule_stop_law};
use elfs_core::electric::{grounded_laplacian, GroundedInverse};
use elfs_core::elfs::{block_form_transition, rw_hitting_times};
use elfs_core::generators;
use elfs_core::rng::stream;
use elfs_core::tree::{schur_complement, EdgeChain, TreeDecomposition};
use elfs_core::*;
use nalgebra::DMatrix;

#[test]
fn resistance_matches_pseudoinverse() {
    for i in 0..60 {
        let (g, s, sink) = random_instance(101, i, 18);
        let f = solve_flow(&FlowProblem::new(&g, s, &sink).unwrap()).unwrap();
        let r = pinv_resistance(&g, s, &sink);
        assert!((f.resistance() - r).abs() <= 1e-9 * r.max(1.0), "instance {i}");
        let v = voltages(&g, s, &sink);
        for x in 0..g.n() {
            assert!((f.voltage(x) - v[x]).abs() <= 1e-9 * r.max(1.0));
        }
    }
}

#[test]
fn transition_matrix_matches_direct_formula() {
    for i in 0..60 {
        let (g, _, sink) = random_instance(102, i, 16);
        let chain = elfs_transition_matrix(&g, &sink).unwrap();
        let q = transition_oracle(&g, &sink);
        let block = block_form_transition(&g, &chain);
        for x in 0..g.n() {
            for y in 0..g.n() {
                assert!((chain.prob(x, y) - q[(x, y)]).abs() < 1e-10, "instance {i} Q[{x},{y}]");
                assert!((block[(x, y)] - q[(x, y)]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn hitting_times_and_escape_times_match_walk_algebra() {
    for i in 0..60 {
        let (g, _, sink) = random_instance(103, i, 16);
        let set = SinkSet::new(&g, &sink).unwrap();
        let chain = ElfsChain::new(&g, &set).unwrap();
        let walk = rw_hitting_times(&g, &set).unwrap();
        for x in set.complement() {
            let v = voltages(&g, x, &sink);
            let ht: f64 = (0..g.n()).map(|y| v[y] * g.degree(y)).sum();
            let et: f64 = (0..g.n()).map(|y| v[y] * v[y] * g.degree(y)).sum::<f64>() / v[x];
            assert!((chain.ht(x) - ht).abs() <= 1e-9 * ht);
            assert!((walk[x] - ht).abs() <= 1e-8 * ht);
            assert!((chain.et(x) - et).abs() <= 1e-9 * et);
        }
    }
}

#[test]
fn eht_matches_absorbing_solve() {
    for i in 0..60 {
        let (g, s, sink) = random_instance(104, i, 16);
        let q = transition_oracle(&g, &sink);
        let eht = absorbing_sum(&q, &sink, &vec![1.0; g.n()]);
        let f = exact_functionals(&g, s, &sink).unwrap();
        assert!((f.eht - eht[s]).abs() <= 1e-9 * eht[s], "instance {i}");
    }
}

#[test]
fn arrival_matches_walk_absorption() {
    for i in 0..60 {
        let (g, s, sink) = random_instance(105, i, 16);
        let a = elfs_arrival_distribution(&g, s, &sink).unwrap();
        let w = walk_arrival(&g, s, &sink);
        for (k, &m) in sink.iter().enumerate() {
            assert!((a.prob(m) - w[k]).abs() < 1e-10);
        }
    }
}

#[test]
fn vertex_stop_law_is_transition_row() {
    for i in 0..40 {
        let (g, s, sink) = random_instance(106, i, 14);
        let f = solve_flow(&FlowProblem::new(&g, s, &sink).unwrap()).unwrap();
        let law = vertex_rule_stop_law(&f).unwrap();
        let q = transition_oracle(&g, &sink);
        for x in 0..g.n() {
            assert!((law[x] - q[(s, x)]).abs() < 1e-8, "instance {i} vertex {x}");
        }
    }
}

#[test]
fn edge_stop_law_is_flow_sampling_law() {
    for i in 0..40 {
        let (g, s, sink) = random_instance(107, i, 14);
        let f = solve_flow(&FlowProblem::new(&g, s, &sink).unwrap()).unwrap();
        let law = edge_rule_stop_law(&f).unwrap();
        let v = voltages(&g, s, &sink);
        for (id, e) in g.edges().iter().enumerate() {
            let p = (v[e.u] - v[e.v]).powi(2) * e.weight / v[s];
            assert!((law[id] - p).abs() < 1e-8, "instance {i} edge {id}");
        }
    }
}

#[test]
fn arrival_edge_is_sink_edge_flow() {
    // The edge through which the process is absorbed: sum over non-sink z of the expected
    // visits to z times the probability of an absorbing sample from z.
    for i in 0..30 {
        let (g, s, sink) = random_instance(108, i, 14);
        let set = SinkSet::new(&g, &sink).unwrap();
        let chain = ElfsChain::new(&g, &set).unwrap();
        let visits = chain.expected_visits(s).unwrap();
        let f = solve_flow(&FlowProblem::new(&g, s, &sink).unwrap()).unwrap();
        let inv = GroundedInverse::new(&g, &set).unwrap();
        for (id, e) in g.edges().iter().enumerate() {
            let inside = match (set.contains(e.u), set.contains(e.v)) {
                (false, true) => e.u,
                (true, false) => e.v,
                _ => continue,
            };
            let mut absorbed = 0.0;
            for z in set.complement() {
                let vz = inv.voltages(z);
                let pz = vz[inside] * vz[inside] * e.weight / vz[z];
                absorbed += visits[z] * 0.5 * pz;
            }
            let direct = f.edge_flow(id).abs();
            assert!((absorbed - direct).abs() < 1e-8, "instance {i} edge {id}: {absorbed} vs {direct}");
        }
    }
}

#[test]
fn schur_inverse_is_inverse_block() {
    for i in 0..30 {
        let (g, _, sink) = random_instance(109, i, 14);
        let n = g.n();
        let mut rng = stream(110, i);
        let mut keep: Vec<usize> = sink.clone();
        for x in 0..n {
            if !keep.contains(&x) && rand::Rng::random_bool(&mut rng, 0.5) {
                keep.push(x);
            }
        }
        if keep.len() == sink.len() {
            keep.push((0..n).find(|x| !sink.contains(x)).unwrap());
        }
        let schur = schur_complement(&g, &keep).unwrap();
        let l = laplacian(&g);
        let elim: Vec<usize> = (0..n).filter(|x| !keep.contains(x)).collect();
        let k = schur.kept.len();
        let mut lc = DMatrix::from_fn(k, k, |a, b| l[(schur.kept[a], schur.kept[b])]);
        if !elim.is_empty() {
            let c = elim.len();
            let lcc = DMatrix::from_fn(c, c, |a, b| l[(elim[a], elim[b])]);
            let lcs = DMatrix::from_fn(c, k, |a, b| l[(elim[a], schur.kept[b])]);
            lc -= lcs.transpose() * lcc.lu().solve(&lcs).unwrap();
        }
        assert!((&lc - &schur.laplacian).amax() < 1e-9);
        // Ground the sink in both; the grounded inverse of the reduced Laplacian is the kept
        // block of the full grounded inverse.
        let set = SinkSet::new(&g, &sink).unwrap();
        let (full, free, _) = grounded_laplacian(&g, &set);
        let full_inv = full.try_inverse().unwrap();
        let kept_free: Vec<usize> = schur.kept.iter().copied().filter(|x| !sink.contains(x)).collect();
        let red_idx: Vec<usize> = kept_free.iter().map(|x| schur.map[*x].unwrap()).collect();
        let red = DMatrix::from_fn(red_idx.len(), red_idx.len(), |a, b| lc[(red_idx[a], red_idx[b])]);
        let red_inv = red.try_inverse().unwrap();
        for (a, x) in kept_free.iter().enumerate() {
            for (b, y) in kept_free.iter().enumerate() {
                let fx = free.iter().position(|z| z == x).unwrap();
                let fy = free.iter().position(|z| z == y).unwrap();
                assert!((red_inv[(a, b)] - full_inv[(fx, fy)]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn edge_counts_recover_vertex_visits() {
    // Expected edge counts summed with uniform endpoint choice reproduce the vertex-level
    // expected visits of the elfs chain.
    for i in 0..30 {
        let mut rng = stream(111, i);
        let n = rand::Rng::random_range(&mut rng, 4..20);
        let g = generators::random_tree(n, 0.1, 10.0, &mut rng).unwrap();
        let sink = leaves(&g);
        let s = (0..n).find(|x| !sink.contains(x)).unwrap();
        let set = SinkSet::new(&g, &sink).unwrap();
        let edge = EdgeChain::new(&g, &set).unwrap().expected_counts(s).unwrap();
        let visits = ElfsChain::new(&g, &set).unwrap().expected_visits(s).unwrap();
        for z in set.complement() {
            let from_edges: f64 = g.neighbors(z).iter().map(|&(_, id)| 0.5 * edge[id]).sum::<f64>() + if z == s { 1.0 } else { 0.0 };
            assert!((from_edges - visits[z]).abs() < 1e-8, "tree {i} vertex {z}");
        }
        let dec = TreeDecomposition::new(&g, s).unwrap();
        assert_eq!(dec.subtree(s).len(), n);
    }
}

#[test]
fn complete_graph_growth_is_polynomial() {
    for n in [16usize, 36, 64] {
        let k = (n as f64).sqrt() as usize;
        let g = generators::complete(n).unwrap();
        let sink: Vec<usize> = (n - k..n).collect();
        let eht = exact_functionals(&g, 0, &sink).unwrap().eht;
        let scale = (k as f64).min(n as f64 / k as f64);
        assert!(eht >= scale / 4.0 && eht <= 4.0 * scale, "n = {n}: EHT {eht} vs {scale}");
    }
}
