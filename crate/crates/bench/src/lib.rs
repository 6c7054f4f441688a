//! Fixed inputs for the benchmarks.

use elfs_core::generators::from_spec;
use elfs_core::{Graph, Vertex};

/// A benchmark instance: graph, source and sink set.
pub struct Instance {
    pub name: String,
    pub graph: Graph,
    pub source: Vertex,
    pub sink: Vec<Vertex>,
}

fn instance(spec: &str, seed: u64) -> Instance {
    let graph = from_spec(spec, seed).expect("valid generator spec");
    let sink = vec![graph.n() - 1];
    Instance { name: spec.to_string(), graph, source: 0, sink }
}

/// Paths, cycles and random graphs of growing size for the classical routines.
pub fn classical_instances() -> Vec<Instance> {
    ["path:64", "path:256", "cycle:128", "complete:32", "random_graph:64,0.1,0.1,10", "random_graph:200,0.03,0.1,10"]
        .iter()
        .map(|s| instance(s, 1))
        .collect()
}

/// Small graphs for the dense edge-space simulator.
pub fn quantum_instances() -> Vec<Instance> {
    ["path:8", "cycle:12", "complete:6", "random_graph:10,0.3,0.1,10"].iter().map(|s| instance(s, 1)).collect()
}
