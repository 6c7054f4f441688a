use std::path::PathBuf;

use clap::{ArgGroup, Parser, ValueEnum};

#[derive(Parser, Debug, Clone)]
#[command(name = "elfs", version, about = "Run electric-flow-sampling experiments and emit JSON results")]
#[command(group(ArgGroup::new("input").required(true).args(["gen", "graph"])))]
pub struct Args {
    #[arg(value_enum)]
    pub experiment: Experiment,

    /// Named generator, e.g. `path:64`, `cycle:8`, `complete:10`, `star:5`,
    /// `random_tree:20,0.1,10` or `random_graph:12,0.3,0.1,10`.
    #[arg(long, value_name = "NAME:ARGS")]
    pub gen: Option<String>,

    /// Graph file: `{"n": N, "edges": [[u, v, w], ...]}`.
    #[arg(long, value_name = "FILE")]
    pub graph: Option<PathBuf>,

    #[arg(long, value_name = "ID", default_value_t = 0)]
    pub source: usize,

    /// Comma-separated sink ids, or `leaves` for every leaf other than the source.
    /// Defaults to the leaves for the tree experiments and to the last vertex otherwise.
    #[arg(long, value_name = "ID[,ID...]")]
    pub sink: Option<String>,

    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,

    /// Monte-Carlo replica count; each experiment has its own default.
    #[arg(long, value_name = "INT")]
    pub replicas: Option<usize>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for replica ensembles (default: all cores).
    #[arg(long, value_name = "INT")]
    pub threads: Option<usize>,

    /// Output path; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Walk length rule for `estimate-rd`.
    #[arg(long, value_enum, default_value_t = Variant::Hitting)]
    pub variant: Variant,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    GraphInfo,
    ElectricSolve,
    ElfsEht,
    ArrivalCompare,
    Identities,
    CouplingVertex,
    CouplingEdge,
    EscapeTime,
    Doob,
    EstimateRd,
    SchurCheck,
    Pba,
    TreeRecurrence,
    TreeBound,
    CompleteGraphScan,
    QwInvariants,
    QwFlowstate,
    QwEta,
    QwElfs,
    QwSearch,
    QwResistance,
}

impl Experiment {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }

    pub fn sinks_default_to_leaves(self) -> bool {
        matches!(self, Experiment::Pba | Experiment::TreeRecurrence | Experiment::TreeBound)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Hitting,
    Escape,
}
