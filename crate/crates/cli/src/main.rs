mod args;
mod error;
mod experiments;
mod report;

use std::io::Write;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use elfs_core::generators::from_spec;
use elfs_core::{ElfsError, Graph, Vertex};
use serde_json::json;

use args::{Args, Experiment, Format};
use error::{CliError, Result};
use experiments::Ctx;
use report::{metric_table, Check, Checks, Document, Outcome, Table};

fn load_graph(args: &Args) -> Result<(Graph, String)> {
    if let Some(spec) = &args.gen {
        return Ok((from_spec(spec, args.seed)?, spec.clone()));
    }
    let path = args.graph.as_ref().expect("clap requires --gen or --graph");
    let text = std::fs::read_to_string(path).map_err(|source| CliError::FileIo { path: path.display().to_string(), source })?;
    Ok((Graph::from_json(&text)?, path.display().to_string()))
}

fn leaves(g: &Graph, source: Vertex) -> Vec<Vertex> {
    (0..g.n()).filter(|&x| x != source && g.valence(x) == 1).collect()
}

fn resolve_sinks(args: &Args, g: &Graph) -> Result<Vec<Vertex>> {
    match args.sink.as_deref() {
        Some("leaves") => Ok(leaves(g, args.source)),
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<Vertex>().map_err(|_| CliError::BadSpec(format!("sink id '{s}'"))))
            .collect(),
        None if args.experiment.sinks_default_to_leaves() => Ok(leaves(g, args.source)),
        None if g.n() == 0 => Err(CliError::BadSpec("empty graph".into())),
        None => Ok(vec![g.n() - 1]),
    }
}

fn emit(args: &Args, doc: &Document, table: Option<&Table>) -> Result<()> {
    let mut buf = Vec::new();
    match args.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, doc).expect("document serializes");
            buf.push(b'\n');
        }
        Format::Csv => {
            let written = match table {
                Some(t) => t.write_csv(&mut buf),
                None => metric_table(&doc.metrics).write_csv(&mut buf),
            };
            written.expect("writing to memory");
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, &buf).map_err(|source| CliError::FileIo { path: path.display().to_string(), source }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&buf).and_then(|_| out.flush()).map_err(|source| CliError::FileIo { path: "<stdout>".into(), source })
        }
    }
}

fn run(args: &Args) -> Result<bool> {
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::BadSpec(format!("thread pool: {e}")))?;
    }
    let (graph, input) = load_graph(args)?;
    let sink = resolve_sinks(args, &graph)?;
    let parameters = json!({
        "graph": input,
        "n": graph.n(),
        "edges": graph.num_edges(),
        "source": args.source,
        "sink": sink,
        "eps": args.eps,
        "replicas": args.replicas,
        "variant": args.variant,
    });
    let exp: Experiment = args.experiment;
    let ctx = Ctx { graph, source: args.source, sink, eps: args.eps, replicas: args.replicas, seed: args.seed, variant: args.variant };
    let result = experiments::run(exp, &ctx);
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let (table, doc) = match result {
        Ok(Outcome { metrics, checks, table }) => {
            let pass = checks.all_pass();
            let doc = Document { experiment: exp.name(), anchor: experiments::anchor(exp), parameters, seed: args.seed, metrics, checks, pass, timestamp };
            (table, doc)
        }
        Err(CliError::Core(ElfsError::IdentityViolation { what, lhs, rhs })) => {
            let check = Check { name: what.clone(), relation: "identity", value: lhs, target: rhs, tolerance: 0.0, pass: false };
            (None, violation_doc(exp, parameters, args.seed, timestamp, check, json!({ "error": format!("identity violated: {what}") })))
        }
        Err(CliError::Core(e @ ElfsError::OracleMismatch { .. })) => {
            let check = Check { name: "oracle agreement".into(), relation: "holds", value: 0.0, target: 1.0, tolerance: 0.0, pass: false };
            (None, violation_doc(exp, parameters, args.seed, timestamp, check, json!({ "error": e.to_string() })))
        }
        Err(e) => return Err(e),
    };
    emit(args, &doc, table.as_ref())?;
    Ok(doc.pass)
}

fn violation_doc(exp: Experiment, parameters: serde_json::Value, seed: u64, timestamp: u64, check: Check, metrics: serde_json::Value) -> Document {
    Document {
        experiment: exp.name(),
        anchor: experiments::anchor(exp),
        parameters,
        seed,
        metrics,
        checks: Checks(vec![check]),
        pass: false,
        timestamp,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("elfs: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
