use std::io::Write;

use elfs_core::stats::MeanEstimate;
use serde::Serialize;
use serde_json::Value;

/// Relative tolerance scale used by `close`: `tol * max(1, |target|)`.
fn scale(target: f64) -> f64 {
    target.abs().max(1.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub relation: &'static str,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Default, Debug, Serialize)]
#[serde(transparent)]
pub struct Checks(pub Vec<Check>);

impl Checks {
    fn push(&mut self, name: &str, relation: &'static str, value: f64, target: f64, tolerance: f64, pass: bool) {
        self.0.push(Check { name: name.into(), relation, value, target, tolerance, pass });
    }

    pub fn close(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.push(name, "close", value, target, tol, (value - target).abs() <= tol * scale(target));
    }

    pub fn at_most(&mut self, name: &str, value: f64, bound: f64, tol: f64) {
        self.push(name, "at_most", value, bound, tol, value <= bound + tol * scale(bound));
    }

    pub fn at_least(&mut self, name: &str, value: f64, bound: f64) {
        self.push(name, "at_least", value, bound, 0.0, value >= bound);
    }

    /// `|mean - target| <= k std_err`.
    pub fn within_sigma(&mut self, name: &str, est: &MeanEstimate, target: f64, k: f64) {
        self.push(name, "within_sigma", est.mean, target, k * est.std_err, est.within_sigma(target, k));
    }

    pub fn holds(&mut self, name: &str, ok: bool) {
        self.push(name, "holds", f64::from(u8::from(ok)), 1.0, 0.0, ok);
    }

    pub fn all_pass(&self) -> bool {
        self.0.iter().all(|c| c.pass)
    }
}

/// Per-replica data for CSV output.
#[derive(Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Table {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    Value::Null => String::new(),
                    other => other.to_string(),
                })
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// What an experiment hands back to the runner.
pub struct Outcome {
    pub metrics: Value,
    pub checks: Checks,
    pub table: Option<Table>,
}

#[derive(Serialize)]
pub struct Document {
    pub experiment: String,
    pub anchor: &'static str,
    pub parameters: Value,
    pub seed: u64,
    pub metrics: Value,
    pub checks: Checks,
    pub pass: bool,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub timestamp: u64,
}

/// Metrics in a flat `metric,value` table, used for CSV output when an experiment has no
/// per-replica data.
pub fn metric_table(metrics: &Value) -> Table {
    let mut t = Table::new(&["metric", "value"]);
    fn walk(prefix: &str, v: &Value, t: &mut Table) {
        match v {
            Value::Object(map) => {
                for (k, x) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, t);
                }
            }
            Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
                let joined: Vec<String> = items.iter().map(|x| x.to_string()).collect();
                t.push(vec![Value::String(prefix.into()), Value::String(format!("\"{}\"", joined.join(" ")))]);
            }
            Value::Array(items) => {
                for (i, x) in items.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, t);
                }
            }
            other => t.push(vec![Value::String(prefix.into()), other.clone()]),
        }
    }
    walk("", metrics, &mut t);
    t
}
