//! Graph files and CSV output.
//!
//! A graph file is a JSON document:
//!
//! ```json
//! {
//!   "vertices": [{"id": 0, "alpha": 0.0}, {"id": 1, "alpha": "inf"}],
//!   "edges": [{"tail": 0, "head": 1, "length": 1.0}],
//!   "potential": {"kind": "constant", "per_edge": [0.0]}
//! }
//! ```
//!
//! `potential` may be omitted (`q ≡ 0`). `kind` is `constant` (one number per
//! edge), `poly` (coefficient list per edge, lowest degree first) or `samples`
//! (at least two uniformly spaced values per edge). With `kind: "mixed"` each
//! `per_edge` item is itself `{"kind": ..., "data": ...}`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::metric_graph::{Coupling, Edge, GraphError, MetricGraph};
use crate::potential::{EdgePotential, Potential, PotentialError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Schema { field: field.into(), message: message.into() }
}

/// Format with 12 significant digits; `inf`, `-inf` and `nan` for non-finite values.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
        format!("{rounded:?}")
    }
}

pub fn parse_graph_file(path: impl AsRef<Path>) -> Result<(MetricGraph, Potential), IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    parse_graph_str(&text)
}

pub fn parse_graph_str(text: &str) -> Result<(MetricGraph, Potential), IoError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| IoError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    parse_graph_value(&doc)
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a Value, IoError> {
    obj.get(key).ok_or_else(|| schema(format!("{at}.{key}"), "missing"))
}

fn as_object<'a>(v: &'a Value, at: &str) -> Result<&'a Map<String, Value>, IoError> {
    v.as_object().ok_or_else(|| schema(at, "expected an object"))
}

fn as_array<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>, IoError> {
    v.as_array().ok_or_else(|| schema(at, "expected an array"))
}

fn as_index(v: &Value, at: &str) -> Result<usize, IoError> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| schema(at, "expected a non-negative integer"))
}

fn as_number(v: &Value, at: &str) -> Result<f64, IoError> {
    v.as_f64().ok_or_else(|| schema(at, "expected a number"))
}

fn as_numbers(v: &Value, at: &str) -> Result<Vec<f64>, IoError> {
    as_array(v, at)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_number(x, &format!("{at}[{i}]")))
        .collect()
}

fn parse_alpha(v: &Value, at: &str) -> Result<Coupling, IoError> {
    match v {
        Value::String(s) if s.eq_ignore_ascii_case("inf") => Ok(Coupling::Dirichlet),
        Value::Number(n) => Ok(Coupling::Finite(n.as_f64().unwrap_or(f64::NAN))),
        _ => Err(schema(at, "expected a number or \"inf\"")),
    }
}

fn parse_edge_potential(kind: &str, data: &Value, at: &str) -> Result<EdgePotential, IoError> {
    match kind {
        "constant" => Ok(EdgePotential::Constant(as_number(data, at)?)),
        "poly" => Ok(EdgePotential::Poly(as_numbers(data, at)?)),
        "samples" => Ok(EdgePotential::Samples(as_numbers(data, at)?)),
        other => Err(schema(at, format!("unknown potential kind '{other}'"))),
    }
}

pub fn parse_graph_value(doc: &Value) -> Result<(MetricGraph, Potential), IoError> {
    let root = as_object(doc, "$")?;
    let vertices = as_array(field(root, "vertices", "$")?, "$.vertices")?;
    let mut indexed = Vec::with_capacity(vertices.len());
    for (i, v) in vertices.iter().enumerate() {
        let at = format!("$.vertices[{i}]");
        let obj = as_object(v, &at)?;
        let id = as_index(field(obj, "id", &at)?, &format!("{at}.id"))?;
        let alpha = match obj.get("alpha") {
            Some(a) => parse_alpha(a, &format!("{at}.alpha"))?,
            None => Coupling::Finite(0.0),
        };
        indexed.push((id, alpha));
    }
    let edges_v = as_array(field(root, "edges", "$")?, "$.edges")?;
    let mut edges = Vec::with_capacity(edges_v.len());
    for (i, e) in edges_v.iter().enumerate() {
        let at = format!("$.edges[{i}]");
        let obj = as_object(e, &at)?;
        let tail = as_index(field(obj, "tail", &at)?, &format!("{at}.tail"))?;
        let head = as_index(field(obj, "head", &at)?, &format!("{at}.head"))?;
        let length = as_number(field(obj, "length", &at)?, &format!("{at}.length"))?;
        edges.push(Edge::new(tail, head, length));
    }
    let graph = MetricGraph::from_indexed(&indexed, edges)?;

    let potential = match root.get("potential") {
        None | Some(Value::Null) => Potential::zero(&graph),
        Some(p) => {
            let at = "$.potential";
            let obj = as_object(p, at)?;
            let kind = field(obj, "kind", at)?
                .as_str()
                .ok_or_else(|| schema(format!("{at}.kind"), "expected a string"))?;
            let per_edge = as_array(field(obj, "per_edge", at)?, &format!("{at}.per_edge"))?;
            if per_edge.len() != graph.edge_count() {
                return Err(schema(
                    format!("{at}.per_edge"),
                    format!("has {} entries, graph has {} edges", per_edge.len(), graph.edge_count()),
                ));
            }
            let mut reps = Vec::with_capacity(per_edge.len());
            for (i, item) in per_edge.iter().enumerate() {
                let at = format!("{at}.per_edge[{i}]");
                let rep = if kind == "mixed" {
                    let o = as_object(item, &at)?;
                    let k = field(o, "kind", &at)?
                        .as_str()
                        .ok_or_else(|| schema(format!("{at}.kind"), "expected a string"))?;
                    parse_edge_potential(k, field(o, "data", &at)?, &format!("{at}.data"))?
                } else {
                    parse_edge_potential(kind, item, &at)?
                };
                reps.push(rep);
            }
            Potential::new(&graph, reps)?
        }
    };
    Ok((graph, potential))
}

fn alpha_value(c: Coupling) -> Value {
    match c {
        Coupling::Dirichlet => json!("inf"),
        Coupling::Finite(a) => json!(a),
    }
}

fn edge_kind(rep: &EdgePotential) -> (&'static str, Value) {
    match rep {
        EdgePotential::Constant(c) => ("constant", json!(c)),
        EdgePotential::Poly(c) => ("poly", json!(c)),
        EdgePotential::Samples(s) => ("samples", json!(s)),
    }
}

pub fn graph_to_value(graph: &MetricGraph, q: &Potential) -> Value {
    let vertices: Vec<Value> = graph
        .couplings()
        .iter()
        .enumerate()
        .map(|(id, &c)| json!({"id": id, "alpha": alpha_value(c)}))
        .collect();
    let edges: Vec<Value> = graph
        .edges()
        .iter()
        .map(|e| json!({"tail": e.tail, "head": e.head, "length": e.length}))
        .collect();
    let parts: Vec<(&str, Value)> = q.edges().iter().map(edge_kind).collect();
    let uniform = parts.windows(2).all(|w| w[0].0 == w[1].0);
    let potential = if uniform {
        json!({
            "kind": parts.first().map_or("constant", |p| p.0),
            "per_edge": parts.iter().map(|p| p.1.clone()).collect::<Vec<_>>(),
        })
    } else {
        json!({
            "kind": "mixed",
            "per_edge": parts.iter().map(|(k, d)| json!({"kind": k, "data": d})).collect::<Vec<_>>(),
        })
    };
    json!({"vertices": vertices, "edges": edges, "potential": potential})
}

pub fn graph_to_string(graph: &MetricGraph, q: &Potential) -> String {
    serde_json::to_string_pretty(&graph_to_value(graph, q)).expect("graph values serialize")
}

/// CSV sink that starts with a `# key=value` provenance line.
pub struct CsvOut<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvOut<W> {
    pub fn new(mut out: W, header_note: &str, columns: &[&str]) -> Result<Self, IoError> {
        writeln!(out, "# {header_note}")?;
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(columns)?;
        Ok(CsvOut { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), IoError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, IoError> {
        self.writer.flush()?;
        self.writer.into_inner().map_err(|e| IoError::Write(e.into_error()))
    }
}
