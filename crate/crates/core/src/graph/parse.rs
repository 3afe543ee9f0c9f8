//! Edge-list ingestion.
//!
//! The native format is one edge per line, `layer node_a node_b [weight]`,
//! whitespace separated, with `#` starting a comment. The multinet `.mpx`
//! layout (`#ACTORS` / `#EDGES` sections, comma separated `a,b,layer`) is
//! accepted as well.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{LayerGraph, MultiplexGraph, NodePair};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeListFormat {
    #[default]
    LayerFirst,
    Mpx,
}

impl std::str::FromStr for EdgeListFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layer_first" | "edges" => Ok(EdgeListFormat::LayerFirst),
            "mpx" => Ok(EdgeListFormat::Mpx),
            other => Err(Error::InvalidArgument(format!("unknown edge-list format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub lines_read: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    pub warnings: Vec<String>,
}

impl ParseReport {
    pub fn warning_count(&self) -> usize {
        self.self_loops + self.duplicates
    }
}

#[derive(Clone, Debug)]
pub struct Parsed {
    pub graph: MultiplexGraph,
    pub report: ParseReport,
}

#[derive(Default)]
struct Builder {
    node_ids: HashMap<String, usize>,
    node_labels: Vec<String>,
    layer_ids: HashMap<String, usize>,
    layer_names: Vec<String>,
    // per layer (in first-seen order) the set of accepted pairs
    layer_edges: Vec<std::collections::HashSet<NodePair>>,
    report: ParseReport,
}

impl Builder {
    fn node(&mut self, label: &str) -> usize {
        if let Some(&id) = self.node_ids.get(label) {
            return id;
        }
        let id = self.node_labels.len();
        self.node_ids.insert(label.to_owned(), id);
        self.node_labels.push(label.to_owned());
        id
    }

    fn layer(&mut self, name: &str) -> usize {
        if let Some(&id) = self.layer_ids.get(name) {
            return id;
        }
        let id = self.layer_names.len();
        self.layer_ids.insert(name.to_owned(), id);
        self.layer_names.push(name.to_owned());
        self.layer_edges.push(Default::default());
        id
    }

    fn edge(&mut self, line: usize, layer: &str, a: &str, b: &str) {
        let layer = self.layer(layer);
        let a = self.node(a);
        let b = self.node(b);
        if a == b {
            self.report.self_loops += 1;
            self.report
                .warnings
                .push(format!("line {line}: self-loop on {:?} dropped", self.node_labels[a]));
            return;
        }
        if !self.layer_edges[layer].insert(NodePair::new(a, b)) {
            self.report.duplicates += 1;
            self.report.warnings.push(format!(
                "line {line}: duplicate edge {:?}-{:?} in layer {:?} dropped",
                self.node_labels[a], self.node_labels[b], self.layer_names[layer]
            ));
        }
    }

    fn finish(self) -> Result<Parsed> {
        let node_count = self.node_labels.len();
        // Numeric layer ids sort numerically, anything else lexicographically,
        // so the layer order never depends on line order.
        let mut order: Vec<usize> = (0..self.layer_names.len()).collect();
        let numeric: Option<Vec<i64>> =
            self.layer_names.iter().map(|n| n.parse::<i64>().ok()).collect();
        match numeric {
            Some(keys) => order.sort_by_key(|&i| keys[i]),
            None => order.sort_by(|&a, &b| self.layer_names[a].cmp(&self.layer_names[b])),
        }
        if order.len() < 2 {
            return Err(Error::Structure(format!(
                "a multiplex needs at least 2 layers, found {}",
                order.len()
            )));
        }
        if node_count == 0 {
            return Err(Error::Structure("no edges found".into()));
        }
        let mut names = Vec::with_capacity(order.len());
        let mut layers = Vec::with_capacity(order.len());
        for i in order {
            names.push(self.layer_names[i].clone());
            layers.push(LayerGraph::from_pairs(
                node_count,
                self.layer_edges[i].iter().map(|p| (p.u, p.v)),
            )?);
        }
        let graph = MultiplexGraph::new(self.node_labels, names, layers)?;
        Ok(Parsed {
            graph,
            report: self.report,
        })
    }
}

/// Parses a multiplex edge list. Node ids are dense and assigned in order of
/// first appearance; self-loops and duplicate edges are dropped and counted.
pub fn parse_multiplex_edgelist<R: BufRead>(reader: R, format: EdgeListFormat) -> Result<Parsed> {
    match format {
        EdgeListFormat::LayerFirst => parse_layer_first(reader),
        EdgeListFormat::Mpx => parse_mpx(reader),
    }
}

fn read_line(line: std::io::Result<String>, number: usize) -> Result<String> {
    line.map_err(|e| Error::Parse {
        line: number,
        message: format!("unreadable line: {e}"),
    })
}

fn parse_layer_first<R: BufRead>(reader: R) -> Result<Parsed> {
    let mut builder = Builder::default();
    for (idx, line) in reader.lines().enumerate() {
        let number = idx + 1;
        let line = read_line(line, number)?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        builder.report.lines_read += 1;
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if !(3..=4).contains(&tokens.len()) {
            return Err(Error::Parse {
                line: number,
                message: format!(
                    "expected `layer node node [weight]`, found {} tokens",
                    tokens.len()
                ),
            });
        }
        if let Some(w) = tokens.get(3) {
            if w.parse::<f64>().is_err() {
                return Err(Error::Parse {
                    line: number,
                    message: format!("weight {w:?} is not a number"),
                });
            }
        }
        builder.edge(number, tokens[0], tokens[1], tokens[2]);
    }
    builder.finish()
}

fn parse_mpx<R: BufRead>(reader: R) -> Result<Parsed> {
    #[derive(PartialEq)]
    enum Section {
        Edges,
        Actors,
        Other,
    }
    let mut builder = Builder::default();
    // Files without section headers are plain `a,b,layer` lists.
    let mut section = Section::Edges;
    for (idx, line) in reader.lines().enumerate() {
        let number = idx + 1;
        let line = read_line(line, number)?;
        let content = line.trim();
        if content.is_empty() || content.starts_with("--") {
            continue;
        }
        if let Some(header) = content.strip_prefix('#') {
            section = match header.trim().to_ascii_uppercase().as_str() {
                "EDGES" => Section::Edges,
                "ACTORS" | "VERTICES" => Section::Actors,
                _ => Section::Other,
            };
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        match section {
            Section::Actors => {
                if fields[0].is_empty() {
                    return Err(Error::Parse {
                        line: number,
                        message: "empty actor name".into(),
                    });
                }
                builder.node(fields[0]);
            }
            Section::Edges => {
                builder.report.lines_read += 1;
                if fields.len() < 3 || fields[..3].iter().any(|f| f.is_empty()) {
                    return Err(Error::Parse {
                        line: number,
                        message: "expected `actor,actor,layer[,...]`".into(),
                    });
                }
                builder.edge(number, fields[2], fields[0], fields[1]);
            }
            Section::Other => {}
        }
    }
    builder.finish()
}

/// Writes the graph in the layer-first format such that re-parsing
/// reproduces identical node ids, layers and edges.
pub fn serialize_layer_first(graph: &MultiplexGraph) -> String {
    let labels = graph.node_labels();
    let names = graph.layer_names();
    let mut out = String::new();
    let mut emitted: Vec<Vec<bool>> =
        graph.layers().iter().map(|l| vec![false; l.edge_count()]).collect();
    let mut introduced = 0usize;

    // Introduce nodes in id order: each new id k is emitted on a line whose
    // other endpoint is already known or is k + 1.
    while introduced < graph.node_count() {
        let k = introduced;
        let mut chosen = None;
        'search: for (li, layer) in graph.layers().iter().enumerate() {
            for &w in layer.neighbors(k) {
                if w < k || w == k + 1 {
                    let idx = layer.edges().binary_search(&NodePair::new(k, w)).unwrap();
                    chosen = Some((li, idx, w));
                    break 'search;
                }
            }
        }
        match chosen {
            Some((li, idx, w)) => {
                emitted[li][idx] = true;
                let _ = writeln!(out, "{} {} {}", names[li], labels[k], labels[w]);
                introduced = if w == k + 1 { k + 2 } else { k + 1 };
            }
            None => {
                // Isolated or only linked to later nodes: a self-loop line
                // registers the id and is dropped again on parse.
                let _ = writeln!(out, "{} {} {}", names[0], labels[k], labels[k]);
                introduced = k + 1;
            }
        }
    }
    for (li, layer) in graph.layers().iter().enumerate() {
        if layer.edge_count() == 0 {
            // keeps the empty layer alive through a dropped self-loop
            let _ = writeln!(out, "{} {} {}", names[li], labels[0], labels[0]);
        }
        for (idx, e) in layer.edges().iter().enumerate() {
            if !emitted[li][idx] {
                let _ = writeln!(out, "{} {} {}", names[li], labels[e.u], labels[e.v]);
            }
        }
    }
    out
}
