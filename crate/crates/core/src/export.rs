//! Tree output: Graphviz DOT, GraphML, and JSON reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::fmt_sig;
use crate::tree::{metrics, Tree, TreeMetrics};

/// Optional per-node rendering metadata.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct NodeAttributes {
    pub label: String,
    #[serde(default)]
    pub sector: Option<String>,
    #[serde(default)]
    pub capitalization: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Attributes {
    by_label: BTreeMap<String, NodeAttributes>,
}

impl Attributes {
    /// CSV with columns `label,sector,capitalization`; the last two may be
    /// empty.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut by_label = BTreeMap::new();
        for rec in rdr.deserialize() {
            let mut a: NodeAttributes = rec?;
            if a.sector.as_deref() == Some("") {
                a.sector = None;
            }
            by_label.insert(a.label.clone(), a);
        }
        Ok(Attributes { by_label })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    pub fn get(&self, label: &str) -> Option<&NodeAttributes> {
        self.by_label.get(label)
    }

    fn sector(&self, label: &str) -> Option<&str> {
        self.get(label).and_then(|a| a.sector.as_deref())
    }

    fn capitalization(&self, label: &str) -> Option<f64> {
        self.get(label).and_then(|a| a.capitalization)
    }
}

const PALETTE: [&str; 12] = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#ffff33", "#a65628", "#f781bf",
    "#66c2a5", "#8da0cb", "#e78ac3", "#a6d854",
];
const NEUTRAL: &str = "#d9d9d9";

fn sector_colors<'a>(tree: &Tree, attrs: &'a Attributes) -> BTreeMap<&'a str, &'static str> {
    let sectors: BTreeSet<&str> = tree.labels.iter().filter_map(|l| attrs.sector(l)).collect();
    sectors
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, PALETTE[i % PALETTE.len()]))
        .collect()
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: fill color by sector, node width by capitalization,
/// edge pen width proportional to `ρ`.
pub fn to_dot(tree: &Tree, attrs: &Attributes) -> String {
    let colors = sector_colors(tree, attrs);
    let max_cap = tree
        .labels
        .iter()
        .filter_map(|l| attrs.capitalization(l))
        .fold(0.0f64, f64::max);
    let mut out = String::new();
    out.push_str("graph qmst {\n");
    let mut title = String::new();
    if let Some(s) = tree.scale {
        let _ = write!(title, "s={s} ");
    }
    if let Some(q) = tree.q {
        let _ = write!(title, "q={q} ");
    }
    if let Some(t) = tree.tau {
        let _ = write!(title, "tau={}", fmt_sig(t, 6));
    }
    let _ = writeln!(out, "  label=\"{}\";", title.trim_end());
    out.push_str("  node [shape=circle, style=filled, fontsize=10];\n");
    for (i, label) in tree.labels.iter().enumerate() {
        if !tree.active[i] {
            continue;
        }
        let color = attrs
            .sector(label)
            .and_then(|s| colors.get(s).copied())
            .unwrap_or(NEUTRAL);
        let width = match attrs.capitalization(label) {
            Some(c) if max_cap > 0.0 => 0.3 + 1.2 * (c.max(0.0) / max_cap).sqrt(),
            _ => 0.5,
        };
        let name = dot_escape(label);
        let _ = writeln!(
            out,
            "  \"{name}\" [fillcolor=\"{color}\", width={}];",
            fmt_sig(width, 4)
        );
    }
    for e in &tree.edges {
        let pen = (8.0 * e.rho).max(0.2);
        let _ = writeln!(
            out,
            "  \"{}\" -- \"{}\" [penwidth={}, weight={}];",
            dot_escape(&tree.labels[e.a]),
            dot_escape(&tree.labels[e.b]),
            fmt_sig(pen, 4),
            fmt_sig(e.rho.max(0.0), 6),
        );
    }
    out.push_str("}\n");
    out
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// GraphML with typed node, edge and graph properties.
pub fn to_graphml(tree: &Tree, attrs: &Attributes) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    for (id, target, name, ty) in [
        ("g_s", "graph", "s", "int"),
        ("g_q", "graph", "q", "double"),
        ("g_tau", "graph", "tau", "double"),
        ("n_sector", "node", "sector", "string"),
        ("n_cap", "node", "capitalization", "double"),
        ("e_rho", "edge", "rho", "double"),
        ("e_distance", "edge", "distance", "double"),
        ("e_significant", "edge", "significant", "boolean"),
    ] {
        let _ = writeln!(
            out,
            "  <key id=\"{id}\" for=\"{target}\" attr.name=\"{name}\" attr.type=\"{ty}\"/>"
        );
    }
    out.push_str("  <graph id=\"qmst\" edgedefault=\"undirected\">\n");
    if let Some(s) = tree.scale {
        let _ = writeln!(out, "    <data key=\"g_s\">{s}</data>");
    }
    if let Some(q) = tree.q {
        let _ = writeln!(out, "    <data key=\"g_q\">{q}</data>");
    }
    if let Some(t) = tree.tau {
        let _ = writeln!(out, "    <data key=\"g_tau\">{t}</data>");
    }
    for (i, label) in tree.labels.iter().enumerate() {
        if !tree.active[i] {
            continue;
        }
        let id = xml_escape(label);
        let sector = attrs.sector(label);
        let cap = attrs.capitalization(label);
        if sector.is_none() && cap.is_none() {
            let _ = writeln!(out, "    <node id=\"{id}\"/>");
            continue;
        }
        let _ = writeln!(out, "    <node id=\"{id}\">");
        if let Some(s) = sector {
            let _ = writeln!(out, "      <data key=\"n_sector\">{}</data>", xml_escape(s));
        }
        if let Some(c) = cap {
            let _ = writeln!(out, "      <data key=\"n_cap\">{c}</data>");
        }
        out.push_str("    </node>\n");
    }
    for (k, e) in tree.edges.iter().enumerate() {
        let _ = writeln!(
            out,
            "    <edge id=\"e{k}\" source=\"{}\" target=\"{}\">",
            xml_escape(&tree.labels[e.a]),
            xml_escape(&tree.labels[e.b])
        );
        let _ = writeln!(out, "      <data key=\"e_rho\">{}</data>", e.rho);
        let _ = writeln!(out, "      <data key=\"e_distance\">{}</data>", e.distance);
        let _ = writeln!(
            out,
            "      <data key=\"e_significant\">{}</data>",
            e.significant
        );
        out.push_str("    </edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub distance: f64,
    pub rho: f64,
    pub significant: bool,
}

/// Edge list, metrics and provenance of one tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeReport {
    pub s: Option<usize>,
    pub q: Option<f64>,
    pub tau: Option<f64>,
    pub filtered: bool,
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeRecord>,
    pub metrics: TreeMetrics,
    pub provenance: serde_json::Value,
}

impl TreeReport {
    pub fn new(tree: &Tree, provenance: serde_json::Value) -> Self {
        TreeReport {
            s: tree.scale,
            q: tree.q,
            tau: tree.tau,
            filtered: tree.is_filtered(),
            nodes: tree
                .labels
                .iter()
                .zip(&tree.active)
                .filter(|(_, &a)| a)
                .map(|(l, _)| l.clone())
                .collect(),
            edges: tree
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    source: tree.labels[e.a].clone(),
                    target: tree.labels[e.b].clone(),
                    distance: e.distance,
                    rho: e.rho,
                    significant: e.significant,
                })
                .collect(),
            metrics: metrics(tree),
            provenance,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
