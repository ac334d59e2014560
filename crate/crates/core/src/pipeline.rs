//! End-to-end run over an `(s, q)` grid.
//!
//! For every cell the run writes the `ρ_q` and distance matrices, the
//! unfiltered and significance-filtered trees (JSON, DOT, GraphML) and a
//! metrics file, then records them in `manifest.json` together with their
//! SHA-256 digests. A failing cell is recorded and the rest proceed.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::compare::{similarity, Similarity};
use crate::config::{InputKind, OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::export::{to_dot, to_graphml, Attributes, TreeReport};
use crate::ingest::{apply_chain, log_returns_with, ReturnOptions};
use crate::panel::{PricePanel, SeriesPanel};
use crate::rho::{rho_matrices_from, to_distance, RhoMatrix, RhoOptions, ScaleResiduals};
use crate::significance::{filter_tree, mark_significance, surrogate_thresholds, Threshold};
use crate::tree::{compare, metrics, tree_from_rho, Tree, TreeMetrics};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelSummary {
    pub n: usize,
    pub len: usize,
    pub labels: Vec<String>,
    pub transforms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeSummary {
    pub nodes: usize,
    pub edges: usize,
    pub component_sizes: Vec<usize>,
    pub max_degree: usize,
    pub max_degree_node: Option<String>,
    pub average_path_length: Option<f64>,
    pub total_distance: f64,
}

impl From<&TreeMetrics> for TreeSummary {
    fn from(m: &TreeMetrics) -> Self {
        TreeSummary {
            nodes: m.nodes,
            edges: m.edges,
            component_sizes: m.component_sizes.clone(),
            max_degree: m.max_degree,
            max_degree_node: m.max_degree_node.clone(),
            average_path_length: m.average_path_length,
            total_distance: m.total_distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub s: usize,
    pub q: f64,
    pub status: &'static str,
    pub error: Option<String>,
    pub tau: Option<f64>,
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub rho_mean: Option<f64>,
    pub tree: Option<TreeSummary>,
    pub filtered: Option<TreeSummary>,
    pub artifacts: Vec<Artifact>,
}

impl CellRecord {
    fn failed(s: usize, q: f64, err: &Error) -> Self {
        CellRecord {
            s,
            q,
            status: "error",
            error: Some(err.to_string()),
            tau: None,
            rho_min: None,
            rho_max: None,
            rho_mean: None,
            tree: None,
            filtered: None,
            artifacts: Vec::new(),
        }
    }
}

/// Edges shared by the trees of two q values at one scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QComparison {
    pub s: usize,
    pub q_a: f64,
    pub q_b: f64,
    pub common_edges: usize,
    pub common_edges_filtered: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: serde_json::Value,
    pub path_length_convention: &'static str,
    pub panel: PanelSummary,
    pub thresholds: Vec<Threshold>,
    pub threshold_errors: Vec<String>,
    pub cells: Vec<CellRecord>,
    pub q_comparisons: Vec<QComparison>,
    pub similarity: Vec<Similarity>,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.status != "ok").count()
    }
}

struct Writer {
    root: PathBuf,
}

impl Writer {
    fn write(&self, rel: &str, bytes: &[u8]) -> Result<Artifact> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(Artifact {
            path: rel.to_owned(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        })
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Load the configured input and apply returns and transforms.
pub fn load_panel(cfg: &RunConfig) -> Result<SeriesPanel> {
    let panel = match cfg.input_kind {
        InputKind::Prices => {
            let prices = PricePanel::from_path(&cfg.input)?;
            log_returns_with(
                &prices,
                cfg.dt,
                ReturnOptions {
                    max_gap: cfg.drop_gaps_over,
                },
            )?
        }
        InputKind::Returns => {
            let r = SeriesPanel::from_path(&cfg.input)?;
            crate::ingest::aggregate_returns(&r, cfg.dt)?
        }
    };
    apply_chain(&panel, &cfg.transforms)
}

fn q_dir(s: usize, q: f64) -> String {
    format!("s{s}_q{q}")
}

fn rho_stats(rho: &RhoMatrix) -> (f64, f64, f64) {
    let n = rho.n();
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let v = rho.get(i, j);
            lo = lo.min(v);
            hi = hi.max(v);
            sum += v;
        }
    }
    (lo, hi, sum / (n * (n - 1) / 2) as f64)
}

struct CellOutput {
    record: CellRecord,
    tree: Tree,
    filtered: Option<Tree>,
}

fn run_cell(
    cfg: &RunConfig,
    out: &Writer,
    attrs: &Attributes,
    rho: &RhoMatrix,
    tau: Option<f64>,
) -> Result<CellOutput> {
    let (s, q) = (rho.scale, rho.q);
    let dir = q_dir(s, q);
    let mut artifacts = Vec::new();
    let dist = to_distance(rho)?;
    if cfg.wants(OutputFormat::Csv) {
        artifacts.push(out.write(
            &format!("{dir}/rho.csv"),
            &csv_bytes(|b| rho.matrix.write_csv(b))?,
        )?);
        artifacts.push(out.write(
            &format!("{dir}/distance.csv"),
            &csv_bytes(|b| dist.matrix.write_csv(b))?,
        )?);
    }
    let mut tree = tree_from_rho(rho)?;
    let filtered = match tau {
        Some(t) => {
            tree = mark_significance(&tree, rho, t)?;
            Some(filter_tree(&tree, rho, t)?)
        }
        None => None,
    };
    let provenance = {
        let mut p = cfg.provenance();
        p["s"] = s.into();
        p["q"] = q.into();
        p["tau"] = tau.into();
        p
    };
    let tree_metrics = metrics(&tree);
    let filtered_metrics = filtered.as_ref().map(metrics);
    let mut emit = |name: &str, t: &Tree| -> Result<()> {
        if cfg.wants(OutputFormat::Json) {
            let json = TreeReport::new(t, provenance.clone()).to_json()?;
            artifacts.push(out.write(&format!("{dir}/{name}.json"), json.as_bytes())?);
        }
        if cfg.wants(OutputFormat::Dot) {
            artifacts.push(out.write(&format!("{dir}/{name}.dot"), to_dot(t, attrs).as_bytes())?);
        }
        if cfg.wants(OutputFormat::Graphml) {
            artifacts.push(out.write(
                &format!("{dir}/{name}.graphml"),
                to_graphml(t, attrs).as_bytes(),
            )?);
        }
        Ok(())
    };
    emit("tree", &tree)?;
    if let Some(f) = &filtered {
        emit("tree_filtered", f)?;
    }
    if cfg.wants(OutputFormat::Json) {
        let m = serde_json::json!({
            "s": s,
            "q": q,
            "tau": tau,
            "tree": tree_metrics,
            "filtered": filtered_metrics,
        });
        let text = serde_json::to_string_pretty(&m)? + "\n";
        artifacts.push(out.write(&format!("{dir}/metrics.json"), text.as_bytes())?);
    }
    let (lo, hi, mean) = rho_stats(rho);
    Ok(CellOutput {
        record: CellRecord {
            s,
            q,
            status: "ok",
            error: None,
            tau,
            rho_min: Some(lo),
            rho_max: Some(hi),
            rho_mean: Some(mean),
            tree: Some((&tree_metrics).into()),
            filtered: filtered_metrics.as_ref().map(Into::into),
            artifacts,
        },
        tree,
        filtered,
    })
}

/// Run the whole grid with `cfg.parallelism` worker threads.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &RunConfig) -> Result<Manifest> {
    let panel = load_panel(cfg)?;
    if panel.n() < 2 {
        return Err(Error::invalid("the panel needs at least two series"));
    }
    for &s in &cfg.scales {
        crate::fluct::check_scale(panel.len(), s, cfg.order)?;
    }
    let attrs = match &cfg.attributes {
        Some(p) => Attributes::from_path(p)?,
        None => Attributes::default(),
    };
    let out = Writer {
        root: cfg.output_dir.clone(),
    };
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let mut top_artifacts = Vec::new();

    let mut thresholds: Vec<Threshold> = Vec::new();
    let mut threshold_errors = Vec::new();
    if cfg.n_sets >= 2 {
        for &s in &cfg.scales {
            match surrogate_thresholds(&panel, &[s], &cfg.q_values, cfg.n_sets, cfg.seed, cfg.order)
            {
                Ok(t) => thresholds.extend(t.entries),
                Err(e) => threshold_errors.push(format!("s={s}: {e}")),
            }
        }
        let table = crate::significance::ThresholdTable {
            entries: thresholds.clone(),
        };
        top_artifacts.push(out.write("thresholds.csv", &csv_bytes(|b| table.write_csv(b))?)?);
    }
    let tau_for = |s: usize, q: f64| {
        thresholds
            .iter()
            .find(|t| t.s == s && t.q == q)
            .map(|t| t.tau)
    };

    let mut cells = Vec::new();
    let mut q_comparisons = Vec::new();
    let opts = RhoOptions::with_order(cfg.order);
    for &s in &cfg.scales {
        let mats = ScaleResiduals::compute(&panel, s, cfg.order)
            .and_then(|res| rho_matrices_from(panel.labels(), &res, &cfg.q_values, opts));
        let mats = match mats {
            Ok(m) => m,
            Err(e) => {
                cells.extend(cfg.q_values.iter().map(|&q| CellRecord::failed(s, q, &e)));
                continue;
            }
        };
        let mut trees: Vec<(f64, Tree, Option<Tree>)> = Vec::new();
        for rho in &mats {
            let tau = if cfg.n_sets >= 2 {
                match tau_for(s, rho.q) {
                    Some(t) => Some(t),
                    None => {
                        let e = Error::invalid(format!("no threshold for s={s}, q={}", rho.q));
                        cells.push(CellRecord::failed(s, rho.q, &e));
                        continue;
                    }
                }
            } else {
                None
            };
            match run_cell(cfg, &out, &attrs, rho, tau) {
                Ok(c) => {
                    cells.push(c.record);
                    trees.push((rho.q, c.tree, c.filtered));
                }
                Err(e) => cells.push(CellRecord::failed(s, rho.q, &e)),
            }
        }
        for (a, (qa, ta, fa)) in trees.iter().enumerate() {
            for (qb, tb, fb) in &trees[a + 1..] {
                q_comparisons.push(QComparison {
                    s,
                    q_a: *qa,
                    q_b: *qb,
                    common_edges: compare(ta, tb).common_edges,
                    common_edges_filtered: fa
                        .as_ref()
                        .zip(fb.as_ref())
                        .map(|(x, y)| compare(x, y).common_edges),
                });
            }
        }
    }

    let mut sims = Vec::new();
    if !cfg.compare_dts.is_empty() {
        let report = similarity(
            &panel,
            &cfg.compare_dts,
            &cfg.scales,
            &cfg.q_values,
            cfg.order,
        )?;
        top_artifacts.push(out.write("similarity.csv", &csv_bytes(|b| report.write_csv(b))?)?);
        sims = report.entries;
    }

    let manifest = Manifest {
        config_hash: cfg.hash(),
        config: hashed_config_json(cfg),
        path_length_convention: crate::tree::PATH_LENGTH_CONVENTION,
        panel: PanelSummary {
            n: panel.n(),
            len: panel.len(),
            labels: panel.labels().to_vec(),
            transforms: panel.meta().transforms.clone(),
        },
        thresholds,
        threshold_errors,
        cells,
        q_comparisons,
        similarity: sims,
        artifacts: top_artifacts,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    let path = cfg.output_dir.join("manifest.json");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn hashed_config_json(cfg: &RunConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        for key in ["input", "output_dir", "parallelism", "attributes"] {
            obj.remove(key);
        }
    }
    v
}

/// SHA-256 of a file's bytes.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
