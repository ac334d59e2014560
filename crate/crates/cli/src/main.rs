use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use qmst::compare::{pearson_matrix, similarity};
use qmst::config::RunConfig;
use qmst::error::{Error, ErrorClass, Result};
use qmst::export::{to_dot, to_graphml, Attributes, TreeReport};
use qmst::fluct::{dump_box_variances, DetrendConfig};
use qmst::ingest::{
    apply, log_returns_with, AmplitudeMode, ReturnOptions, TransformKind, TransformSpec,
};
use qmst::matrix::{fmt_sig, LabeledMatrix};
use qmst::panel::{PricePanel, SeriesPanel};
use qmst::rho::{
    rho_matrices, rho_matrices_from, to_distance, triangle_audit, RhoMatrix, RhoOptions,
    ScaleResiduals,
};
use qmst::significance::{filter_tree, mark_significance, surrogate_thresholds, ThresholdTable};
use qmst::synth::{
    arfima_panel, correlated_pair_panel, student_t_marginals, ArfimaParams, CorrelatedPairParams,
};
use qmst::tree::{kruskal, metrics, tree_from_rho, Tree};

#[derive(Parser)]
#[command(
    name = "qmst",
    version,
    about = "q-dependent detrended cross-correlation and minimum spanning trees"
)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, short = 'j', global = true, default_value_t = 0)]
    parallelism: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic panel.
    Synth(SynthArgs),
    /// Turn prices into returns and/or apply one randomizing transform.
    Transform(TransformArgs),
    /// Compute ρ_q matrices.
    Rho(RhoArgs),
    /// Build a q-dependent minimum spanning tree.
    Tree(TreeArgs),
    /// Count triangle-inequality violations of the ρ_q distance.
    Audit(AuditArgs),
    /// Surrogate significance thresholds.
    Thresholds(ThresholdArgs),
    /// Normalized scalar products between Pearson and ρ_q coefficient sets.
    Compare(CompareArgs),
    /// Count common edges of two tree JSON files.
    CommonEdges(CommonEdgesArgs),
    /// Run a full (s, q) grid from a TOML configuration.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Independent ARFIMA(0, d, 0) series.
    Arfima,
    /// Linearly coupled pairs y = γx + sqrt(1-γ²)η.
    Pairs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SynthKind,
    /// Number of series (arfima) or pairs (pairs).
    #[arg(long, short)]
    n: usize,
    /// Series length.
    #[arg(long = "len", short = 't')]
    len: usize,
    #[arg(long, short, default_value_t = 0.3)]
    d: f64,
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    #[arg(long, default_value_t = qmst::synth::DEFAULT_TRUNCATION)]
    truncation: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Remap each series onto Student-t marginals with this many degrees
    /// of freedom.
    #[arg(long)]
    student_t: Option<f64>,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Input holds prices; convert to log returns first.
    #[arg(long)]
    prices: bool,
    /// Return sampling interval in rows.
    #[arg(long, default_value_t = 1)]
    dt: usize,
    /// Drop returns spanning more than this many timestamp units.
    #[arg(long)]
    drop_gaps_over: Option<i64>,
    #[arg(long, short)]
    kind: Option<TransformKind>,
    /// Amplitude threshold in units of σ.
    #[arg(long)]
    sigma: Option<f64>,
    /// Compare signed returns instead of |r| with the threshold.
    #[arg(long)]
    signed: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// Series panel CSV.
    #[arg(long, short)]
    input: PathBuf,
    /// Scales.
    #[arg(
        long = "s",
        short = 's',
        num_args = 1,
        value_delimiter = ',',
        required = true
    )]
    scales: Vec<usize>,
    /// q values.
    #[arg(
        long = "q",
        short = 'q',
        num_args = 1,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    q_values: Vec<f64>,
    /// Detrending polynomial order.
    #[arg(long, short = 'm', default_value_t = 2)]
    order: usize,
}

#[derive(Args)]
struct RhoArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Output directory; one `rho_s{s}_q{q}.csv` per cell.
    #[arg(long, short, env = "QMST_OUT_DIR")]
    out_dir: PathBuf,
    /// Also write distance matrices.
    #[arg(long)]
    distance: bool,
    /// Write per-box variances to this CSV.
    #[arg(long)]
    dump_moments: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    /// Series panel CSV.
    #[arg(long, short, conflicts_with = "rho", required_unless_present = "rho")]
    input: Option<PathBuf>,
    /// Precomputed ρ matrix CSV.
    #[arg(long)]
    rho: Option<PathBuf>,
    #[arg(long = "s", short = 's')]
    scale: Option<usize>,
    #[arg(long = "q", short = 'q', default_value_t = 2.0)]
    q: f64,
    #[arg(long, short = 'm', default_value_t = 2)]
    order: usize,
    /// Significance threshold.
    #[arg(long, conflicts_with = "thresholds", allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Threshold table from `qmst thresholds`.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Node attributes CSV (label,sector,capitalization).
    #[arg(long)]
    attributes: Option<PathBuf>,
    #[arg(long, short, env = "QMST_OUT_DIR")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Table-shaped CSV: one row per s, one column per q.
    #[arg(long, short)]
    output: PathBuf,
    /// Long-form CSV with triples, violations and worst slack.
    #[arg(long)]
    details: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 50)]
    n_sets: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Pearson sampling intervals.
    #[arg(long = "dt", num_args = 1, value_delimiter = ',', required = true)]
    dts: Vec<usize>,
    #[arg(long, short)]
    output: PathBuf,
    /// Also write Pearson matrices and their MSTs here.
    #[arg(long)]
    pearson_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CommonEdgesArgs {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(long, short, env = "QMST_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Validation => 1,
        ErrorClass::Computation => 2,
        ErrorClass::Io => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.parallelism)
        .build()
        .expect("thread pool");
    let parallelism = cli.parallelism;
    match pool.install(|| dispatch(cli.command, parallelism)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}

fn dispatch(cmd: Command, parallelism: usize) -> Result<u8> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Transform(a) => transform(a),
        Command::Rho(a) => rho(a),
        Command::Tree(a) => tree(a),
        Command::Audit(a) => audit(a),
        Command::Thresholds(a) => thresholds(a),
        Command::Compare(a) => compare(a),
        Command::CommonEdges(a) => common_edges(a),
        Command::Run(a) => return run(a, parallelism),
    }
    .map(|()| 0)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_owned(),
        source: e,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut panel = match a.kind {
        SynthKind::Arfima => {
            let params = ArfimaParams {
                truncation: a.truncation,
                ..ArfimaParams::new(a.d, a.len, a.seed)
            };
            arfima_panel(a.n, &params)?
        }
        SynthKind::Pairs => correlated_pair_panel(
            a.n,
            &CorrelatedPairParams {
                gamma: a.gamma,
                len: a.len,
                seed: a.seed,
            },
        )?,
    };
    if let Some(dof) = a.student_t {
        panel = student_t_marginals(&panel, dof, qmst::rng::derive_seed(a.seed, u64::MAX))?;
    }
    panel.to_path(&a.output)?;
    info!(
        "wrote {} series of length {} to {}",
        panel.n(),
        panel.len(),
        a.output.display()
    );
    Ok(())
}

fn transform(a: TransformArgs) -> Result<()> {
    let panel = if a.prices {
        let prices = PricePanel::from_path(&a.input)?;
        log_returns_with(
            &prices,
            a.dt,
            ReturnOptions {
                max_gap: a.drop_gaps_over,
            },
        )?
    } else {
        let p = SeriesPanel::from_path(&a.input)?;
        if a.dt > 1 {
            qmst::ingest::aggregate_returns(&p, a.dt)?
        } else {
            p
        }
    };
    let panel = match a.kind {
        Some(kind) => {
            let spec = TransformSpec {
                kind,
                threshold_sigma: a.sigma,
                seed: a.seed,
                amplitude: if a.signed {
                    AmplitudeMode::Signed
                } else {
                    AmplitudeMode::Absolute
                },
            };
            apply(&panel, &spec)?
        }
        None => panel,
    };
    panel.to_path(&a.output)
}

fn cell_name(s: usize, q: f64) -> String {
    format!("s{s}_q{q}")
}

fn rho(a: RhoArgs) -> Result<()> {
    let g = &a.grid;
    let panel = SeriesPanel::from_path(&g.input)?;
    create_dir(&a.out_dir)?;
    let mut dump = Vec::new();
    for &s in &g.scales {
        let res = ScaleResiduals::compute(&panel, s, g.order)?;
        for m in rho_matrices_from(
            panel.labels(),
            &res,
            &g.q_values,
            RhoOptions::with_order(g.order),
        )? {
            m.matrix
                .to_path(a.out_dir.join(format!("rho_{}.csv", cell_name(s, m.q))))?;
            if a.distance {
                to_distance(&m)?.matrix.to_path(
                    a.out_dir
                        .join(format!("distance_{}.csv", cell_name(s, m.q))),
                )?;
            }
        }
        if a.dump_moments.is_some() {
            for &q in &g.q_values {
                let mut buf = Vec::new();
                dump_box_variances(&mut buf, panel.labels(), res.residuals(), q)?;
                let text = String::from_utf8(buf).expect("csv is utf-8");
                // keep one header
                let body = if dump.is_empty() {
                    text.as_str()
                } else {
                    text.split_once('\n').map_or("", |(_, rest)| rest)
                };
                dump.extend_from_slice(body.as_bytes());
            }
        }
    }
    if let Some(path) = &a.dump_moments {
        std::fs::write(path, &dump).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn resolve_tau(a: &TreeArgs, scale: Option<usize>) -> Result<Option<f64>> {
    if let Some(t) = a.tau {
        return Ok(Some(t));
    }
    let Some(path) = &a.thresholds else {
        return Ok(None);
    };
    let s = scale.ok_or_else(|| Error::invalid("--thresholds needs --s"))?;
    let table = ThresholdTable::from_path(path)?;
    table.get(s, a.q).map(|t| Some(t.tau)).ok_or_else(|| {
        Error::invalid(format!(
            "no threshold for s={s}, q={} in {}",
            a.q,
            path.display()
        ))
    })
}

fn tree(a: TreeArgs) -> Result<()> {
    let rho = match (&a.input, &a.rho) {
        (Some(input), _) => {
            let s = a.scale.ok_or_else(|| Error::invalid("--input needs --s"))?;
            let panel = SeriesPanel::from_path(input)?;
            rho_matrices(&panel, s, &[a.q], RhoOptions::with_order(a.order))?
                .pop()
                .expect("one q requested")
        }
        (None, Some(path)) => RhoMatrix {
            matrix: LabeledMatrix::from_path(path)?,
            scale: a.scale.unwrap_or(0),
            q: a.q,
            order: a.order,
        },
        (None, None) => unreachable!("clap requires one input"),
    };
    let mut tree = tree_from_rho(&rho)?;
    tree.scale = a.scale;
    let tau = resolve_tau(&a, a.scale)?;
    let attrs = match &a.attributes {
        Some(p) => Attributes::from_path(p)?,
        None => Attributes::default(),
    };
    create_dir(&a.out_dir)?;
    let provenance = serde_json::json!({
        "source": a.input.as_ref().or(a.rho.as_ref()).map(|p| p.display().to_string()),
        "s": a.scale,
        "q": a.q,
        "order": a.order,
        "tau": tau,
    });
    let emit = |name: &str, t: &Tree| -> Result<()> {
        write_file(
            &a.out_dir.join(format!("{name}.json")),
            &TreeReport::new(t, provenance.clone()).to_json()?,
        )?;
        write_file(&a.out_dir.join(format!("{name}.dot")), &to_dot(t, &attrs))?;
        write_file(
            &a.out_dir.join(format!("{name}.graphml")),
            &to_graphml(t, &attrs),
        )?;
        Ok(())
    };
    if let Some(t) = tau {
        tree = mark_significance(&tree, &rho, t)?;
        emit("tree", &tree)?;
        let f = filter_tree(&tree, &rho, t)?;
        emit("tree_filtered", &f)?;
        let m = metrics(&f);
        println!(
            "filtered: {} nodes, {} edges, max degree {} ({}), L={}",
            m.nodes,
            m.edges,
            m.max_degree,
            m.max_degree_node.as_deref().unwrap_or("-"),
            m.average_path_length.map_or("-".into(), |l| fmt_sig(l, 6))
        );
    } else {
        emit("tree", &tree)?;
    }
    let m = metrics(&tree);
    println!(
        "tree: {} nodes, {} edges, max degree {} ({}), L={}",
        m.nodes,
        m.edges,
        m.max_degree,
        m.max_degree_node.as_deref().unwrap_or("-"),
        m.average_path_length.map_or("-".into(), |l| fmt_sig(l, 6))
    );
    Ok(())
}

fn audit(a: AuditArgs) -> Result<()> {
    let g = &a.grid;
    let panel = SeriesPanel::from_path(&g.input)?;
    DetrendConfig {
        order: g.order,
        scales: g.scales.clone(),
        q_values: g.q_values.clone(),
    }
    .validate(panel.len(), true)?;
    let mut table = csv::Writer::from_path(&a.output)?;
    let mut header = vec!["s".to_owned()];
    header.extend(g.q_values.iter().map(|q| format!("q={q}")));
    table.write_record(&header)?;
    let mut details = match &a.details {
        Some(p) => {
            let mut w = csv::Writer::from_path(p)?;
            w.write_record(["s", "q", "triples", "violations", "worst_slack"])?;
            Some(w)
        }
        None => None,
    };
    for &s in &g.scales {
        let mut row = vec![s.to_string()];
        for m in rho_matrices(&panel, s, &g.q_values, RhoOptions::audit(g.order))? {
            let report = triangle_audit(&to_distance(&m)?)?;
            row.push(report.violations.to_string());
            if let Some(w) = details.as_mut() {
                w.write_record([
                    s.to_string(),
                    m.q.to_string(),
                    report.triples_checked.to_string(),
                    report.violations.to_string(),
                    fmt_sig(report.worst_slack, 12),
                ])?;
            }
        }
        table.write_record(&row)?;
    }
    table.flush().map_err(|e| Error::Io {
        path: a.output.clone(),
        source: e,
    })?;
    if let Some(mut w) = details {
        w.flush().map_err(|e| Error::Io {
            path: a.details.clone().unwrap_or_default(),
            source: e,
        })?;
    }
    Ok(())
}

fn thresholds(a: ThresholdArgs) -> Result<()> {
    let g = &a.grid;
    let panel = SeriesPanel::from_path(&g.input)?;
    let table = surrogate_thresholds(&panel, &g.scales, &g.q_values, a.n_sets, a.seed, g.order)?;
    table.to_path(&a.output)
}

fn compare(a: CompareArgs) -> Result<()> {
    let g = &a.grid;
    let panel = SeriesPanel::from_path(&g.input)?;
    let report = similarity(&panel, &a.dts, &g.scales, &g.q_values, g.order)?;
    report.to_path(&a.output)?;
    if let Some(dir) = &a.pearson_dir {
        create_dir(dir)?;
        for &dt in &a.dts {
            let p = pearson_matrix(&panel, dt)?;
            p.matrix.to_path(dir.join(format!("pearson_dt{dt}.csv")))?;
            let tree = kruskal(&p.to_distance()?)?;
            let provenance = serde_json::json!({ "pearson_dt": dt });
            write_file(
                &dir.join(format!("tree_dt{dt}.json")),
                &TreeReport::new(&tree, provenance).to_json()?,
            )?;
        }
    }
    Ok(())
}

fn read_edges(path: &Path) -> Result<std::collections::BTreeSet<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let edges = v["edges"]
        .as_array()
        .ok_or_else(|| Error::invalid(format!("{}: no edge list", path.display())))?;
    edges
        .iter()
        .map(|e| {
            let a = e["source"].as_str();
            let b = e["target"].as_str();
            match (a, b) {
                (Some(a), Some(b)) if a <= b => Ok((a.to_owned(), b.to_owned())),
                (Some(a), Some(b)) => Ok((b.to_owned(), a.to_owned())),
                _ => Err(Error::invalid(format!(
                    "{}: malformed edge",
                    path.display()
                ))),
            }
        })
        .collect()
}

fn common_edges(a: CommonEdgesArgs) -> Result<()> {
    let ea = read_edges(&a.a)?;
    let eb = read_edges(&a.b)?;
    println!("{}", ea.intersection(&eb).count());
    Ok(())
}

/// Exits with the computation code when any cell failed; the others are
/// still written.
fn run(a: RunArgs, parallelism: usize) -> Result<u8> {
    let mut cfg = RunConfig::from_path(&a.config)?;
    if let Some(dir) = a.out_dir {
        cfg.output_dir = dir;
    } else if cfg.output_dir.is_relative() {
        if let Some(base) = a.config.parent() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
    }
    if parallelism > 0 {
        cfg.parallelism = parallelism;
    }
    let manifest = qmst::pipeline::run_pipeline(&cfg)?;
    let failed = manifest.failed_cells();
    println!(
        "{} cells, {} failed, config {}",
        manifest.cells.len(),
        failed,
        manifest.config_hash
    );
    for c in manifest.cells.iter().filter(|c| c.status != "ok") {
        eprintln!(
            "s={} q={}: {}",
            c.s,
            c.q,
            c.error.as_deref().unwrap_or("failed")
        );
    }
    Ok(if failed > 0 {
        exit_code(ErrorClass::Computation)
    } else {
        0
    })
}
