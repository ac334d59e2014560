use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use qmst::fluct::{box_covariances, partition, PolyBasis, Residuals};
use qmst::matrix::LabeledMatrix;
use qmst::rho::{correlation_distance, DistanceMatrix};
use qmst::tree::kruskal;
use qmst::SeriesPanel;

fn qmst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmst"))
        .args(args)
        .env_remove("QMST_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_arfima(dir: &Path, n: usize, len: usize) -> std::path::PathBuf {
    let path = dir.join("panel.csv");
    let (n, len) = (n.to_string(), len.to_string());
    ok(&qmst(&[
        "synth",
        "arfima",
        "-n",
        &n,
        "--len",
        &len,
        "--seed",
        "4",
        "-o",
        p(&path),
    ]));
    path
}

fn tree_edges(path: &Path) -> BTreeSet<(String, String)> {
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            let a = e["source"].as_str().unwrap().to_owned();
            let b = e["target"].as_str().unwrap().to_owned();
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = synth_arfima(tmp.path(), 4, 500);
    let out = tmp.path().join("o");
    assert_eq!(qmst(&["--help"]).status.code(), Some(0));
    assert_eq!(qmst(&["rho", "--bogus"]).status.code(), Some(1));
    let q0 = qmst(&["rho", "-i", p(&panel), "-s", "20", "-q", "0", "-o", p(&out)]);
    assert_eq!(q0.status.code(), Some(1));
    let missing = tmp.path().join("missing.csv");
    let io = qmst(&[
        "rho",
        "-i",
        p(&missing),
        "-s",
        "20",
        "-q",
        "1",
        "-o",
        p(&out),
    ]);
    assert_eq!(io.status.code(), Some(3));

    let flat = tmp.path().join("flat.csv");
    std::fs::write(&flat, {
        let mut t = String::from("A,B\n");
        for i in 0..100 {
            t.push_str(&format!("1.5,{}\n", (i as f64 * 0.37).sin()));
        }
        t
    })
    .unwrap();
    let zero = qmst(&["rho", "-i", p(&flat), "-s", "20", "-q", "1", "-o", p(&out)]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn q2_tree_is_the_detrended_mst() {
    let tmp = tempfile::tempdir().unwrap();
    let panel_path = synth_arfima(tmp.path(), 8, 3000);
    let out = tmp.path().join("tree");
    ok(&qmst(&[
        "tree",
        "-i",
        p(&panel_path),
        "-s",
        "20",
        "-q",
        "2",
        "-o",
        p(&out),
    ]));

    // plain DCCA: mean box covariance over mean box variances
    let panel = SeriesPanel::from_path(&panel_path).unwrap();
    let part = partition(panel.len(), 20).unwrap();
    let basis = PolyBasis::new(20, 2).unwrap();
    let res: Vec<Residuals> = panel
        .series()
        .iter()
        .map(|s| Residuals::compute(s, &part, &basis))
        .collect();
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let n = panel.n();
    let corr = LabeledMatrix::from_fn(panel.labels().to_vec(), |i, j| {
        if i == j {
            1.0
        } else {
            mean(box_covariances(&res[i], &res[j]))
                / (mean(res[i].box_variances()) * mean(res[j].box_variances())).sqrt()
        }
    });
    assert_eq!(corr.n(), n);
    let d =
        DistanceMatrix::from_matrix(correlation_distance(panel.labels(), &corr).unwrap()).unwrap();
    let want = kruskal(&d).unwrap().edge_set();
    assert_eq!(tree_edges(&out.join("tree.json")), want);
    assert!(out.join("tree.dot").exists());
    assert!(out.join("tree.graphml").exists());
}

#[test]
fn tree_from_rho_csv_with_threshold_table() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = synth_arfima(tmp.path(), 6, 2000);
    let rho_dir = tmp.path().join("rho");
    ok(&qmst(&[
        "rho",
        "-i",
        p(&panel),
        "-s",
        "20",
        "-q",
        "1,4",
        "-o",
        p(&rho_dir),
    ]));
    let th = tmp.path().join("th.csv");
    ok(&qmst(&[
        "thresholds",
        "-i",
        p(&panel),
        "-s",
        "20",
        "-q",
        "1,4",
        "--n-sets",
        "4",
        "-o",
        p(&th),
    ]));
    let out = tmp.path().join("t");
    ok(&qmst(&[
        "tree",
        "--rho",
        p(&rho_dir.join("rho_s20_q4.csv")),
        "-s",
        "20",
        "-q",
        "4",
        "--thresholds",
        p(&th),
        "-o",
        p(&out),
    ]));
    let full = tree_edges(&out.join("tree.json"));
    let kept = tree_edges(&out.join("tree_filtered.json"));
    assert_eq!(full.len(), 5);
    assert!(kept.is_subset(&full));
    let ce = qmst(&[
        "common-edges",
        p(&out.join("tree.json")),
        p(&out.join("tree_filtered.json")),
    ]);
    ok(&ce);
    assert_eq!(
        String::from_utf8_lossy(&ce.stdout).trim(),
        kept.len().to_string()
    );
}

#[test]
fn audit_writes_table_shaped_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = synth_arfima(tmp.path(), 10, 4000);
    let table = tmp.path().join("audit.csv");
    let details = tmp.path().join("details.csv");
    ok(&qmst(&[
        "audit",
        "-i",
        p(&panel),
        "-s",
        "20,200",
        "-q",
        "-2,1,2",
        "-o",
        p(&table),
        "--details",
        p(&details),
    ]));
    let text = std::fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "s,q=-2,q=1,q=2");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("20,") && rows[1].ends_with(",0,0"));
    assert!(rows[2].starts_with("200,") && rows[2].ends_with(",0,0"));
    let d = std::fs::read_to_string(&details).unwrap();
    assert!(d
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("120")));
}

#[test]
fn compare_writes_table_shaped_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = tmp.path().join("pairs.csv");
    ok(&qmst(&[
        "synth",
        "pairs",
        "-n",
        "4",
        "--len",
        "3000",
        "--gamma",
        "0.6",
        "--student-t",
        "4",
        "-o",
        p(&panel),
    ]));
    let csv = tmp.path().join("p.csv");
    let pd = tmp.path().join("pearson");
    ok(&qmst(&[
        "compare",
        "-i",
        p(&panel),
        "-s",
        "20,60",
        "-q",
        "1,2,4",
        "--dt",
        "1,5",
        "-o",
        p(&csv),
        "--pearson-dir",
        p(&pd),
    ]));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "dt,s,q=1,q=2,q=4");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("1,20,"));
    assert!(pd.join("pearson_dt5.csv").exists());
    assert!(pd.join("tree_dt1.json").exists());
}

#[test]
fn transform_chain_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let prices = tmp.path().join("prices.csv");
    let mut t = String::from("timestamp,A,B\n");
    for i in 0..50 {
        t.push_str(&format!(
            "{},{},{}\n",
            i * 60,
            10.0 + (i as f64).sin(),
            20.0 + i as f64
        ));
    }
    std::fs::write(&prices, t).unwrap();
    let r = tmp.path().join("r.csv");
    ok(&qmst(&[
        "transform",
        "-i",
        p(&prices),
        "--prices",
        "-o",
        p(&r),
    ]));
    let s = tmp.path().join("s.csv");
    ok(&qmst(&[
        "transform",
        "-i",
        p(&r),
        "-k",
        "amp-shuffle-above",
        "--sigma",
        "1.0",
        "--seed",
        "3",
        "-o",
        p(&s),
    ]));
    let a = SeriesPanel::from_path(&r).unwrap();
    let b = SeriesPanel::from_path(&s).unwrap();
    assert_eq!(a.len(), 49);
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    assert_eq!(sorted(a.get(0)), sorted(b.get(0)));
    let bad = qmst(&[
        "transform",
        "-i",
        p(&r),
        "-k",
        "amp-shuffle-above",
        "-o",
        p(&s),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn run_honors_output_env_var() {
    let tmp = tempfile::tempdir().unwrap();
    synth_arfima(tmp.path(), 5, 2000);
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "input = \"panel.csv\"\ninput_kind = \"returns\"\nscales = [20]\nq_values = [1, 2]\nn_sets = 3\nseed = 1\n",
    )
    .unwrap();
    let out = tmp.path().join("from_env");
    let status = Command::new(env!("CARGO_BIN_EXE_qmst"))
        .args(["run", "-c", p(&cfg)])
        .env("QMST_OUT_DIR", &out)
        .output()
        .unwrap();
    ok(&status);
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 2);
    assert!(out.join("s20_q1/tree_filtered.graphml").exists());

    let again = tmp.path().join("again");
    ok(&qmst(&["run", "-c", p(&cfg), "-o", p(&again), "-j", "3"]));
    assert_eq!(
        std::fs::read_to_string(again.join("manifest.json")).unwrap(),
        manifest
    );

    std::fs::write(&cfg, "input = \"panel.csv\"\nscales = []\nq_values = [1]\n").unwrap();
    assert_eq!(
        qmst(&["run", "-c", p(&cfg), "-o", p(&again)]).status.code(),
        Some(1)
    );
}
