use std::fs::{self, File};
use std::path::Path;
use std::process::{Command, Output};

use corrnet::estimator::{read_correlation_csv, read_labeled_matrix_csv};
use corrnet::filtergraph::{read_graph_csv, GraphMeta};
use corrnet::ingest::{load_price_panel, load_sector_table, read_returns_panel, MissingPolicy};
use corrnet::partition::load_clustering;
use serde_json::Value;

fn corrnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrnet"))
        .args(args)
        .env_remove("CORRNET_JOBS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = corrnet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, assets: &str, days: &str) {
    ok(&[
        "synth",
        "--assets",
        assets,
        "--blocks",
        "3",
        "--days",
        days,
        "--seed",
        "7",
        "--out",
        p(dir),
    ]);
}

#[test]
fn synth_outputs_load_back() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    synth(&d, "12", "300");
    let (prices, _) =
        load_price_panel(d.join("prices.csv"), "date", MissingPolicy::Reject).unwrap();
    assert_eq!(prices.dates().len(), 301);
    let returns: corrnet::ReturnsPanel64 =
        read_returns_panel(File::open(d.join("returns.csv")).unwrap(), "date").unwrap();
    assert_eq!((returns.n_days(), returns.n_assets()), (300, 12));
    let planted = load_clustering(d.join("planted.csv")).unwrap();
    assert_eq!(planted.n_clusters(), 3);
    assert_eq!(load_sector_table(d.join("sectors.csv")).unwrap().len(), 12);

    let manifest: Value =
        serde_json::from_reader(File::open(d.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["resolved"]["seed"], 7);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn compare_identical_prints_one() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    synth(&d, "12", "100");
    let x = d.join("planted.csv");
    assert_eq!(ok(&["compare", "--a", p(&x), "--b", p(&x)]).trim(), "1.0");
}

#[test]
fn filter_and_cluster_outputs_parse() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    synth(&d, "15", "400");
    let f = tmp.path().join("f");
    ok(&[
        "filter",
        "--returns",
        p(&d.join("returns.csv")),
        "--kind",
        "pmfg",
        "--out",
        p(&f),
    ]);
    let meta: GraphMeta =
        serde_json::from_reader(File::open(f.join("graph.json")).unwrap()).unwrap();
    let g: corrnet::filtergraph::FilteredGraph<f64> =
        read_graph_csv(File::open(f.join("edges.csv")).unwrap(), &meta).unwrap();
    assert_eq!(g.edges().len(), 3 * (15 - 2));
    let c: corrnet::CorrelationMatrix64 =
        read_correlation_csv(File::open(f.join("correlation.csv")).unwrap()).unwrap();
    assert_eq!(c.len(), 15);
    let z = ok(&[
        "metacorr",
        "--a",
        p(&f.join("correlation.csv")),
        "--b",
        p(&f.join("correlation.csv")),
    ]);
    assert_eq!(z.trim(), "1.0");

    let m = tmp.path().join("m");
    ok(&[
        "filter",
        "--prices",
        p(&d.join("prices.csv")),
        "--kind",
        "mst",
        "--format",
        "json",
        "--out",
        p(&m),
    ]);
    let mst: Value = serde_json::from_reader(File::open(m.join("graph.json")).unwrap()).unwrap();
    assert_eq!(mst["n_edges"], 14);
    assert!(m.join("correlation.json").exists());

    let k = tmp.path().join("k");
    ok(&[
        "cluster",
        "--prices",
        p(&d.join("prices.csv")),
        "--out",
        p(&k),
    ]);
    let found = load_clustering(k.join("clusters.csv")).unwrap();
    let meta: Value =
        serde_json::from_reader(File::open(k.join("clusters.json")).unwrap()).unwrap();
    assert_eq!(meta["n_clusters"], found.n_clusters());
    assert!(meta["bubbles"]["n_bubbles"].as_u64().unwrap() >= 1);
}

#[test]
fn rolling_emits_every_series_and_track_agrees() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    synth(&d, "18", "700");
    let r = tmp.path().join("r");
    ok(&[
        "rolling",
        "--prices",
        p(&d.join("prices.csv")),
        "--sectors",
        p(&d.join("sectors.csv")),
        "--window-length",
        "300",
        "--shift",
        "100",
        "--save-correlations",
        "--out",
        p(&r),
    ]);
    for name in [
        "n_clusters.csv",
        "persistence.csv",
        "similarity_s.csv",
        "metacorr_z.csv",
        "icb_ari_industry.csv",
        "icb_ari_supersector.csv",
        "icb_ari_sector.csv",
        "icb_ari_subsector.csv",
        "tracking_0.csv",
        "benchmark.csv",
        "clusterings/windows.csv",
        "clusterings/window_004.csv",
        "correlations/window_004.bin",
    ] {
        assert!(r.join(name).exists(), "{name}");
    }
    let (labels, s) =
        read_labeled_matrix_csv::<_, f64>(File::open(r.join("similarity_s.csv")).unwrap()).unwrap();
    assert_eq!(labels.len(), 5);
    assert!((0..5).all(|a| s[[a, a]] == 1.0));
    let n_clusters = fs::read_to_string(r.join("n_clusters.csv")).unwrap();
    assert!(n_clusters.starts_with("window,end_date,n_clusters\n0,"));
    let bin = corrnet::estimator::read_binary_matrix::<_, f64>(
        File::open(r.join("correlations/window_004.bin")).unwrap(),
    )
    .unwrap();
    assert_eq!(bin.window_id(), Some(4));

    let manifest: Value =
        serde_json::from_reader(File::open(r.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["resolved"]["theta"], 100.0);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);

    let t = tmp.path().join("t");
    ok(&[
        "track",
        "--benchmark",
        p(&r.join("benchmark.csv")),
        "--series",
        p(&r.join("clusterings")),
        "--sectors",
        p(&d.join("sectors.csv")),
        "--out",
        p(&t),
    ]);
    for entry in fs::read_dir(&t).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name.starts_with("tracking_") {
            assert_eq!(
                fs::read(t.join(&name)).unwrap(),
                fs::read(r.join(&name)).unwrap()
            );
        }
    }
}

#[test]
fn exit_codes_and_messages() {
    let out = corrnet(&[
        "rolling",
        "--prices",
        "/nonexistent/prices.csv",
        "--out",
        "/tmp/x",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/prices.csv"));

    let out = corrnet(&["rolling", "--window-length", "abc"]);
    assert_eq!(out.status.code(), Some(2));
    let out = corrnet(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    synth(&d, "12", "100");
    let out = Command::new(env!("CARGO_BIN_EXE_corrnet"))
        .args([
            "compare",
            "--a",
            p(&d.join("planted.csv")),
            "--b",
            p(&d.join("planted.csv")),
        ])
        .env("CORRNET_JOBS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_prices_follow_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("gappy.csv");
    let mut body = String::from("date,AAA,BBB,CCC,DDD,EEE\n");
    let mut state: u64 = 3;
    for day in 1..=28 {
        let mut row = format!("2021-02-{day:02}");
        for k in 0..5 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let v = 50.0 + k as f64 + (state >> 40) as f64 / (1u64 << 24) as f64;
            if k == 2 && day == 10 {
                row.push(',');
            } else {
                row.push_str(&format!(",{v:.4}"));
            }
        }
        body.push_str(&row);
        body.push('\n');
    }
    fs::write(&path, body).unwrap();
    let out_dir = tmp.path().join("o");
    let out = corrnet(&["cluster", "--prices", p(&path), "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("CCC") && err.contains("2021-02-10"), "{err}");

    ok(&[
        "cluster",
        "--prices",
        p(&path),
        "--missing",
        "ffill",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(
        load_clustering(out_dir.join("clusters.csv")).unwrap().len(),
        5
    );
    ok(&[
        "cluster",
        "--prices",
        p(&path),
        "--missing",
        "drop",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(
        load_clustering(out_dir.join("clusters.csv")).unwrap().len(),
        4
    );
}
