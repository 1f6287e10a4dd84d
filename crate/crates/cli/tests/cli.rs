use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wgexplain(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wgexplain"))
        .args(args)
        .current_dir(cwd)
        .env_remove("WGEXPLAIN_OUT")
        .output()
        .expect("binary runs")
}

fn ok(cwd: &Path, args: &[&str]) {
    let out = wgexplain(cwd, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Quick recipe: a short training run and short mask optimization.
fn pipeline(cwd: &Path) {
    ok(
        cwd,
        &[
            "--seed",
            "7",
            "--out",
            "g",
            "gen",
            "--dataset",
            "syncomp",
            "--w",
            "0.1",
        ],
    );
    ok(
        cwd,
        &[
            "--seed", "7", "--out", "t", "train", "--data", "g/bundle", "--epochs", "60",
        ],
    );
    ok(
        cwd,
        &[
            "--seed",
            "7",
            "--out",
            "e",
            "explain",
            "--data",
            "g/bundle",
            "--model",
            "t/checkpoint.json",
            "--node",
            "17,40",
            "--method",
            "mmi",
            "--topk",
            "6",
            "--features",
            "all",
            "--iterations",
            "40",
            "--pda-samples",
            "10",
        ],
    );
    ok(
        cwd,
        &[
            "--seed",
            "7",
            "--out",
            "d",
            "disentangle",
            "--data",
            "g/bundle",
            "--model",
            "t/checkpoint.json",
            "--per-class",
            "4",
            "--topk",
            "4",
            "--iterations",
            "40",
        ],
    );
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn gen_syncomp_has_65_nodes() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "--seed",
            "7",
            "--out",
            "run",
            "gen",
            "--dataset",
            "syncomp",
            "--w",
            "0.1",
        ],
    );
    let labels = fs::read_to_string(dir.path().join("run/bundle/labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 66, "header plus one row per node");
    let meta = json(dir.path().join("run/bundle/meta.json"));
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["params"]["attach_weight"], 0.1);
    assert_eq!(meta["ground_truth"]["motifs"].as_array().unwrap().len(), 10);
    let run = json(dir.path().join("run/meta.json"));
    assert_eq!(run["command"]["command"], "gen");
    assert_eq!(run["command"]["dataset"], "syncomp");
}

#[test]
fn synnode_bundle_names_its_feature() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--out", "run", "gen", "--dataset", "synnode"]);
    let meta = json(dir.path().join("run/bundle/meta.json"));
    assert_eq!(meta["important_feature"], 1);
}

#[test]
fn end_to_end_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{} differs between runs", k.display());
    }
    for f in [
        "e/node_17.json",
        "e/node_17.dot",
        "e/node_17_ranks.csv",
        "e/node_40.json",
        "d/distance_map.csv",
        "d/similarity_map.csv",
        "d/disentangle.json",
        "t/checkpoint.json",
        "t/history.csv",
    ] {
        assert!(sa.contains_key(Path::new(f)), "missing {f}");
    }

    let e = json(a.path().join("e/node_17.json"));
    assert_eq!(e["edge"]["selected"].as_array().unwrap().len(), 6);
    assert_eq!(e["features"].as_array().unwrap().len(), 3);
    let csv = fs::read_to_string(a.path().join("d/distance_map.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "4x4 map plus header");

    // the saved selection renders to the same DOT
    ok(
        a.path(),
        &[
            "--out",
            "x",
            "export-dot",
            "--data",
            "g/bundle",
            "--explanation",
            "e/node_17.json",
        ],
    );
    assert_eq!(
        fs::read(a.path().join("x/node_17.dot")).unwrap(),
        fs::read(a.path().join("e/node_17.dot")).unwrap()
    );
    ok(
        a.path(),
        &[
            "--out",
            "y",
            "export-dot",
            "--data",
            "g/bundle",
            "--explanation",
            "e/node_17.json",
            "--topk",
            "2",
        ],
    );
    let dot = fs::read_to_string(a.path().join("y/node_17.dot")).unwrap();
    assert_eq!(dot.matches("->").count(), 2);

    ok(
        a.path(),
        &[
            "--out",
            "m",
            "metrics",
            "--data",
            "g/bundle",
            "--model",
            "t/checkpoint.json",
            "--per-class",
            "3",
            "--iterations",
            "20",
        ],
    );
    let m = json(a.path().join("m/metrics.json"));
    assert!(m["report"]["contrastivity"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["ground_truth_auc"].as_array().unwrap().len(), 3);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = wgexplain(dir.path(), &["gen", "--dataset", "syncomp", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = wgexplain(dir.path(), &["gen", "--dataset", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    let out = wgexplain(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn bad_threshold_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--out", "g", "gen", "--dataset", "syncomp"]);
    ok(
        dir.path(),
        &["--out", "t", "train", "--data", "g/bundle", "--epochs", "2"],
    );
    let out = wgexplain(
        dir.path(),
        &[
            "--out",
            "e",
            "explain",
            "--data",
            "g/bundle",
            "--model",
            "t/checkpoint.json",
            "--node",
            "1",
            "--threshold",
            "1.5",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--out", "g", "gen", "--dataset", "syncomp"]);
    let out = wgexplain(
        dir.path(),
        &[
            "--out",
            "e",
            "explain",
            "--data",
            "g/bundle",
            "--model",
            "missing.json",
            "--node",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = wgexplain(dir.path(), &["--out", "t", "train", "--data", "nowhere"]);
    assert_eq!(out.status.code(), Some(2));
    let out = wgexplain(
        dir.path(),
        &[
            "--out",
            "b",
            "gen",
            "--dataset",
            "bitcoin",
            "--input",
            "absent.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_wgexplain"))
        .args(["gen", "--dataset", "synnode"])
        .current_dir(dir.path())
        .env("WGEXPLAIN_OUT", "root")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("root/gen/bundle/graph.csv").exists());
    assert!(dir.path().join("root/gen/meta.json").exists());
}

#[test]
fn bitcoin_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let rows =
        "1,2,-5,10\n2,1,3,11\n3,1,2,12\n1,3,4,13\n4,1,-2,14\n2,4,1,15\n3,4,2,16\n4,3,-1,17\n";
    fs::write(dir.path().join("r.csv"), rows).unwrap();
    ok(
        dir.path(),
        &[
            "--out",
            "b",
            "gen",
            "--dataset",
            "bitcoin",
            "--input",
            "r.csv",
        ],
    );
    let meta = json(dir.path().join("b/bundle/meta.json"));
    assert_eq!(meta["user_ids"], serde_json::json!([1, 2, 3, 4]));
    assert_eq!(meta["raw_arc_values"].as_array().unwrap().len(), 8);
}
