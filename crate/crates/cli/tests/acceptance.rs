//! Acceptance suite: one status line per criterion.
//!
//! Criteria 1-6 are measurements of the full pipeline and report PASS/FAIL
//! without failing the test run; criterion 7 (properties and determinism)
//! must pass. Bitcoin criteria need `WGEXPLAIN_BITCOIN_CSV` pointing at the
//! public `rater,ratee,score,time` file and print SKIP otherwise.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use wgexplain_core::data::{DatasetBundle, SynCompParams, SynNodeParams};
use wgexplain_core::explain::{
    mmi_edge_mask_observed, pda, renormalize_mask, EdgeMethod, FeaturePool, MaskHyper,
};
use wgexplain_core::graph::{
    build_graph, computational_graph, in_degree_normalize, WeightedArc, WeightedDigraph,
};
use wgexplain_core::metrics::{
    class_ged_stats, disentangle_maps, ged_exact, jsd, sample_correct_nodes, summarize_node,
    DisentangleConfig, ExplainedNode, MetricsReport, SmallGraph,
};
use wgexplain_core::model::{EdgeInput, Gate, GnnConfig, GnnModel, Mode, ModelError};
use wgexplain_core::pipeline::{
    bitcoin_bundle, feature_study, ground_truth_auc, negative_arc_share, preset_config,
    summarize_sample, syncomp_bundle, synnode_bundle, train_bundle,
};
use wgexplain_core::tensor::{grad_check, DenseMatrix, TensorError};

const BITCOIN_ENV: &str = "WGEXPLAIN_BITCOIN_CSV";

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Report {
    lines: Vec<(String, Status)>,
}

impl Report {
    fn record(&mut self, id: &str, status: Status, summary: impl Display) {
        let tag = match status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        println!("[{tag}] criterion {id}: {summary}");
        self.lines.push((id.to_string(), status));
    }
}

fn detail(text: impl Display) {
    println!("         {text}");
}

fn pass_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn trained(bundle: &DatasetBundle, seed: u64) -> (GnnModel, f64, f64) {
    let out = train_bundle(bundle, &preset_config(bundle, seed)).expect("training runs");
    let f = out.final_record().expect("history").clone();
    (out.model, f.train_accuracy, f.test_accuracy)
}

fn syncomp(seed: u64) -> DatasetBundle {
    syncomp_bundle(&SynCompParams {
        attach_weight: 0.1,
        seed,
        ..SynCompParams::default()
    })
    .expect("syncomp")
}

fn synnode(seed: u64) -> DatasetBundle {
    synnode_bundle(&SynNodeParams {
        seed,
        ..SynNodeParams::default()
    })
    .expect("synnode")
}

// ---------------------------------------------------------------- 1

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    let bundle = syncomp(0);
    let (model, _, _) = trained(&bundle, 0);
    let hyper = MaskHyper::default();
    let auc = |m| ground_truth_auc(&model, &bundle, 1, m, &hyper).expect("auc");
    let (mmi, ggd, base) = (
        auc(EdgeMethod::Mmi),
        auc(EdgeMethod::Ggd),
        auc(EdgeMethod::BaselineSigmoid),
    );
    let secs = start.elapsed().as_secs_f64();
    let ok = mmi.node_mean >= 0.88
        && ggd.node_mean >= 0.84
        && base.node_mean <= mmi.node_mean - 0.05
        && secs < 300.0;
    r.record(
        "1",
        pass_if(ok),
        format!(
            "SynComp class-1 AUC mmi {:.3} (>= 0.88), ggd {:.3} (>= 0.84), baseline {:.3} (<= mmi - 0.05), {secs:.1}s (< 300s)",
            mmi.node_mean, ggd.node_mean, base.node_mean
        ),
    );
    detail(format!(
        "pooled AUC mmi {:.3}, ggd {:.3}, baseline {:.3} over {} nodes",
        mmi.pooled,
        ggd.pooled,
        base.pooled,
        mmi.per_node.len()
    ));
}

// ---------------------------------------------------------------- 2

fn criterion_2(r: &mut Report) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for seed in 0..5 {
        let (_, a, b) = trained(&syncomp(seed), seed);
        train.push(a);
        test.push(b);
    }
    let mean_test = test.iter().sum::<f64>() / 5.0;
    let ok = train.iter().all(|&a| a == 1.0) && test.iter().all(|&a| a >= 0.90);
    r.record(
        "2",
        pass_if(ok),
        format!("SynComp accuracy per seed 0-4: train {train:.3?} (each 1.00), test {test:.3?} (each >= 0.90)"),
    );
    detail(format!("mean test {mean_test:.3}"));
}

// ---------------------------------------------------------------- 3

fn criterion_3(r: &mut Report) {
    let bundle = synnode(0);
    let (model, _, _) = trained(&bundle, 0);
    let study = feature_study(&model, &bundle, 6, 10, 100).expect("feature study");
    let i = study.important_feature;
    let mut top1 = [0usize; 3];
    let mut ordered = 0;
    for rep in &study.repeats {
        let mse: Vec<f64> = rep
            .methods()
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let v = &f.values;
                if v.iter().enumerate().all(|(j, &x)| j == i || x < v[i]) {
                    top1[k] += 1;
                }
                wgexplain_core::metrics::importance_mse(v, i)
            })
            .collect();
        if mse[2] < mse[0] && mse[2] < mse[1] {
            ordered += 1;
        }
    }
    let [mmi, pda, ggd] = study.mean_mse();
    let within = |v: f64, lo: f64, hi: f64| (lo..=hi).contains(&v);
    let ok = top1 == [10, 10, 10]
        && ordered >= 8
        && within(ggd, 0.10, 0.25)
        && within(mmi, 0.20, 0.40)
        && within(pda, 0.20, 0.40);
    r.record(
        "3",
        pass_if(ok),
        format!(
            "SynNode feature 1 first: mmi {}/10, pda {}/10, ggd {}/10 (all 10); GGD lowest MSE on {ordered}/10 (>= 8); MSE ggd {ggd:.3} [0.10,0.25], mmi {mmi:.3} [0.20,0.40], pda {pda:.3} [0.20,0.40]",
            top1[0], top1[1], top1[2]
        ),
    );
    detail(format!(
        "example node {} of class {}, features {:?}",
        study.node,
        study.label,
        bundle.graph.features().row(study.node)
    ));
}

// ---------------------------------------------------------------- 4

fn criterion_4(r: &mut Report) {
    let config = DisentangleConfig::default();
    let maps = |bundle: &DatasetBundle| {
        let (model, _, _) = trained(bundle, 0);
        let sums = summarize_sample(&model, bundle, &config).expect("summaries");
        disentangle_maps(&sums, bundle.graph.class_count()).expect("maps")
    };
    let comp = maps(&syncomp(0));
    let node = maps(&synnode(0));
    let (cd, co) = (
        comp.distance.diagonal_mean(),
        comp.distance.off_diagonal_mean(),
    );
    let (nd, no) = (
        node.similarity.diagonal_mean(),
        node.similarity.off_diagonal_mean(),
    );
    let (sd, so) = (
        comp.similarity.diagonal_mean(),
        comp.similarity.off_diagonal_mean(),
    );
    let ratio = sd / so;
    let checks = [cd < 0.8 * co, nd > 1.2 * no, (0.8..=1.25).contains(&ratio)];
    r.record(
        "4",
        pass_if(checks.iter().all(|&c| c)),
        format!(
            "SynComp distance diag {cd:.3} < 0.8 x off {co:.3}: {}; SynNode similarity diag {nd:.3} > 1.2 x off {no:.3}: {}; SynComp similarity diag/off {ratio:.3} in [0.8, 1.25]: {}",
            checks[0], checks[1], checks[2]
        ),
    );
    detail(format!(
        "SynComp similarity diag {sd:.3}, off {so:.3}; SynNode distance diag {:.3}, off {:.3}",
        node.distance.diagonal_mean(),
        node.distance.off_diagonal_mean()
    ));
}

// ---------------------------------------------------------------- 5, 6

fn within_30(v: f64, target: f64) -> bool {
    (v - target).abs() <= 0.3 * target
}

fn criteria_5_6(r: &mut Report) {
    let Some(path) = std::env::var_os(BITCOIN_ENV) else {
        let why = format!("{BITCOIN_ENV} not set; the rating CSV is not bundled");
        r.record("5", Status::Skip, &why);
        r.record("6", Status::Skip, &why);
        return;
    };
    let bundle = match bitcoin_bundle(&path, None, 0) {
        Ok(b) => b,
        Err(e) => {
            r.record("5", Status::Fail, format!("loading {path:?}: {e}"));
            r.record("6", Status::Fail, "no data");
            return;
        }
    };
    let (model, train_acc, test_acc) = trained(&bundle, 0);
    let mut reports: BTreeMap<&str, MetricsReport> = BTreeMap::new();
    let mut mmi_config = DisentangleConfig::default();
    for (name, method) in [("mmi", EdgeMethod::Mmi), ("ggd", EdgeMethod::Ggd)] {
        let config = DisentangleConfig {
            edge_method: method,
            ..DisentangleConfig::default()
        };
        let sums = summarize_sample(&model, &bundle, &config).expect("summaries");
        let nodes: Vec<ExplainedNode> = sums.iter().map(|s| s.explained.clone()).collect();
        reports.insert(
            name,
            class_ged_stats(&nodes, bundle.graph.class_count(), None).expect("stats"),
        );
        if method == EdgeMethod::Mmi {
            mmi_config = config;
        }
    }
    let targets = [("mmi", 1.81, 2.45, 0.132), ("ggd", 2.05, 2.60, 0.151)];
    let mut ok = (train_acc - 0.73).abs() <= 0.08 && (test_acc - 0.63).abs() <= 0.08;
    let mut parts = vec![format!(
        "accuracy train {train_acc:.3} (0.73 +- 0.08), test {test_acc:.3} (0.63 +- 0.08)"
    )];
    for (key, cons, cont, spar) in targets {
        let m = &reports[key];
        ok &= within_30(m.consistency, cons)
            && within_30(m.contrastivity, cont)
            && within_30(m.sparsity, spar)
            && m.contrastivity > m.consistency;
        parts.push(format!(
            "{key} consistency {:.3} ({cons}), contrastivity {:.3} ({cont}), sparsity {:.3} ({spar})",
            m.consistency, m.contrastivity, m.sparsity
        ));
    }
    r.record("5", pass_if(ok), parts.join("; "));

    // all correctly classified risky users
    let pred = model.predict_classes(&bundle.graph).expect("predict");
    let risky =
        sample_correct_nodes(&bundle.graph, &pred, usize::MAX, 0).expect("sample")[0].clone();
    let sums: Vec<_> = risky
        .iter()
        .map(|&u| summarize_node(&model, &bundle.graph, u, &mmi_config, None).expect("summary"))
        .collect();
    let share = negative_arc_share(&bundle, &model, &sums, 0, 4).expect("share");
    match share {
        Some(s) => r.record(
            "6",
            pass_if(s >= 0.8),
            format!(
                "{:.1}% of {} correctly classified risky users have a negative rating in the MMI top-4 (>= 80%)",
                100.0 * s,
                sums.len()
            ),
        ),
        None => r.record("6", Status::Fail, "no correctly classified risky user"),
    }
}

// ---------------------------------------------------------------- 7

fn arb_graph(min: usize, max: usize) -> impl Strategy<Value = WeightedDigraph> {
    (min..=max).prop_flat_map(|n| {
        (
            prop::collection::vec((any::<bool>(), 0.1f64..3.0), n * n),
            prop::collection::vec(-1.0f64..1.0, n * 2),
            prop::collection::vec(0usize..3, n),
        )
            .prop_map(move |(cells, x, labels)| {
                let arcs = cells
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.0)
                    .map(|(i, c)| WeightedArc::new(i / n, i % n, c.1))
                    .collect();
                build_graph(arcs, DenseMatrix::new(n, 2, x).unwrap(), Some(labels), 3).unwrap()
            })
    })
}

fn arb_model() -> impl Strategy<Value = GnnModel> {
    (0usize..4, any::<u64>()).prop_map(|(k, seed)| {
        let mode = if k < 2 { Mode::TypeI } else { Mode::TypeII };
        let gate = if k % 2 == 0 { Gate::Sum } else { Gate::Gru };
        let mut c = GnnConfig::new(mode, gate, 2, 4, 2, 3);
        c.seed = seed;
        GnnModel::init(&c).unwrap()
    })
}

fn arb_small() -> impl Strategy<Value = SmallGraph> {
    (0usize..=6).prop_flat_map(|n| {
        prop::collection::vec((prop::bool::weighted(0.35), 0.1f64..2.0), n * n).prop_map(
            move |cells| {
                let arcs = cells
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.0)
                    .map(|(i, c)| (i / n, i % n, c.1))
                    .collect();
                SmallGraph::new(n, arcs)
            },
        )
    })
}

fn ged_oracle(a: &SmallGraph, b: &SmallGraph) -> usize {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for p in perms(n - 1) {
            for at in 0..=p.len() {
                let mut q = p.clone();
                q.insert(at, n - 1);
                out.push(q);
            }
        }
        out
    }
    let n = a.node_count.max(b.node_count);
    let adj = |g: &SmallGraph| {
        let mut m = vec![false; n * n];
        for &(s, d, _) in &g.arcs {
            m[s * n + d] = true;
        }
        m
    };
    let (x, y) = (adj(a), adj(b));
    perms(n)
        .iter()
        .map(|p| {
            (0..n * n)
                .filter(|&c| x[c] != y[p[c / n] * n + p[c % n]])
                .count()
        })
        .min()
        .unwrap_or(0)
        + a.node_count.abs_diff(b.node_count)
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn check(
    runner_cases: u32,
    name: &str,
    results: &mut Vec<(String, bool)>,
    f: impl FnOnce(&mut TestRunner) -> Result<(), String>,
) {
    let mut r = runner(runner_cases);
    let out = f(&mut r);
    if let Err(e) = &out {
        detail(format!("{name}: {e}"));
    }
    results.push((format!("{name} ({runner_cases} cases)"), out.is_ok()));
}

fn tensor(e: ModelError) -> TensorError {
    match e {
        ModelError::Tensor(t) => t,
        other => panic!("{other}"),
    }
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

fn determinism() -> Result<(), String> {
    let run = |cwd: &Path| -> Result<BTreeMap<String, Vec<u8>>, String> {
        let steps: [&[&str]; 4] = [
            &["--out", "g", "gen", "--dataset", "syncomp", "--w", "0.1"],
            &["--out", "t", "train", "--data", "g/bundle"],
            &[
                "--out",
                "e",
                "explain",
                "--data",
                "g/bundle",
                "--model",
                "t/checkpoint.json",
                "--node",
                "17,30,52",
                "--topk",
                "6",
                "--features",
                "all",
            ],
            &[
                "--out",
                "d",
                "disentangle",
                "--data",
                "g/bundle",
                "--model",
                "t/checkpoint.json",
                "--per-class",
                "50",
                "--topk",
                "4",
            ],
        ];
        for args in steps {
            let out = Command::new(env!("CARGO_BIN_EXE_wgexplain"))
                .args(["--seed", "3"])
                .args(args)
                .current_dir(cwd)
                .output()
                .map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!(
                    "{args:?}: {}",
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
        }
        let mut files = BTreeMap::new();
        for dir in ["g", "g/bundle", "t", "e", "d"] {
            for entry in std::fs::read_dir(cwd.join(dir)).map_err(|e| e.to_string())? {
                let p = entry.map_err(|e| e.to_string())?.path();
                if p.is_file() {
                    let key = p.strip_prefix(cwd).unwrap().display().to_string();
                    files.insert(key, std::fs::read(&p).map_err(|e| e.to_string())?);
                }
            }
        }
        Ok(files)
    };
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (fa, fb) = (run(a.path())?, run(b.path())?);
    if fa.keys().ne(fb.keys()) {
        return Err("runs wrote different files".into());
    }
    for (k, v) in &fa {
        if v != &fb[k] {
            return Err(format!("{k} differs"));
        }
    }
    detail(format!(
        "end-to-end: {} artifacts byte-identical across two runs",
        fa.len()
    ));
    Ok(())
}

fn criterion_7(r: &mut Report) -> bool {
    let mut results = Vec::new();
    let graph_model = (
        arb_graph(2, 6),
        arb_model(),
        0usize..3,
        any::<prop::sample::Index>(),
        0usize..3,
    );

    check(60, "gradient check rel err < 1e-4", &mut results, |run| {
        run.run(&graph_model, |(g, m, slot, pick, class)| {
            let node = pick.index(g.node_count());
            if slot > 0 && g.arc_count() == 0 || slot == 2 && m.config().mode == Mode::TypeII {
                return Ok(());
            }
            let point = match slot {
                0 => g.features().clone(),
                1 => DenseMatrix::col_vector(&g.weights()),
                _ => DenseMatrix::col_vector(&in_degree_normalize(&g)),
            };
            let err = grad_check(
                |tape, p| {
                    let params = m.bind(tape);
                    let (x, e) = match slot {
                        0 => (
                            p,
                            EdgeInput::Raw(tape.leaf(DenseMatrix::col_vector(&g.weights()))),
                        ),
                        1 => (tape.leaf(g.features().clone()), EdgeInput::Raw(p)),
                        _ => (tape.leaf(g.features().clone()), EdgeInput::Normalized(p)),
                    };
                    let logits = m.logits_on_tape(tape, &params, &g, x, e).map_err(tensor)?;
                    tape.element(logits, node, class)
                },
                &point,
                1e-6,
            )
            .map_err(|e| fail(e.to_string()))?;
            if err < 1e-4 {
                Ok(())
            } else {
                Err(fail(format!("relative error {err}")))
            }
        })
        .map_err(|e| e.to_string())
    });

    check(
        30,
        "mask entries in [0,1] after every step",
        &mut results,
        |run| {
            run.run(
                &(
                    arb_graph(2, 6),
                    arb_model(),
                    any::<prop::sample::Index>(),
                    0.1f64..30.0,
                    any::<u64>(),
                ),
                |(g, m, c, lr, seed)| {
                    let comp = computational_graph(&g, c.index(g.node_count()), 2).unwrap();
                    if comp.arc_count() == 0 {
                        return Ok(());
                    }
                    let hyper = MaskHyper {
                        iterations: 30,
                        learning_rate: lr,
                        seed,
                        ..MaskHyper::default()
                    };
                    let mut ok = true;
                    mmi_edge_mask_observed(&m, &comp, 0, &hyper, |mask| {
                        ok &= mask.iter().all(|v| (0.0..=1.0).contains(v));
                    })
                    .map_err(|e| fail(e.to_string()))?;
                    if ok {
                        Ok(())
                    } else {
                        Err(fail("mask left [0,1]".into()))
                    }
                },
            )
            .map_err(|e| e.to_string())
        },
    );

    check(
        100,
        "sum of masked weights per node = 1 +- 1e-12",
        &mut results,
        |run| {
            run.run(
                &(
                    arb_graph(2, 8),
                    any::<prop::sample::Index>(),
                    prop::collection::vec(0.0f64..=1.0, 64),
                ),
                |(g, c, raw)| {
                    let comp = computational_graph(&g, c.index(g.node_count()), 3).unwrap();
                    let mask: Vec<f64> =
                        raw.iter().cycle().take(comp.arc_count()).copied().collect();
                    let omega = renormalize_mask(&mask, &comp);
                    let cg = comp.graph();
                    for n in 0..cg.node_count() {
                        let inc = cg.incoming(n);
                        if !inc.is_empty() {
                            let s: f64 = inc.iter().map(|&o| omega[o]).sum();
                            if (s - 1.0).abs() > 1e-12 {
                                return Err(fail(format!("node {n} sums to {s}")));
                            }
                        }
                    }
                    Ok(())
                },
            )
            .map_err(|e| e.to_string())
        },
    );

    check(30, "PDA scores in [0,1]", &mut results, |run| {
        run.run(
            &(
                arb_graph(3, 7),
                arb_model(),
                any::<prop::sample::Index>(),
                any::<u64>(),
            ),
            |(g, m, c, seed)| {
                let u = c.index(g.node_count());
                let comp = computational_graph(&g, u, 2).unwrap();
                let all: Vec<usize> = (0..g.node_count()).collect();
                let pool = FeaturePool::from_graph(&g, &all).unwrap();
                let p = pda(&m, &comp, g.label(u).unwrap(), &pool, 8, seed)
                    .map_err(|e| fail(e.to_string()))?;
                if p.values.iter().all(|v| (0.0..=1.0).contains(v)) {
                    Ok(())
                } else {
                    Err(fail(format!("{:?}", p.values)))
                }
            },
        )
        .map_err(|e| e.to_string())
    });

    check(
        200,
        "GED axioms and brute-force oracle, <= 6 nodes",
        &mut results,
        |run| {
            run.run(&(arb_small(), arb_small(), arb_small()), |(a, b, c)| {
                let d = |x: &SmallGraph, y: &SmallGraph| ged_exact(x, y).unwrap();
                for (x, y) in [(&a, &b), (&b, &c), (&a, &c)] {
                    let (v, o) = (d(x, y), ged_oracle(x, y));
                    if v != o || v != d(y, x) {
                        return Err(fail(format!("ged {v}, reverse {}, oracle {o}", d(y, x))));
                    }
                }
                if d(&a, &a) != 0 || d(&a, &c) > d(&a, &b) + d(&b, &c) {
                    return Err(fail("identity or triangle inequality".into()));
                }
                Ok(())
            })
            .map_err(|e| e.to_string())
        },
    );

    check(200, "JSD in [0,1] and symmetric", &mut results, |run| {
        let dist = (1usize..8).prop_flat_map(|n| {
            let v = prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], n);
            (v.clone(), v)
        });
        run.run(&dist, |(p, q)| {
            if p.iter().sum::<f64>() <= 0.0 || q.iter().sum::<f64>() <= 0.0 {
                return Ok(());
            }
            let (a, b) = (jsd(&p, &q).unwrap(), jsd(&q, &p).unwrap());
            if (0.0..=1.0).contains(&a)
                && (a - b).abs() < 1e-12
                && jsd(&p, &p).unwrap().abs() < 1e-12
            {
                Ok(())
            } else {
                Err(fail(format!("jsd {a} vs {b}")))
            }
        })
        .map_err(|e| e.to_string())
    });

    check(50, "prediction locality < 1e-9", &mut results, |run| {
        run.run(&(arb_graph(1, 8), arb_model()), |(g, m)| {
            let full = m.predict(&g).unwrap();
            for u in 0..g.node_count() {
                let comp = computational_graph(&g, u, m.num_layers()).unwrap();
                let local = m.predict(comp.graph()).unwrap();
                let diff = full
                    .row(u)
                    .iter()
                    .zip(local.row(comp.center()))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if diff >= 1e-9 {
                    return Err(fail(format!("node {u} differs by {diff}")));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });

    check(30, "checkpoint round trip bit-exact", &mut results, |run| {
        run.run(&(arb_graph(1, 6), arb_model()), |(g, m)| {
            let text = m.to_checkpoint_json();
            let back = GnnModel::from_checkpoint_json(&text).map_err(|e| fail(e.to_string()))?;
            let bits =
                |d: &DenseMatrix| d.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            let same_params = m
                .parameters()
                .iter()
                .zip(back.parameters())
                .all(|((_, a), (_, b))| bits(a) == bits(b));
            let same_out = bits(&m.logits(&g, g.features()).unwrap())
                == bits(&back.logits(&g, g.features()).unwrap());
            if same_params && same_out && back.to_checkpoint_json() == text {
                Ok(())
            } else {
                Err(fail("round trip changed bits".into()))
            }
        })
        .map_err(|e| e.to_string())
    });

    let ok = determinism();
    if let Err(e) = &ok {
        detail(format!("end-to-end determinism: {e}"));
    }
    results.push((
        "gen->train->explain->disentangle byte-identical".into(),
        ok.is_ok(),
    ));

    let passed = results.iter().filter(|r| r.1).count();
    for (name, good) in &results {
        detail(format!("{} {name}", if *good { "ok  " } else { "FAIL" }));
    }
    let all = passed == results.len();
    r.record(
        "7",
        pass_if(all),
        format!("property suites {passed}/{} passed", results.len()),
    );
    all
}

fn main() {
    let mut r = Report { lines: Vec::new() };
    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criteria_5_6(&mut r);
    let properties_ok = criterion_7(&mut r);
    let count = |s: Status| r.lines.iter().filter(|l| l.1 == s).count();
    println!(
        "acceptance: {} passed, {} failed, {} skipped",
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Skip)
    );
    if !properties_ok {
        std::process::exit(1);
    }
}
