use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wgexplain_core::data::{
    export_dot, read_bundle, write_bundle, DatasetBundle, SynCompParams, SynNodeParams,
};
use wgexplain_core::explain::{
    explain_edges, ggd_feature_salience, mmi_feature_mask, node_seed, pda, rank_aggregate,
    EdgeExplanation, EdgeMethod, FeatureExplanation, FeatureHyper, FeatureImportance,
    FeatureMethod, FeaturePool, MaskHyper, RankAggregate,
};
use wgexplain_core::graph::{
    computational_graph, extract_subgraph, ComputationalGraph, SelectedSubgraph, Selection,
};
use wgexplain_core::metrics::{
    class_ged_stats, disentangle_maps, importance_mse, sample_correct_nodes, summarize_node,
    DisentangleConfig, ExplainedNode, MetricsReport, NodeSummary,
};
use wgexplain_core::model::{load_checkpoint, save_checkpoint, EpochRecord, GnnConfig, GnnModel};
use wgexplain_core::pipeline::{
    bitcoin_bundle, feature_study, ground_truth_auc, negative_arc_share, preset_config,
    syncomp_bundle, synnode_bundle, train_bundle, EdgeAuc, FeatureStudy, BITCOIN,
};

use crate::{
    Cli, Command, Dataset, DisentangleArgs, EdgeMethodArg, ExplainArgs, ExportDotArgs, FeatureArg,
    GenArgs, MaskArgs, MetricsArgs, SelectionArgs, TrainArgs,
};

pub const OUT_ENV: &str = "WGEXPLAIN_OUT";
const DEFAULT_ROOT: &str = "runs";
const RUN_META: &str = "meta.json";
const BUNDLE_DIR: &str = "bundle";
const CHECKPOINT: &str = "checkpoint.json";
/// Default arc count for explanation subgraphs.
const STUDY_TOPK: usize = 6;

/// Bad flag values that clap cannot see; exits with the usage code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Serialize)]
struct RunMeta<'a> {
    tool: &'static str,
    version: &'static str,
    run_dir: &'a Path,
    #[serde(flatten)]
    cli: &'a Cli,
    /// Settings derived from the flags and inputs (model config, hyper).
    resolved: serde_json::Value,
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("starting worker pool")?;
    }
    let out = out_dir(cli);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let resolved = match &cli.command {
        Command::Gen(a) => gen(a, cli.seed, &out)?,
        Command::Train(a) => train(a, cli.seed, &out)?,
        Command::Explain(a) => explain(a, cli.seed, &out)?,
        Command::Metrics(a) => metrics(a, cli.seed, &out)?,
        Command::Disentangle(a) => disentangle(a, cli.seed, &out)?,
        Command::ExportDot(a) => export(a, &out)?,
    };
    let meta = RunMeta {
        tool: "wgexplain",
        version: env!("CARGO_PKG_VERSION"),
        run_dir: &out,
        cli,
        resolved,
    };
    write_json(&out.join(RUN_META), &meta)?;
    log::info!("artifacts in {}", out.display());
    Ok(())
}

fn out_dir(cli: &Cli) -> PathBuf {
    if let Some(o) = &cli.out {
        return o.clone();
    }
    let root = std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT));
    let name = match cli.command {
        Command::Gen(_) => "gen",
        Command::Train(_) => "train",
        Command::Explain(_) => "explain",
        Command::Metrics(_) => "metrics",
        Command::Disentangle(_) => "disentangle",
        Command::ExportDot(_) => "export-dot",
    };
    root.join(name)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_data(dir: &Path) -> Result<DatasetBundle> {
    read_bundle(dir).with_context(|| format!("reading bundle {}", dir.display()))
}

fn load_model(path: &Path, bundle: &DatasetBundle) -> Result<GnnModel> {
    let model =
        load_checkpoint(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let c = model.config();
    let g = &bundle.graph;
    if c.input_dim() != g.feature_dim() || c.class_count != g.class_count() {
        bail!(
            "checkpoint expects {} features and {} classes, bundle has {} and {}",
            c.input_dim(),
            c.class_count,
            g.feature_dim(),
            g.class_count()
        );
    }
    Ok(model)
}

fn edge_method(m: EdgeMethodArg) -> EdgeMethod {
    match m {
        EdgeMethodArg::Mmi => EdgeMethod::Mmi,
        EdgeMethodArg::Ggd => EdgeMethod::Ggd,
        EdgeMethodArg::Baseline => EdgeMethod::BaselineSigmoid,
    }
}

fn feature_methods(f: FeatureArg) -> Vec<FeatureMethod> {
    match f {
        FeatureArg::Mmi => vec![FeatureMethod::Mmi],
        FeatureArg::Pda => vec![FeatureMethod::Pda],
        FeatureArg::Ggd => vec![FeatureMethod::Ggd],
        FeatureArg::All => FeatureMethod::ALL.to_vec(),
        FeatureArg::None => Vec::new(),
    }
}

fn mask_hyper(a: &MaskArgs, seed: u64) -> MaskHyper {
    MaskHyper {
        iterations: a.iterations,
        learning_rate: a.mask_lr,
        lambda_entropy: a.lambda_entropy,
        lambda_size: a.lambda_size,
        seed,
    }
}

fn feature_hyper(a: &MaskArgs, seed: u64) -> FeatureHyper {
    FeatureHyper {
        iterations: a.iterations,
        learning_rate: a.mask_lr,
        seed,
        ..FeatureHyper::default()
    }
}

fn selection(a: &SelectionArgs, default_k: usize) -> Result<Selection> {
    match (a.topk, a.threshold) {
        (_, Some(t)) if !(t > 0.0 && t < 1.0) => Err(usage(format!(
            "--threshold must lie strictly between 0 and 1, got {t}"
        ))),
        (_, Some(t)) => Ok(Selection::Threshold(t)),
        (Some(k), None) => Ok(Selection::TopK(k as usize)),
        (None, None) => Ok(Selection::TopK(default_k)),
    }
}

/// The class an explanation targets: the bundle label when known,
/// otherwise the model's prediction.
fn target_class(bundle: &DatasetBundle, predicted: &[usize], node: usize) -> usize {
    bundle.graph.label(node).unwrap_or(predicted[node])
}

fn gen(a: &GenArgs, seed: u64, out: &Path) -> Result<serde_json::Value> {
    let bundle = match a.dataset {
        Dataset::Syncomp => syncomp_bundle(&SynCompParams {
            attach_weight: a.w,
            noise_weight: a.noise_weight,
            seed,
            ..SynCompParams::default()
        })?,
        Dataset::Synnode => synnode_bundle(&SynNodeParams {
            seed,
            ..SynNodeParams::default()
        })?,
        Dataset::Bitcoin => {
            let input = a.input.as_ref().expect("clap requires --input for bitcoin");
            bitcoin_bundle(input, a.cutoff, seed)?
        }
    };
    let dir = out.join(BUNDLE_DIR);
    write_bundle(&dir, &bundle)?;
    let g = &bundle.graph;
    eprintln!(
        "{}: {} nodes, {} arcs, {} classes -> {}",
        bundle.meta.dataset,
        g.node_count(),
        g.arc_count(),
        g.class_count(),
        dir.display()
    );
    Ok(serde_json::json!({
        "bundle": dir,
        "nodes": g.node_count(),
        "arcs": g.arc_count(),
        "params": bundle.meta.params,
    }))
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    config: &'a GnnConfig,
    final_epoch: Option<&'a EpochRecord>,
}

fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,learning_rate,loss,train_accuracy,test_accuracy\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.learning_rate, r.loss, r.train_accuracy, r.test_accuracy
        );
    }
    out
}

fn train(a: &TrainArgs, seed: u64, out: &Path) -> Result<serde_json::Value> {
    let bundle = load_data(&a.data)?;
    let mut config = preset_config(&bundle, seed);
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    if let Some(lr) = a.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(h) = a.hidden {
        for d in config.layer_dims.iter_mut().skip(1) {
            *d = h;
        }
    }
    config
        .validate()
        .map_err(|e| usage(format!("model settings: {e}")))?;
    let outcome = train_bundle(&bundle, &config)?;
    save_checkpoint(&outcome.model, out.join(CHECKPOINT))?;
    write_text(&out.join("history.csv"), &history_csv(&outcome.history))?;
    let summary = TrainSummary {
        config: &config,
        final_epoch: outcome.final_record(),
    };
    write_json(&out.join("train.json"), &summary)?;
    if let Some(f) = outcome.final_record() {
        eprintln!(
            "train accuracy {:.3}, test accuracy {:.3}",
            f.train_accuracy, f.test_accuracy
        );
    }
    Ok(serde_json::to_value(&config)?)
}

/// Everything `explain` writes for one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationFile {
    pub node: usize,
    pub label: usize,
    /// Hops of the computational graph, i.e. the model depth.
    pub layers: usize,
    pub edge: EdgeExplanation,
    pub features: Vec<FeatureExplanation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranks: Option<RankAggregate>,
}

fn arc_labels(bundle: &DatasetBundle) -> Option<&[f64]> {
    bundle.meta.raw_arc_values.as_deref()
}

fn explain_node(
    a: &ExplainArgs,
    model: &GnnModel,
    bundle: &DatasetBundle,
    pool: Option<&FeaturePool>,
    label: usize,
    node: usize,
    select: Selection,
    seed: u64,
) -> Result<(ExplanationFile, String)> {
    let g = &bundle.graph;
    let layers = model.num_layers();
    let comp = computational_graph(g, node, layers)?;
    let s = node_seed(seed, node);
    let (salience, history) = explain_edges(
        model,
        &comp,
        label,
        edge_method(a.method),
        &mask_hyper(&a.mask, s),
    )?;
    let chosen = extract_subgraph(&comp, &salience.values, select)?;
    let mut importances: Vec<FeatureImportance> = Vec::new();
    for m in feature_methods(a.features) {
        let imp = match m {
            FeatureMethod::Ggd => ggd_feature_salience(model, &comp, label)?,
            FeatureMethod::Mmi => {
                let sub = chosen.induced(&comp)?;
                mmi_feature_mask(model, &sub, label, &feature_hyper(&a.mask, s))?.importance()
            }
            FeatureMethod::Pda => {
                let sub = chosen.induced(&comp)?;
                let pool = pool.context("PDA needs a labelled training split")?;
                pda(model, &sub, label, pool, a.mask.pda_samples, s)?
            }
        };
        importances.push(imp);
    }
    let ranks = if importances.len() > 1 {
        Some(rank_aggregate(&importances)?)
    } else {
        None
    };
    let dot = export_dot(&comp, &chosen, arc_labels(bundle));
    let file = ExplanationFile {
        node,
        label,
        layers,
        edge: EdgeExplanation::new(&comp, label, &salience, &chosen, history),
        features: importances
            .iter()
            .map(|f| FeatureExplanation::new(node, f))
            .collect(),
        ranks,
    };
    Ok((file, dot))
}

fn explain(a: &ExplainArgs, seed: u64, out: &Path) -> Result<serde_json::Value> {
    let bundle = load_data(&a.data)?;
    let model = load_model(&a.model, &bundle)?;
    let select = selection(&a.selection, STUDY_TOPK)?;
    let predicted = model.predict_classes(&bundle.graph)?;
    let pool = FeaturePool::from_graph(&bundle.graph, &bundle.meta.train).ok();
    let written: Vec<usize> = a
        .node
        .par_iter()
        .map(|&node| -> Result<usize> {
            if node >= bundle.graph.node_count() {
                bail!(
                    "node {node} is out of range ({} nodes)",
                    bundle.graph.node_count()
                );
            }
            let label = target_class(&bundle, &predicted, node);
            let (file, dot) =
                explain_node(a, &model, &bundle, pool.as_ref(), label, node, select, seed)?;
            write_json(&out.join(format!("node_{node}.json")), &file)?;
            write_text(&out.join(format!("node_{node}.dot")), &dot)?;
            if let Some(r) = &file.ranks {
                write_text(&out.join(format!("node_{node}_ranks.csv")), &r.to_csv())?;
            }
            Ok(file.edge.selected.len())
        })
        .collect::<Result<_>>()?;
    for (node, k) in a.node.iter().zip(&written) {
        eprintln!("node {node}: {k} arcs selected");
    }
    Ok(serde_json::json!({
        "selection": format!("{select:?}"),
        "mask": mask_hyper(&a.mask, seed),
        "feature": feature_hyper(&a.mask, seed),
    }))
}

/// Samples correctly classified nodes and summarizes them on the worker
/// pool; output order follows the sample.
fn summaries(
    model: &GnnModel,
    bundle: &DatasetBundle,
    config: &DisentangleConfig,
) -> Result<Vec<NodeSummary>> {
    let predicted = model.predict_classes(&bundle.graph)?;
    let groups = sample_correct_nodes(&bundle.graph, &predicted, config.per_class, config.seed)?;
    let pool = FeaturePool::from_graph(&bundle.graph, &bundle.meta.train).ok();
    let nodes: Vec<usize> = groups.into_iter().flatten().collect();
    nodes
        .par_iter()
        .map(|&u| {
            Ok(summarize_node(
                model,
                &bundle.graph,
                u,
                config,
                pool.as_ref(),
            )?)
        })
        .collect()
}

fn sample_config(
    per_class: usize,
    topk: u64,
    method: EdgeMethodArg,
    features: FeatureArg,
    mask: &MaskArgs,
    seed: u64,
) -> Result<DisentangleConfig> {
    let feature_method = match feature_methods(features).as_slice() {
        [m] => *m,
        _ => return Err(usage("choose exactly one feature method: mmi, pda or ggd")),
    };
    Ok(DisentangleConfig {
        per_class,
        top_k: topk as usize,
        edge_method: edge_method(method),
        feature_method,
        mask: mask_hyper(mask, seed),
        feature: feature_hyper(mask, seed),
        pda_samples: mask.pda_samples,
        seed,
    })
}

#[derive(Serialize)]
struct FeatureStudySummary {
    node: usize,
    label: usize,
    important_feature: usize,
    /// Repeats on which each method (mmi, pda, ggd) ranks the important
    /// feature strictly first.
    top1: [usize; 3],
    mean_mse: [f64; 3],
    mse: Vec<[f64; 3]>,
}

impl FeatureStudySummary {
    fn new(s: &FeatureStudy) -> Self {
        let mut top1 = [0; 3];
        let mut mse = Vec::new();
        for r in &s.repeats {
            let mut row = [0.0; 3];
            for (k, f) in r.methods().iter().enumerate() {
                let v = &f.values;
                let i = s.important_feature;
                if v.iter().enumerate().all(|(j, &x)| j == i || x < v[i]) {
                    top1[k] += 1;
                }
                row[k] = importance_mse(v, i);
            }
            mse.push(row);
        }
        Self {
            node: s.node,
            label: s.label,
            important_feature: s.important_feature,
            top1,
            mean_mse: s.mean_mse(),
            mse,
        }
    }
}

#[derive(Serialize)]
struct MetricsFile {
    method: EdgeMethod,
    top_k: usize,
    nodes: Vec<usize>,
    report: MetricsReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    ground_truth_auc: Vec<ClassAuc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    feature_study: Option<FeatureStudySummary>,
    /// Share of correctly classified risky users whose top-k subgraph holds
    /// a negative rating.
    #[serde(skip_serializing_if = "Option::is_none")]
    risky_negative_share: Option<f64>,
}

#[derive(Serialize)]
struct ClassAuc {
    class: usize,
    #[serde(flatten)]
    auc: EdgeAuc,
}

fn metrics(a: &MetricsArgs, seed: u64, out: &Path) -> Result<serde_json::Value> {
    let bundle = load_data(&a.data)?;
    let model = load_model(&a.model, &bundle)?;
    let config = sample_config(
        a.per_class,
        a.topk,
        a.method,
        FeatureArg::Ggd,
        &a.mask,
        seed,
    )?;
    let sums = summaries(&model, &bundle, &config)?;
    let explained: Vec<ExplainedNode> = sums.iter().map(|s| s.explained.clone()).collect();
    let report = class_ged_stats(&explained, bundle.graph.class_count(), None)?;

    let mut class_aucs = Vec::new();
    if let Some(gt) = &bundle.meta.ground_truth {
        let labels = bundle.graph.labels().unwrap_or_default();
        let classes: Vec<usize> = (0..bundle.graph.class_count())
            .filter(|&c| (0..labels.len()).any(|u| labels[u] == c && gt.arcs_for(u).is_some()))
            .collect();
        class_aucs = classes
            .par_iter()
            .map(|&class| -> Result<ClassAuc> {
                let auc =
                    ground_truth_auc(&model, &bundle, class, config.edge_method, &config.mask)?;
                Ok(ClassAuc { class, auc })
            })
            .collect::<Result<_>>()?;
    }
    let feature_study = match bundle.meta.important_feature {
        Some(_) => Some(FeatureStudySummary::new(&feature_study(
            &model,
            &bundle,
            STUDY_TOPK,
            a.repeats,
            a.mask.pda_samples,
        )?)),
        None => None,
    };
    let risky_negative_share = if bundle.meta.dataset == BITCOIN {
        negative_arc_share(&bundle, &model, &sums, 0, config.top_k)?
    } else {
        None
    };
    let file = MetricsFile {
        method: config.edge_method,
        top_k: config.top_k,
        nodes: sums.iter().map(|s| s.node).collect(),
        report,
        ground_truth_auc: class_aucs,
        feature_study,
        risky_negative_share,
    };
    write_json(&out.join("metrics.json"), &file)?;
    eprintln!(
        "consistency {:.3}, contrastivity {:.3}, sparsity {:.3}",
        file.report.consistency, file.report.contrastivity, file.report.sparsity
    );
    Ok(serde_json::to_value(&config)?)
}

fn disentangle(a: &DisentangleArgs, seed: u64, out: &Path) -> Result<serde_json::Value> {
    let bundle = load_data(&a.data)?;
    let model = load_model(&a.model, &bundle)?;
    let config = sample_config(a.per_class, a.topk, a.method, a.features, &a.mask, seed)?;
    let sums = summaries(&model, &bundle, &config)?;
    let result = disentangle_maps(&sums, bundle.graph.class_count())?;
    write_text(&out.join("distance_map.csv"), &result.distance.to_csv())?;
    write_text(&out.join("similarity_map.csv"), &result.similarity.to_csv())?;
    write_json(
        &out.join("disentangle.json"),
        &serde_json::json!({
            "nodes": sums.iter().map(|s| s.node).collect::<Vec<_>>(),
            "result": result,
        }),
    )?;
    eprintln!(
        "distance diag/off {:.3}/{:.3}, similarity diag/off {:.3}/{:.3}",
        result.distance.diagonal_mean(),
        result.distance.off_diagonal_mean(),
        result.similarity.diagonal_mean(),
        result.similarity.off_diagonal_mean()
    );
    Ok(serde_json::to_value(&config)?)
}

/// Rebuilds a selection from saved positions.
fn saved_selection(comp: &ComputationalGraph, arcs: &[usize]) -> SelectedSubgraph {
    let mut nodes = vec![comp.center()];
    for &o in arcs {
        let arc = comp.graph().arc(o);
        nodes.extend([arc.src, arc.dst]);
    }
    nodes.sort_unstable();
    nodes.dedup();
    SelectedSubgraph {
        arcs: arcs.to_vec(),
        nodes,
        clamped: false,
    }
}

fn export(a: &ExportDotArgs, out: &Path) -> Result<serde_json::Value> {
    let bundle = load_data(&a.data)?;
    let text = fs::read_to_string(&a.explanation)
        .with_context(|| format!("reading {}", a.explanation.display()))?;
    let file: ExplanationFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", a.explanation.display()))?;
    let comp = computational_graph(&bundle.graph, file.node, file.layers)?;
    if comp.arc_count() != file.edge.arcs.len() {
        bail!(
            "explanation lists {} arcs, computational graph of node {} has {}",
            file.edge.arcs.len(),
            file.node,
            comp.arc_count()
        );
    }
    let chosen = if a.selection.topk.is_some() || a.selection.threshold.is_some() {
        let scores: Vec<f64> = file.edge.arcs.iter().map(|x| x.score).collect();
        extract_subgraph(&comp, &scores, selection(&a.selection, STUDY_TOPK)?)?
    } else {
        saved_selection(&comp, &file.edge.selected)
    };
    let path = out.join(format!("node_{}.dot", file.node));
    write_text(&path, &export_dot(&comp, &chosen, arc_labels(&bundle)))?;
    Ok(serde_json::json!({ "node": file.node, "arcs": chosen.arcs.len() }))
}
