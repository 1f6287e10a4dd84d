use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::graph::{ComputationalGraph, SelectedSubgraph};
use crate::model::{EdgeInput, GnnModel, Mode};
use crate::tensor::{DenseMatrix, NodeId, RowIndex, Tape};

/// Floor applied inside every logarithm of a mask objective.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMethod {
    Mmi,
    Ggd,
    #[serde(rename = "baseline")]
    BaselineSigmoid,
}

impl EdgeMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mmi => "mmi",
            Self::Ggd => "ggd",
            Self::BaselineSigmoid => "baseline",
        }
    }
}

impl std::str::FromStr for EdgeMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mmi" => Ok(Self::Mmi),
            "ggd" => Ok(Self::Ggd),
            "baseline" => Ok(Self::BaselineSigmoid),
            other => Err(format!("unknown edge method {other:?}")),
        }
    }
}

/// Hyperparameters shared by the mask optimizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskHyper {
    pub iterations: usize,
    pub learning_rate: f64,
    pub lambda_entropy: f64,
    pub lambda_size: f64,
    pub seed: u64,
}

impl Default for MaskHyper {
    fn default() -> Self {
        Self {
            iterations: 300,
            learning_rate: 0.1,
            lambda_entropy: 0.1,
            lambda_size: 0.005,
            seed: 0,
        }
    }
}

impl MaskHyper {
    fn validate(&self) -> Result<(), ExplainError> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && self.lambda_entropy >= 0.0
            && self.lambda_size >= 0.0;
        if !ok {
            return Err(ExplainError::InvalidHyper(format!("{self:?}")));
        }
        Ok(())
    }
}

/// A learned edge mask aligned with a computational graph's arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMask {
    pub values: Vec<f64>,
    pub hyper: MaskHyper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskRun {
    pub mask: EdgeMask,
    /// Objective value at each iteration, before that iteration's update.
    pub loss_history: Vec<f64>,
}

/// Per-arc importance in [0, 1], max-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSalience {
    pub values: Vec<f64>,
    pub method: EdgeMethod,
    /// Set when every raw score was zero.
    pub all_zero: bool,
}

impl EdgeSalience {
    pub fn from_scores(scores: Vec<f64>, method: EdgeMethod) -> Self {
        let (values, all_zero) = max_normalize(scores);
        Self {
            values,
            method,
            all_zero,
        }
    }
}

/// Divides by the maximum; all-nonpositive input becomes all zeros.
pub(crate) fn max_normalize(mut v: Vec<f64>) -> (Vec<f64>, bool) {
    let max = v.iter().copied().fold(0.0f64, f64::max);
    if max > 0.0 {
        for x in &mut v {
            *x = x.max(0.0) / max;
        }
        (v, false)
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
        (v, true)
    }
}

/// Seed for one node's explanation, derived from the run seed.
pub fn node_seed(global: u64, node: usize) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = global ^ (node as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ω = softmax of `M·e` over the incoming arcs of each node.
pub fn renormalize_mask(mask: &[f64], comp: &ComputationalGraph) -> Vec<f64> {
    let g = comp.graph();
    let mut omega = vec![0.0; g.arc_count()];
    for node in 0..g.node_count() {
        let inc = g.incoming(node);
        if inc.is_empty() {
            continue;
        }
        let z: Vec<f64> = inc.iter().map(|&o| mask[o] * g.arc(o).weight).collect();
        let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ex: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
        let total: f64 = ex.iter().sum();
        for (&o, v) in inc.iter().zip(ex) {
            omega[o] = v / total;
        }
    }
    omega
}

/// Shannon entropy (nats) of ω restricted to the arcs entering the center.
pub fn center_entropy(omega: &[f64], comp: &ComputationalGraph) -> f64 {
    comp.center_incoming()
        .iter()
        .map(|&o| omega[o])
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.max(LOG_FLOOR).ln())
        .sum()
}

/// Cross-entropy of the center's prediction plus the entropy and size
/// regularizers.
pub fn mask_loss(
    probs_u: &[f64],
    label: usize,
    omega: &[f64],
    mask: &[f64],
    comp: &ComputationalGraph,
    lambda_entropy: f64,
    lambda_size: f64,
) -> f64 {
    let ce = -probs_u[label].max(LOG_FLOOR).ln();
    let q = mask.len().max(1) as f64;
    ce + lambda_entropy * center_entropy(omega, comp) + lambda_size * mask.iter().sum::<f64>() / q
}

fn check_label(model: &GnnModel, label: usize) -> Result<(), ExplainError> {
    if label >= model.config().class_count {
        return Err(ExplainError::InvalidHyper(format!(
            "label {label} outside {} classes",
            model.config().class_count
        )));
    }
    Ok(())
}

/// Records `-log softmax(logits[center])[label]`.
fn center_ce(
    tape: &mut Tape,
    logits: NodeId,
    center: usize,
    label: usize,
) -> Result<NodeId, ExplainError> {
    let row = tape.gather_rows(logits, vec![center].into())?;
    let logp = tape.log_softmax_rows(row)?;
    let picked = tape.element(logp, 0, label)?;
    Ok(tape.scale(picked, -1.0)?)
}

/// Records the ω softmax of `mask·e` over each node's incoming arcs.
fn renormalize_on_tape(
    tape: &mut Tape,
    mask: NodeId,
    comp: &ComputationalGraph,
) -> Result<NodeId, ExplainError> {
    let g = comp.graph();
    let e = tape.leaf(DenseMatrix::col_vector(&g.weights()));
    let z = tape.mul(mask, e)?;
    // M·e lies in [0, max e]; no shift is needed for exp to stay finite.
    let ex = tape.exp(z)?;
    let dst = g.dst_index();
    let totals = tape.scatter_add_rows(ex, dst.clone(), g.node_count())?;
    let denom = tape.gather_rows(totals, dst)?;
    Ok(tape.div(ex, denom)?)
}

fn edge_input(model: &GnnModel, id: NodeId, normalized: bool) -> EdgeInput {
    match (model.config().mode, normalized) {
        (Mode::TypeI, true) => EdgeInput::Normalized(id),
        _ => EdgeInput::Raw(id),
    }
}

/// Learns a mask `M ∈ [0,1]^Q` by projected gradient descent on the masked
/// prediction's cross-entropy plus regularizers.
///
/// Type II models take ω as raw arc weights since they have no
/// normalization to replace.
pub fn mmi_edge_mask(
    model: &GnnModel,
    comp: &ComputationalGraph,
    label: usize,
    hyper: &MaskHyper,
) -> Result<MaskRun, ExplainError> {
    mmi_edge_mask_observed(model, comp, label, hyper, |_| {})
}

/// [`mmi_edge_mask`] calling `on_step` with the projected mask after every
/// update.
pub fn mmi_edge_mask_observed(
    model: &GnnModel,
    comp: &ComputationalGraph,
    label: usize,
    hyper: &MaskHyper,
    mut on_step: impl FnMut(&[f64]),
) -> Result<MaskRun, ExplainError> {
    hyper.validate()?;
    check_label(model, label)?;
    let g = comp.graph();
    let q = g.arc_count();
    if q == 0 {
        return Err(ExplainError::NothingToMask);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut mask: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
    let center_arcs: RowIndex = comp.center_incoming().to_vec().into();
    let mut history = Vec::with_capacity(hyper.iterations);

    for _ in 0..hyper.iterations {
        let mut tape = Tape::new();
        let params = model.bind(&mut tape);
        let x = tape.leaf(g.features().clone());
        let m = tape.leaf(DenseMatrix::col_vector(&mask));
        let omega = renormalize_on_tape(&mut tape, m, comp)?;
        let logits =
            model.logits_on_tape(&mut tape, &params, g, x, edge_input(model, omega, true))?;
        let mut loss = center_ce(&mut tape, logits, comp.center(), label)?;
        if hyper.lambda_entropy > 0.0 && !center_arcs.is_empty() {
            let w = tape.gather_rows(omega, center_arcs.clone())?;
            let lw = tape.log(w, LOG_FLOOR)?;
            let plogp = tape.mul(w, lw)?;
            let s = tape.sum(plogp)?;
            let ent = tape.scale(s, -hyper.lambda_entropy)?;
            loss = tape.add(loss, ent)?;
        }
        if hyper.lambda_size > 0.0 {
            let s = tape.sum(m)?;
            let size = tape.scale(s, hyper.lambda_size / q as f64)?;
            loss = tape.add(loss, size)?;
        }
        history.push(tape.value(loss).get(0, 0));
        let grads = tape.backward(loss)?;
        let gm = grads.get_or_zeros(m, (q, 1));
        for (v, d) in mask.iter_mut().zip(gm.as_slice()) {
            *v = (*v - hyper.learning_rate * d).clamp(0.0, 1.0);
        }
        on_step(&mask);
    }
    Ok(MaskRun {
        mask: EdgeMask {
            values: mask,
            hyper: *hyper,
        },
        loss_history: history,
    })
}

/// Extraction scores of an MMI mask: `M·e`, max-normalized.
pub fn mmi_scores(mask: &EdgeMask, comp: &ComputationalGraph) -> EdgeSalience {
    let g = comp.graph();
    let raw = mask
        .values
        .iter()
        .enumerate()
        .map(|(o, m)| m * g.arc(o).weight)
        .collect();
    EdgeSalience::from_scores(raw, EdgeMethod::Mmi)
}

/// ReLU of the true-class logit's gradient with respect to each raw arc
/// weight, max-normalized.
pub fn ggd_edge_salience(
    model: &GnnModel,
    comp: &ComputationalGraph,
    label: usize,
) -> Result<EdgeSalience, ExplainError> {
    check_label(model, label)?;
    let g = comp.graph();
    let q = g.arc_count();
    let mut tape = Tape::new();
    let params = model.bind(&mut tape);
    let x = tape.leaf(g.features().clone());
    let e = tape.leaf(DenseMatrix::col_vector(&g.weights()));
    let logits = model.logits_on_tape(&mut tape, &params, g, x, EdgeInput::Raw(e))?;
    let target = tape.element(logits, comp.center(), label)?;
    let grads = tape.backward(target)?;
    let ge = grads.get_or_zeros(e, (q, 1));
    Ok(EdgeSalience::from_scores(
        ge.as_slice().iter().map(|v| v.max(0.0)).collect(),
        EdgeMethod::Ggd,
    ))
}

/// Unconstrained mask squashed by a sigmoid and fed to the model as the raw
/// arc weights, without the softmax renormalization or the product with the
/// original weights. Regularizers are the mean mask size and the mean
/// element-wise binary entropy.
pub fn baseline_sigmoid_mask(
    model: &GnnModel,
    comp: &ComputationalGraph,
    label: usize,
    hyper: &MaskHyper,
) -> Result<(EdgeSalience, Vec<f64>), ExplainError> {
    hyper.validate()?;
    check_label(model, label)?;
    let g = comp.graph();
    let q = g.arc_count();
    if q == 0 {
        return Err(ExplainError::NothingToMask);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut logits_m: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut history = Vec::with_capacity(hyper.iterations);
    for _ in 0..hyper.iterations {
        let mut tape = Tape::new();
        let params = model.bind(&mut tape);
        let x = tape.leaf(g.features().clone());
        let m = tape.leaf(DenseMatrix::col_vector(&logits_m));
        let s = tape.sigmoid(m)?;
        let logits = model.logits_on_tape(&mut tape, &params, g, x, EdgeInput::Raw(s))?;
        let mut loss = center_ce(&mut tape, logits, comp.center(), label)?;
        if hyper.lambda_size > 0.0 {
            let total = tape.sum(s)?;
            let size = tape.scale(total, hyper.lambda_size / q as f64)?;
            loss = tape.add(loss, size)?;
        }
        if hyper.lambda_entropy > 0.0 {
            // -(s ln s + (1-s) ln(1-s))
            let ls = tape.log(s, LOG_FLOOR)?;
            let a = tape.mul(s, ls)?;
            let one_minus = tape.scale(s, -1.0)?;
            let one_minus = tape.add_scalar(one_minus, 1.0)?;
            let lo = tape.log(one_minus, LOG_FLOOR)?;
            let b = tape.mul(one_minus, lo)?;
            let ab = tape.add(a, b)?;
            let total = tape.sum(ab)?;
            let ent = tape.scale(total, -hyper.lambda_entropy / q as f64)?;
            loss = tape.add(loss, ent)?;
        }
        history.push(tape.value(loss).get(0, 0));
        let grads = tape.backward(loss)?;
        let gm = grads.get_or_zeros(m, (q, 1));
        for (v, d) in logits_m.iter_mut().zip(gm.as_slice()) {
            *v -= hyper.learning_rate * d;
        }
    }
    let scores = logits_m.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
    Ok((
        EdgeSalience::from_scores(scores, EdgeMethod::BaselineSigmoid),
        history,
    ))
}

/// One explained arc in parent ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedArc {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
    pub score: f64,
}

/// Serializable explanation of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeExplanation {
    pub node: usize,
    pub label: usize,
    pub method: EdgeMethod,
    /// Every computational-graph arc with its score, in local ordinal order.
    pub arcs: Vec<ExplainedArc>,
    /// Positions in `arcs` of the selected arcs, best first.
    pub selected: Vec<usize>,
    pub clamped: bool,
    pub loss_history: Vec<f64>,
}

impl EdgeExplanation {
    pub fn new(
        comp: &ComputationalGraph,
        label: usize,
        salience: &EdgeSalience,
        selection: &SelectedSubgraph,
        loss_history: Vec<f64>,
    ) -> Self {
        let g = comp.graph();
        let arcs = (0..g.arc_count())
            .map(|o| {
                let (src, dst) = comp.arc_pair(o);
                ExplainedArc {
                    src,
                    dst,
                    weight: g.arc(o).weight,
                    score: salience.values[o],
                }
            })
            .collect();
        Self {
            node: comp.center_parent(),
            label,
            method: salience.method,
            arcs,
            selected: selection.arcs.clone(),
            clamped: selection.clamped,
            loss_history,
        }
    }
}

/// Runs one edge method end to end and returns scores plus loss history.
pub fn explain_edges(
    model: &GnnModel,
    comp: &ComputationalGraph,
    label: usize,
    method: EdgeMethod,
    hyper: &MaskHyper,
) -> Result<(EdgeSalience, Vec<f64>), ExplainError> {
    match method {
        EdgeMethod::Mmi => {
            let run = mmi_edge_mask(model, comp, label, hyper)?;
            Ok((mmi_scores(&run.mask, comp), run.loss_history))
        }
        EdgeMethod::Ggd => Ok((ggd_edge_salience(model, comp, label)?, Vec::new())),
        EdgeMethod::BaselineSigmoid => baseline_sigmoid_mask(model, comp, label, hyper),
    }
}
