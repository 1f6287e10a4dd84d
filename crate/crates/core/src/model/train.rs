use serde::{Deserialize, Serialize};

use super::forward::{argmax, EdgeInput};
use super::{GnnConfig, GnnModel, ModelError, Optimizer};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
use crate::graph::WeightedDigraph;
use crate::tensor::{softmax_rows, DenseMatrix, RowIndex, Tape, TensorError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GnnModel,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.history.last()
    }
}

/// Fraction of `ids` whose arg-max prediction matches the graph label.
pub fn accuracy(probs: &DenseMatrix, labels: &[usize], ids: &[usize]) -> f64 {
    if ids.is_empty() {
        return 0.0;
    }
    let correct = ids
        .iter()
        .filter(|&&i| argmax(probs.row(i)) == labels[i])
        .count();
    correct as f64 / ids.len() as f64
}

/// Full-batch gradient descent on mean cross-entropy over `train_ids`.
///
/// Each history entry describes the model *before* that epoch's update;
/// a final entry after the last update is appended so the history always
/// ends with the returned model's accuracy.
pub fn train(
    config: &GnnConfig,
    graph: &WeightedDigraph,
    train_ids: &[usize],
    test_ids: &[usize],
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    if train_ids.is_empty() {
        return Err(ModelError::EmptySplit("train"));
    }
    let labels = graph.labels().ok_or(ModelError::MissingLabels)?;
    if config.input_dim() != graph.feature_dim() {
        return Err(ModelError::ShapeMismatch(format!(
            "config input dim {} vs feature dim {}",
            config.input_dim(),
            graph.feature_dim()
        )));
    }
    if config.class_count != graph.class_count() {
        return Err(ModelError::ShapeMismatch(format!(
            "config has {} classes, graph has {}",
            config.class_count,
            graph.class_count()
        )));
    }
    let mut in_train = vec![false; graph.node_count()];
    for &i in train_ids {
        if i >= graph.node_count() {
            return Err(ModelError::ShapeMismatch(format!(
                "train id {i} out of range"
            )));
        }
        in_train[i] = true;
    }
    if let Some(&dup) = test_ids
        .iter()
        .find(|&&i| i >= graph.node_count() || in_train[i])
    {
        return Err(ModelError::OverlappingSplit(dup));
    }

    let mut model = GnnModel::init(config)?;
    let train_index: RowIndex = train_ids.to_vec().into();
    let mut onehot = DenseMatrix::zeros(train_ids.len(), config.class_count);
    for (row, &i) in train_ids.iter().enumerate() {
        onehot.set(row, labels[i], 1.0);
    }
    let scale = -1.0 / train_ids.len() as f64;
    let mut history = Vec::with_capacity(config.epochs + 1);
    let mut moments: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; model.parameters().len()];

    let divergence = |epoch: usize| {
        move |e: ModelError| match e {
            ModelError::Tensor(TensorError::NonFinite { .. }) => ModelError::Divergence { epoch },
            other => other,
        }
    };

    for epoch in 0..=config.epochs {
        let mut tape = Tape::new();
        let params = model.bind(&mut tape);
        let x = tape.leaf(graph.features().clone());
        let e = tape.leaf(DenseMatrix::col_vector(&graph.weights()));
        let step = (|| -> Result<_, ModelError> {
            let logits = model.logits_on_tape(&mut tape, &params, graph, x, EdgeInput::Raw(e))?;
            let picked = tape.gather_rows(logits, train_index.clone())?;
            let logp = tape.log_softmax_rows(picked)?;
            let target = tape.leaf(onehot.clone());
            let selected = tape.mul(logp, target)?;
            let total = tape.sum(selected)?;
            let loss = tape.scale(total, scale)?;
            Ok((logits, loss))
        })();
        let (logits, loss) = step.map_err(divergence(epoch))?;
        let loss_value = tape.value(loss).get(0, 0);
        if !loss_value.is_finite() {
            return Err(ModelError::Divergence { epoch });
        }
        let probs = softmax_rows(tape.value(logits));
        let lr = config.learning_rate_at(epoch);
        history.push(EpochRecord {
            epoch,
            learning_rate: lr,
            loss: loss_value,
            train_accuracy: accuracy(&probs, labels, train_ids),
            test_accuracy: accuracy(&probs, labels, test_ids),
        });
        if epoch == config.epochs {
            break;
        }
        let grads = tape.backward(loss)?;
        let ids = params.ids();
        let t = (epoch + 1) as i32;
        for ((param, id), state) in model
            .parameters_mut()
            .into_iter()
            .zip(ids)
            .zip(&mut moments)
        {
            let Some(g) = grads.get(id) else { continue };
            match config.optimizer {
                Optimizer::Gd => {
                    for (p, gv) in param.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *p -= lr * gv;
                    }
                }
                Optimizer::Adam => {
                    let (m, v) =
                        state.get_or_insert_with(|| (vec![0.0; g.len()], vec![0.0; g.len()]));
                    let c1 = 1.0 - ADAM_BETA1.powi(t);
                    let c2 = 1.0 - ADAM_BETA2.powi(t);
                    for (((p, &gv), m), v) in param
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice())
                        .zip(m)
                        .zip(v)
                    {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * gv;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * gv * gv;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        if model.parameters().iter().any(|(_, m)| !m.is_finite()) {
            return Err(ModelError::Divergence { epoch });
        }
    }
    Ok(TrainOutcome { model, history })
}
