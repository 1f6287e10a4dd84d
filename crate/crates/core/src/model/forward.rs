use super::params::{Gru, Head, Layer};
use super::{GnnModel, Mode, ModelError};
use crate::graph::WeightedDigraph;
use crate::tensor::{softmax_rows, DenseMatrix, NodeId, Tape};

/// How arc weights are supplied to a forward pass on a tape.
#[derive(Debug, Clone, Copy)]
pub enum EdgeInput {
    /// Raw positive weights (`Q × 1`). Type I normalizes them by in-degree,
    /// Type II embeds them.
    Raw(NodeId),
    /// Already normalized per-receiving-node weights (`Q × 1`) that replace
    /// `ē` in Type I.
    Normalized(NodeId),
}

/// Model parameters recorded as tape leaves.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub layers: Vec<Layer<NodeId>>,
    pub head: Head<NodeId>,
}

impl BoundParams {
    /// Leaf ids in [`GnnModel::parameters`] order.
    pub fn ids(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        for l in &self.layers {
            let mut layer = l.clone();
            let mut v: Vec<&mut NodeId> = Vec::new();
            collect_ids(&mut layer, &mut v);
            out.extend(v.into_iter().map(|id| *id));
        }
        out.push(self.head.weight);
        out.push(self.head.bias);
        out
    }
}

fn collect_ids<'a>(layer: &'a mut Layer<NodeId>, out: &mut Vec<&'a mut NodeId>) {
    out.push(&mut layer.w_self);
    for v in [
        &mut layer.w_neighbor,
        &mut layer.embed_weight,
        &mut layer.embed_bias,
    ]
    .into_iter()
    .flatten()
    {
        out.push(v);
    }
    if let Some(g) = &mut layer.gru {
        if let Some(p) = &mut g.proj {
            out.push(p);
        }
        out.extend([
            &mut g.w_z,
            &mut g.u_z,
            &mut g.b_z,
            &mut g.w_r,
            &mut g.u_r,
            &mut g.b_r,
            &mut g.w_n,
            &mut g.u_n,
            &mut g.b_n,
            &mut g.b_hn,
        ]);
    }
}

fn gru_step(tape: &mut Tape, g: &Gru<NodeId>, x: NodeId, h: NodeId) -> Result<NodeId, ModelError> {
    let gate = |tape: &mut Tape, w: NodeId, u: NodeId, b: NodeId| -> Result<NodeId, ModelError> {
        let xw = tape.matmul_transposed(x, w)?;
        let hu = tape.matmul_transposed(h, u)?;
        let s = tape.add(xw, hu)?;
        Ok(tape.add_row_vector(s, b)?)
    };
    let z = gate(tape, g.w_z, g.u_z, g.b_z)?;
    let z = tape.sigmoid(z)?;
    let r = gate(tape, g.w_r, g.u_r, g.b_r)?;
    let r = tape.sigmoid(r)?;
    let xn = tape.matmul_transposed(x, g.w_n)?;
    let xn = tape.add_row_vector(xn, g.b_n)?;
    let hn = tape.matmul_transposed(h, g.u_n)?;
    let hn = tape.add_row_vector(hn, g.b_hn)?;
    let rhn = tape.mul(r, hn)?;
    let n = tape.add(xn, rhn)?;
    let n = tape.tanh(n)?;
    // (1 - z) ⊙ n + z ⊙ h  ==  n + z ⊙ (h - n)
    let diff = tape.sub(h, n)?;
    let zd = tape.mul(z, diff)?;
    Ok(tape.add(n, zd)?)
}

impl GnnModel {
    /// Records every parameter as a leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let layers = self
            .layers
            .iter()
            .map(|l| l.map(|m| tape.leaf(m.clone())))
            .collect();
        let head = self.head.map(|m| tape.leaf(m.clone()));
        BoundParams { layers, head }
    }

    /// Records the forward pass and returns the `N × C` pre-softmax scores.
    pub fn logits_on_tape(
        &self,
        tape: &mut Tape,
        params: &BoundParams,
        graph: &WeightedDigraph,
        features: NodeId,
        edges: EdgeInput,
    ) -> Result<NodeId, ModelError> {
        let n = graph.node_count();
        let q = graph.arc_count();
        let fshape = tape.value(features).shape();
        if fshape != (n, self.config.input_dim()) {
            return Err(ModelError::ShapeMismatch(format!(
                "features {:?}, expected ({n}, {})",
                fshape,
                self.config.input_dim()
            )));
        }
        let (edge_node, normalized) = match edges {
            EdgeInput::Raw(id) => (id, false),
            EdgeInput::Normalized(id) => (id, true),
        };
        if tape.value(edge_node).shape() != (q, 1) {
            return Err(ModelError::OverrideNotAligned {
                expected: q,
                found: tape.value(edge_node).rows(),
            });
        }
        let src = graph.src_index();
        let dst = graph.dst_index();

        let arc_weights = match (self.config.mode, normalized) {
            (Mode::TypeI, true) => edge_node,
            (Mode::TypeI, false) => {
                let totals = tape.scatter_add_rows(edge_node, dst.clone(), n)?;
                let denom = tape.gather_rows(totals, dst.clone())?;
                tape.div(edge_node, denom)?
            }
            (Mode::TypeII, true) => {
                return Err(ModelError::ModeMismatch(
                    "normalized arc weights apply to Type I only",
                ))
            }
            (Mode::TypeII, false) => edge_node,
        };

        let mut h = features;
        for layer in &params.layers {
            let messages = match self.config.mode {
                Mode::TypeI => {
                    let w1 = layer.w_neighbor.expect("Type I layer has W1");
                    let per_node = tape.matmul_transposed(h, w1)?;
                    let m = tape.gather_rows(per_node, src.clone())?;
                    tape.mul_column(m, arc_weights)?
                }
                Mode::TypeII => {
                    // f(e) h_v = e·(A h_v) + B h_v
                    let a = layer.embed_weight.expect("Type II layer has embedder");
                    let b = layer.embed_bias.expect("Type II layer has embedder");
                    let ah = tape.matmul_transposed(h, a)?;
                    let ah = tape.gather_rows(ah, src.clone())?;
                    let scaled = tape.mul_column(ah, arc_weights)?;
                    let bh = tape.matmul_transposed(h, b)?;
                    let bh = tape.gather_rows(bh, src.clone())?;
                    tape.add(scaled, bh)?
                }
            };
            let gated = match &layer.gru {
                None => messages,
                Some(g) => {
                    let hp = match g.proj {
                        Some(p) => tape.matmul_transposed(h, p)?,
                        None => h,
                    };
                    let hq = tape.gather_rows(hp, dst.clone())?;
                    gru_step(tape, g, messages, hq)?
                }
            };
            let aggregated = tape.scatter_add_rows(gated, dst.clone(), n)?;
            let own = tape.matmul_transposed(h, layer.w_self)?;
            let pre = tape.add(own, aggregated)?;
            h = tape.relu(pre)?;
        }
        let scores = tape.matmul_transposed(h, params.head.weight)?;
        Ok(tape.add_row_vector(scores, params.head.bias)?)
    }

    fn run(
        &self,
        graph: &WeightedDigraph,
        features: &DenseMatrix,
        edges: Vec<f64>,
        normalized: bool,
    ) -> Result<DenseMatrix, ModelError> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape);
        let x = tape.leaf(features.clone());
        let e = tape.leaf(DenseMatrix::col_vector(&edges));
        let input = if normalized {
            EdgeInput::Normalized(e)
        } else {
            EdgeInput::Raw(e)
        };
        let logits = self.logits_on_tape(&mut tape, &params, graph, x, input)?;
        Ok(tape.value(logits).clone())
    }

    /// Pre-softmax class scores for every node, using the graph's own
    /// weights.
    pub fn logits(
        &self,
        graph: &WeightedDigraph,
        features: &DenseMatrix,
    ) -> Result<DenseMatrix, ModelError> {
        self.run(graph, features, graph.weights(), false)
    }

    /// Type I class probabilities. `arc_weight_override`, when given,
    /// replaces the in-degree-normalized weights; it must be aligned with
    /// the arcs, nonnegative, and sum to one at every receiving node.
    pub fn forward_type1(
        &self,
        graph: &WeightedDigraph,
        features: &DenseMatrix,
        arc_weight_override: Option<&[f64]>,
    ) -> Result<DenseMatrix, ModelError> {
        if self.config.mode != Mode::TypeI {
            return Err(ModelError::ModeMismatch("model is not Type I"));
        }
        let logits = match arc_weight_override {
            None => self.run(graph, features, graph.weights(), false)?,
            Some(w) => {
                validate_override(graph, w)?;
                self.run(graph, features, w.to_vec(), true)?
            }
        };
        Ok(softmax_rows(&logits))
    }

    /// Type II class probabilities.
    pub fn forward_type2(
        &self,
        graph: &WeightedDigraph,
        features: &DenseMatrix,
    ) -> Result<DenseMatrix, ModelError> {
        if self.config.mode != Mode::TypeII {
            return Err(ModelError::ModeMismatch("model is not Type II"));
        }
        Ok(softmax_rows(&self.run(
            graph,
            features,
            graph.weights(),
            false,
        )?))
    }

    /// Class probabilities for every node of `graph` with its own features.
    pub fn predict(&self, graph: &WeightedDigraph) -> Result<DenseMatrix, ModelError> {
        Ok(softmax_rows(&self.logits(graph, graph.features())?))
    }

    /// Arg-max class per node (ties go to the smaller class id).
    pub fn predict_classes(&self, graph: &WeightedDigraph) -> Result<Vec<usize>, ModelError> {
        let p = self.predict(graph)?;
        Ok((0..p.rows()).map(|r| argmax(p.row(r))).collect())
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn validate_override(graph: &WeightedDigraph, w: &[f64]) -> Result<(), ModelError> {
    if w.len() != graph.arc_count() {
        return Err(ModelError::OverrideNotAligned {
            expected: graph.arc_count(),
            found: w.len(),
        });
    }
    if w.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
        return Err(ModelError::InvalidOverride(
            "entries must be finite and nonnegative".into(),
        ));
    }
    for node in 0..graph.node_count() {
        let incoming = graph.incoming(node);
        if incoming.is_empty() {
            continue;
        }
        let total: f64 = incoming.iter().map(|&o| w[o]).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidOverride(format!(
                "weights into node {node} sum to {total}"
            )));
        }
    }
    Ok(())
}
