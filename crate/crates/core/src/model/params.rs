use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Gate, GnnConfig, Mode, ModelError};
use crate::tensor::DenseMatrix;

/// GRU block acting on one message; hidden size is the layer output width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gru<T> {
    /// Maps `h_u^(l-1)` to the layer width when the widths differ.
    pub proj: Option<T>,
    pub w_z: T,
    pub u_z: T,
    pub b_z: T,
    pub w_r: T,
    pub u_r: T,
    pub b_r: T,
    pub w_n: T,
    pub u_n: T,
    pub b_n: T,
    pub b_hn: T,
}

/// Parameters of one message-passing layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer<T> {
    /// `W0`, applied to the node's own representation.
    pub w_self: T,
    /// `W1`, the message transform (Type I).
    pub w_neighbor: Option<T>,
    /// Edge embedder `f(e) = e·A + B`, stored already reshaped (Type II).
    pub embed_weight: Option<T>,
    pub embed_bias: Option<T>,
    pub gru: Option<Gru<T>>,
}

/// Classifier head `softmax(W_c h + b_c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head<T> {
    pub weight: T,
    pub bias: T,
}

impl<T> Gru<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        if let Some(p) = &self.proj {
            out.push((format!("{prefix}.proj"), p));
        }
        for (name, v) in [
            ("w_z", &self.w_z),
            ("u_z", &self.u_z),
            ("b_z", &self.b_z),
            ("w_r", &self.w_r),
            ("u_r", &self.u_r),
            ("b_r", &self.b_r),
            ("w_n", &self.w_n),
            ("u_n", &self.u_n),
            ("b_n", &self.b_n),
            ("b_hn", &self.b_hn),
        ] {
            out.push((format!("{prefix}.{name}"), v));
        }
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
        if let Some(p) = &mut self.proj {
            out.push(p);
        }
        out.extend([
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_n,
            &mut self.u_n,
            &mut self.b_n,
            &mut self.b_hn,
        ]);
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Gru<U> {
        Gru {
            proj: self.proj.as_ref().map(&mut f),
            w_z: f(&self.w_z),
            u_z: f(&self.u_z),
            b_z: f(&self.b_z),
            w_r: f(&self.w_r),
            u_r: f(&self.u_r),
            b_r: f(&self.b_r),
            w_n: f(&self.w_n),
            u_n: f(&self.u_n),
            b_n: f(&self.b_n),
            b_hn: f(&self.b_hn),
        }
    }
}

impl<T> Layer<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        out.push((format!("{prefix}.w_self"), &self.w_self));
        for (name, v) in [
            ("w_neighbor", &self.w_neighbor),
            ("embed_weight", &self.embed_weight),
            ("embed_bias", &self.embed_bias),
        ] {
            if let Some(v) = v {
                out.push((format!("{prefix}.{name}"), v));
            }
        }
        if let Some(g) = &self.gru {
            g.visit(&format!("{prefix}.gru"), out);
        }
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
        out.push(&mut self.w_self);
        for v in [
            &mut self.w_neighbor,
            &mut self.embed_weight,
            &mut self.embed_bias,
        ]
        .into_iter()
        .flatten()
        {
            out.push(v);
        }
        if let Some(g) = &mut self.gru {
            g.visit_mut(out);
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Layer<U> {
        Layer {
            w_self: f(&self.w_self),
            w_neighbor: self.w_neighbor.as_ref().map(&mut f),
            embed_weight: self.embed_weight.as_ref().map(&mut f),
            embed_bias: self.embed_bias.as_ref().map(&mut f),
            gru: self.gru.as_ref().map(|g| g.map(&mut f)),
        }
    }
}

impl<T> Head<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Head<U> {
        Head {
            weight: f(&self.weight),
            bias: f(&self.bias),
        }
    }
}

/// Trained (or freshly initialized) edge-weight-aware GNN classifier.
///
/// Explanation routines only ever borrow a model immutably.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub(crate) config: GnnConfig,
    pub(crate) layers: Vec<Layer<DenseMatrix>>,
    pub(crate) head: Head<DenseMatrix>,
}

/// Parameter shapes implied by a config, in the same layout as the model.
pub(crate) fn shapes(config: &GnnConfig) -> (Vec<Layer<(usize, usize)>>, Head<(usize, usize)>) {
    let layers = config
        .layer_dims
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let type1 = config.mode == Mode::TypeI;
            Layer {
                w_self: (b, a),
                w_neighbor: type1.then_some((b, a)),
                embed_weight: (!type1).then_some((b, a)),
                embed_bias: (!type1).then_some((b, a)),
                gru: (config.gate == Gate::Gru).then(|| Gru {
                    proj: (a != b).then_some((b, a)),
                    w_z: (b, b),
                    u_z: (b, b),
                    b_z: (1, b),
                    w_r: (b, b),
                    u_r: (b, b),
                    b_r: (1, b),
                    w_n: (b, b),
                    u_n: (b, b),
                    b_n: (1, b),
                    b_hn: (1, b),
                }),
            }
        })
        .collect();
    let head = Head {
        weight: (config.class_count, config.output_dim()),
        bias: (1, config.class_count),
    };
    (layers, head)
}

fn glorot(rng: &mut ChaCha8Rng, (rows, cols): (usize, usize), fan: (usize, usize)) -> DenseMatrix {
    let bound = (6.0 / (fan.0 + fan.1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    DenseMatrix::new(rows, cols, data).expect("length matches shape")
}

impl GnnModel {
    /// Glorot-uniform weights and zero biases, seeded from `config.seed`.
    pub fn init(config: &GnnConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (layer_shapes, head_shape) = shapes(config);
        let weight = |rng: &mut ChaCha8Rng, s: (usize, usize)| glorot(rng, s, (s.1, s.0));
        let layers = layer_shapes
            .iter()
            .map(|ls| Layer {
                w_self: weight(&mut rng, ls.w_self),
                w_neighbor: ls.w_neighbor.map(|s| weight(&mut rng, s)),
                // The embedder is a 1 -> a·b affine map.
                embed_weight: ls.embed_weight.map(|s| glorot(&mut rng, s, (1, s.0 * s.1))),
                embed_bias: ls.embed_bias.map(|s| weight(&mut rng, s)),
                gru: ls.gru.as_ref().map(|g| Gru {
                    proj: g.proj.map(|s| weight(&mut rng, s)),
                    w_z: weight(&mut rng, g.w_z),
                    u_z: weight(&mut rng, g.u_z),
                    b_z: DenseMatrix::zeros(g.b_z.0, g.b_z.1),
                    w_r: weight(&mut rng, g.w_r),
                    u_r: weight(&mut rng, g.u_r),
                    b_r: DenseMatrix::zeros(g.b_r.0, g.b_r.1),
                    w_n: weight(&mut rng, g.w_n),
                    u_n: weight(&mut rng, g.u_n),
                    b_n: DenseMatrix::zeros(g.b_n.0, g.b_n.1),
                    b_hn: DenseMatrix::zeros(g.b_hn.0, g.b_hn.1),
                }),
            })
            .collect();
        let head = Head {
            weight: weight(&mut rng, head_shape.weight),
            bias: DenseMatrix::zeros(head_shape.bias.0, head_shape.bias.1),
        };
        Ok(Self {
            config: config.clone(),
            layers,
            head,
        })
    }

    pub(crate) fn from_parts(
        config: GnnConfig,
        layers: Vec<Layer<DenseMatrix>>,
        head: Head<DenseMatrix>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let model = Self {
            config,
            layers,
            head,
        };
        let (layer_shapes, head_shape) = shapes(&model.config);
        let mut expected = Vec::new();
        for (i, l) in layer_shapes.iter().enumerate() {
            l.visit(&format!("layers[{i}]"), &mut expected);
        }
        expected.push(("head.weight".to_string(), &head_shape.weight));
        expected.push(("head.bias".to_string(), &head_shape.bias));
        let actual = model.parameters();
        if actual.len() != expected.len() || model.layers.len() != layer_shapes.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "parameter set does not match config: {} vs {} tensors",
                actual.len(),
                expected.len()
            )));
        }
        for ((name, m), (ename, &shape)) in actual.iter().zip(&expected) {
            if name != ename || m.shape() != shape {
                return Err(ModelError::ShapeMismatch(format!(
                    "{name}: found {:?}, config implies {ename} {:?}",
                    m.shape(),
                    shape
                )));
            }
            if !m.is_finite() {
                return Err(ModelError::ShapeMismatch(format!(
                    "{name} contains non-finite values"
                )));
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &GnnConfig {
        &self.config
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer<DenseMatrix>] {
        &self.layers
    }

    pub fn head(&self) -> &Head<DenseMatrix> {
        &self.head
    }

    /// All parameter tensors with stable names, in a fixed order.
    pub fn parameters(&self) -> Vec<(String, &DenseMatrix)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&format!("layers[{i}]"), &mut out);
        }
        out.push(("head.weight".to_string(), &self.head.weight));
        out.push(("head.bias".to_string(), &self.head.bias));
        out
    }

    /// Mutable parameters, same order as [`GnnModel::parameters`].
    pub fn parameters_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            l.visit_mut(&mut out);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, m)| m.len()).sum()
    }
}
