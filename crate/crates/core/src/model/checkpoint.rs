use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{Gru, Head, Layer};
use super::{GnnConfig, GnnModel, ModelError};
use crate::tensor::DenseMatrix;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

type Rows = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    config: GnnConfig,
    layers: Vec<Layer<Rows>>,
    head: Head<Rows>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

fn to_matrix(name: &str, rows: &Rows, cols_hint: usize) -> Result<DenseMatrix, ModelError> {
    if rows.is_empty() {
        return Ok(DenseMatrix::zeros(0, cols_hint));
    }
    DenseMatrix::from_rows(rows).map_err(|e| ModelError::Malformed(format!("{name}: {e}")))
}

fn gru_to_matrix(g: &Gru<Rows>) -> Result<Gru<DenseMatrix>, ModelError> {
    let m = |n: &str, r: &Rows| to_matrix(n, r, 0);
    Ok(Gru {
        proj: g.proj.as_ref().map(|p| m("proj", p)).transpose()?,
        w_z: m("w_z", &g.w_z)?,
        u_z: m("u_z", &g.u_z)?,
        b_z: m("b_z", &g.b_z)?,
        w_r: m("w_r", &g.w_r)?,
        u_r: m("u_r", &g.u_r)?,
        b_r: m("b_r", &g.b_r)?,
        w_n: m("w_n", &g.w_n)?,
        u_n: m("u_n", &g.u_n)?,
        b_n: m("b_n", &g.b_n)?,
        b_hn: m("b_hn", &g.b_hn)?,
    })
}

impl GnnModel {
    /// Serializes to the versioned checkpoint JSON document.
    pub fn to_checkpoint_json(&self) -> String {
        let doc = Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: self.config.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| l.map(DenseMatrix::to_rows))
                .collect(),
            head: self.head.map(DenseMatrix::to_rows),
        };
        serde_json::to_string_pretty(&doc).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self, ModelError> {
        let probe: VersionProbe = serde_json::from_str(text).map_err(|e| {
            ModelError::Malformed(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        if probe.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(ModelError::VersionMismatch {
                found: probe.format_version,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        let doc: Checkpoint = serde_json::from_str(text).map_err(|e| {
            ModelError::Malformed(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        let layers = doc
            .layers
            .iter()
            .map(|l| {
                Ok(Layer {
                    w_self: to_matrix("w_self", &l.w_self, 0)?,
                    w_neighbor: l
                        .w_neighbor
                        .as_ref()
                        .map(|r| to_matrix("w_neighbor", r, 0))
                        .transpose()?,
                    embed_weight: l
                        .embed_weight
                        .as_ref()
                        .map(|r| to_matrix("embed_weight", r, 0))
                        .transpose()?,
                    embed_bias: l
                        .embed_bias
                        .as_ref()
                        .map(|r| to_matrix("embed_bias", r, 0))
                        .transpose()?,
                    gru: l.gru.as_ref().map(gru_to_matrix).transpose()?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let head = Head {
            weight: to_matrix("head.weight", &doc.head.weight, 0)?,
            bias: to_matrix("head.bias", &doc.head.bias, 0)?,
        };
        GnnModel::from_parts(doc.config, layers, head)
    }

    /// Fails unless this model was built for exactly `config`'s architecture.
    pub fn check_architecture(&self, config: &GnnConfig) -> Result<(), ModelError> {
        let c = &self.config;
        if c.mode != config.mode
            || c.gate != config.gate
            || c.layer_dims != config.layer_dims
            || c.class_count != config.class_count
        {
            return Err(ModelError::ShapeMismatch(format!(
                "checkpoint architecture {:?}/{:?}/{:?}/{} does not match {:?}/{:?}/{:?}/{}",
                c.mode,
                c.gate,
                c.layer_dims,
                c.class_count,
                config.mode,
                config.gate,
                config.layer_dims,
                config.class_count
            )));
        }
        Ok(())
    }
}

pub fn save_checkpoint(model: &GnnModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, model.to_checkpoint_json())?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<GnnModel, ModelError> {
    let text = fs::read_to_string(path)?;
    GnnModel::from_checkpoint_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Gate, Mode};

    fn model(gate: Gate) -> GnnModel {
        let mut c = GnnConfig::new(Mode::TypeI, gate, 3, 5, 2, 4);
        c.seed = 17;
        GnnModel::init(&c).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        for gate in [Gate::Sum, Gate::Gru] {
            let m = model(gate);
            let back = GnnModel::from_checkpoint_json(&m.to_checkpoint_json()).unwrap();
            for ((_, a), (_, b)) in m.parameters().into_iter().zip(back.parameters()) {
                let bits =
                    |x: &DenseMatrix| x.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(a), bits(b));
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let m = model(Gate::Gru);
        save_checkpoint(&m, &path).unwrap();
        assert_eq!(
            load_checkpoint(&path).unwrap().to_checkpoint_json(),
            m.to_checkpoint_json()
        );
    }

    #[test]
    fn truncated_is_malformed() {
        let text = model(Gate::Sum).to_checkpoint_json();
        let cut = &text[..text.len() / 2];
        assert!(matches!(
            GnnModel::from_checkpoint_json(cut),
            Err(ModelError::Malformed(_))
        ));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = model(Gate::Sum).to_checkpoint_json().replacen(
            "\"format_version\": 1",
            "\"format_version\": 99",
            1,
        );
        assert!(matches!(
            GnnModel::from_checkpoint_json(&text),
            Err(ModelError::VersionMismatch {
                found: 99,
                expected: 1
            })
        ));
    }

    #[test]
    fn architecture_mismatch() {
        let m = model(Gate::Sum);
        let other = GnnConfig::new(Mode::TypeI, Gate::Sum, 3, 6, 2, 4);
        assert!(matches!(
            m.check_architecture(&other),
            Err(ModelError::ShapeMismatch(_))
        ));
        assert!(m.check_architecture(m.config()).is_ok());
    }
}
