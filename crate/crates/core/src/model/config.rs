use serde::{Deserialize, Serialize};

use super::ModelError;

/// How edge weights enter message passing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Normalized edge weights scale (filter) messages.
    TypeI,
    /// Edge weights are embedded into per-arc transformation matrices.
    TypeII,
}

/// Aggregation gate applied to each incoming message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    Sum,
    Gru,
}

/// Parameter update rule. Both follow the same learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Optimizer {
    /// Plain full-batch gradient descent.
    #[default]
    Gd,
    /// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub mode: Mode,
    pub gate: Gate,
    /// `[d(0), d(1), ..., d(L)]`; `d(0)` is the input feature dimension.
    pub layer_dims: Vec<usize>,
    pub class_count: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// The learning rate halves every `halving_period` epochs.
    pub halving_period: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl GnnConfig {
    /// `L` hidden layers of width `hidden` on `input_dim` features.
    pub fn new(
        mode: Mode,
        gate: Gate,
        input_dim: usize,
        hidden: usize,
        layers: usize,
        class_count: usize,
    ) -> Self {
        let mut layer_dims = vec![input_dim];
        layer_dims.extend(std::iter::repeat_n(hidden, layers));
        Self {
            mode,
            gate,
            layer_dims,
            class_count,
            epochs: 300,
            learning_rate: 0.1,
            halving_period: 100,
            optimizer: Optimizer::Gd,
            seed: 0,
        }
    }

    /// Recipe for the synthetic datasets: Type I with the GRU gate, three
    /// layers of width 8, 300 epochs of Adam from 0.05 halving every 100.
    pub fn synthetic(input_dim: usize, class_count: usize, seed: u64) -> Self {
        Self {
            learning_rate: 0.05,
            optimizer: Optimizer::Adam,
            seed,
            ..Self::new(Mode::TypeI, Gate::Gru, input_dim, 8, 3, class_count)
        }
    }

    /// Recipe for the rating network: GRU gate, three layers of width 32,
    /// 1000 epochs of Adam from 0.05 halving every 100.
    pub fn bitcoin(input_dim: usize, class_count: usize, seed: u64) -> Self {
        Self {
            epochs: 1000,
            learning_rate: 0.05,
            optimizer: Optimizer::Adam,
            seed,
            ..Self::new(Mode::TypeI, Gate::Gru, input_dim, 32, 3, class_count)
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated config has dims")
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.halving_period == 0 {
            return self.learning_rate;
        }
        self.learning_rate * 0.5f64.powi((epoch / self.halving_period) as i32)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layer_dims.len() < 2 {
            return Err(ModelError::InvalidConfig(
                "at least one layer is required".into(),
            ));
        }
        if self.layer_dims.contains(&0) {
            return Err(ModelError::InvalidConfig(
                "layer dimensions must be positive".into(),
            ));
        }
        if self.class_count == 0 {
            return Err(ModelError::InvalidConfig(
                "class count must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ModelError::InvalidConfig(
                "learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_halves() {
        let c = GnnConfig::new(Mode::TypeI, Gate::Sum, 2, 8, 3, 4);
        assert_eq!(c.layer_dims, vec![2, 8, 8, 8]);
        assert_eq!(c.learning_rate_at(0), 0.1);
        assert_eq!(c.learning_rate_at(99), 0.1);
        assert_eq!(c.learning_rate_at(100), 0.05);
        assert_eq!(c.learning_rate_at(250), 0.025);
    }

    #[test]
    fn rejects_degenerate() {
        let mut c = GnnConfig::new(Mode::TypeI, Gate::Sum, 2, 8, 1, 2);
        c.layer_dims = vec![2];
        assert!(c.validate().is_err());
        c.layer_dims = vec![2, 0];
        assert!(c.validate().is_err());
    }
}
