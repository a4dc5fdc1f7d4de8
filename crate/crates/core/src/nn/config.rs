use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural and training hyperparameters of one CNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub filter_count: usize,
    pub filter_width: usize,
    pub embedding_dim: usize,
    pub fc1_units: usize,
    pub fc2_units: usize,
    pub dropout_rate: f64,
    pub class_count: usize,
    pub l2_coefficient: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            filter_count: 300,
            filter_width: 5,
            embedding_dim: 300,
            fc1_units: 1024,
            fc2_units: 256,
            dropout_rate: 0.2,
            class_count: 2,
            l2_coefficient: 1e-2,
            learning_rate: 5e-4,
            iterations: 20_000,
            batch_size: 50,
            seed: 1,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.filter_count == 0 || self.filter_width == 0 || self.embedding_dim == 0 {
            return fail("filter_count, filter_width and embedding_dim must be positive");
        }
        if self.fc1_units == 0 || self.fc2_units == 0 {
            return fail("dense layer widths must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail("dropout_rate must lie in [0, 1)");
        }
        if self.class_count < 2 {
            return fail("class_count must be at least 2");
        }
        if self.l2_coefficient < 0.0 || !self.l2_coefficient.is_finite() {
            return fail("l2_coefficient must be finite and non-negative");
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        Ok(())
    }

    /// Total learnable scalar count.
    pub fn parameter_count(&self) -> usize {
        let window = self.filter_width * self.embedding_dim;
        self.filter_count * (window + 1)
            + self.fc1_units * (self.filter_count + 1)
            + self.fc2_units * (self.fc1_units + 1)
            + self.class_count * (self.fc2_units + 1)
    }
}
