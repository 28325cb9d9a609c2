//! Tolerance and effort settings shared by every solver.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Linear-independence threshold on the normalized basis Gram determinant.
    pub gram_det: f64,
    /// Eigenvalue floor (relative to the largest) applied to factorization legs.
    pub eigen_floor: f64,
    /// Reconstruction tolerance for factorization certificates (relative).
    pub reconstruction: f64,
    /// Slack allowed when replaying a lower-bound witness.
    pub witness_replay: f64,
    /// Gradient-norm stopping threshold for inner optimizers.
    pub optim_gtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gram_det: 1e-10,
            eigen_floor: 1e-8,
            reconstruction: 1e-9,
            witness_replay: 1e-9,
            optim_gtol: 1e-11,
        }
    }
}

/// Effort knobs for the randomized searches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Inner iteration cap per smoothing stage.
    pub max_iter: usize,
}

impl SearchConfig {
    pub fn new(restarts: usize, seed: u64) -> Self {
        Self { restarts, seed, max_iter: 300 }
    }

    /// Seed for restart `r`: `seed XOR r`.
    pub fn restart_seed(&self, r: usize) -> u64 {
        self.seed ^ r as u64
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self::new(16, 0)
    }
}
