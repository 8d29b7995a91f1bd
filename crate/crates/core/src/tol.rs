use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by every stage of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Hermiticity and positivity checks, relative to the matrix norm.
    pub sym: f64,
    /// Determinant magnitude, relative to the Hadamard bound.
    pub det: f64,
    /// Singular values below `rank * sigma_max` count as zero.
    pub rank: f64,
    /// Minimum distance of a generic parameter from any finite bad set.
    pub gap: f64,
    pub max_tries: usize,
    pub exp: f64,
    /// Support detection, relative to path magnitude.
    pub supp: f64,
    /// Consistency of linear systems, relative to `|B||x| + |F|`.
    pub lin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sym: 1e-12,
            det: 1e-10,
            rank: 1e-10,
            gap: 1e-6,
            max_tries: 1000,
            exp: 1e-12,
            supp: 1e-10,
            lin: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn with_rank(mut self, rank: f64) -> Self {
        self.rank = rank;
        self
    }
}
