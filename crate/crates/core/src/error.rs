use thiserror::Error;

use crate::model::ValidationReport;
use crate::CMat;

/// Obstruction to solvability: vectors `v` of the left kernel with `v* F ≠ 0`.
#[derive(Debug, Clone)]
pub struct Obstruction {
    /// Orthonormal columns spanning the relevant left kernel.
    pub witness: CMat,
    /// `|v_i* F|` for each witness column.
    pub pairings: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    Invalid(Box<ValidationReport>),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("point {x} lies outside [{a}, {b}]")]
    OutOfDomain { x: f64, a: f64, b: f64 },
    #[error("the partition has no atoms")]
    EmptyPartition,
    #[error("rank of {context} depends on the tolerance (ranks {ranks:?} at tol x10, x1, x0.1)")]
    RankUnstable { context: String, ranks: [usize; 3] },
    #[error("no generic spectral parameter found after {tries} samples")]
    GenericityNotFound { tries: usize },
    #[error("right-hand side is not in the range of the block system (max pairing {max_pairing:.3e})")]
    Unsolvable { obstruction: Box<Obstruction>, max_pairing: f64 },
    #[error("rank test and orthogonality test disagree: rank test says {rank_test}, orthogonality test says {orthogonality_test}")]
    InternalDisagreement { rank_test: bool, orthogonality_test: bool },
    #[error("vector is not in the required kernel (residual {residual:.3e})")]
    NotInKernel { residual: f64 },
    #[error("operation requires a purely atomic weight, gap {gap} carries a density")]
    NotPurelyAtomic { gap: usize },
    #[error("boundary conditions are linearly dependent on T_max (rank {rank} < {count})")]
    DependentConditions { rank: usize, count: usize },
    #[error("no element of L0 realizes the projection at {location} (residual {residual:.3e})")]
    ProjectionFailed { location: String, residual: f64 },
    #[error("lambda = {re}{im:+}i is not in the resolvent set")]
    NotInResolventSet { re: f64, im: f64 },
    #[error("relation is not self-adjoint (max principal angle sine {angle:.3e})")]
    NotSelfAdjoint { angle: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Errors that signal a mathematical obstruction rather than bad input.
    pub fn is_obstruction(&self) -> bool {
        matches!(
            self,
            Error::Unsolvable { .. }
                | Error::NotInResolventSet { .. }
                | Error::RankUnstable { .. }
                | Error::InternalDisagreement { .. }
                | Error::GenericityNotFound { .. }
                | Error::DependentConditions { .. }
                | Error::ProjectionFailed { .. }
                | Error::NotInKernel { .. }
                | Error::NotSelfAdjoint { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
