//! Spectral data for first-order systems `J u' + q u = w f` whose
//! coefficients are measures with atoms: balanced solutions, the global block
//! system, maximal and minimal relations, deficiency indices, self-adjoint
//! restrictions, canonical representatives and Green's kernels.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub mod assembly;
pub mod canonical;
pub mod error;
pub mod exec;
pub mod greens;
pub mod io;
pub mod linalg;
pub mod model;
pub mod propagate;
pub mod random;
pub mod relations;
pub mod tol;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{Atom, GapDensity, SystemSpec};
pub use propagate::{BalancedPath, RightHandSide};
pub use tol::Tolerances;
