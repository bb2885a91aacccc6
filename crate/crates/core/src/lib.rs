//! Spectral approximation of fractional integral operators in transplanted
//! Chebyshev bases, and solvers built on it.

// NaN-rejecting comparisons and index loops over several arrays are intended
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chebcore;
pub mod error;
pub mod fio;
pub mod io;
pub mod kernel;
pub mod opalgebra;
pub mod presets;
pub mod quadrature;
pub mod scalar;
pub mod solver;
pub mod special;
pub mod transform;

pub use chebcore::{BasisKind, ChebSeries, UltraOps};
pub use error::{Error, Result};
pub use fio::{FIOApprox, FioOptions, Side};
pub use kernel::{AcaOptions, LowRankKernel};
pub use scalar::Scalar;
pub use transform::{DoubleExpTransform, AlgebraicTransform, SingularityInfo, TcpPoint, Transform, VariableTransform};
