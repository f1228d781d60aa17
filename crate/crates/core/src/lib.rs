//! Hyperspectral super-resolution: fuses a low-resolution hyperspectral cube
//! with a high-resolution multispectral image through a spectral subspace
//! and a non-convex, mode-shuffled correlated total variation prior on the
//! spatial maps, solved by linearized ADMM.
// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod degradation;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod regularizer;
pub mod solver;
pub mod tensor;
pub mod tsvd;

pub use degradation::{DegradationSet, SceneSpec, SpectraKind, SyntheticScene};
pub use error::{Error, Result};
pub use io::{RunConfig, RunReport, TensorData};
pub use metrics::{MetricOptions, MetricReport, PsnrMode};
pub use regularizer::nms_tctv;
pub use solver::{solve, Problem, SolveOutput, SolverConfig, TauMode};
pub use tensor::{DenseMatrix, Tensor3};
pub use tsvd::Surrogate;
