//! Matrix geometric means of symmetric positive definite matrices.
//!
//! * [`linalg`]: validated SPD matrices, spectral roots and powers, the
//!   geodesic operators `#` and `#_t`, with root-call counters.
//! * [`perm`]: finite permutation groups, right-coset transversals and the
//!   induced action on cosets.
//! * [`means`]: the ALM, BMP and circular (Pálfia) limit means and the
//!   four-matrix mean built from the three pairings.
//! * [`expr`]: composition trees over the inputs, with a small text syntax.
//! * [`lab`]: empirical checks of the mean axioms and of isotropy groups.

pub mod error;
pub mod expr;
pub mod fixtures;
pub mod lab;
pub mod linalg;
pub mod means;
pub mod perm;
pub mod sampling;
pub mod tuple_file;

pub use error::{Error, Result};
pub use expr::QuasiMeanExpr;
pub use linalg::{
    make_spd, mat_power, mat_proot, mat_sqrt, sharp, sharp_t, MatrixTuple, OpCounters, SpdMatrix,
};
pub use means::{
    alm_mean, bmp_mean, compute_mean, limit_iterate, new_mean4, new_mean_recursive, palfia_mean,
    Inner3, IterationConfig, IterationReport, MeanKind, MeanOutput,
};
pub use perm::{CosetTransversal, GroupKind, PermGroup, Permutation};
pub use sampling::SpdSampler;
