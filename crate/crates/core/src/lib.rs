//! Numerical laboratory for fully nonlinear nonlocal parabolic equations of
//! order σ ∈ (1,2) on the interval (−1,1) with exterior data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod checkpoint;
pub mod error;
pub mod field;
pub mod kernel;
pub mod metrics;
pub mod ops;
pub mod quad;
pub mod sample;
pub mod scheme;
pub mod solver;

pub use checkpoint::Checkpoint;
pub use error::{LabError, Result};
pub use kernel::{
    drift_to_nonlocal, rescale, solve_r0, truncate_kernel, ConvertedKernel, EllipticityParams,
    Kernel, KernelSpec,
};
pub use field::{Dilated, Exterior, ExteriorData, Grid, SpaceProfile, SpaceTimeField, TimeProfile};
pub use ops::{Modulation, Operator, OperatorSpec, Sign};
pub use scheme::QuadratureScheme;
pub use solver::{solve, ProblemSpec, SchemeKind, Solution, SolveReport, SolverConfig};
pub use metrics::{
    delta2_tau, delta_tau, fit_time_exponent, l1_sigma_norm, oscillation_decay_audit,
    parabolic_holder_seminorm, tail_seminorm, truncate_rescale, ParabolicCylinder,
    RegularityReport, SampledField,
};
