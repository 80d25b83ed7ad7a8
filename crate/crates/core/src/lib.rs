//! Numerical laboratory for gradients of elliptic single layer potentials
//! and the two-dimensional Riesz transform acting on discrete measures in
//! three-dimensional space.
//!
//! The crate is organised bottom-up:
//!
//! * [`dini`]: doubling moduli and their small/large scale Dini integrals.
//! * [`matrixfield`]: parametric uniformly elliptic coefficient fields,
//!   ball averages, empirical mean oscillation and the change of variables
//!   that normalises a field's average to the identity.
//! * [`kernels`]: closed-form constant-coefficient kernels, the Riesz kernel,
//!   the frozen-coefficient kernel and the difference kernels.
//! * [`measures`]: discrete measures, generators and growth statistics.
//! * [`operators`]: truncated operators, dense assembly, operator norms,
//!   Schur bounds and geometric functionals.
//! * [`spherical`]: real spherical harmonics and kernel decompositions.

// Negated comparisons are used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dini;
pub mod error;
pub mod kernels;
pub mod matrixfield;
pub mod measures;
pub mod numeric;
pub mod operators;
pub mod spherical;

pub use error::{Error, Result};

/// Points and vectors in the ambient space.
pub type Point = nalgebra::Vector3<f64>;
/// Real 3×3 matrices (coefficients, averages, changes of variables).
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Dimension of the measures (`n`); the ambient space is `n + 1 = 3`.
pub const N_DIM: usize = 2;

/// Surface area of the unit sphere in the ambient space, 2π^{3/2}/Γ(3/2) = 4π.
pub const OMEGA_N: f64 = 4.0 * std::f64::consts::PI;

pub use dini::OscillationModulus;
pub use kernels::{ConstKernel, FrozenKernel, KernelSpec};
pub use matrixfield::{CovNormalization, MatrixField, SpdMatrix3};
pub use measures::{Ball, Cube, DiscreteMeasure, IfsSpec, MeasureFamily};
pub use operators::{GeometryReport, OpNormEstimate, TruncatedOperator};
