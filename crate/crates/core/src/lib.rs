//! Spectral evaluation and inverse reconstruction for the degenerate
//! parabolic equation `u_t = ((x - a) u_x)_x` on `(a, 1)`.
//!
//! The forward problem is solved by an explicit Fourier–Bessel series built on
//! the zeros of `J_0`; the observable is the boundary flux `u_x(1, t)`. The
//! [`inverse`] module recovers the degeneracy point `a` from flux samples and
//! audits stability, monotonicity and non-uniqueness of that map. An
//! independent finite-volume solver in [`fd_oracle`] cross-checks the series.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod error;
pub mod fd_oracle;
pub mod initial_data;
pub mod inverse;
pub mod parallel;
pub mod quadrature;
pub mod spectral;

pub use bessel::{build_table, build_table_with, eval_j0, eval_j1, eval_jn, zero_j0, BesselTable};
pub use error::{Error, Result};
pub use initial_data::{weight, weight_derivative, InitialProfile, WeightRequest};
pub use inverse::{
    add_noise, cost, minimize, InversionConfig, InversionResult, NoiseSpec, ObservationSet, TraceModel,
};
pub use parallel::Execution;
pub use spectral::{
    boundary_trace, boundary_trace_da, eigenfunction_value, eigenvalue, solution_value, SeriesValue,
    TraceEvaluator, TraceQuery, TruncationPolicy,
};
