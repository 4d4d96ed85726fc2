//! Counting integer solutions of systems of bihomogeneous equations in
//! asymmetric boxes, together with the analytic machinery that predicts the
//! count: exponential sums over box points, multilinear differencing forms,
//! lattice point counters behind the shrinking inequality, major-arc dissection of the
//! unit torus, local densities assembled from complete exponential sums, and
//! the singular integral in both oscillatory and kernel-smoothing forms.
//!
//! A system consists of `R` forms, each bihomogeneous of bidegree `(d1, d2)`
//! in variable groups `x = (x_1..x_{n1})` and `y = (y_1..y_{n2})`. For box
//! pairs `B1, B2` of side at most one, the number of integer pairs
//! `(x, y) in P1*B1 x P2*B2` with `F_i(x; y) = 0` for all `i` is expected to
//! grow like `sigma * P1^(n1 - R*d1) * P2^(n2 - R*d2)` where `sigma` is the
//! product of a singular series and a singular integral. Every module here
//! computes one ingredient of that prediction at desk scale, exactly where
//! exact arithmetic is feasible and with controlled floating point otherwise.

pub mod arcs;
pub mod config;
pub mod counting;
pub mod exact;
pub mod experiment;
pub mod expsum;
pub mod forms;
pub mod integral;
pub mod lattice;
pub mod local;
pub mod quadrature;

pub use counting::{BoxPair, Interval, IntervalKind, Strategy};
pub use forms::{Axis, FormSystem, MonomialSpec};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Structural problem with a system, box pair, or argument shape.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// An enumeration or quadrature would exceed its configured budget.
    #[error("budget exceeded: {0}")]
    Budget(String),
    /// No admissible analytic parameters exist for the requested geometry.
    #[error("parameter selection infeasible: {0}")]
    Infeasible(String),
    /// A strict-inequality count came within floating-point distance of a tie.
    #[error("ambiguous threshold: {0}")]
    Ambiguous(String),
    /// Configuration file could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
