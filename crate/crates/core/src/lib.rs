//! Coefficients of almost-everywhere convergent orthogonal series.
//!
//! The crate computes the information function `h_B` of the tail set of a
//! coefficient sequence, runs the triadic conditional-norm operators `V_j`
//! and the functional `V h = lim ||V_0 … V_i h||`, evaluates the classical
//! Rademacher–Menshov / Tandori style criteria, and builds the explicit
//! orthogonal families and processes whose maximal functions are large.
//!
//! Modules:
//! - [`stepfn`]: exact-breakpoint step functions and triadic conditional norms
//! - [`info`]: coefficient sequences, tail sets and information functions
//! - [`vcalc`]: the `V_j` operator calculus and its inequality layer
//! - [`criteria`]: convergence criteria on finite coefficient sequences
//! - [`ortho`]: L2 vectors with external coordinates, processes, maximal functions
//! - [`construct`]: the ternary-digit family `φ_n` and process constructions
//! - [`gen`]: seeded random instances for the property suites
//! - [`sets`]: triadic sets, generated sets, shift maps, continuity analysis
//! - [`surd`]: exact sums of rational multiples of square roots
//! - [`suites`]: randomized inequality suites driven by `verify`

pub mod cli;
pub mod construct;
pub mod criteria;
pub mod gen;
pub mod info;
pub mod ortho;
pub mod par;
pub mod rat;
pub mod sets;
pub mod stepfn;
pub mod suites;
pub mod surd;
pub mod vcalc;

pub use rat::Q;
pub use stepfn::{ExactStep, Scalar, Step, StepFunction};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("outside domain: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("inexact: {0}")]
    Inexact(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
