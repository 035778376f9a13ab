//! Numerical laboratory for pointwise gradient estimates of evolution
//! operators generated by nonautonomous elliptic operators
//! `A(t) = Tr(Q(t,x) D^2) + <b(t,x), grad>` with possibly unbounded
//! coefficients.
//!
//! The crate checks the structural hypotheses on `(Q, b)` over sampled
//! space-time regions, approximates the evolution operator `G(t,s)` by
//! Cauchy–Dirichlet problems on expanding boxes, and measures how well
//! `|grad_x G(t,s) f| <= exp(c0 (t-s)) G(t,s)|grad f|` holds.

// `!(a < b)` is used on purpose: it also rejects NaN. Index loops are the
// clearer form for the small tensors here.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod conditions;
pub mod exec;
pub mod expr;
pub mod linalg;
pub mod operator;
pub mod presets;
pub mod report;
pub mod solver;
pub mod verify;

use thiserror::Error;

pub use exec::Execution;
pub use expr::{EvalError, Expr, ParseError, Var};
pub use operator::{EtaMode, OperatorFamily};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Spec(#[from] operator::SpecError),
    #[error("{context}: {source}")]
    Eval {
        context: String,
        #[source]
        source: EvalError,
    },
    #[error("{0}")]
    Condition(String),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Preset(#[from] presets::PresetError),
    #[error("{0}")]
    Probe(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an evaluation error with the point it happened at.
    pub fn eval_at(what: &str, t: f64, x: &[f64], source: EvalError) -> Error {
        Error::Eval {
            context: format!("{what} at t={t}, x={x:?}"),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
