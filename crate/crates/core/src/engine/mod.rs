//! Demand-driven, memoizing evaluation of rules over a database.

mod deps;
mod error;
mod eval;
mod session;

pub use deps::DependencySet;
pub use error::EvalError;
pub use eval::apply_binary;
pub use session::{
    EvalOutcome, FactReport, FactStatus, MissingReport, SaturationReport, Session, SessionError,
};
