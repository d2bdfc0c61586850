//! Independent evaluations over copies of one session.
//!
//! Each worker owns a clone of the session, so memoization inside a worker
//! never races with another. With the `parallel` feature the work is spread
//! over the rayon thread pool; without it, [`Strategy::Parallel`] runs
//! sequentially.

use crate::engine::{EvalOutcome, Session, SessionError};
use crate::value::{FactRef, FactValue};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Strategy {
    Sequential,
    #[default]
    Parallel,
}

/// A set of overrides applied together to one copy of the session.
pub type Scenario = Vec<(FactRef, FactValue)>;

/// Evaluates every query against `session`. Results are in query order and
/// do not depend on the strategy.
pub fn evaluate_batch(session: &Session, queries: &[FactRef], strategy: Strategy) -> Vec<EvalOutcome> {
    let run = |s: &mut Session, q: &FactRef| s.get_fact(&q.key, &q.field);
    match strategy {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            queries.par_iter().map_init(|| session.clone(), run).collect()
        }
        _ => {
            let mut s = session.clone();
            queries.iter().map(|q| run(&mut s, q)).collect()
        }
    }
}

/// Evaluates `query` once per scenario, each on a fresh copy of `session`
/// with the scenario's overrides applied.
pub fn whatif_sweep(
    session: &Session,
    query: &FactRef,
    scenarios: &[Scenario],
    strategy: Strategy,
) -> Vec<Result<EvalOutcome, SessionError>> {
    let run = |scenario: &Scenario| {
        let mut s = session.clone();
        for (fact, value) in scenario {
            s.set_override(fact.clone(), value.clone())?;
        }
        Ok(s.get_fact(&query.key, &query.field))
    };
    match strategy {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            scenarios.par_iter().map(run).collect()
        }
        _ => scenarios.iter().map(run).collect(),
    }
}
