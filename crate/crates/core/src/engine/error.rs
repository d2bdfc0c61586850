use thiserror::Error;

use crate::diagnostic::{Diagnostic, SourceSpan, ToDiagnostic};
use crate::dsl::AggKind;
use crate::value::{FactKey, FactRef};

/// A failure while evaluating a fact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Error)]
pub enum EvalError {
    #[error("{0} is missing and cannot be derived")]
    MissingFact(FactRef),
    #[error("{0} has no rule binding")]
    NoRuleDefined(FactRef),
    #[error("no record with key {0}")]
    UnknownKey(FactKey),
    #[error("{0} is not a declared field")]
    UnknownField(FactRef),
    #[error("dependency cycle: {}", render_cycle(.0))]
    Cycle(Vec<FactRef>),
    #[error("division by zero at {0}")]
    DivideByZero(SourceSpan),
    #[error("`{agg}` over no records at {span}")]
    EmptyAggregate { agg: AggKind, span: SourceSpan },
    #[error("arithmetic overflow at {0}")]
    Overflow(SourceSpan),
}

fn render_cycle(path: &[FactRef]) -> String {
    let mut parts: Vec<String> = path.iter().map(ToString::to_string).collect();
    if let Some(first) = path.first() {
        parts.push(first.to_string());
    }
    parts.join(" -> ")
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::MissingFact(_) => "MissingFact",
            EvalError::NoRuleDefined(_) => "NoRuleDefined",
            EvalError::UnknownKey(_) => "UnknownKey",
            EvalError::UnknownField(_) => "UnknownField",
            EvalError::Cycle(_) => "Cycle",
            EvalError::DivideByZero(_) => "DivideByZero",
            EvalError::EmptyAggregate { .. } => "EmptyAggregate",
            EvalError::Overflow(_) => "Overflow",
        }
    }

    /// The missing fact this error asks the user to supply, if any.
    pub fn missing_fact(&self) -> Option<&FactRef> {
        match self {
            EvalError::MissingFact(f) | EvalError::NoRuleDefined(f) => Some(f),
            _ => None,
        }
    }

    fn span(&self) -> Option<&SourceSpan> {
        match self {
            EvalError::DivideByZero(s) | EvalError::Overflow(s) => Some(s),
            EvalError::EmptyAggregate { span, .. } => Some(span),
            _ => None,
        }
    }
}

impl ToDiagnostic for EvalError {
    fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::new(self.code(), self.to_string(), self.span())
    }
}

/// Appends `more` to `errors`, skipping entries already present.
pub(crate) fn merge_errors(errors: &mut Vec<EvalError>, more: Vec<EvalError>) {
    for e in more {
        if !errors.contains(&e) {
            errors.push(e);
        }
    }
}
