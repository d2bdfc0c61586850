//! The `.regula` rule language: parser, canonical printer, type checker and
//! static dependency analysis.
//!
//! A ruleset declares enums, records and rules:
//!
//! ```text
//! enum EntityType { InvestmentEntity, NonSpecialEntity }
//! record Entity {
//!   fiscal_year: input int
//!   expense: optional money
//! }
//! rule Entity.expense = none
//! ```

pub mod ast;
pub mod graph;
mod lexer;
pub mod parser;
pub mod printer;
pub mod typeck;

use thiserror::Error;

use crate::diagnostic::{Diagnostic, SourceSpan, ToDiagnostic};
use crate::schema::{Schema, SchemaError};

pub use ast::{AggKind, BinOp, Expr, ExprKind, Literal, ParsedRuleset, RuleDecl};
pub use graph::{static_dependency_graph, DependencyGraph, GraphNode};
pub use parser::{parse_expr, parse_source};
pub use printer::{print_expr, print_rule, print_ruleset};
pub use typeck::{
    binop_result, typecheck_ruleset, OpTypeError, RuleBinding, TypeError, TypedAggregate, TypedExpr, TypedKind,
    TypedRuleset,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct SyntaxError {
    pub span: SourceSpan,
    pub message: String,
}

impl SyntaxError {
    pub fn new(span: SourceSpan, message: impl Into<String>) -> Self {
        SyntaxError {
            span,
            message: message.into(),
        }
    }
}

impl ToDiagnostic for SyntaxError {
    fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::new("SyntaxError", self.message.clone(), Some(&self.span))
    }
}

/// Any error on the way from source text to a [`TypedRuleset`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

impl ToDiagnostic for CompileError {
    fn to_diagnostic(&self) -> Diagnostic {
        match self {
            CompileError::Syntax(e) => e.to_diagnostic(),
            CompileError::Schema(e) => e.to_diagnostic(),
            CompileError::Type(e) => e.to_diagnostic(),
        }
    }
}

/// Parses every source, merges the declarations, validates the schema and
/// type-checks the rules. Errors from all stages that could run are returned
/// together.
pub fn compile<'a, I>(sources: I) -> Result<TypedRuleset, Vec<CompileError>>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut errors: Vec<CompileError> = Vec::new();
    let mut schema = Schema::new();
    let mut rules = Vec::new();
    for (file, text) in sources {
        match parse_source(file, text) {
            Ok(parsed) => {
                schema.merge(parsed.schema);
                rules.extend(parsed.rules);
            }
            Err(errs) => errors.extend(errs.into_iter().map(CompileError::from)),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    if let Err(errs) = schema.validate() {
        return Err(errs.into_iter().map(CompileError::from).collect());
    }
    typecheck_ruleset(schema, &rules).map_err(|errs| errs.into_iter().map(CompileError::from).collect())
}

/// Convenience wrapper around [`compile`] for a single source.
pub fn compile_str(source: &str) -> Result<TypedRuleset, Vec<CompileError>> {
    compile([("<input>", source)])
}
