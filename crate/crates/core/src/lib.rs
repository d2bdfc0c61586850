//! A rules-as-code engine.
//!
//! Rules are written in a small textual language (see [`dsl`]), checked
//! against a schema of records and fields, and evaluated on demand over a
//! [`Database`] of typed records. Evaluation memoizes results, accumulates
//! every independent error and reports the facts and record types consulted.
//!
//! ```
//! use std::sync::Arc;
//! use regula_core::{compile_str, jsonio, FactKey, Session};
//!
//! let rules = compile_str(
//!     "record Person {\n  earned: input money\n  unearned: input money\n  total: optional money\n}\n\
//!      rule Person.total = self.earned + self.unearned\n",
//! )
//! .unwrap();
//! let db = jsonio::load_dataset(
//!     r#"{"p": {"type": "Person", "earned": 10.00, "unearned": 2.50}}"#,
//!     &rules.schema,
//! )
//! .unwrap();
//! let mut session = Session::new(Arc::new(rules), db);
//! let out = session.get_fact(&FactKey::external("Person", "p"), "total");
//! assert_eq!(out.value().unwrap().to_string(), "12.50");
//! ```

pub mod batch;
pub mod database;
pub mod decimal;
pub mod diagnostic;
pub mod dsl;
pub mod engine;
pub mod jsonio;
pub mod schema;
pub mod value;

pub use database::{Database, DatabaseError, StoredRecord};
pub use decimal::Decimal;
pub use diagnostic::{Diagnostic, SourceSpan, ToDiagnostic};
pub use dsl::{compile, compile_str, CompileError, TypedRuleset};
pub use engine::{DependencySet, EvalError, EvalOutcome, FactStatus, Session, SessionError};
pub use schema::{EnumDef, FactSort, FieldDef, RecordDef, Schema, ValueType};
pub use value::{FactKey, FactRef, FactValue, KeyName};
