use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::database::{value_fits, Database};
use crate::diagnostic::{Diagnostic, ToDiagnostic};
use crate::dsl::{RuleBinding, TypedRuleset};
use crate::schema::{FactSort, Schema, KEY_FIELD};
use crate::value::{FactKey, FactRef, FactValue};

use super::deps::DependencySet;
use super::error::EvalError;
use super::eval::Evaluator;

/// The result of evaluating one fact. Dependencies are reported whether or
/// not evaluation succeeded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalOutcome {
    pub result: Result<FactValue, Vec<EvalError>>,
    pub deps: DependencySet,
}

impl EvalOutcome {
    pub fn value(&self) -> Option<&FactValue> {
        self.result.as_ref().ok()
    }

    pub fn errors(&self) -> &[EvalError] {
        match &self.result {
            Ok(_) => &[],
            Err(e) => e,
        }
    }
}

/// Errors from session operations that name a fact (overrides, inspection).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("unknown record type `{0}`")]
    UnknownRecord(String),
    #[error("{0} is not a declared field")]
    UnknownField(FactRef),
    #[error("no record with key {0}")]
    UnknownKey(FactKey),
    #[error("{fact} expects {expected}, got {found}")]
    TypeMismatch {
        fact: FactRef,
        expected: String,
        found: String,
    },
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownRecord(_) => "UnknownRecord",
            SessionError::UnknownField(_) => "UnknownField",
            SessionError::UnknownKey(_) => "UnknownKey",
            SessionError::TypeMismatch { .. } => "TypeMismatch",
        }
    }
}

impl ToDiagnostic for SessionError {
    fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::new(self.code(), self.to_string(), None)
    }
}

/// Facts still to be supplied for a query, and the record types it scanned.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MissingReport {
    pub missing: Vec<String>,
    pub types: Vec<String>,
}

/// Provenance of a fact's value as seen by a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FactStatus {
    Input,
    Computed,
    Overridden,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactReport {
    pub status: FactStatus,
    pub outcome: EvalOutcome,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SaturationReport {
    pub database: Database,
    pub skipped: Vec<(FactRef, Vec<EvalError>)>,
}

/// Evaluation state: the ruleset, a working copy of the database, what-if
/// overrides and memoization bookkeeping.
///
/// A session is single-writer. Clone it to evaluate speculatively.
#[derive(Clone, Debug)]
pub struct Session {
    pub(crate) ruleset: Arc<TypedRuleset>,
    pub(crate) db: Database,
    pub(crate) overrides: BTreeMap<FactRef, FactValue>,
    pub(crate) in_progress: Vec<FactRef>,
    pub(crate) memoized: BTreeMap<FactRef, DependencySet>,
    pub(crate) rule_invocations: BTreeMap<FactRef, u64>,
}

impl Session {
    pub fn new(ruleset: Arc<TypedRuleset>, db: Database) -> Self {
        Session {
            ruleset,
            db,
            overrides: BTreeMap::new(),
            in_progress: Vec::new(),
            memoized: BTreeMap::new(),
            rule_invocations: BTreeMap::new(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.ruleset.schema
    }

    pub fn ruleset(&self) -> &Arc<TypedRuleset> {
        &self.ruleset
    }

    pub fn database(&self) -> &Database {
        &self.db
    }

    pub fn overrides(&self) -> &BTreeMap<FactRef, FactValue> {
        &self.overrides
    }

    /// How many times the rule for `fact` has been run in this session.
    pub fn rule_invocations(&self, fact: &FactRef) -> u64 {
        self.rule_invocations.get(fact).copied().unwrap_or(0)
    }

    pub(crate) fn memoize(&mut self, fact: FactRef, value: FactValue, deps: DependencySet) {
        let schema = self.ruleset.schema.clone();
        if self.db.write_back(&schema, &fact.key, &fact.field, value).is_ok() {
            self.memoized.insert(fact, deps);
        }
    }

    /// Rolls every memoized value back to absent.
    fn invalidate_memo(&mut self) {
        for fact in std::mem::take(&mut self.memoized).into_keys() {
            self.db.clear_field(&fact.key, &fact.field);
        }
    }

    /// Evaluates one fact, running rules as needed. Successful rule results
    /// are written back into the session database unless overrides are active.
    pub fn get_fact(&mut self, key: &FactKey, field: &str) -> EvalOutcome {
        self.in_progress.clear();
        let mut ev = Evaluator {
            session: self,
            deps: DependencySet::new(),
        };
        let result = ev.access_field(key, field);
        let deps = ev.deps;
        debug_assert!(self.in_progress.is_empty());
        EvalOutcome { result, deps }
    }

    /// Keys of all records of `record_type`, plus the type dependency that
    /// scanning them records.
    pub fn access_all_keys_of_type(&mut self, record_type: &str) -> (Vec<FactKey>, DependencySet) {
        let mut ev = Evaluator {
            session: self,
            deps: DependencySet::new(),
        };
        let keys = ev.all_keys_of_type(record_type);
        (keys, ev.deps)
    }

    /// The facts that must be supplied before `key.field` can be computed, and
    /// the record types its computation scanned. Runs on a scratch copy.
    pub fn get_missing_dependencies(&self, key: &FactKey, field: &str) -> MissingReport {
        let mut scratch = self.clone();
        let outcome = scratch.get_fact(key, field);
        let missing: BTreeSet<String> = outcome
            .errors()
            .iter()
            .filter_map(EvalError::missing_fact)
            .map(ToString::to_string)
            .collect();
        MissingReport {
            missing: missing.into_iter().collect(),
            types: outcome.deps.type_strings(),
        }
    }

    /// Validates that `fact` names an existing record and declared field.
    pub fn check_fact(&self, fact: &FactRef) -> Result<(), SessionError> {
        let schema = self.schema();
        let def = schema
            .record(&fact.key.record_type)
            .ok_or_else(|| SessionError::UnknownRecord(fact.key.record_type.clone()))?;
        if fact.field != KEY_FIELD && def.field(&fact.field).is_none() {
            return Err(SessionError::UnknownField(fact.clone()));
        }
        if self.db.lookup_record(&fact.key).is_none() {
            return Err(SessionError::UnknownKey(fact.key.clone()));
        }
        Ok(())
    }

    /// Shadows `fact` with `value` for all later queries. Discards every
    /// memoized result.
    pub fn set_override(&mut self, fact: FactRef, value: FactValue) -> Result<(), SessionError> {
        self.check_fact(&fact)?;
        if fact.field == KEY_FIELD {
            return Err(SessionError::UnknownField(fact));
        }
        let ty = self
            .schema()
            .fact_type(&fact.key.record_type, &fact.field)
            .expect("checked above");
        if !value_fits(self.schema(), &value, &ty) {
            return Err(SessionError::TypeMismatch {
                expected: ty.to_string(),
                found: value.value_type().to_string(),
                fact,
            });
        }
        if let FactValue::KeyVal(target) = &value {
            if self.db.lookup_record(target).is_none() {
                return Err(SessionError::UnknownKey(target.clone()));
            }
        }
        self.invalidate_memo();
        self.overrides.insert(fact, value);
        Ok(())
    }

    /// Removes an override. Returns whether one was present. Discards every
    /// memoized result.
    pub fn clear_override(&mut self, fact: &FactRef) -> Result<bool, SessionError> {
        self.check_fact(fact)?;
        self.invalidate_memo();
        Ok(self.overrides.remove(fact).is_some())
    }

    /// Evaluates `fact` and classifies where its value came from.
    pub fn inspect_fact(&mut self, fact: &FactRef) -> Result<FactReport, SessionError> {
        self.check_fact(fact)?;
        let overridden = self.overrides.contains_key(fact);
        let supplied = fact.field == KEY_FIELD
            || self.schema().fact_sort(&fact.key.record_type, &fact.field) == Ok(FactSort::Input)
            || (self
                .db
                .lookup_record(&fact.key)
                .and_then(|r| r.get(&fact.field))
                .is_some()
                && !self.memoized.contains_key(fact));
        let outcome = self.get_fact(&fact.key, &fact.field);
        let status = match (&outcome.result, overridden, supplied) {
            (_, true, _) => FactStatus::Overridden,
            (Err(_), _, _) => FactStatus::Error,
            (Ok(_), _, true) => FactStatus::Input,
            (Ok(_), _, false) => FactStatus::Computed,
        };
        Ok(FactReport { status, outcome })
    }

    /// Every `(key, field)` pair of the database, in key-name order.
    pub fn all_facts(&self) -> Vec<FactRef> {
        let schema = self.schema();
        self.db
            .records_by_name()
            .flat_map(|rec| {
                let def = schema.record(rec.record_type()).expect("records conform to schema");
                def.fields
                    .iter()
                    .map(move |f| FactRef::new(rec.key.clone(), f.name.clone()))
            })
            .collect()
    }

    /// Computes every derivable Optional fact that is not yet known.
    ///
    /// The returned database is a superset of the session's: stored values
    /// are never changed, except that active overrides replace the values they
    /// shadow so the document describes the scenario it was computed under.
    /// Facts that cannot be computed are listed with their errors.
    pub fn saturate(&mut self) -> SaturationReport {
        let ruleset = self.ruleset.clone();
        let targets: Vec<FactRef> = self
            .db
            .records_by_name()
            .flat_map(|rec| {
                ruleset
                    .ruled_fields()
                    .filter(|(r, _, _)| *r == rec.record_type())
                    .filter(|(_, f, _)| rec.get(f).is_none())
                    .map(|(_, f, _)| FactRef::new(rec.key.clone(), f))
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut database = self.db.clone();
        let mut skipped = Vec::new();
        for fact in targets {
            // An earlier target may already have memoized this one.
            if database
                .lookup_record(&fact.key)
                .and_then(|r| r.get(&fact.field))
                .is_some()
            {
                continue;
            }
            let outcome = self.get_fact(&fact.key, &fact.field);
            match outcome.result {
                Ok(v) => {
                    database
                        .write_back(&ruleset.schema, &fact.key, &fact.field, v)
                        .expect("rule results match their field type");
                }
                Err(errors) => skipped.push((fact, errors)),
            }
            // Pick up values memoized along the way.
            for memo in self.memoized.keys() {
                if let Some(v) = self.db.lookup_record(&memo.key).and_then(|r| r.get(&memo.field)) {
                    if database.lookup_record(&memo.key).and_then(|r| r.get(&memo.field)).is_none() {
                        let _ = database.write_back(&ruleset.schema, &memo.key, &memo.field, v.clone());
                    }
                }
            }
        }
        for (fact, v) in &self.overrides {
            database.overwrite_field(&fact.key, &fact.field, v.clone());
        }
        SaturationReport { database, skipped }
    }

    /// Whether `fact` currently has a rule.
    pub fn has_rule(&self, fact: &FactRef) -> bool {
        matches!(
            self.ruleset.binding(&fact.key.record_type, &fact.field),
            Some(RuleBinding::HasRule(_))
        )
    }
}
