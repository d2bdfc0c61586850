//! Heterogeneous record store keyed by typed keys.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::diagnostic::{Diagnostic, ToDiagnostic};
use crate::schema::{FactSort, Schema, SchemaError};
use crate::value::{FactKey, FactValue, KeyName};

/// One record: a value (or absence) for every declared field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredRecord {
    pub key: FactKey,
    pub fields: BTreeMap<String, Option<FactValue>>,
}

impl StoredRecord {
    /// A record with every declared field absent.
    pub fn empty(schema: &Schema, key: FactKey) -> Result<Self, SchemaError> {
        let def = schema
            .record(&key.record_type)
            .ok_or_else(|| SchemaError::UnknownRecord(key.record_type.clone()))?;
        let fields = def.fields.iter().map(|f| (f.name.clone(), None)).collect();
        Ok(StoredRecord { key, fields })
    }

    pub fn record_type(&self) -> &str {
        &self.key.record_type
    }

    pub fn get(&self, field: &str) -> Option<&FactValue> {
        self.fields.get(field).and_then(Option::as_ref)
    }

    pub fn set(&mut self, field: impl Into<String>, value: FactValue) -> &mut Self {
        self.fields.insert(field.into(), Some(value));
        self
    }

    /// Checks the record against the schema: every Input present, every
    /// present value well-typed, no undeclared fields.
    pub fn check(&self, schema: &Schema) -> Result<(), Vec<DatabaseError>> {
        let Some(def) = schema.record(self.record_type()) else {
            return Err(vec![DatabaseError::UnknownRecord(self.record_type().to_string())]);
        };
        let mut errors = Vec::new();
        for name in self.fields.keys() {
            if def.field(name).is_none() {
                errors.push(DatabaseError::UnknownField {
                    record: def.name.clone(),
                    field: name.clone(),
                });
            }
        }
        for field in &def.fields {
            match self.get(&field.name) {
                None if field.sort == FactSort::Input => errors.push(DatabaseError::MissingInput {
                    key: self.key.clone(),
                    field: field.name.clone(),
                }),
                Some(v) if !value_fits(schema, v, &field.value_type) => {
                    errors.push(DatabaseError::TypeMismatch {
                        key: self.key.clone(),
                        field: field.name.clone(),
                        expected: field.value_type.to_string(),
                        found: v.value_type().to_string(),
                    })
                }
                _ => {}
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// Whether `value` is a well-formed inhabitant of `ty` under `schema`.
pub fn value_fits(schema: &Schema, value: &FactValue, ty: &crate::schema::ValueType) -> bool {
    if &value.value_type() != ty {
        return false;
    }
    match value {
        FactValue::EnumVal { enum_name, member } => schema
            .enum_def(enum_name)
            .is_some_and(|e| e.has_member(member)),
        _ => true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatabaseError {
    #[error("key name `{0}` is already in use")]
    DuplicateKey(KeyName),
    #[error("no record with key {0}")]
    UnknownKey(FactKey),
    #[error("unknown record type `{0}`")]
    UnknownRecord(String),
    #[error("record type `{record}` has no field `{field}`")]
    UnknownField { record: String, field: String },
    #[error("`{record}.{field}` is not an optional fact")]
    NotOptionalField { record: String, field: String },
    #[error("{key}.{field} expects {expected}, got {found}")]
    TypeMismatch {
        key: FactKey,
        field: String,
        expected: String,
        found: String,
    },
    #[error("input fact {key}.{field} is missing")]
    MissingInput { key: FactKey, field: String },
}

impl DatabaseError {
    pub fn code(&self) -> &'static str {
        match self {
            DatabaseError::DuplicateKey(_) => "DuplicateKey",
            DatabaseError::UnknownKey(_) => "UnknownKey",
            DatabaseError::UnknownRecord(_) => "UnknownRecord",
            DatabaseError::UnknownField { .. } => "UnknownField",
            DatabaseError::NotOptionalField { .. } => "NotOptionalField",
            DatabaseError::TypeMismatch { .. } => "TypeMismatch",
            DatabaseError::MissingInput { .. } => "MissingInputFact",
        }
    }
}

impl ToDiagnostic for DatabaseError {
    fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::new(self.code(), self.to_string(), None)
    }
}

/// Mapping from typed keys to records. Key names are unique across the whole
/// database, regardless of record type.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    records: BTreeMap<FactKey, StoredRecord>,
    name_index: BTreeMap<KeyName, FactKey>,
    next_internal: u64,
}

impl Database {
    pub fn new() -> Self {
        Database::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert_record(&mut self, rec: StoredRecord) -> Result<(), DatabaseError> {
        if self.name_index.contains_key(&rec.key.name) {
            return Err(DatabaseError::DuplicateKey(rec.key.name.clone()));
        }
        if let KeyName::Internal(n) = rec.key.name {
            self.next_internal = self.next_internal.max(n + 1);
        }
        self.name_index.insert(rec.key.name.clone(), rec.key.clone());
        self.records.insert(rec.key.clone(), rec);
        Ok(())
    }

    pub fn lookup_record(&self, key: &FactKey) -> Option<&StoredRecord> {
        self.records.get(key)
    }

    /// Resolves a bare key name to its typed key.
    pub fn resolve_name(&self, name: &KeyName) -> Option<&FactKey> {
        self.name_index.get(name)
    }

    /// Keys of all records of `record_type`: external names in lexicographic
    /// order, then internal keys ascending.
    pub fn all_keys_of_type(&self, schema: &Schema, record_type: &str) -> Result<Vec<FactKey>, DatabaseError> {
        if schema.record(record_type).is_none() {
            return Err(DatabaseError::UnknownRecord(record_type.to_string()));
        }
        Ok(self.keys_of_type(record_type).cloned().collect())
    }

    pub(crate) fn keys_of_type<'a>(&'a self, record_type: &'a str) -> impl Iterator<Item = &'a FactKey> + 'a {
        // FactKey orders by (record_type, name), so a type's keys are contiguous.
        let start = FactKey::new(record_type, KeyName::External(String::new()));
        self.records
            .range(start..)
            .map(|(k, _)| k)
            .take_while(move |k| k.record_type == record_type)
    }

    /// All records in key-name order (external names first, then internal).
    pub fn records_by_name(&self) -> impl Iterator<Item = &StoredRecord> {
        self.name_index.values().map(|k| &self.records[k])
    }

    /// Stores a computed value for an Optional field.
    pub fn write_back(
        &mut self,
        schema: &Schema,
        key: &FactKey,
        field: &str,
        value: FactValue,
    ) -> Result<(), DatabaseError> {
        let ty = schema.fact_type(&key.record_type, field).map_err(|e| match e {
            SchemaError::UnknownRecord(r) => DatabaseError::UnknownRecord(r),
            _ => DatabaseError::UnknownField {
                record: key.record_type.clone(),
                field: field.to_string(),
            },
        })?;
        if schema.fact_sort(&key.record_type, field).ok() != Some(FactSort::Optional) {
            return Err(DatabaseError::NotOptionalField {
                record: key.record_type.clone(),
                field: field.to_string(),
            });
        }
        if !value_fits(schema, &value, &ty) {
            return Err(DatabaseError::TypeMismatch {
                key: key.clone(),
                field: field.to_string(),
                expected: ty.to_string(),
                found: value.value_type().to_string(),
            });
        }
        let rec = self
            .records
            .get_mut(key)
            .ok_or_else(|| DatabaseError::UnknownKey(key.clone()))?;
        rec.fields.insert(field.to_string(), Some(value));
        Ok(())
    }

    /// Resets an Optional field to absent. Used to roll back memoized values.
    pub(crate) fn clear_field(&mut self, key: &FactKey, field: &str) {
        if let Some(rec) = self.records.get_mut(key) {
            if let Some(slot) = rec.fields.get_mut(field) {
                *slot = None;
            }
        }
    }

    /// Replaces a field's value regardless of sort. Callers check the type.
    pub(crate) fn overwrite_field(&mut self, key: &FactKey, field: &str, value: FactValue) {
        if let Some(slot) = self.records.get_mut(key).and_then(|r| r.fields.get_mut(field)) {
            *slot = Some(value);
        }
    }

    /// Issues an internal key never handed out before by this database.
    pub fn fresh_internal_key(&mut self, record_type: impl Into<String>) -> FactKey {
        let n = self.next_internal;
        self.next_internal += 1;
        FactKey::new(record_type, KeyName::Internal(n))
    }

    /// Every present `(key, field, value)` triple.
    pub fn triples(&self) -> impl Iterator<Item = (&FactKey, &str, &FactValue)> {
        self.records.values().flat_map(|r| {
            r.fields
                .iter()
                .filter_map(move |(f, v)| v.as_ref().map(|v| (&r.key, f.as_str(), v)))
        })
    }
}
