//! Record, enum and field declarations, and the lookups the checker and the
//! engine run against them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::diagnostic::{Diagnostic, SourceSpan, ToDiagnostic};

/// Name of the implicit pseudo-field every record carries.
pub const KEY_FIELD: &str = "key";

/// The type of a fact's payload.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueType {
    Int,
    Bool,
    Text,
    Money,
    Percent,
    Enum(String),
    Key(String),
}

impl ValueType {
    pub fn is_numeric(&self) -> bool {
        matches!(self, ValueType::Int | ValueType::Money | ValueType::Percent)
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Int => f.write_str("int"),
            ValueType::Bool => f.write_str("bool"),
            ValueType::Text => f.write_str("text"),
            ValueType::Money => f.write_str("money"),
            ValueType::Percent => f.write_str("percent"),
            ValueType::Enum(name) => write!(f, "enum {name}"),
            ValueType::Key(name) => write!(f, "key {name}"),
        }
    }
}

/// Whether a fact must be supplied (`Input`) or may be absent and possibly
/// derived (`Optional`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactSort {
    Input,
    Optional,
}

impl fmt::Display for FactSort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactSort::Input => "input",
            FactSort::Optional => "optional",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub sort: FactSort,
    pub value_type: ValueType,
    pub span: Option<SourceSpan>,
}

impl FieldDef {
    pub fn new(name: impl Into<String>, sort: FactSort, value_type: ValueType) -> Self {
        FieldDef {
            name: name.into(),
            sort,
            value_type,
            span: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordDef {
    pub name: String,
    pub fields: Vec<FieldDef>,
    pub span: Option<SourceSpan>,
}

impl RecordDef {
    pub fn new(name: impl Into<String>, fields: Vec<FieldDef>) -> Self {
        RecordDef {
            name: name.into(),
            fields,
            span: None,
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumDef {
    pub name: String,
    pub members: Vec<String>,
    pub span: Option<SourceSpan>,
}

impl EnumDef {
    pub fn new<S: Into<String>>(name: impl Into<String>, members: impl IntoIterator<Item = S>) -> Self {
        EnumDef {
            name: name.into(),
            members: members.into_iter().map(Into::into).collect(),
            span: None,
        }
    }

    pub fn has_member(&self, member: &str) -> bool {
        self.members.iter().any(|m| m == member)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("field `{record}.{field}` refers to undeclared record type `{target}`")]
    UnknownRecordRef {
        record: String,
        field: String,
        target: String,
        span: Option<SourceSpan>,
    },
    #[error("field `{record}.{field}` refers to undeclared enum `{target}`")]
    UnknownEnumRef {
        record: String,
        field: String,
        target: String,
        span: Option<SourceSpan>,
    },
    #[error("field `{field}` declared more than once in record `{record}`")]
    DuplicateField {
        record: String,
        field: String,
        span: Option<SourceSpan>,
    },
    #[error("record `{record}` declares a field named `key`, which is implicit")]
    ReservedFieldName { record: String, span: Option<SourceSpan> },
    #[error("record type `{name}` declared more than once")]
    DuplicateRecordName { name: String, span: Option<SourceSpan> },
    #[error("enum `{name}` declared more than once")]
    DuplicateEnumName { name: String, span: Option<SourceSpan> },
    #[error("enum `{name}` has no members")]
    EmptyEnum { name: String, span: Option<SourceSpan> },
    #[error("enum `{name}` lists member `{member}` more than once")]
    DuplicateEnumMember {
        name: String,
        member: String,
        span: Option<SourceSpan>,
    },
    #[error("unknown record type `{0}`")]
    UnknownRecord(String),
    #[error("record type `{record}` has no field `{field}`")]
    UnknownField { record: String, field: String },
    #[error("the `key` of `{0}` is not a fact and has no sort")]
    KeyHasNoSort(String),
}

impl SchemaError {
    pub fn code(&self) -> &'static str {
        match self {
            SchemaError::UnknownRecordRef { .. } => "UnknownRecordRef",
            SchemaError::UnknownEnumRef { .. } => "UnknownEnumRef",
            SchemaError::DuplicateField { .. } => "DuplicateField",
            SchemaError::ReservedFieldName { .. } => "ReservedFieldName",
            SchemaError::DuplicateRecordName { .. } => "DuplicateRecordName",
            SchemaError::DuplicateEnumName { .. } => "DuplicateEnumName",
            SchemaError::EmptyEnum { .. } => "EmptyEnum",
            SchemaError::DuplicateEnumMember { .. } => "DuplicateEnumMember",
            SchemaError::UnknownRecord(_) => "UnknownRecord",
            SchemaError::UnknownField { .. } => "UnknownField",
            SchemaError::KeyHasNoSort(_) => "KeyHasNoSort",
        }
    }

    pub fn span(&self) -> Option<&SourceSpan> {
        match self {
            SchemaError::UnknownRecordRef { span, .. }
            | SchemaError::UnknownEnumRef { span, .. }
            | SchemaError::DuplicateField { span, .. }
            | SchemaError::ReservedFieldName { span, .. }
            | SchemaError::DuplicateRecordName { span, .. }
            | SchemaError::DuplicateEnumName { span, .. }
            | SchemaError::EmptyEnum { span, .. }
            | SchemaError::DuplicateEnumMember { span, .. } => span.as_ref(),
            _ => None,
        }
    }
}

impl ToDiagnostic for SchemaError {
    fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::new(self.code(), self.to_string(), self.span())
    }
}

/// Registry of record and enum declarations.
///
/// Duplicate declarations are remembered at insertion time (the first one
/// wins) and reported by [`Schema::validate`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    records: BTreeMap<String, RecordDef>,
    enums: BTreeMap<String, EnumDef>,
    conflicts: Vec<SchemaError>,
}

impl Schema {
    pub fn new() -> Self {
        Schema::default()
    }

    pub fn add_record(&mut self, record: RecordDef) {
        if self.records.contains_key(&record.name) {
            self.conflicts.push(SchemaError::DuplicateRecordName {
                name: record.name.clone(),
                span: record.span.clone(),
            });
        } else {
            self.records.insert(record.name.clone(), record);
        }
    }

    pub fn add_enum(&mut self, def: EnumDef) {
        if self.enums.contains_key(&def.name) {
            self.conflicts.push(SchemaError::DuplicateEnumName {
                name: def.name.clone(),
                span: def.span.clone(),
            });
        } else {
            self.enums.insert(def.name.clone(), def);
        }
    }

    pub fn with_record(mut self, record: RecordDef) -> Self {
        self.add_record(record);
        self
    }

    pub fn with_enum(mut self, def: EnumDef) -> Self {
        self.add_enum(def);
        self
    }

    /// Merges another schema's declarations into this one.
    pub fn merge(&mut self, other: Schema) {
        self.conflicts.extend(other.conflicts);
        for (_, e) in other.enums {
            self.add_enum(e);
        }
        for (_, r) in other.records {
            self.add_record(r);
        }
    }

    pub fn records(&self) -> impl Iterator<Item = &RecordDef> {
        self.records.values()
    }

    pub fn enums(&self) -> impl Iterator<Item = &EnumDef> {
        self.enums.values()
    }

    pub fn record(&self, name: &str) -> Option<&RecordDef> {
        self.records.get(name)
    }

    pub fn enum_def(&self, name: &str) -> Option<&EnumDef> {
        self.enums.get(name)
    }

    /// Checks every invariant and returns all violations found.
    pub fn validate(&self) -> Result<(), Vec<SchemaError>> {
        let mut errors = self.conflicts.clone();
        for def in self.enums.values() {
            if def.members.is_empty() {
                errors.push(SchemaError::EmptyEnum {
                    name: def.name.clone(),
                    span: def.span.clone(),
                });
            }
            let mut seen = BTreeSet::new();
            for m in &def.members {
                if !seen.insert(m) {
                    errors.push(SchemaError::DuplicateEnumMember {
                        name: def.name.clone(),
                        member: m.clone(),
                        span: def.span.clone(),
                    });
                }
            }
        }
        for record in self.records.values() {
            let mut seen = BTreeSet::new();
            for field in &record.fields {
                if field.name == KEY_FIELD {
                    errors.push(SchemaError::ReservedFieldName {
                        record: record.name.clone(),
                        span: field.span.clone(),
                    });
                    continue;
                }
                if !seen.insert(field.name.as_str()) {
                    errors.push(SchemaError::DuplicateField {
                        record: record.name.clone(),
                        field: field.name.clone(),
                        span: field.span.clone(),
                    });
                }
                match &field.value_type {
                    ValueType::Key(target) if !self.records.contains_key(target) => {
                        errors.push(SchemaError::UnknownRecordRef {
                            record: record.name.clone(),
                            field: field.name.clone(),
                            target: target.clone(),
                            span: field.span.clone(),
                        })
                    }
                    ValueType::Enum(target) if !self.enums.contains_key(target) => {
                        errors.push(SchemaError::UnknownEnumRef {
                            record: record.name.clone(),
                            field: field.name.clone(),
                            target: target.clone(),
                            span: field.span.clone(),
                        })
                    }
                    _ => {}
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Type of `record.field`; the implicit `key` field has type `key(record)`.
    pub fn fact_type(&self, record: &str, field: &str) -> Result<ValueType, SchemaError> {
        let def = self
            .records
            .get(record)
            .ok_or_else(|| SchemaError::UnknownRecord(record.to_string()))?;
        if field == KEY_FIELD {
            return Ok(ValueType::Key(record.to_string()));
        }
        def.field(field)
            .map(|f| f.value_type.clone())
            .ok_or_else(|| SchemaError::UnknownField {
                record: record.to_string(),
                field: field.to_string(),
            })
    }

    pub fn fact_sort(&self, record: &str, field: &str) -> Result<FactSort, SchemaError> {
        let def = self
            .records
            .get(record)
            .ok_or_else(|| SchemaError::UnknownRecord(record.to_string()))?;
        if field == KEY_FIELD {
            return Err(SchemaError::KeyHasNoSort(record.to_string()));
        }
        def.field(field)
            .map(|f| f.sort)
            .ok_or_else(|| SchemaError::UnknownField {
                record: record.to_string(),
                field: field.to_string(),
            })
    }
}
