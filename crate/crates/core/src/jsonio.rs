//! Reading and writing datasets as JSON.
//!
//! A dataset is one JSON object. Each member names a record; its value is an
//! object whose `"type"` member selects the record type and whose other
//! members are facts:
//!
//! ```json
//! {
//!   "Corp": { "type": "Entity", "jurisdiction": "Switzerland", "fiscal_year": 2022 },
//!   "Switzerland": { "type": "Jurisdiction", "fiscal_year": 2022 }
//! }
//! ```
//!
//! Output is canonical: records sorted by key name, `"type"` first, fields
//! in declaration order, money with at least two fractional digits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::{Deserialize, Deserializer, MapAccess, Visitor};
use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::database::{Database, StoredRecord};
use crate::decimal::Decimal;
use crate::diagnostic::{Diagnostic, ToDiagnostic};
use crate::schema::{FactSort, Schema, ValueType};
use crate::value::{FactKey, FactValue, KeyName};

const TYPE_MEMBER: &str = "type";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("record `{0}` has no \"type\" member")]
    MissingTypeField(String),
    #[error("record `{key}` has unknown type `{record_type}`")]
    UnknownRecordType { key: String, record_type: String },
    #[error("record `{key}` is missing input fact `{field}`")]
    MissingInputFact { key: String, field: String },
    #[error("record `{key}` of type `{record_type}` has no field `{field}`")]
    UnknownField {
        key: String,
        record_type: String,
        field: String,
    },
    #[error("`{key}.{field}`: {reason}")]
    ValueTypeMismatch { key: String, field: String, reason: String },
    #[error("`{key}.{field}` refers to `{target}`, which is not a record in the document")]
    DanglingKeyReference { key: String, field: String, target: String },
    #[error("record key `{0}` appears more than once")]
    DuplicateTopLevelKey(String),
    #[error("`{0}` is not a valid record key")]
    InvalidKeyName(String),
}

impl LoadError {
    pub fn code(&self) -> &'static str {
        match self {
            LoadError::Malformed(_) => "Malformed",
            LoadError::MissingTypeField(_) => "MissingTypeField",
            LoadError::UnknownRecordType { .. } => "UnknownRecordType",
            LoadError::MissingInputFact { .. } => "MissingInputFact",
            LoadError::UnknownField { .. } => "UnknownField",
            LoadError::ValueTypeMismatch { .. } => "ValueTypeMismatch",
            LoadError::DanglingKeyReference { .. } => "DanglingKeyReference",
            LoadError::DuplicateTopLevelKey(_) => "DuplicateTopLevelKey",
            LoadError::InvalidKeyName(_) => "InvalidKeyName",
        }
    }
}

impl ToDiagnostic for LoadError {
    fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::new(self.code(), self.to_string(), None)
    }
}

/// Why a JSON value cannot be read as a fact value.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("expected {expected}, got {found}")]
    Mismatch { expected: String, found: String },
    #[error("no record named `{0}`")]
    Dangling(String),
}

/// Top-level members in document order, duplicates kept.
struct Members(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for Members {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Members;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Members, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(Members(out))
            }
        }
        d.deserialize_map(V)
    }
}

fn describe(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(_) => "a boolean".into(),
        Value::Number(n) => format!("the number {n}"),
        Value::String(s) => format!("the string {s:?}"),
        Value::Array(_) => "an array".into(),
        Value::Object(_) => "an object".into(),
    }
}

/// A plain decimal lexeme: optional minus, digits, optional fraction.
fn is_plain_decimal(s: &str) -> bool {
    let s = s.strip_prefix('-').unwrap_or(s);
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (s, None),
    };
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

/// Decodes `v` as a value of type `ty`. `resolve` maps a key name to the
/// record it names, if any.
pub fn decode_value(
    schema: &Schema,
    v: &Value,
    ty: &ValueType,
    resolve: &dyn Fn(&KeyName) -> Option<FactKey>,
) -> Result<FactValue, ValueError> {
    let mismatch = || ValueError::Mismatch {
        expected: ty.to_string(),
        found: describe(v),
    };
    match (ty, v) {
        (ValueType::Int, Value::Number(n)) => {
            let text = n.to_string();
            if !is_plain_decimal(&text) || text.contains('.') {
                return Err(mismatch());
            }
            text.parse().map(FactValue::Int).map_err(|_| mismatch())
        }
        (ValueType::Bool, Value::Bool(b)) => Ok(FactValue::Bool(*b)),
        (ValueType::Text, Value::String(s)) => Ok(FactValue::Text(s.clone())),
        (ValueType::Money | ValueType::Percent, Value::Number(n)) => {
            let text = n.to_string();
            if !is_plain_decimal(&text) {
                return Err(mismatch());
            }
            let d = Decimal::from_str(&text).map_err(|_| mismatch())?;
            Ok(if *ty == ValueType::Money {
                FactValue::Money(d)
            } else {
                FactValue::Percent(d)
            })
        }
        (ValueType::Enum(name), Value::String(member)) => match schema.enum_def(name) {
            Some(def) if def.has_member(member) => Ok(FactValue::enum_val(name, member)),
            _ => Err(mismatch()),
        },
        (ValueType::Key(record), Value::String(s)) => {
            let name = KeyName::parse(s).map_err(|_| mismatch())?;
            match resolve(&name) {
                None => Err(ValueError::Dangling(s.clone())),
                Some(key) if &key.record_type == record => Ok(FactValue::KeyVal(key)),
                Some(key) => Err(ValueError::Mismatch {
                    expected: ty.to_string(),
                    found: format!("a key of {}", key.record_type),
                }),
            }
        }
        _ => Err(mismatch()),
    }
}

fn number(text: &str) -> Value {
    Value::Number(Number::from_str(text).expect("decimal renders as a JSON number"))
}

/// The canonical JSON encoding of a fact value.
pub fn encode_value(v: &FactValue) -> Value {
    match v {
        FactValue::Int(i) => Value::Number((*i).into()),
        FactValue::Bool(b) => Value::Bool(*b),
        FactValue::Text(s) => Value::String(s.clone()),
        FactValue::Money(d) => number(&d.format_with_min_frac(2)),
        FactValue::Percent(d) => number(&d.to_string()),
        FactValue::EnumVal { member, .. } => Value::String(member.clone()),
        FactValue::KeyVal(k) => Value::String(k.name.to_string()),
    }
}

/// Parses a dataset document against `schema`. All problems found are
/// returned together.
pub fn load_dataset(text: &str, schema: &Schema) -> Result<Database, Vec<LoadError>> {
    let members: Members = serde_json::from_str(text).map_err(|e| vec![LoadError::Malformed(e.to_string())])?;
    load_members(members.0, schema)
}

/// Like [`load_dataset`], for a document already parsed into a JSON value.
pub fn load_value(doc: &Value, schema: &Schema) -> Result<Database, Vec<LoadError>> {
    let Value::Object(map) = doc else {
        return Err(vec![LoadError::Malformed(format!("expected an object, got {}", describe(doc)))]);
    };
    load_members(map.iter().map(|(k, v)| (k.clone(), v.clone())).collect(), schema)
}

fn load_members(members: Vec<(String, Value)>, schema: &Schema) -> Result<Database, Vec<LoadError>> {
    let mut errors = Vec::new();

    // First pass: key names and record types, so references may point forward.
    let mut index: BTreeMap<KeyName, FactKey> = BTreeMap::new();
    let mut typed = Vec::new();
    for (name, body) in &members {
        let key_name = match KeyName::parse(name) {
            Ok(k) => k,
            Err(_) => {
                errors.push(LoadError::InvalidKeyName(name.clone()));
                continue;
            }
        };
        if index.contains_key(&key_name) {
            errors.push(LoadError::DuplicateTopLevelKey(name.clone()));
            continue;
        }
        let Value::Object(obj) = body else {
            errors.push(LoadError::MissingTypeField(name.clone()));
            continue;
        };
        let record_type = match obj.get(TYPE_MEMBER) {
            None => {
                errors.push(LoadError::MissingTypeField(name.clone()));
                continue;
            }
            Some(Value::String(t)) if schema.record(t).is_some() => t.clone(),
            Some(other) => {
                errors.push(LoadError::UnknownRecordType {
                    key: name.clone(),
                    record_type: match other {
                        Value::String(t) => t.clone(),
                        v => v.to_string(),
                    },
                });
                continue;
            }
        };
        let key = FactKey::new(record_type, key_name.clone());
        index.insert(key_name, key.clone());
        typed.push((name, key, obj));
    }

    // Second pass: field values.
    let resolve = |n: &KeyName| index.get(n).cloned();
    let mut db = Database::new();
    for (name, key, obj) in typed {
        let def = schema.record(&key.record_type).expect("checked in first pass");
        let mut rec = StoredRecord::empty(schema, key.clone()).expect("known record type");
        for (field, v) in obj {
            if field == TYPE_MEMBER {
                continue;
            }
            let Some(fdef) = def.field(field) else {
                errors.push(LoadError::UnknownField {
                    key: name.clone(),
                    record_type: key.record_type.clone(),
                    field: field.clone(),
                });
                continue;
            };
            match decode_value(schema, v, &fdef.value_type, &resolve) {
                Ok(value) => {
                    rec.set(field.clone(), value);
                }
                Err(ValueError::Dangling(target)) => errors.push(LoadError::DanglingKeyReference {
                    key: name.clone(),
                    field: field.clone(),
                    target,
                }),
                Err(e) => errors.push(LoadError::ValueTypeMismatch {
                    key: name.clone(),
                    field: field.clone(),
                    reason: e.to_string(),
                }),
            }
        }
        for fdef in &def.fields {
            if fdef.sort == FactSort::Input && !obj.contains_key(&fdef.name) {
                errors.push(LoadError::MissingInputFact {
                    key: name.clone(),
                    field: fdef.name.clone(),
                });
            }
        }
        db.insert_record(rec).expect("names are unique after the first pass");
    }

    if errors.is_empty() {
        Ok(db)
    } else {
        Err(errors)
    }
}

/// The canonical document for `db` as a JSON value.
pub fn database_to_value(db: &Database, schema: &Schema) -> Value {
    let mut top = Map::new();
    for rec in db.records_by_name() {
        let mut obj = Map::new();
        obj.insert(TYPE_MEMBER.to_string(), Value::String(rec.record_type().to_string()));
        if let Some(def) = schema.record(rec.record_type()) {
            for f in &def.fields {
                if let Some(v) = rec.get(&f.name) {
                    obj.insert(f.name.clone(), encode_value(v));
                }
            }
        }
        top.insert(rec.key.name.to_string(), Value::Object(obj));
    }
    Value::Object(top)
}

/// Renders `db` canonically: two-space indentation and a trailing newline.
pub fn dump_database(db: &Database, schema: &Schema) -> String {
    let mut out = serde_json::to_string_pretty(&database_to_value(db, schema)).expect("JSON values serialize");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{EnumDef, FieldDef, RecordDef};

    fn schema() -> Schema {
        Schema::new()
            .with_enum(EnumDef::new("EntityType", ["InvestmentEntity", "NonSpecialEntity"]))
            .with_record(RecordDef::new(
                "Entity",
                vec![
                    FieldDef::new("jurisdiction", FactSort::Input, ValueType::Key("Jurisdiction".into())),
                    FieldDef::new("fiscal_year", FactSort::Input, ValueType::Int),
                    FieldDef::new("stock_based_compensation", FactSort::Optional, ValueType::Money),
                    FieldDef::new("entity_type", FactSort::Optional, ValueType::Enum("EntityType".into())),
                ],
            ))
            .with_record(RecordDef::new(
                "Jurisdiction",
                vec![
                    FieldDef::new("fiscal_year", FactSort::Input, ValueType::Int),
                    FieldDef::new("top_up_tax_percentage", FactSort::Optional, ValueType::Percent),
                ],
            ))
    }

    const DOC: &str = r#"{
  "Corp": {
    "type": "Entity",
    "jurisdiction": "Switzerland",
    "fiscal_year": 2022,
    "stock_based_compensation": 12345.00
  },
  "Switzerland": {
    "type": "Jurisdiction",
    "fiscal_year": 2022,
    "top_up_tax_percentage": 0.03
  }
}
"#;

    #[test]
    fn loads_example_and_dumps_it_back_verbatim() {
        let s = schema();
        let db = load_dataset(DOC, &s).unwrap();
        assert_eq!(db.len(), 2);
        let corp = db.lookup_record(&FactKey::external("Entity", "Corp")).unwrap();
        assert_eq!(
            corp.get("jurisdiction"),
            Some(&FactValue::KeyVal(FactKey::external("Jurisdiction", "Switzerland")))
        );
        assert_eq!(corp.get("stock_based_compensation"), Some(&FactValue::money("12345")));
        assert_eq!(dump_database(&db, &s), DOC);
    }

    #[test]
    fn empty_document() {
        let db = load_dataset("{}", &schema()).unwrap();
        assert!(db.is_empty());
        assert_eq!(dump_database(&db, &schema()), "{}\n");
    }

    #[test]
    fn forward_references_resolve() {
        let doc = r#"{"A": {"type": "Entity", "jurisdiction": "Z", "fiscal_year": 1},
                      "Z": {"type": "Jurisdiction", "fiscal_year": 1}}"#;
        assert!(load_dataset(doc, &schema()).is_ok());
    }

    #[test]
    fn accumulates_every_violation() {
        let doc = r##"{
            "a": {"fiscal_year": 1},
            "b": {"type": "Nope"},
            "c": {"type": "Entity", "jurisdiction": "nowhere"},
            "d": {"type": "Jurisdiction", "fiscal_year": "2022", "bogus": 1},
            "d": {"type": "Jurisdiction", "fiscal_year": 1},
            "#x": {"type": "Jurisdiction", "fiscal_year": 1},
            "e": {"type": "Entity", "jurisdiction": "d", "fiscal_year": 1.5, "entity_type": "Other"}
        }"##;
        let errs = load_dataset(doc, &schema()).unwrap_err();
        let codes: Vec<_> = errs.iter().map(LoadError::code).collect();
        assert_eq!(
            codes,
            [
                "MissingTypeField",
                "UnknownRecordType",
                "DuplicateTopLevelKey",
                "InvalidKeyName",
                "DanglingKeyReference",
                "MissingInputFact",
                "ValueTypeMismatch",
                "UnknownField",
                "ValueTypeMismatch",
                "ValueTypeMismatch",
            ]
        );
    }

    #[test]
    fn key_reference_to_wrong_type_is_a_mismatch() {
        let doc = r#"{"A": {"type": "Entity", "jurisdiction": "B", "fiscal_year": 1},
                      "B": {"type": "Entity", "jurisdiction": "A", "fiscal_year": 1}}"#;
        let errs = load_dataset(doc, &schema()).unwrap_err();
        assert!(errs.iter().all(|e| e.code() == "ValueTypeMismatch"));
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn numbers() {
        let s = schema();
        let none = |_: &KeyName| None;
        let dec = |v: &str, ty: ValueType| decode_value(&s, &serde_json::from_str(v).unwrap(), &ty, &none);
        assert_eq!(dec("7", ValueType::Money), Ok(FactValue::money("7")));
        assert_eq!(dec("0.000001", ValueType::Money), Ok(FactValue::money("0.000001")));
        assert!(dec("0.0000001", ValueType::Money).is_err());
        assert!(dec("1e3", ValueType::Money).is_err());
        assert!(dec("2.0", ValueType::Int).is_err());
        assert!(dec("99999999999999999999", ValueType::Int).is_err());
        assert_eq!(encode_value(&FactValue::money("7")).to_string(), "7.00");
        assert_eq!(encode_value(&FactValue::money("7.125")).to_string(), "7.125");
        assert_eq!(encode_value(&FactValue::percent("0.030")).to_string(), "0.03");
        assert_eq!(encode_value(&FactValue::money("-0.5")).to_string(), "-0.50");
    }

    #[test]
    fn internal_keys_sort_last_and_reload() {
        let s = schema();
        let doc = r##"{"#10": {"type": "Jurisdiction", "fiscal_year": 1},
                       "#2": {"type": "Jurisdiction", "fiscal_year": 1},
                       "zz": {"type": "Jurisdiction", "fiscal_year": 1}}"##;
        let mut db = load_dataset(doc, &s).unwrap();
        let out = dump_database(&db, &s);
        let order: Vec<_> = ["\"zz\"", "\"#2\"", "\"#10\""].iter().map(|k| out.find(k).unwrap()).collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(db.fresh_internal_key("Jurisdiction").name, KeyName::Internal(11));
        assert_eq!(load_dataset(&out, &s).unwrap().len(), 3);
    }
}
