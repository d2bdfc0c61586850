//! Keys, fact values and fact identifiers.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::decimal::Decimal;
use crate::schema::ValueType;

/// The name part of a record key.
///
/// External names come from input data; internal names are generated and
/// render as `#N`. `External` sorts before `Internal`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeyName {
    External(String),
    Internal(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyNameError {
    #[error("key name is empty")]
    Empty,
    #[error("key name `{0}` starts with `#` but is not an internal key")]
    BadInternal(String),
}

impl KeyName {
    pub fn external(name: impl Into<String>) -> Result<KeyName, KeyNameError> {
        let name = name.into();
        if name.is_empty() {
            Err(KeyNameError::Empty)
        } else if name.starts_with('#') {
            Err(KeyNameError::BadInternal(name))
        } else {
            Ok(KeyName::External(name))
        }
    }

    /// Parses the rendered form: `#N` is internal, anything else external.
    pub fn parse(text: &str) -> Result<KeyName, KeyNameError> {
        match text.strip_prefix('#') {
            Some(digits) if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) => digits
                .parse()
                .map(KeyName::Internal)
                .map_err(|_| KeyNameError::BadInternal(text.to_string())),
            _ => KeyName::external(text),
        }
    }
}

impl fmt::Display for KeyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyName::External(s) => f.write_str(s),
            KeyName::Internal(n) => write!(f, "#{n}"),
        }
    }
}

/// A typed record key. Equal only if both the record type and the name match.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactKey {
    pub record_type: String,
    pub name: KeyName,
}

impl FactKey {
    pub fn new(record_type: impl Into<String>, name: KeyName) -> Self {
        FactKey {
            record_type: record_type.into(),
            name,
        }
    }

    /// Shorthand for an external key. Panics on an invalid name.
    pub fn external(record_type: impl Into<String>, name: &str) -> Self {
        FactKey::new(record_type, KeyName::external(name).expect("valid external key name"))
    }
}

impl fmt::Display for FactKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.record_type, self.name)
    }
}

/// A fact payload.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactValue {
    Int(i64),
    Bool(bool),
    Text(String),
    Money(Decimal),
    Percent(Decimal),
    EnumVal { enum_name: String, member: String },
    KeyVal(FactKey),
}

impl FactValue {
    pub fn value_type(&self) -> ValueType {
        match self {
            FactValue::Int(_) => ValueType::Int,
            FactValue::Bool(_) => ValueType::Bool,
            FactValue::Text(_) => ValueType::Text,
            FactValue::Money(_) => ValueType::Money,
            FactValue::Percent(_) => ValueType::Percent,
            FactValue::EnumVal { enum_name, .. } => ValueType::Enum(enum_name.clone()),
            FactValue::KeyVal(k) => ValueType::Key(k.record_type.clone()),
        }
    }

    pub fn money(s: &str) -> FactValue {
        FactValue::Money(s.parse().expect("valid money literal"))
    }

    pub fn percent(s: &str) -> FactValue {
        FactValue::Percent(s.parse().expect("valid percent literal"))
    }

    pub fn enum_val(enum_name: &str, member: &str) -> FactValue {
        FactValue::EnumVal {
            enum_name: enum_name.to_string(),
            member: member.to_string(),
        }
    }
}

impl fmt::Display for FactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactValue::Int(v) => write!(f, "{v}"),
            FactValue::Bool(v) => write!(f, "{v}"),
            FactValue::Text(v) => write!(f, "{v:?}"),
            FactValue::Money(v) => f.write_str(&v.format_with_min_frac(2)),
            FactValue::Percent(v) => write!(f, "{v}"),
            FactValue::EnumVal { enum_name, member } => write!(f, "{enum_name}::{member}"),
            FactValue::KeyVal(k) => write!(f, "{k}"),
        }
    }
}

/// Identifies one fact: a record key plus a field name. Renders as
/// `Type[key].field`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactRef {
    pub key: FactKey,
    pub field: String,
}

impl FactRef {
    pub fn new(key: FactKey, field: impl Into<String>) -> Self {
        FactRef {
            key,
            field: field.into(),
        }
    }
}

impl fmt::Display for FactRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.key, self.field)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed fact identifier `{input}`: {reason}")]
pub struct FactRefParseError {
    pub input: String,
    pub reason: &'static str,
}

impl FromStr for FactRef {
    type Err = FactRefParseError;

    /// Parses `Type[key].field`. The key may itself contain brackets; the
    /// last `].` separates it from the field.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| FactRefParseError {
            input: s.to_string(),
            reason,
        };
        let open = s.find('[').ok_or_else(|| err("expected `[`"))?;
        let close = s.rfind("].").ok_or_else(|| err("expected `].`"))?;
        if close < open {
            return Err(err("unbalanced brackets"));
        }
        let record_type = &s[..open];
        let key = &s[open + 1..close];
        let field = &s[close + 2..];
        if record_type.is_empty() {
            return Err(err("empty record type"));
        }
        if key.is_empty() {
            return Err(err("empty key"));
        }
        if field.is_empty() {
            return Err(err("empty field"));
        }
        let name = KeyName::parse(key).map_err(|_| err("invalid key name"))?;
        Ok(FactRef::new(FactKey::new(record_type, name), field))
    }
}
