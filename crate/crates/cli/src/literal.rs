//! `--override` arguments: `Type[key].field=literal`, with the literal in the
//! rule language's syntax and interpreted against the field's type.

use regula_core::decimal::Decimal;
use regula_core::{Database, FactRef, FactValue, KeyName, Schema, ValueType};

/// Splits `Type[key].field=literal` at the `=` following the field name.
pub fn split_assignment(text: &str) -> Result<(FactRef, &str), String> {
    let field_start = text
        .rfind("].")
        .ok_or_else(|| format!("`{text}`: expected Type[key].field=value"))?;
    let eq = text[field_start..]
        .find('=')
        .map(|i| field_start + i)
        .ok_or_else(|| format!("`{text}`: expected `=` after the field name"))?;
    let fact = text[..eq].parse::<FactRef>().map_err(|e| e.to_string())?;
    Ok((fact, &text[eq + 1..]))
}

fn unquote(s: &str) -> Option<&str> {
    s.strip_prefix('"')?.strip_suffix('"')
}

/// Reads `text` as a value of type `ty`. Percentages may be written as a
/// fraction (`0.03`) or with a percent sign (`3%`).
pub fn parse_literal(schema: &Schema, db: &Database, text: &str, ty: &ValueType) -> Result<FactValue, String> {
    let text = text.trim();
    let bad = || format!("`{text}` is not a {ty} literal");
    match ty {
        ValueType::Bool => match text {
            "true" => Ok(FactValue::Bool(true)),
            "false" => Ok(FactValue::Bool(false)),
            _ => Err(bad()),
        },
        ValueType::Int => text.parse().map(FactValue::Int).map_err(|_| bad()),
        ValueType::Money => text.parse::<Decimal>().map(FactValue::Money).map_err(|_| bad()),
        ValueType::Percent => match text.strip_suffix('%') {
            Some(lexeme) => Decimal::from_percent_lexeme(lexeme.trim_end()),
            None => text.parse(),
        }
        .map(FactValue::Percent)
        .map_err(|_| bad()),
        ValueType::Text => Ok(FactValue::Text(unquote(text).unwrap_or(text).to_string())),
        ValueType::Enum(name) => {
            let member = match text.split_once("::") {
                Some((e, m)) if e == name => m,
                Some(_) => return Err(bad()),
                None => text,
            };
            match schema.enum_def(name) {
                Some(def) if def.has_member(member) => Ok(FactValue::enum_val(name, member)),
                _ => Err(bad()),
            }
        }
        ValueType::Key(record) => {
            let name = KeyName::parse(unquote(text).unwrap_or(text)).map_err(|e| e.to_string())?;
            match db.resolve_name(&name) {
                Some(key) if &key.record_type == record => Ok(FactValue::KeyVal(key.clone())),
                Some(key) => Err(format!("`{text}` names a {}, not a {record}", key.record_type)),
                None => Err(format!("no record named `{text}`")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use regula_core::{EnumDef, FactKey};

    fn schema() -> Schema {
        Schema::new().with_enum(EnumDef::new("Kind", ["A", "B"]))
    }

    fn lit(text: &str, ty: ValueType) -> Result<FactValue, String> {
        parse_literal(&schema(), &Database::new(), text, &ty)
    }

    #[test]
    fn splits_at_the_field() {
        let (f, v) = split_assignment("Entity[a=b].x=3%").unwrap();
        assert_eq!(f.key, FactKey::external("Entity", "a=b"));
        assert_eq!(f.field, "x");
        assert_eq!(v, "3%");
        let (_, v) = split_assignment("T[k].note=\"a=b\"").unwrap();
        assert_eq!(v, "\"a=b\"");
        assert!(split_assignment("T[k].x").is_err());
        assert!(split_assignment("T.x=1").is_err());
    }

    #[test]
    fn literals() {
        assert_eq!(lit("true", ValueType::Bool), Ok(FactValue::Bool(true)));
        assert!(lit("1", ValueType::Bool).is_err());
        assert_eq!(lit("-4", ValueType::Int), Ok(FactValue::Int(-4)));
        assert!(lit("4.0", ValueType::Int).is_err());
        assert_eq!(lit("12.50", ValueType::Money), Ok(FactValue::money("12.5")));
        assert_eq!(lit("3%", ValueType::Percent), Ok(FactValue::percent("0.03")));
        assert_eq!(lit("0.03", ValueType::Percent), Ok(FactValue::percent("0.03")));
        assert_eq!(lit("2.5%", ValueType::Percent), Ok(FactValue::percent("0.025")));
        assert_eq!(lit("\"hi\"", ValueType::Text), Ok(FactValue::Text("hi".into())));
        assert_eq!(lit("B", ValueType::Enum("Kind".into())), Ok(FactValue::enum_val("Kind", "B")));
        assert_eq!(lit("Kind::A", ValueType::Enum("Kind".into())), Ok(FactValue::enum_val("Kind", "A")));
        assert!(lit("Other::A", ValueType::Enum("Kind".into())).is_err());
        assert!(lit("C", ValueType::Enum("Kind".into())).is_err());
        assert!(lit("x", ValueType::Key("R".into())).is_err());
    }
}
