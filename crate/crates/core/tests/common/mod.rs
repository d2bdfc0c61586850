#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;
use std::sync::Arc;

use regula_core::{compile, jsonio, Database, FactKey, FactRef, Session, TypedRuleset};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn ruleset(name: &str) -> Arc<TypedRuleset> {
    let text = fixture(name);
    Arc::new(compile([(name, text.as_str())]).unwrap_or_else(|e| panic!("{name}: {e:?}")))
}

pub fn dataset(rules: &TypedRuleset, name: &str) -> Database {
    jsonio::load_dataset(&fixture(name), &rules.schema).unwrap_or_else(|e| panic!("{name}: {e:?}"))
}

pub fn session(rules: &str, data: &str) -> Session {
    let r = ruleset(rules);
    let db = dataset(&r, data);
    Session::new(r, db)
}

pub fn fact(s: &str) -> FactRef {
    s.parse().unwrap()
}

pub fn key(record: &str, name: &str) -> FactKey {
    FactKey::external(record, name)
}
