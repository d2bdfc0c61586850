mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;

use common::oracle::{engine_view, Instance};
use common::key;
use regula_core::batch::{evaluate_batch, whatif_sweep, Strategy as Exec};
use regula_core::dsl::typeck::rederive_type;
use regula_core::dsl::{
    parse_expr, parse_source, print_expr, static_dependency_graph, AggKind, BinOp, Expr, ExprKind, GraphNode, Literal,
    RuleBinding, TypedExpr,
};
use regula_core::{compile_str, jsonio, Database, FactRef, FactValue, Session, SourceSpan, TypedRuleset};

fn build(seed: u64) -> (Instance, Arc<TypedRuleset>, Database) {
    let inst = Instance::generate(seed);
    let rules = Arc::new(compile_str(&inst.ruleset_source()).expect("generated rulesets type-check"));
    let db = jsonio::load_dataset(&inst.dataset_json(), &rules.schema).expect("generated data loads");
    (inst, rules, db)
}

fn queries(inst: &Instance) -> Vec<FactRef> {
    inst.queries()
        .into_iter()
        .map(|(t, k, f)| FactRef::new(key(&t, &k), f))
        .collect()
}

// ---- syntax ----

fn e(kind: ExprKind) -> Expr {
    Expr::new(kind, SourceSpan::synthetic())
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,5}".prop_filter("reserved", |s| {
        ![
            "self", "true", "false", "if", "then", "else", "and", "or", "none", "where", "select", "sum", "count",
            "min", "max", "any", "all", "rule", "record", "enum", "input", "optional", "key",
        ]
        .contains(&s.as_str())
    })
}

fn type_name() -> impl Strategy<Value = String> {
    "[A-Z][a-zA-Z0-9]{0,5}"
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(e(ExprKind::SelfRef)),
        ("(0|[1-9][0-9]{0,4})(\\.[0-9]{1,3})?", any::<bool>())
            .prop_map(|(lexeme, percent)| e(ExprKind::Literal(Literal::Number { lexeme, percent }))),
        any::<bool>().prop_map(|b| e(ExprKind::Literal(Literal::Bool(b)))),
        "[ a-zA-Z0-9\"\\\\\n]{0,6}".prop_map(|s| e(ExprKind::Literal(Literal::Text(s)))),
        (type_name(), type_name()).prop_map(|(enum_name, member)| e(ExprKind::EnumLit { enum_name, member })),
        ident().prop_map(|v| e(ExprKind::Var(v))),
    ]
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 40, 3, |inner| {
        prop_oneof![
            (inner.clone(), ident()).prop_map(|(b, field)| e(ExprKind::FieldAccess {
                base: Box::new(b),
                field
            })),
            (inner.clone(), proptest::sample::select(BinOp::ALL.to_vec()), inner.clone()).prop_map(|(l, op, r)| e(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(l),
                    rhs: Box::new(r)
                }
            )),
            inner.clone().prop_map(|x| e(ExprKind::Neg(Box::new(x)))),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(c, t, o)| e(ExprKind::If {
                cond: Box::new(c),
                then: Box::new(t),
                otherwise: Box::new(o)
            })),
            (
                proptest::sample::select(vec![AggKind::Sum, AggKind::Count, AggKind::Min, AggKind::Max, AggKind::Any, AggKind::All]),
                type_name(),
                ident(),
                proptest::option::of(inner.clone()),
                inner,
            )
                .prop_map(|(kind, record_type, binder, filter, select)| {
                    let select = (kind != AggKind::Count).then_some(select);
                    e(ExprKind::Aggregate(Box::new(regula_core::dsl::ast::Aggregate {
                        kind,
                        record_type,
                        binder,
                        filter,
                        select,
                    })))
                }),
        ]
    })
}

proptest! {
    #[test]
    fn parse_print_round_trip(expr in arb_expr()) {
        let text = print_expr(&expr);
        let parsed = parse_expr("t", &text).map_err(|e| TestCaseError::fail(format!("{text}: {e:?}")))?;
        prop_assert_eq!(&parsed, &expr, "printed as {}", text);
        prop_assert_eq!(print_expr(&parsed), text);
    }
}

// ---- type checking ----

fn split_decls(src: &str) -> (String, Vec<String>) {
    let (mut decls, mut rules) = (String::new(), Vec::new());
    for line in src.lines() {
        if line.starts_with("rule ") {
            rules.push(line.to_string());
        } else {
            decls.push_str(line);
            decls.push('\n');
        }
    }
    (decls, rules)
}

fn annotations_rederive(schema: &regula_core::Schema, e: &TypedExpr, self_type: &str) -> Result<(), String> {
    let mut bad = None;
    e.walk(&mut |node| {
        if bad.is_none() && rederive_type(schema, node, self_type).as_ref() != Some(&node.ty) {
            bad = Some(format!("{:?} annotated {} at {}", node.kind, node.ty, node.span));
        }
    });
    bad.map_or(Ok(()), Err)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn typecheck_ignores_declaration_order(seed in 0u64..100_000, shuffle in any::<u64>()) {
        let inst = Instance::generate(seed);
        let (decls, mut rules) = split_decls(&inst.ruleset_source());
        let forward = compile_str(&format!("{decls}{}", rules.join("\n"))).unwrap();
        // Rotate and reverse to reorder without pulling in a shuffler.
        let n = rules.len();
        rules.rotate_left((shuffle as usize) % n);
        if shuffle % 2 == 0 {
            rules.reverse();
        }
        let reordered = compile_str(&format!("{decls}{}", rules.join("\n"))).unwrap();
        let sig = |r: &TypedRuleset| -> Vec<(String, String, String)> {
            r.ruled_fields().map(|(rec, f, e)| (rec.to_string(), f.to_string(), strip(e))).collect()
        };
        prop_assert_eq!(sig(&forward), sig(&reordered));
    }

    #[test]
    fn every_annotation_follows_from_its_children(seed in 0u64..100_000) {
        let (_, rules, _) = build(seed);
        for (record, _, body) in rules.ruled_fields() {
            annotations_rederive(&rules.schema, body, record).map_err(TestCaseError::fail)?;
        }
    }
}

/// Typed tree with spans removed, for comparing across differently laid out sources.
fn strip(e: &TypedExpr) -> String {
    let mut out = String::new();
    e.walk(&mut |n| out.push_str(&format!("{}:{:?};", n.ty, std::mem::discriminant(&n.kind))));
    out
}

// ---- evaluation ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Answers from one long-lived session match answers from a fresh
    /// session per query, values and dependencies alike.
    #[test]
    fn memoization_is_transparent(seed in 0u64..100_000) {
        let (inst, rules, db) = build(seed);
        let mut shared = Session::new(rules.clone(), db.clone());
        for q in queries(&inst) {
            let warm = shared.get_fact(&q.key, &q.field);
            let cold = Session::new(rules.clone(), db.clone()).get_fact(&q.key, &q.field);
            prop_assert_eq!(&warm, &cold, "{}", q);
        }
    }

    /// Runtime dependencies never leave what the static graph allows.
    #[test]
    fn runtime_deps_within_static_graph(seed in 0u64..100_000) {
        let (inst, rules, db) = build(seed);
        let graph = static_dependency_graph(&rules);
        let mut s = Session::new(rules.clone(), db);
        for q in queries(&inst) {
            let start = GraphNode::field(&q.key.record_type, &q.field);
            let mut reach = BTreeSet::from([start.clone()]);
            let mut stack = vec![start];
            while let Some(n) = stack.pop() {
                for m in graph.successors(&n) {
                    if reach.insert(m.clone()) {
                        stack.push(m.clone());
                    }
                }
            }
            let out = s.get_fact(&q.key, &q.field);
            for d in &out.deps.field_deps {
                if d.field == "key" {
                    continue;
                }
                prop_assert!(reach.contains(&GraphNode::field(&d.key.record_type, &d.field)), "{} -> {}", q, d);
            }
            for t in &out.deps.type_deps {
                prop_assert!(reach.contains(&GraphNode::Type { record: t.clone() }), "{} scans {}", q, t);
            }
        }
    }

    /// Overrides behave exactly like supplying the value in the data.
    #[test]
    fn override_matches_oracle(seed in 0u64..100_000, pick in any::<prop::sample::Index>(), cents in -50_000i128..50_000) {
        let (mut inst, rules, db) = build(seed);
        let qs = queries(&inst);
        let target = pick.get(&qs).clone();
        let value = cents * 10_000;
        let mut s = Session::new(rules, db);
        s.set_override(target.clone(), FactValue::Money(regula_core::Decimal::from_micros(value))).unwrap();
        let name = target.key.name.to_string();
        inst.records.iter_mut().find(|r| r.name == name).unwrap().values.insert(target.field.clone(), value);
        for q in &qs {
            let got = engine_view(&s.get_fact(&q.key, &q.field));
            prop_assert_eq!(got, inst.eval(&q.key.name.to_string(), &q.field), "{} with {} overridden", q, target);
        }
    }

    /// Supplying the facts a query reported missing never loses a dependency:
    /// a failed run reports a subset of what the completed run reports.
    #[test]
    fn supplying_missing_facts_only_adds_deps(seed in 0u64..100_000, cents in -5_000i128..5_000) {
        let (inst, rules, db) = build(seed);
        for q in queries(&inst) {
            let failed = Session::new(rules.clone(), db.clone()).get_fact(&q.key, &q.field);
            let missing: Vec<FactRef> = failed.errors().iter().filter_map(|e| e.missing_fact().cloned()).collect();
            if missing.is_empty() {
                continue;
            }
            let mut filled = inst.clone();
            for m in &missing {
                prop_assert!(failed.deps.field_deps.contains(m), "{} not among deps of {}", m, q);
                let name = m.key.name.to_string();
                filled.records.iter_mut().find(|r| r.name == name).unwrap().values.insert(m.field.clone(), cents * 10_000);
            }
            let db2 = jsonio::load_dataset(&filled.dataset_json(), &rules.schema).unwrap();
            let after = Session::new(rules.clone(), db2).get_fact(&q.key, &q.field);
            prop_assert!(failed.deps.is_subset(&after.deps), "{}", q);
        }
    }

    /// Saturation only adds facts, and adds exactly the computable ones.
    #[test]
    fn saturation_is_monotone(seed in 0u64..100_000) {
        let (inst, rules, db) = build(seed);
        let report = Session::new(rules.clone(), db.clone()).saturate();
        let before: BTreeSet<_> = db.triples().map(|(k, f, v)| (k.clone(), f.to_string(), v.clone())).collect();
        let after: BTreeSet<_> = report.database.triples().map(|(k, f, v)| (k.clone(), f.to_string(), v.clone())).collect();
        prop_assert!(after.is_superset(&before));
        for q in queries(&inst) {
            let stored = report.database.lookup_record(&q.key).unwrap().get(&q.field).cloned();
            let skipped = report.skipped.iter().any(|(f, _)| *f == q);
            match inst.eval(&q.key.name.to_string(), &q.field) {
                Ok(v) => prop_assert_eq!(stored, Some(FactValue::Money(regula_core::Decimal::from_micros(v)))),
                Err(_) => {
                    prop_assert_eq!(stored, None);
                    let ruled = matches!(rules.binding(&q.key.record_type, &q.field), Some(RuleBinding::HasRule(_)));
                    prop_assert_eq!(skipped, ruled, "{}", q);
                }
            }
        }
    }

    #[test]
    fn dataset_round_trip(seed in 0u64..100_000) {
        let (_, rules, db) = build(seed);
        let text = jsonio::dump_database(&db, &rules.schema);
        let reloaded = jsonio::load_dataset(&text, &rules.schema).unwrap();
        prop_assert_eq!(&reloaded, &db);
        prop_assert_eq!(jsonio::dump_database(&reloaded, &rules.schema), text);
    }

    /// The batch strategies agree with each other and with one-by-one queries.
    #[test]
    fn batch_strategies_agree(seed in 0u64..100_000) {
        let (inst, rules, db) = build(seed);
        let s = Session::new(rules, db);
        let qs = queries(&inst);
        let seq = evaluate_batch(&s, &qs, Exec::Sequential);
        let par = evaluate_batch(&s, &qs, Exec::Parallel);
        prop_assert_eq!(&seq, &par);
        for (q, out) in qs.iter().zip(&seq) {
            prop_assert_eq!(engine_view(out), inst.eval(&q.key.name.to_string(), &q.field));
        }
        let target = qs[0].clone();
        let scenarios: Vec<_> = (0..4)
            .map(|i| vec![(qs[qs.len() - 1].clone(), FactValue::Money(regula_core::Decimal::from_int(i)))])
            .collect();
        let a = whatif_sweep(&s, &target, &scenarios, Exec::Sequential);
        let b = whatif_sweep(&s, &target, &scenarios, Exec::Parallel);
        prop_assert_eq!(a, b);
    }
}

/// Each absent addend contributes exactly one missing fact.
#[test]
fn missing_facts_are_the_absent_addends() {
    let n = 6;
    let fields: Vec<String> = (0..n).map(|i| format!("a{i}")).collect();
    let mut src = String::from("record P {\n");
    for f in &fields {
        src.push_str(&format!("  {f}: optional money\n"));
    }
    src.push_str("  total: optional money\n}\n");
    for f in &fields {
        src.push_str(&format!("rule P.{f} = none\n"));
    }
    src.push_str(&format!(
        "rule P.total = {}\n",
        fields.iter().map(|f| format!("self.{f}")).collect::<Vec<_>>().join(" + ")
    ));
    let rules = Arc::new(compile_str(&src).unwrap());
    for mask in 0u32..(1 << n) {
        let mut obj = serde_json::Map::new();
        obj.insert("type".into(), "P".into());
        for (i, f) in fields.iter().enumerate() {
            if mask & (1 << i) != 0 {
                obj.insert(f.clone(), serde_json::Value::from(i as i64));
            }
        }
        let doc = serde_json::json!({ "p": obj }).to_string();
        let db = jsonio::load_dataset(&doc, &rules.schema).unwrap();
        let s = Session::new(rules.clone(), db);
        let report = s.get_missing_dependencies(&key("P", "p"), "total");
        let expected: Vec<String> = (0..n)
            .filter(|i| mask & (1 << i) == 0)
            .map(|i| format!("P[p].a{i}"))
            .collect();
        assert_eq!(report.missing, expected, "mask {mask:b}");
    }
}

#[test]
fn parser_rejects_what_printer_never_emits() {
    for bad in ["a < b < c", "a == b == c", "count(all R r select r.x)", "sum(all R r)"] {
        assert!(parse_expr("t", bad).is_err(), "{bad}");
    }
    assert!(parse_source("t", "rule R.x = self.y\nrule").is_err());
}
