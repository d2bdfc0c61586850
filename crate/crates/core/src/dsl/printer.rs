//! Canonical pretty-printer. `parse(print(e)) == e` for every tree the parser
//! can produce.

use std::fmt::Write;

use super::ast::*;
use crate::schema::Schema;

pub fn print_expr(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, expr, 0);
    out
}

/// Precedence levels: 0 = if, 1..=5 binary ops, 6 = unary, 7 = postfix/primary.
fn level(expr: &Expr) -> u8 {
    match &expr.kind {
        ExprKind::If { .. } => 0,
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Neg(_) => 6,
        _ => 7,
    }
}

fn write_expr(out: &mut String, expr: &Expr, min_level: u8) {
    let needs_parens = level(expr) < min_level;
    if needs_parens {
        out.push('(');
    }
    match &expr.kind {
        ExprKind::SelfRef => out.push_str("self"),
        ExprKind::Literal(lit) => write_literal(out, lit),
        ExprKind::EnumLit { enum_name, member } => {
            let _ = write!(out, "{enum_name}::{member}");
        }
        ExprKind::Var(name) => out.push_str(name),
        ExprKind::FieldAccess { base, field } => {
            write_expr(out, base, 7);
            let _ = write!(out, ".{field}");
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            // Left-associative chains; comparisons do not chain at all.
            let lhs_min = if op.is_comparison() { p + 1 } else { p };
            write_expr(out, lhs, lhs_min);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, rhs, p + 1);
        }
        ExprKind::Neg(inner) => {
            out.push('-');
            // A nested negation needs parens so the printer never emits `--`.
            let min = if matches!(inner.kind, ExprKind::Neg(_)) { 7 } else { 6 };
            write_expr(out, inner, min);
        }
        ExprKind::If { cond, then, otherwise } => {
            out.push_str("if ");
            write_expr(out, cond, 0);
            out.push_str(" then ");
            write_expr(out, then, 0);
            out.push_str(" else ");
            write_expr(out, otherwise, 0);
        }
        ExprKind::Aggregate(agg) => {
            let _ = write!(out, "{}(all {} {}", agg.kind, agg.record_type, agg.binder);
            if let Some(filter) = &agg.filter {
                out.push_str(" where ");
                write_expr(out, filter, 0);
            }
            if let Some(select) = &agg.select {
                out.push_str(" select ");
                write_expr(out, select, 0);
            }
            out.push(')');
        }
    }
    if needs_parens {
        out.push(')');
    }
}

fn write_literal(out: &mut String, lit: &Literal) {
    match lit {
        Literal::Number { lexeme, percent } => {
            out.push_str(lexeme);
            if *percent {
                out.push('%');
            }
        }
        Literal::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Literal::Text(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
    }
}

pub fn print_rule(rule: &RuleDecl) -> String {
    match &rule.body {
        None => format!("rule {}.{} = none", rule.record, rule.field),
        Some(body) => format!("rule {}.{} = {}", rule.record, rule.field, print_expr(body)),
    }
}

/// Prints a whole ruleset: enums, then records, then rules.
pub fn print_ruleset(schema: &Schema, rules: &[RuleDecl]) -> String {
    let mut out = String::new();
    for e in schema.enums() {
        let _ = writeln!(out, "enum {} {{ {} }}", e.name, e.members.join(", "));
    }
    for r in schema.records() {
        let _ = writeln!(out, "record {} {{", r.name);
        for f in &r.fields {
            let _ = writeln!(out, "  {}: {} {}", f.name, f.sort, f.value_type);
        }
        out.push_str("}\n");
    }
    for rule in rules {
        out.push_str(&print_rule(rule));
        out.push('\n');
    }
    out
}
