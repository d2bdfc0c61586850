//! Bidirectional type checker enforcing the unit algebra over `int`, `money`
//! and `percent`.
//!
//! Numeric literals without a `%` suffix have no fixed type: they take the
//! type the context demands. When several types fit, an integral literal
//! prefers `int`; any other remaining choice is reported as ambiguous.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::ast::*;
use crate::decimal::Decimal;
use crate::diagnostic::{Diagnostic, SourceSpan, ToDiagnostic};
use crate::schema::{FactSort, Schema, ValueType};
use crate::value::FactValue;

/// A type-annotated expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedExpr {
    pub kind: TypedKind,
    pub ty: ValueType,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypedKind {
    SelfRef,
    Const(FactValue),
    Var(String),
    Field {
        base: Box<TypedExpr>,
        record_type: String,
        field: String,
    },
    Binary {
        op: BinOp,
        lhs: Box<TypedExpr>,
        rhs: Box<TypedExpr>,
    },
    Neg(Box<TypedExpr>),
    If {
        cond: Box<TypedExpr>,
        then: Box<TypedExpr>,
        otherwise: Box<TypedExpr>,
    },
    Aggregate(Box<TypedAggregate>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedAggregate {
    pub kind: AggKind,
    pub record_type: String,
    pub binder: String,
    pub filter: Option<TypedExpr>,
    pub select: Option<TypedExpr>,
}

impl TypedExpr {
    /// Visits every node, parents before children.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a TypedExpr)) {
        f(self);
        match &self.kind {
            TypedKind::SelfRef | TypedKind::Const(_) | TypedKind::Var(_) => {}
            TypedKind::Field { base, .. } => base.walk(f),
            TypedKind::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            TypedKind::Neg(inner) => inner.walk(f),
            TypedKind::If { cond, then, otherwise } => {
                cond.walk(f);
                then.walk(f);
                otherwise.walk(f);
            }
            TypedKind::Aggregate(agg) => {
                if let Some(e) = &agg.filter {
                    e.walk(f);
                }
                if let Some(e) = &agg.select {
                    e.walk(f);
                }
            }
        }
    }
}

/// The rule attached to an Optional fact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleBinding {
    NoRule,
    HasRule(TypedExpr),
}

/// A validated schema plus one binding per Optional field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedRuleset {
    pub schema: Arc<Schema>,
    pub rules: BTreeMap<(String, String), RuleBinding>,
}

impl TypedRuleset {
    pub fn binding(&self, record: &str, field: &str) -> Option<&RuleBinding> {
        self.rules.get(&(record.to_string(), field.to_string()))
    }

    /// `(record, field, expr)` for every field that has a rule.
    pub fn ruled_fields(&self) -> impl Iterator<Item = (&str, &str, &TypedExpr)> {
        self.rules.iter().filter_map(|((r, f), b)| match b {
            RuleBinding::HasRule(e) => Some((r.as_str(), f.as_str(), e)),
            RuleBinding::NoRule => None,
        })
    }

    /// A ruleset over `schema` where every Optional field has no rule.
    pub fn without_rules(schema: Schema) -> Self {
        typecheck_ruleset(schema, &[]).expect("an empty rule list always checks")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("expected {expected}, found {found}")]
    TypeMismatch {
        expected: String,
        found: String,
        span: SourceSpan,
    },
    #[error("record type `{record}` has no field `{field}`")]
    UnknownField {
        record: String,
        field: String,
        span: SourceSpan,
    },
    #[error("unknown record type `{name}`")]
    UnknownRecord { name: String, span: SourceSpan },
    #[error("unknown enum `{name}`")]
    UnknownEnum { name: String, span: SourceSpan },
    #[error("enum `{enum_name}` has no member `{member}`")]
    UnknownEnumMember {
        enum_name: String,
        member: String,
        span: SourceSpan,
    },
    #[error("unknown variable `{name}`")]
    UnknownVariable { name: String, span: SourceSpan },
    #[error("binder `{name}` shadows an enclosing binder")]
    ShadowedBinder { name: String, span: SourceSpan },
    #[error("unit error: {lhs} {op} {rhs} is not defined")]
    UnitError {
        op: BinOp,
        lhs: ValueType,
        rhs: ValueType,
        span: SourceSpan,
    },
    #[error("`{record}.{field}` is an input fact and cannot have a rule")]
    RuleOnInputField {
        record: String,
        field: String,
        span: SourceSpan,
    },
    #[error("more than one rule for `{record}.{field}`")]
    DuplicateRule {
        record: String,
        field: String,
        span: SourceSpan,
    },
    #[error("cannot determine the type of numeric literal; {hint}")]
    AmbiguousLiteral { hint: String, span: SourceSpan },
    #[error("literal `{lexeme}` is not a valid {ty}")]
    InvalidLiteral {
        lexeme: String,
        ty: ValueType,
        span: SourceSpan,
    },
}

impl TypeError {
    pub fn code(&self) -> &'static str {
        match self {
            TypeError::TypeMismatch { .. } => "TypeMismatch",
            TypeError::UnknownField { .. } => "UnknownField",
            TypeError::UnknownRecord { .. } => "UnknownRecord",
            TypeError::UnknownEnum { .. } => "UnknownEnum",
            TypeError::UnknownEnumMember { .. } => "UnknownEnumMember",
            TypeError::UnknownVariable { .. } => "UnknownVariable",
            TypeError::ShadowedBinder { .. } => "ShadowedBinder",
            TypeError::UnitError { .. } => "UnitError",
            TypeError::RuleOnInputField { .. } => "RuleOnInputField",
            TypeError::DuplicateRule { .. } => "DuplicateRule",
            TypeError::AmbiguousLiteral { .. } => "AmbiguousLiteral",
            TypeError::InvalidLiteral { .. } => "InvalidLiteral",
        }
    }

    pub fn span(&self) -> &SourceSpan {
        match self {
            TypeError::TypeMismatch { span, .. }
            | TypeError::UnknownField { span, .. }
            | TypeError::UnknownRecord { span, .. }
            | TypeError::UnknownEnum { span, .. }
            | TypeError::UnknownEnumMember { span, .. }
            | TypeError::UnknownVariable { span, .. }
            | TypeError::ShadowedBinder { span, .. }
            | TypeError::UnitError { span, .. }
            | TypeError::RuleOnInputField { span, .. }
            | TypeError::DuplicateRule { span, .. }
            | TypeError::AmbiguousLiteral { span, .. }
            | TypeError::InvalidLiteral { span, .. } => span,
        }
    }
}

impl ToDiagnostic for TypeError {
    fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::new(self.code(), self.to_string(), Some(self.span()))
    }
}

/// Why a binary operator rejects its operand types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpTypeError {
    /// Both operands are numeric but the combination is outside the unit table.
    Unit,
    /// Operand types are not acceptable for the operator at all.
    Mismatch,
}

/// The closed unit table: result type of `lhs op rhs`.
pub fn binop_result(op: BinOp, lhs: &ValueType, rhs: &ValueType) -> Result<ValueType, OpTypeError> {
    use ValueType::{Bool, Int, Money, Percent};
    let reject = || {
        if lhs.is_numeric() && rhs.is_numeric() {
            Err(OpTypeError::Unit)
        } else {
            Err(OpTypeError::Mismatch)
        }
    };
    match op {
        BinOp::Add | BinOp::Sub => match (lhs, rhs) {
            (Int, Int) => Ok(Int),
            (Money, Money) => Ok(Money),
            (Percent, Percent) => Ok(Percent),
            _ => reject(),
        },
        BinOp::Mul => match (lhs, rhs) {
            (Int, Int) => Ok(Int),
            (Percent, Money) | (Money, Percent) | (Int, Money) | (Money, Int) => Ok(Money),
            (Percent, Percent) | (Int, Percent) | (Percent, Int) => Ok(Percent),
            _ => reject(),
        },
        BinOp::Div => match (lhs, rhs) {
            (Money, Money) => Ok(Percent),
            (Money, Int) => Ok(Money),
            (Percent, Percent) => Ok(Percent),
            (Int, Int) => Ok(Int),
            _ => reject(),
        },
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            if lhs == rhs && lhs.is_numeric() {
                Ok(Bool)
            } else {
                reject()
            }
        }
        BinOp::Eq | BinOp::Ne => {
            if lhs == rhs {
                Ok(Bool)
            } else {
                reject()
            }
        }
        BinOp::And | BinOp::Or => match (lhs, rhs) {
            (Bool, Bool) => Ok(Bool),
            _ => Err(OpTypeError::Mismatch),
        },
    }
}

/// Type-checks rule declarations against a validated schema.
///
/// The result does not depend on the order of `decls`; errors are sorted by
/// source position.
pub fn typecheck_ruleset(schema: Schema, decls: &[RuleDecl]) -> Result<TypedRuleset, Vec<TypeError>> {
    let mut checker = Checker {
        schema: &schema,
        errors: Vec::new(),
    };
    let mut rules: BTreeMap<(String, String), RuleBinding> = BTreeMap::new();
    let mut seen: BTreeMap<(String, String), &SourceSpan> = BTreeMap::new();

    // Duplicates are judged by source position so the report is order independent.
    let mut ordered: Vec<&RuleDecl> = decls.iter().collect();
    ordered.sort_by(|a, b| a.span.cmp(&b.span));

    for decl in ordered {
        let Some(record) = schema.record(&decl.record) else {
            checker.errors.push(TypeError::UnknownRecord {
                name: decl.record.clone(),
                span: decl.span.clone(),
            });
            continue;
        };
        let Some(field) = record.field(&decl.field) else {
            checker.errors.push(TypeError::UnknownField {
                record: decl.record.clone(),
                field: decl.field.clone(),
                span: decl.span.clone(),
            });
            continue;
        };
        if field.sort == FactSort::Input {
            checker.errors.push(TypeError::RuleOnInputField {
                record: decl.record.clone(),
                field: decl.field.clone(),
                span: decl.span.clone(),
            });
            continue;
        }
        let target = (decl.record.clone(), decl.field.clone());
        if seen.contains_key(&target) {
            checker.errors.push(TypeError::DuplicateRule {
                record: decl.record.clone(),
                field: decl.field.clone(),
                span: decl.span.clone(),
            });
            continue;
        }
        seen.insert(target.clone(), &decl.span);
        let binding = match &decl.body {
            None => RuleBinding::NoRule,
            Some(body) => {
                let scope = Scope {
                    self_type: &decl.record,
                    binders: Vec::new(),
                };
                match checker.check(body, &field.value_type, &scope) {
                    Some(typed) => RuleBinding::HasRule(typed),
                    None => continue,
                }
            }
        };
        rules.insert(target, binding);
    }

    let mut errors = checker.errors;
    if !errors.is_empty() {
        errors.sort_by(|a, b| a.span().cmp(b.span()));
        return Err(errors);
    }
    for record in schema.records() {
        for field in &record.fields {
            if field.sort == FactSort::Optional {
                rules
                    .entry((record.name.clone(), field.name.clone()))
                    .or_insert(RuleBinding::NoRule);
            }
        }
    }
    Ok(TypedRuleset {
        schema: Arc::new(schema),
        rules,
    })
}

struct Scope<'a> {
    self_type: &'a str,
    binders: Vec<(String, String)>,
}

impl Scope<'_> {
    fn lookup(&self, name: &str) -> Option<&str> {
        self.binders
            .iter()
            .rev()
            .find(|(b, _)| b == name)
            .map(|(_, r)| r.as_str())
    }
}

struct Checker<'s> {
    schema: &'s Schema,
    errors: Vec<TypeError>,
}

/// Candidate types for an unsuffixed numeric literal, in preference order.
const NUMERIC: [ValueType; 3] = [ValueType::Int, ValueType::Percent, ValueType::Money];

/// An expression built only from unsuffixed numeric literals, negation and
/// arithmetic, whose type is decided by context.
fn is_flexible(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Literal(Literal::Number { percent, .. }) => !percent,
        ExprKind::Neg(inner) => is_flexible(inner),
        ExprKind::Binary { op, lhs, rhs } => op.is_arithmetic() && is_flexible(lhs) && is_flexible(rhs),
        ExprKind::If { then, otherwise, .. } => is_flexible(then) && is_flexible(otherwise),
        _ => false,
    }
}

fn mk(kind: TypedKind, ty: ValueType, span: &SourceSpan) -> TypedExpr {
    TypedExpr {
        kind,
        ty,
        span: span.clone(),
    }
}

impl Checker<'_> {
    fn err(&mut self, e: TypeError) -> Option<TypedExpr> {
        self.errors.push(e);
        None
    }

    fn mismatch(&mut self, expected: &ValueType, found: &ValueType, span: &SourceSpan) -> Option<TypedExpr> {
        self.err(TypeError::TypeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
            span: span.clone(),
        })
    }

    /// Runs `check` without keeping any errors it reports.
    fn try_check(&mut self, e: &Expr, expected: &ValueType, scope: &Scope) -> Option<TypedExpr> {
        let mark = self.errors.len();
        let result = self.check(e, expected, scope);
        let failed = self.errors.len() > mark;
        self.errors.truncate(mark);
        if failed {
            None
        } else {
            result
        }
    }

    fn check(&mut self, e: &Expr, expected: &ValueType, scope: &Scope) -> Option<TypedExpr> {
        match &e.kind {
            ExprKind::Literal(Literal::Number { lexeme, percent }) => {
                let value = number_literal(lexeme, *percent, expected);
                match value {
                    Some(v) => Some(mk(TypedKind::Const(v), expected.clone(), &e.span)),
                    None if expected.is_numeric() && !(*percent && *expected != ValueType::Percent) => {
                        self.err(TypeError::InvalidLiteral {
                            lexeme: lexeme.clone(),
                            ty: expected.clone(),
                            span: e.span.clone(),
                        })
                    }
                    None => {
                        let found = if *percent { "percent" } else { "number" };
                        self.err(TypeError::TypeMismatch {
                            expected: expected.to_string(),
                            found: found.to_string(),
                            span: e.span.clone(),
                        })
                    }
                }
            }
            ExprKind::Neg(inner) if is_flexible(e) => {
                if !expected.is_numeric() {
                    return self.mismatch(expected, &ValueType::Int, &e.span);
                }
                let inner = self.check(inner, expected, scope)?;
                Some(mk(TypedKind::Neg(Box::new(inner)), expected.clone(), &e.span))
            }
            ExprKind::Binary { op, lhs, rhs } if !op.is_logical() => self.binary(e, *op, lhs, rhs, Some(expected), scope),
            ExprKind::If { cond, then, otherwise } => {
                let cond = self.check(cond, &ValueType::Bool, scope);
                let then = self.check(then, expected, scope);
                let otherwise = self.check(otherwise, expected, scope);
                Some(mk(
                    TypedKind::If {
                        cond: Box::new(cond?),
                        then: Box::new(then?),
                        otherwise: Box::new(otherwise?),
                    },
                    expected.clone(),
                    &e.span,
                ))
            }
            ExprKind::Aggregate(agg) if agg.kind == AggKind::Sum || matches!(agg.kind, AggKind::Min | AggKind::Max) => {
                self.aggregate(e, agg, Some(expected), scope)
            }
            _ => {
                let typed = self.infer(e, scope)?;
                if &typed.ty == expected {
                    Some(typed)
                } else {
                    self.mismatch(expected, &typed.ty, &e.span)
                }
            }
        }
    }

    fn infer(&mut self, e: &Expr, scope: &Scope) -> Option<TypedExpr> {
        match &e.kind {
            ExprKind::SelfRef => Some(mk(
                TypedKind::SelfRef,
                ValueType::Key(scope.self_type.to_string()),
                &e.span,
            )),
            ExprKind::Literal(Literal::Bool(b)) => {
                Some(mk(TypedKind::Const(FactValue::Bool(*b)), ValueType::Bool, &e.span))
            }
            ExprKind::Literal(Literal::Text(s)) => {
                Some(mk(TypedKind::Const(FactValue::Text(s.clone())), ValueType::Text, &e.span))
            }
            ExprKind::Literal(Literal::Number { percent: true, .. }) => self.check(e, &ValueType::Percent, scope),
            ExprKind::Literal(Literal::Number { .. }) => self.resolve_flexible(e, scope),
            ExprKind::Neg(_) | ExprKind::If { .. } if is_flexible(e) => self.resolve_flexible(e, scope),
            ExprKind::Neg(inner) => {
                let inner = self.infer(inner, scope)?;
                if !inner.ty.is_numeric() {
                    let found = inner.ty.clone();
                    return self.err(TypeError::TypeMismatch {
                        expected: "a number".to_string(),
                        found: found.to_string(),
                        span: e.span.clone(),
                    });
                }
                let ty = inner.ty.clone();
                Some(mk(TypedKind::Neg(Box::new(inner)), ty, &e.span))
            }
            ExprKind::EnumLit { enum_name, member } => {
                let Some(def) = self.schema.enum_def(enum_name) else {
                    return self.err(TypeError::UnknownEnum {
                        name: enum_name.clone(),
                        span: e.span.clone(),
                    });
                };
                if !def.has_member(member) {
                    return self.err(TypeError::UnknownEnumMember {
                        enum_name: enum_name.clone(),
                        member: member.clone(),
                        span: e.span.clone(),
                    });
                }
                Some(mk(
                    TypedKind::Const(FactValue::enum_val(enum_name, member)),
                    ValueType::Enum(enum_name.clone()),
                    &e.span,
                ))
            }
            ExprKind::Var(name) => match scope.lookup(name) {
                Some(record) => Some(mk(
                    TypedKind::Var(name.clone()),
                    ValueType::Key(record.to_string()),
                    &e.span,
                )),
                None => self.err(TypeError::UnknownVariable {
                    name: name.clone(),
                    span: e.span.clone(),
                }),
            },
            ExprKind::FieldAccess { base, field } => {
                let base = self.infer(base, scope)?;
                let ValueType::Key(record) = &base.ty else {
                    let found = base.ty.to_string();
                    return self.err(TypeError::TypeMismatch {
                        expected: "a record key".to_string(),
                        found,
                        span: base.span.clone(),
                    });
                };
                let record = record.clone();
                match self.schema.fact_type(&record, field) {
                    Ok(ty) => Some(mk(
                        TypedKind::Field {
                            base: Box::new(base),
                            record_type: record,
                            field: field.clone(),
                        },
                        ty,
                        &e.span,
                    )),
                    Err(_) => self.err(TypeError::UnknownField {
                        record,
                        field: field.clone(),
                        span: e.span.clone(),
                    }),
                }
            }
            ExprKind::Binary { op, lhs, rhs } => self.binary(e, *op, lhs, rhs, None, scope),
            ExprKind::If { cond, then, otherwise } => {
                let cond = self.check(cond, &ValueType::Bool, scope);
                // Infer the branch whose type is not context dependent first.
                let (then, otherwise) = if is_flexible(then) && !is_flexible(otherwise) {
                    let otherwise = self.infer(otherwise, scope);
                    let then = match &otherwise {
                        Some(o) => self.check(then, &o.ty, scope),
                        None => None,
                    };
                    (then, otherwise)
                } else {
                    let then = self.infer(then, scope);
                    let otherwise = match &then {
                        Some(t) => self.check(otherwise, &t.ty, scope),
                        None => None,
                    };
                    (then, otherwise)
                };
                let then = then?;
                let ty = then.ty.clone();
                Some(mk(
                    TypedKind::If {
                        cond: Box::new(cond?),
                        then: Box::new(then),
                        otherwise: Box::new(otherwise?),
                    },
                    ty,
                    &e.span,
                ))
            }
            ExprKind::Aggregate(agg) => self.aggregate(e, agg, None, scope),
        }
    }

    /// Infers a flexible expression with no context: integral literals are
    /// `int`; anything else is ambiguous.
    fn resolve_flexible(&mut self, e: &Expr, scope: &Scope) -> Option<TypedExpr> {
        if let Some(t) = self.try_check(e, &ValueType::Int, scope) {
            return Some(t);
        }
        self.err(TypeError::AmbiguousLiteral {
            hint: "write it with a `%` suffix or combine it with a typed fact".to_string(),
            span: e.span.clone(),
        })
    }

    fn binary(
        &mut self,
        e: &Expr,
        op: BinOp,
        lhs: &Expr,
        rhs: &Expr,
        expected: Option<&ValueType>,
        scope: &Scope,
    ) -> Option<TypedExpr> {
        if op.is_logical() {
            let l = self.check(lhs, &ValueType::Bool, scope);
            let r = self.check(rhs, &ValueType::Bool, scope);
            let typed = mk(
                TypedKind::Binary {
                    op,
                    lhs: Box::new(l?),
                    rhs: Box::new(r?),
                },
                ValueType::Bool,
                &e.span,
            );
            return self.expect_type(typed, expected);
        }
        // Comparisons produce bool whatever the operands are, so the
        // expected type says nothing about literal operands.
        let result_hint = if op.is_arithmetic() { expected } else { None };
        let (l, r) = match (is_flexible(lhs), is_flexible(rhs)) {
            (false, false) => {
                let l = self.infer(lhs, scope);
                let r = self.infer(rhs, scope);
                (l?, r?)
            }
            (true, false) => {
                let r = self.infer(rhs, scope)?;
                let l = self.pick_literal_side(e, op, lhs, &r.ty, true, result_hint, scope)?;
                (l, r)
            }
            (false, true) => {
                let l = self.infer(lhs, scope)?;
                let r = self.pick_literal_side(e, op, rhs, &l.ty, false, result_hint, scope)?;
                (l, r)
            }
            (true, true) => self.pick_both_literal(e, op, lhs, rhs, result_hint, scope)?,
        };
        let ty = match binop_result(op, &l.ty, &r.ty) {
            Ok(ty) => ty,
            Err(kind) => return self.op_error(kind, op, &l.ty, &r.ty, &e.span),
        };
        let typed = mk(
            TypedKind::Binary {
                op,
                lhs: Box::new(l),
                rhs: Box::new(r),
            },
            ty,
            &e.span,
        );
        self.expect_type(typed, expected)
    }

    fn expect_type(&mut self, typed: TypedExpr, expected: Option<&ValueType>) -> Option<TypedExpr> {
        match expected {
            Some(t) if *t != typed.ty => self.mismatch(t, &typed.ty, &typed.span),
            _ => Some(typed),
        }
    }

    fn op_error(
        &mut self,
        kind: OpTypeError,
        op: BinOp,
        lhs: &ValueType,
        rhs: &ValueType,
        span: &SourceSpan,
    ) -> Option<TypedExpr> {
        match kind {
            OpTypeError::Unit => self.err(TypeError::UnitError {
                op,
                lhs: lhs.clone(),
                rhs: rhs.clone(),
                span: span.clone(),
            }),
            OpTypeError::Mismatch => self.err(TypeError::TypeMismatch {
                expected: format!("operands valid for `{op}`"),
                found: format!("{lhs} and {rhs}"),
                span: span.clone(),
            }),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn pick_literal_side(
        &mut self,
        e: &Expr,
        op: BinOp,
        flex: &Expr,
        fixed: &ValueType,
        flex_is_lhs: bool,
        expected: Option<&ValueType>,
        scope: &Scope,
    ) -> Option<TypedExpr> {
        let mut valid: Vec<TypedExpr> = Vec::new();
        for candidate in NUMERIC {
            let (l, r) = if flex_is_lhs { (&candidate, fixed) } else { (fixed, &candidate) };
            let Ok(result) = binop_result(op, l, r) else { continue };
            if expected.is_some_and(|t| *t != result) {
                continue;
            }
            if let Some(typed) = self.try_check(flex, &candidate, scope) {
                valid.push(typed);
            }
        }
        match valid.len() {
            0 => {
                // Some reading may type-check but disagree with the context.
                for candidate in NUMERIC {
                    let (l, r) = if flex_is_lhs { (&candidate, fixed) } else { (fixed, &candidate) };
                    if let Ok(result) = binop_result(op, l, r) {
                        if self.try_check(flex, &candidate, scope).is_some() {
                            let expected = expected.expect("no candidate fits only under an expectation");
                            return self.mismatch(expected, &result, &e.span);
                        }
                    }
                }
                let default = ValueType::Int;
                let (l, r) = if flex_is_lhs { (&default, fixed) } else { (fixed, &default) };
                match binop_result(op, l, r) {
                    Err(kind) => self.op_error(kind, op, l, r, &e.span),
                    Ok(_) => self.check(flex, &default, scope),
                }
            }
            1 => valid.pop(),
            _ => match valid.iter().position(|t| t.ty == ValueType::Int) {
                Some(i) => Some(valid.swap_remove(i)),
                None => self.err(TypeError::AmbiguousLiteral {
                    hint: format!("it could be any of {}", describe(&valid)),
                    span: flex.span.clone(),
                }),
            },
        }
    }

    fn pick_both_literal(
        &mut self,
        e: &Expr,
        op: BinOp,
        lhs: &Expr,
        rhs: &Expr,
        expected: Option<&ValueType>,
        scope: &Scope,
    ) -> Option<(TypedExpr, TypedExpr)> {
        let mut valid: Vec<(TypedExpr, TypedExpr)> = Vec::new();
        for lt in NUMERIC {
            for rt in NUMERIC {
                let Ok(result) = binop_result(op, &lt, &rt) else { continue };
                if expected.is_some_and(|t| *t != result) {
                    continue;
                }
                let Some(l) = self.try_check(lhs, &lt, scope) else { continue };
                let Some(r) = self.try_check(rhs, &rt, scope) else { continue };
                valid.push((l, r));
            }
        }
        let int_count = |p: &(TypedExpr, TypedExpr)| {
            (p.0.ty == ValueType::Int) as u8 + (p.1.ty == ValueType::Int) as u8
        };
        match valid.len() {
            0 => {
                match expected {
                    Some(t) => self.err(TypeError::TypeMismatch {
                        expected: t.to_string(),
                        found: "numeric literals".to_string(),
                        span: e.span.clone(),
                    }),
                    None => self.err(TypeError::AmbiguousLiteral {
                        hint: "no numeric type fits both operands".to_string(),
                        span: e.span.clone(),
                    }),
                };
                None
            }
            1 => valid.pop(),
            _ => {
                let best = valid.iter().map(int_count).max().unwrap_or(0);
                if best == 0 {
                    self.err(TypeError::AmbiguousLiteral {
                        hint: "annotate one operand with `%` or combine it with a typed fact".to_string(),
                        span: e.span.clone(),
                    });
                    return None;
                }
                let i = valid.iter().position(|p| int_count(p) == best).expect("max exists");
                Some(valid.swap_remove(i))
            }
        }
    }

    fn aggregate(
        &mut self,
        e: &Expr,
        agg: &Aggregate,
        expected: Option<&ValueType>,
        scope: &Scope,
    ) -> Option<TypedExpr> {
        if self.schema.record(&agg.record_type).is_none() {
            return self.err(TypeError::UnknownRecord {
                name: agg.record_type.clone(),
                span: e.span.clone(),
            });
        }
        if scope.lookup(&agg.binder).is_some() {
            return self.err(TypeError::ShadowedBinder {
                name: agg.binder.clone(),
                span: e.span.clone(),
            });
        }
        let inner = Scope {
            self_type: scope.self_type,
            binders: scope
                .binders
                .iter()
                .cloned()
                .chain([(agg.binder.clone(), agg.record_type.clone())])
                .collect(),
        };
        let filter = agg.filter.as_ref().map(|f| self.check(f, &ValueType::Bool, &inner));
        let (select, ty) = match agg.kind {
            AggKind::Count => (None, ValueType::Int),
            AggKind::Any | AggKind::All => {
                let s = self.check(agg.select.as_ref()?, &ValueType::Bool, &inner);
                (Some(s), ValueType::Bool)
            }
            AggKind::Sum | AggKind::Min | AggKind::Max => {
                let select = agg.select.as_ref()?;
                let s = match expected {
                    Some(t) if t.is_numeric() => self.check(select, t, &inner),
                    _ => self.infer(select, &inner),
                };
                let s = s?;
                if !s.ty.is_numeric() {
                    let found = s.ty.to_string();
                    return self.err(TypeError::TypeMismatch {
                        expected: format!("int, money or percent for `{}`", agg.kind),
                        found,
                        span: s.span.clone(),
                    });
                }
                let ty = s.ty.clone();
                (Some(Some(s)), ty)
            }
        };
        let filter = match filter {
            Some(f) => Some(f?),
            None => None,
        };
        let select = match select {
            Some(s) => Some(s?),
            None => None,
        };
        let typed = mk(
            TypedKind::Aggregate(Box::new(TypedAggregate {
                kind: agg.kind,
                record_type: agg.record_type.clone(),
                binder: agg.binder.clone(),
                filter,
                select,
            })),
            ty,
            &e.span,
        );
        self.expect_type(typed, expected)
    }
}

fn describe(candidates: &[TypedExpr]) -> String {
    candidates
        .iter()
        .map(|t| t.ty.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Converts an unsuffixed or `%`-suffixed numeric lexeme to a value of `ty`.
fn number_literal(lexeme: &str, percent: bool, ty: &ValueType) -> Option<FactValue> {
    match (ty, percent) {
        (ValueType::Percent, true) => Decimal::from_percent_lexeme(lexeme).ok().map(FactValue::Percent),
        (_, true) => None,
        (ValueType::Int, false) => {
            if lexeme.contains('.') {
                None
            } else {
                lexeme.parse().ok().map(FactValue::Int)
            }
        }
        (ValueType::Money, false) => lexeme.parse().ok().map(FactValue::Money),
        (ValueType::Percent, false) => lexeme.parse().ok().map(FactValue::Percent),
        _ => None,
    }
}

/// Re-derives a node's annotation from its children's annotations.
pub fn rederive_type(schema: &Schema, e: &TypedExpr, self_type: &str) -> Option<ValueType> {
    Some(match &e.kind {
        TypedKind::SelfRef => ValueType::Key(self_type.to_string()),
        TypedKind::Const(v) => v.value_type(),
        TypedKind::Var(_) => return Some(e.ty.clone()),
        TypedKind::Field { base, field, .. } => match &base.ty {
            ValueType::Key(r) => schema.fact_type(r, field).ok()?,
            _ => return None,
        },
        TypedKind::Binary { op, lhs, rhs } => binop_result(*op, &lhs.ty, &rhs.ty).ok()?,
        TypedKind::Neg(inner) if inner.ty.is_numeric() => inner.ty.clone(),
        TypedKind::Neg(_) => return None,
        TypedKind::If { cond, then, otherwise } => {
            if cond.ty != ValueType::Bool || then.ty != otherwise.ty {
                return None;
            }
            then.ty.clone()
        }
        TypedKind::Aggregate(agg) => match agg.kind {
            AggKind::Count => ValueType::Int,
            AggKind::Any | AggKind::All => ValueType::Bool,
            _ => agg.select.as_ref()?.ty.clone(),
        },
    })
}

impl Default for TypedRuleset {
    fn default() -> Self {
        TypedRuleset::without_rules(Schema::new())
    }
}
