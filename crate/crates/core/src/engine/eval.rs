//! Expression evaluation over a session.
//!
//! Binary operators evaluate both operands and union their errors. Field
//! access on a key and `if` conditions are sequenced: when the key or the
//! condition cannot be computed, nothing that depends on it is attempted.

use crate::decimal::{div_round_half_even, Decimal};
use crate::diagnostic::SourceSpan;
use crate::dsl::{AggKind, BinOp, RuleBinding, TypedExpr, TypedKind};
use crate::schema::{FactSort, ValueType, KEY_FIELD};
use crate::value::{FactKey, FactRef, FactValue};

use super::deps::DependencySet;
use super::error::{merge_errors, EvalError};
use super::session::Session;

pub(crate) type EvalResult = Result<FactValue, Vec<EvalError>>;

pub(crate) struct Evaluator<'s> {
    pub session: &'s mut Session,
    pub deps: DependencySet,
}

impl Evaluator<'_> {
    pub fn access_field(&mut self, key: &FactKey, field: &str) -> EvalResult {
        let fact = FactRef::new(key.clone(), field);
        if !self.deps.field_deps.contains(&fact) {
            self.deps.field_deps.insert(fact.clone());
        }

        if let Some(v) = self.session.overrides.get(&fact) {
            return Ok(v.clone());
        }
        let Some(record) = self.session.db.lookup_record(key) else {
            return Err(vec![EvalError::UnknownKey(key.clone())]);
        };
        if field == KEY_FIELD {
            return Ok(FactValue::KeyVal(key.clone()));
        }
        let schema = self.session.ruleset.schema.clone();
        let Ok(sort) = schema.fact_sort(&key.record_type, field) else {
            return Err(vec![EvalError::UnknownField(fact)]);
        };
        if let Some(v) = record.get(field) {
            // A memoized value stands for everything its rule consulted.
            if let Some(deps) = self.session.memoized.get(&fact) {
                self.deps.extend(deps.clone());
            }
            return Ok(v.clone());
        }
        if sort == FactSort::Input {
            return Err(vec![EvalError::MissingFact(fact)]);
        }

        let ruleset = self.session.ruleset.clone();
        let body = match ruleset.binding(&key.record_type, field) {
            None => return Err(vec![EvalError::NoRuleDefined(fact)]),
            Some(RuleBinding::NoRule) => return Err(vec![EvalError::MissingFact(fact)]),
            Some(RuleBinding::HasRule(body)) => body,
        };
        if let Some(pos) = self.session.in_progress.iter().position(|f| *f == fact) {
            return Err(vec![EvalError::Cycle(self.session.in_progress[pos..].to_vec())]);
        }

        self.session.in_progress.push(fact.clone());
        *self.session.rule_invocations.entry(fact.clone()).or_default() += 1;
        let outer = std::mem::take(&mut self.deps);
        let result = self.eval(key, body, &mut Vec::new());
        let inner = std::mem::replace(&mut self.deps, outer);
        self.session.in_progress.pop();

        if let Ok(v) = &result {
            if self.session.overrides.is_empty() {
                self.session.memoize(fact, v.clone(), inner.clone());
            }
        }
        self.deps.extend(inner);
        result
    }

    pub fn all_keys_of_type(&mut self, record_type: &str) -> Vec<FactKey> {
        self.deps.type_deps.insert(record_type.to_string());
        self.session.db.keys_of_type(record_type).cloned().collect()
    }

    pub fn eval(&mut self, this: &FactKey, expr: &TypedExpr, env: &mut Vec<(String, FactKey)>) -> EvalResult {
        match &expr.kind {
            TypedKind::SelfRef => Ok(FactValue::KeyVal(this.clone())),
            TypedKind::Const(v) => Ok(v.clone()),
            TypedKind::Var(name) => {
                let key = env
                    .iter()
                    .rev()
                    .find(|(b, _)| b == name)
                    .map(|(_, k)| k.clone())
                    .expect("binders are resolved by the type checker");
                Ok(FactValue::KeyVal(key))
            }
            TypedKind::Field { base, field, .. } => match self.eval(this, base, env)? {
                FactValue::KeyVal(key) => self.access_field(&key, field),
                other => unreachable!("field access on non-key value {other:?}"),
            },
            TypedKind::Binary { op, lhs, rhs } => {
                let l = self.eval(this, lhs, env);
                let r = self.eval(this, rhs, env);
                match (l, r) {
                    (Ok(a), Ok(b)) => apply_binary(*op, a, b, &expr.span).map_err(|e| vec![e]),
                    (Err(e), Ok(_)) | (Ok(_), Err(e)) => Err(e),
                    (Err(mut e1), Err(e2)) => {
                        merge_errors(&mut e1, e2);
                        Err(e1)
                    }
                }
            }
            TypedKind::Neg(inner) => {
                let v = self.eval(this, inner, env)?;
                negate(v, &expr.span).map_err(|e| vec![e])
            }
            TypedKind::If { cond, then, otherwise } => match self.eval(this, cond, env)? {
                FactValue::Bool(true) => self.eval(this, then, env),
                FactValue::Bool(false) => self.eval(this, otherwise, env),
                other => unreachable!("non-bool condition {other:?}"),
            },
            TypedKind::Aggregate(agg) => {
                let keys = self.all_keys_of_type(&agg.record_type);
                let mut errors = Vec::new();
                let mut values = Vec::new();
                let mut matched = 0i64;
                for key in keys {
                    env.push((agg.binder.clone(), key));
                    let included = match &agg.filter {
                        None => Ok(true),
                        Some(filter) => match self.eval(this, filter, env) {
                            Ok(FactValue::Bool(b)) => Ok(b),
                            Ok(other) => unreachable!("non-bool filter {other:?}"),
                            Err(e) => Err(e),
                        },
                    };
                    match included {
                        Ok(true) => {
                            matched += 1;
                            if let Some(select) = &agg.select {
                                match self.eval(this, select, env) {
                                    Ok(v) => values.push(v),
                                    Err(e) => merge_errors(&mut errors, e),
                                }
                            }
                        }
                        Ok(false) => {}
                        Err(e) => merge_errors(&mut errors, e),
                    }
                    env.pop();
                }
                if !errors.is_empty() {
                    return Err(errors);
                }
                aggregate(agg.kind, &expr.ty, matched, values, &expr.span).map_err(|e| vec![e])
            }
        }
    }
}

fn zero_of(ty: &ValueType) -> FactValue {
    match ty {
        ValueType::Int => FactValue::Int(0),
        ValueType::Money => FactValue::Money(Decimal::ZERO),
        ValueType::Percent => FactValue::Percent(Decimal::ZERO),
        other => unreachable!("sum over {other}"),
    }
}

fn aggregate(
    kind: AggKind,
    ty: &ValueType,
    matched: i64,
    values: Vec<FactValue>,
    span: &SourceSpan,
) -> Result<FactValue, EvalError> {
    let truth = |v: &FactValue| matches!(v, FactValue::Bool(true));
    match kind {
        AggKind::Count => Ok(FactValue::Int(matched)),
        AggKind::Sum => values
            .into_iter()
            .try_fold(zero_of(ty), |acc, v| apply_binary(BinOp::Add, acc, v, span)),
        AggKind::Min | AggKind::Max => {
            let best = if kind == AggKind::Min {
                values.into_iter().min()
            } else {
                values.into_iter().max()
            };
            best.ok_or_else(|| EvalError::EmptyAggregate {
                agg: kind,
                span: span.clone(),
            })
        }
        AggKind::Any => Ok(FactValue::Bool(values.iter().any(truth))),
        AggKind::All => Ok(FactValue::Bool(values.iter().all(truth))),
    }
}

fn negate(v: FactValue, span: &SourceSpan) -> Result<FactValue, EvalError> {
    let overflow = || EvalError::Overflow(span.clone());
    match v {
        FactValue::Int(i) => i.checked_neg().map(FactValue::Int).ok_or_else(overflow),
        FactValue::Money(d) => d.checked_neg().map(FactValue::Money).ok_or_else(overflow),
        FactValue::Percent(d) => d.checked_neg().map(FactValue::Percent).ok_or_else(overflow),
        other => unreachable!("negation of {other:?}"),
    }
}

/// Applies a binary operator to two values whose types the checker accepted.
pub fn apply_binary(op: BinOp, a: FactValue, b: FactValue, span: &SourceSpan) -> Result<FactValue, EvalError> {
    use FactValue::{Bool, Int, Money, Percent};
    let overflow = || EvalError::Overflow(span.clone());
    let div_zero = || EvalError::DivideByZero(span.clone());
    match op {
        BinOp::And | BinOp::Or => match (a, b) {
            (Bool(x), Bool(y)) => Ok(Bool(if op == BinOp::And { x && y } else { x || y })),
            other => unreachable!("logical op on {other:?}"),
        },
        BinOp::Eq => Ok(Bool(a == b)),
        BinOp::Ne => Ok(Bool(a != b)),
        BinOp::Lt => Ok(Bool(a < b)),
        BinOp::Le => Ok(Bool(a <= b)),
        BinOp::Gt => Ok(Bool(a > b)),
        BinOp::Ge => Ok(Bool(a >= b)),
        BinOp::Add | BinOp::Sub => {
            let add = op == BinOp::Add;
            match (a, b) {
                (Int(x), Int(y)) => if add { x.checked_add(y) } else { x.checked_sub(y) }
                    .map(Int)
                    .ok_or_else(overflow),
                (Money(x), Money(y)) => if add { x.checked_add(y) } else { x.checked_sub(y) }
                    .map(Money)
                    .ok_or_else(overflow),
                (Percent(x), Percent(y)) => if add { x.checked_add(y) } else { x.checked_sub(y) }
                    .map(Percent)
                    .ok_or_else(overflow),
                other => unreachable!("{op} on {other:?}"),
            }
        }
        BinOp::Mul => match (a, b) {
            (Int(x), Int(y)) => x.checked_mul(y).map(Int).ok_or_else(overflow),
            (Percent(p), Money(m)) | (Money(m), Percent(p)) => p.checked_mul(m).map(Money).ok_or_else(overflow),
            (Int(i), Money(m)) | (Money(m), Int(i)) => m.checked_mul_int(i).map(Money).ok_or_else(overflow),
            (Percent(x), Percent(y)) => x.checked_mul(y).map(Percent).ok_or_else(overflow),
            (Int(i), Percent(p)) | (Percent(p), Int(i)) => p.checked_mul_int(i).map(Percent).ok_or_else(overflow),
            other => unreachable!("* on {other:?}"),
        },
        BinOp::Div => match (a, b) {
            (Int(_), Int(0)) => Err(div_zero()),
            (Int(x), Int(y)) => div_round_half_even(x as i128, y as i128)
                .and_then(|q| i64::try_from(q).ok())
                .map(Int)
                .ok_or_else(overflow),
            (Money(x), Money(y)) => {
                if y.is_zero() {
                    return Err(div_zero());
                }
                x.checked_div(y).map(Percent).ok_or_else(overflow)
            }
            (Money(x), Int(y)) => {
                if y == 0 {
                    return Err(div_zero());
                }
                x.checked_div_int(y).map(Money).ok_or_else(overflow)
            }
            (Percent(x), Percent(y)) => {
                if y.is_zero() {
                    return Err(div_zero());
                }
                x.checked_div(y).map(Percent).ok_or_else(overflow)
            }
            other => unreachable!("/ on {other:?}"),
        },
    }
}
