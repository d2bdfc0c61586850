//! Random acyclic rulesets with a naive reference evaluator.
//!
//! Every instance has two record types. `A` records carry an input `x` and a
//! `link` to a `B` record; `B` records carry an input `v`. Both have an
//! optional `o` with no rule, and a handful of ruled optional fields `r0`,
//! `r1`, ... where `ri` only refers to `rj` with `j < i`. All values are money.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regula_core::{EvalError, EvalOutcome, FactValue};

const MICROS: i128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Ty {
    A,
    B,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::A => "A",
            Ty::B => "B",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Clone, Copy, Debug)]
pub enum AggOp {
    Sum,
    Min,
    Max,
}

#[derive(Clone, Debug)]
pub enum Ex {
    Const(i128),
    SelfField(String),
    LinkField(String),
    BinderField(String),
    Add(Box<Ex>, Box<Ex>),
    Sub(Box<Ex>, Box<Ex>),
    MulInt(Box<Ex>, i64),
    MulPct(Box<Ex>, i64),
    Neg(Box<Ex>),
    If {
        op: CmpOp,
        lhs: Box<Ex>,
        rhs: Box<Ex>,
        then: Box<Ex>,
        otherwise: Box<Ex>,
    },
    Agg {
        op: AggOp,
        threshold: i128,
        select: Box<Ex>,
    },
    TimesCount(Box<Ex>, i128),
}

#[derive(Clone, Debug)]
pub struct Rec {
    pub name: String,
    pub ty: Ty,
    pub link: Option<String>,
    pub values: BTreeMap<String, i128>,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub records: Vec<Rec>,
    /// Ruled fields in dependency order, with their owning type.
    pub rule_fields: Vec<(Ty, String)>,
    pub rules: BTreeMap<(Ty, String), Ex>,
}

pub type OracleResult = Result<i128, BTreeSet<String>>;

fn round_half_even(num: i128, den: i128) -> i128 {
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

fn money_text(micros: i128) -> String {
    let sign = if micros < 0 { "-" } else { "" };
    let m = micros.abs();
    let whole = m / MICROS;
    let frac = m % MICROS;
    let mut digits = format!("{frac:06}");
    while digits.len() > 2 && digits.ends_with('0') {
        digits.pop();
    }
    format!("{sign}{whole}.{digits}")
}

fn literal(micros: i128) -> String {
    if micros < 0 {
        format!("(-{})", money_text(-micros))
    } else {
        money_text(micros)
    }
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    ty: Ty,
    /// Ruled fields visible to the rule being generated, per type.
    visible_a: Vec<String>,
    visible_b: Vec<String>,
}

impl Gen<'_> {
    fn cents(&mut self) -> i128 {
        self.rng.random_range(-50_000i128..=50_000) * 10_000
    }

    fn own_fields(&self, ty: Ty) -> Vec<String> {
        let mut out = vec![match ty {
            Ty::A => "x".to_string(),
            Ty::B => "v".to_string(),
        }];
        out.push("o".to_string());
        out.extend(match ty {
            Ty::A => self.visible_a.clone(),
            Ty::B => self.visible_b.clone(),
        });
        out
    }

    fn pick(&mut self, options: &[String]) -> String {
        options[self.rng.random_range(0..options.len())].clone()
    }

    fn leaf(&mut self, allow_const: bool, binder: bool) -> Ex {
        loop {
            match self.rng.random_range(0..4) {
                0 if allow_const => return Ex::Const(self.cents()),
                1 => {
                    let f = self.own_fields(self.ty);
                    return Ex::SelfField(self.pick(&f));
                }
                2 if self.ty == Ty::A => {
                    let f = self.own_fields(Ty::B);
                    return Ex::LinkField(self.pick(&f));
                }
                3 if binder => {
                    let f = self.own_fields(Ty::B);
                    return Ex::BinderField(self.pick(&f));
                }
                _ => {}
            }
        }
    }

    fn expr(&mut self, depth: u32, allow_const: bool, binder: bool) -> Ex {
        if depth == 0 || self.rng.random_bool(0.3) {
            return self.leaf(allow_const, binder);
        }
        let d = depth - 1;
        let choice = self.rng.random_range(0..if binder { 6 } else { 9 });
        match choice {
            0 => Ex::Add(Box::new(self.expr(d, false, binder)), Box::new(self.expr(d, true, binder))),
            1 => Ex::Sub(Box::new(self.expr(d, false, binder)), Box::new(self.expr(d, true, binder))),
            2 => Ex::MulInt(Box::new(self.expr(d, false, binder)), self.rng.random_range(0..5)),
            3 => Ex::MulPct(Box::new(self.expr(d, false, binder)), self.rng.random_range(1..150)),
            4 => Ex::Neg(Box::new(self.expr(d, false, binder))),
            5 => {
                let op = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne][self.rng.random_range(0..6)];
                Ex::If {
                    op,
                    lhs: Box::new(self.expr(d, false, binder)),
                    rhs: Box::new(self.expr(d, true, binder)),
                    then: Box::new(self.expr(d, allow_const, binder)),
                    otherwise: Box::new(self.expr(d, allow_const, binder)),
                }
            }
            6 | 7 => Ex::Agg {
                op: [AggOp::Sum, AggOp::Min, AggOp::Max][self.rng.random_range(0..3)],
                threshold: self.cents(),
                select: Box::new(self.expr(d, false, true)),
            },
            _ => Ex::TimesCount(Box::new(self.expr(d, false, binder)), self.cents()),
        }
    }
}

impl Instance {
    pub fn generate(seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_b = rng.random_range(1..=8);
        let n_a = rng.random_range(1..=(20 - n_b).min(12));
        let n_rules = rng.random_range(1..=10);

        let mut rule_fields = Vec::new();
        let mut rules = BTreeMap::new();
        let (mut vis_a, mut vis_b) = (Vec::new(), Vec::new());
        for i in 0..n_rules {
            let ty = if rng.random_bool(0.5) { Ty::A } else { Ty::B };
            let name = format!("r{i}");
            let mut g = Gen {
                rng: &mut rng,
                ty,
                visible_a: vis_a.clone(),
                visible_b: vis_b.clone(),
            };
            let body = g.expr(3, true, false);
            rules.insert((ty, name.clone()), body);
            rule_fields.push((ty, name.clone()));
            match ty {
                Ty::A => vis_a.push(name),
                Ty::B => vis_b.push(name),
            }
        }

        let mut records = Vec::new();
        let b_names: Vec<String> = (0..n_b).map(|i| format!("b{i}")).collect();
        for (i, ty) in std::iter::repeat_n(Ty::B, n_b).chain(std::iter::repeat_n(Ty::A, n_a)).enumerate() {
            let mut values = BTreeMap::new();
            let input = if ty == Ty::A { "x" } else { "v" };
            values.insert(input.to_string(), rng.random_range(-50_000i128..=50_000) * 10_000);
            if rng.random_bool(0.5) {
                values.insert("o".to_string(), rng.random_range(-50_000i128..=50_000) * 10_000);
            }
            for (fty, f) in &rule_fields {
                if *fty == ty && rng.random_bool(0.15) {
                    values.insert(f.clone(), rng.random_range(-50_000i128..=50_000) * 10_000);
                }
            }
            let (name, link) = match ty {
                Ty::B => (b_names[i].clone(), None),
                Ty::A => (
                    format!("a{}", i - n_b),
                    Some(b_names[rng.random_range(0..n_b)].clone()),
                ),
            };
            records.push(Rec {
                name,
                ty,
                link,
                values,
            });
        }
        Instance {
            records,
            rule_fields,
            rules,
        }
    }

    pub fn ruleset_source(&self) -> String {
        let mut out = String::new();
        for ty in [Ty::A, Ty::B] {
            out.push_str(&format!("record {} {{\n", ty.name()));
            match ty {
                Ty::A => out.push_str("  x: input money\n  link: input key B\n"),
                Ty::B => out.push_str("  v: input money\n"),
            }
            out.push_str("  o: optional money\n");
            for (fty, f) in &self.rule_fields {
                if *fty == ty {
                    out.push_str(&format!("  {f}: optional money\n"));
                }
            }
            out.push_str("}\n\n");
            out.push_str(&format!("rule {}.o = none\n", ty.name()));
        }
        for (ty, f) in &self.rule_fields {
            let body = render(&self.rules[&(*ty, f.clone())]);
            out.push_str(&format!("rule {}.{f} = {body}\n", ty.name()));
        }
        out
    }

    pub fn dataset_json(&self) -> String {
        let mut top = serde_json::Map::new();
        for r in &self.records {
            let mut obj = serde_json::Map::new();
            obj.insert("type".into(), r.ty.name().into());
            if let Some(l) = &r.link {
                obj.insert("link".into(), l.clone().into());
            }
            for (f, v) in &r.values {
                obj.insert(f.clone(), serde_json::from_str(&money_text(*v)).unwrap());
            }
            top.insert(r.name.clone(), obj.into());
        }
        serde_json::Value::Object(top).to_string()
    }

    /// Every `(record type, key, field)` the engine can be asked about.
    pub fn queries(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for r in &self.records {
            let mut fields = vec![if r.ty == Ty::A { "x" } else { "v" }.to_string(), "o".to_string()];
            fields.extend(self.rule_fields.iter().filter(|(t, _)| *t == r.ty).map(|(_, f)| f.clone()));
            for f in fields {
                out.push((r.ty.name().to_string(), r.name.clone(), f));
            }
        }
        out
    }

    fn rec(&self, name: &str) -> &Rec {
        self.records.iter().find(|r| r.name == name).unwrap()
    }

    /// Recomputes `name.field` from scratch, following rules recursively with
    /// no caching.
    pub fn eval(&self, name: &str, field: &str) -> OracleResult {
        let rec = self.rec(name);
        if let Some(v) = rec.values.get(field) {
            return Ok(*v);
        }
        match self.rules.get(&(rec.ty, field.to_string())) {
            Some(body) => self.eval_ex(rec, None, body),
            None => Err(BTreeSet::from([format!("MissingFact {}[{}].{}", rec.ty.name(), rec.name, field)])),
        }
    }

    fn eval_ex(&self, this: &Rec, binder: Option<&Rec>, e: &Ex) -> OracleResult {
        let both = |a: OracleResult, b: OracleResult| -> Result<(i128, i128), BTreeSet<String>> {
            match (a, b) {
                (Ok(x), Ok(y)) => Ok((x, y)),
                (Err(x), Ok(_)) | (Ok(_), Err(x)) => Err(x),
                (Err(mut x), Err(y)) => {
                    x.extend(y);
                    Err(x)
                }
            }
        };
        match e {
            Ex::Const(c) => Ok(*c),
            Ex::SelfField(f) => self.eval(&this.name, f),
            Ex::LinkField(f) => self.eval(this.link.as_ref().unwrap(), f),
            Ex::BinderField(f) => self.eval(&binder.unwrap().name, f),
            Ex::Add(a, b) => both(self.eval_ex(this, binder, a), self.eval_ex(this, binder, b)).map(|(x, y)| x + y),
            Ex::Sub(a, b) => both(self.eval_ex(this, binder, a), self.eval_ex(this, binder, b)).map(|(x, y)| x - y),
            Ex::MulInt(a, n) => self.eval_ex(this, binder, a).map(|x| x * *n as i128),
            Ex::MulPct(a, n) => self.eval_ex(this, binder, a).map(|x| round_half_even(x * *n as i128, 100)),
            Ex::Neg(a) => self.eval_ex(this, binder, a).map(|x| -x),
            Ex::If {
                op,
                lhs,
                rhs,
                then,
                otherwise,
            } => {
                let (l, r) = both(self.eval_ex(this, binder, lhs), self.eval_ex(this, binder, rhs))?;
                let c = match op {
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                };
                self.eval_ex(this, binder, if c { then } else { otherwise })
            }
            Ex::Agg { op, threshold, select } => {
                let mut errors = BTreeSet::new();
                let mut values = Vec::new();
                for b in self.records.iter().filter(|r| r.ty == Ty::B) {
                    if b.values["v"] > *threshold {
                        match self.eval_ex(this, Some(b), select) {
                            Ok(v) => values.push(v),
                            Err(e) => errors.extend(e),
                        }
                    }
                }
                if !errors.is_empty() {
                    return Err(errors);
                }
                match op {
                    AggOp::Sum => Ok(values.iter().sum()),
                    AggOp::Min => values.into_iter().min().ok_or_else(|| BTreeSet::from(["EmptyAggregate".to_string()])),
                    AggOp::Max => values.into_iter().max().ok_or_else(|| BTreeSet::from(["EmptyAggregate".to_string()])),
                }
            }
            Ex::TimesCount(a, threshold) => {
                let n = self.records.iter().filter(|r| r.ty == Ty::B && r.values["v"] > *threshold).count();
                self.eval_ex(this, binder, a).map(|x| x * n as i128)
            }
        }
    }
}

fn render(e: &Ex) -> String {
    match e {
        Ex::Const(c) => literal(*c),
        Ex::SelfField(f) => format!("self.{f}"),
        Ex::LinkField(f) => format!("self.link.{f}"),
        Ex::BinderField(f) => format!("b.{f}"),
        Ex::Add(a, b) => format!("({} + {})", render(a), render(b)),
        Ex::Sub(a, b) => format!("({} - {})", render(a), render(b)),
        Ex::MulInt(a, n) => format!("({} * {n})", render(a)),
        Ex::MulPct(a, n) => format!("({} * {n}%)", render(a)),
        Ex::Neg(a) => format!("(-{})", render(a)),
        Ex::If {
            op,
            lhs,
            rhs,
            then,
            otherwise,
        } => {
            let op = match op {
                CmpOp::Lt => "<",
                CmpOp::Le => "<=",
                CmpOp::Gt => ">",
                CmpOp::Ge => ">=",
                CmpOp::Eq => "==",
                CmpOp::Ne => "!=",
            };
            format!(
                "(if {} {op} {} then {} else {})",
                render(lhs),
                render(rhs),
                render(then),
                render(otherwise)
            )
        }
        Ex::Agg { op, threshold, select } => {
            let op = match op {
                AggOp::Sum => "sum",
                AggOp::Min => "min",
                AggOp::Max => "max",
            };
            format!("{op}(all B b where b.v > {} select {})", literal(*threshold), render(select))
        }
        Ex::TimesCount(a, threshold) => {
            format!("({} * count(all B b where b.v > {}))", render(a), literal(*threshold))
        }
    }
}

/// The engine's answer in the oracle's terms.
pub fn engine_view(outcome: &EvalOutcome) -> OracleResult {
    match &outcome.result {
        Ok(FactValue::Money(d)) => Ok(d.micros()),
        Ok(other) => panic!("non-money result {other:?}"),
        Err(errors) => Err(errors
            .iter()
            .map(|e| match e {
                EvalError::MissingFact(f) => format!("MissingFact {f}"),
                other => other.code().to_string(),
            })
            .collect()),
    }
}
