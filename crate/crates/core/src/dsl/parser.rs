//! Recursive-descent parser for `.regula` sources.

use std::sync::Arc;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;
use crate::diagnostic::SourceSpan;
use crate::schema::{EnumDef, FactSort, FieldDef, RecordDef, ValueType};

const RESERVED: &[&str] = &[
    "self", "true", "false", "if", "then", "else", "and", "or", "none", "where", "select", "sum",
    "count", "min", "max", "any", "all", "rule", "record", "enum",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word)
}

/// Parses one source file. Syntax errors are collected; after an error the
/// parser resynchronizes at the next declaration.
pub fn parse_source(file: &str, source: &str) -> Result<ParsedRuleset, Vec<SyntaxError>> {
    let file: Arc<str> = Arc::from(file);
    let (tokens, mut errors) = tokenize(&file, source);
    let mut parser = Parser { tokens, pos: 0 };
    let mut out = ParsedRuleset::default();
    while !parser.at_eof() {
        let start = parser.pos;
        if let Err(e) = parser.decl(&mut out) {
            errors.push(e);
            if parser.pos == start {
                parser.pos += 1;
            }
            parser.recover();
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}

/// Parses a standalone expression (used for round-trip checks and tooling).
pub fn parse_expr(file: &str, source: &str) -> Result<Expr, Vec<SyntaxError>> {
    let file: Arc<str> = Arc::from(file);
    let (tokens, mut errors) = tokenize(&file, source);
    let mut parser = Parser { tokens, pos: 0 };
    let result = parser.expr().and_then(|e| {
        if parser.at_eof() {
            Ok(e)
        } else {
            Err(parser.unexpected("end of expression"))
        }
    });
    match result {
        Ok(e) if errors.is_empty() => Ok(e),
        Ok(_) => Err(errors),
        Err(e) => {
            errors.push(e);
            Err(errors)
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span.clone()
    }

    fn prev_span(&self) -> SourceSpan {
        self.tokens[self.pos.saturating_sub(1)].span.clone()
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if !self.at_eof() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> SyntaxError {
        SyntaxError::new(
            self.span(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok) -> PResult<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn expect_word(&mut self, word: &str) -> PResult<SourceSpan> {
        if self.peek().is_word(word) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&format!("`{word}`")))
        }
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if self.peek().is_word(word) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn uident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::UIdent(s) => Ok((s, self.advance().span)),
            _ => Err(self.unexpected(what)),
        }
    }

    fn lident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::LIdent(s) => Ok((s, self.advance().span)),
            _ => Err(self.unexpected(what)),
        }
    }

    fn at_decl_start(&self) -> bool {
        match self.peek() {
            Tok::LIdent(w) if w == "rule" => matches!(self.peek_at(1), Tok::UIdent(_)),
            Tok::LIdent(w) if w == "record" || w == "enum" => {
                matches!(self.peek_at(1), Tok::UIdent(_)) && *self.peek_at(2) == Tok::LBrace
            }
            _ => false,
        }
    }

    fn recover(&mut self) {
        while !self.at_eof() && !self.at_decl_start() {
            self.pos += 1;
        }
    }

    fn decl(&mut self, out: &mut ParsedRuleset) -> PResult<()> {
        match self.peek() {
            Tok::LIdent(w) if w == "enum" => {
                let def = self.enum_decl()?;
                out.schema.add_enum(def);
            }
            Tok::LIdent(w) if w == "record" => {
                let def = self.record_decl()?;
                out.schema.add_record(def);
            }
            Tok::LIdent(w) if w == "rule" => out.rules.push(self.rule_decl()?),
            _ => return Err(self.unexpected("`enum`, `record` or `rule`")),
        }
        Ok(())
    }

    fn enum_decl(&mut self) -> PResult<EnumDef> {
        let start = self.expect_word("enum")?;
        let (name, _) = self.uident("enum name")?;
        self.expect(Tok::LBrace)?;
        let mut members = vec![self.uident("enum member")?.0];
        while *self.peek() == Tok::Comma {
            self.advance();
            members.push(self.uident("enum member")?.0);
        }
        let end = self.expect(Tok::RBrace)?;
        let mut def = EnumDef::new(name, members);
        def.span = Some(start.to(&end));
        Ok(def)
    }

    fn record_decl(&mut self) -> PResult<RecordDef> {
        let start = self.expect_word("record")?;
        let (name, _) = self.uident("record name")?;
        self.expect(Tok::LBrace)?;
        let mut fields = Vec::new();
        while *self.peek() != Tok::RBrace {
            let (fname, fspan) = self.lident("field name or `}`")?;
            self.expect(Tok::Colon)?;
            let sort = if self.eat_word("input") {
                FactSort::Input
            } else if self.eat_word("optional") {
                FactSort::Optional
            } else {
                return Err(self.unexpected("`input` or `optional`"));
            };
            let value_type = self.value_type()?;
            let mut field = FieldDef::new(fname, sort, value_type);
            field.span = Some(fspan.to(&self.prev_span()));
            fields.push(field);
        }
        let end = self.expect(Tok::RBrace)?;
        let mut def = RecordDef::new(name, fields);
        def.span = Some(start.to(&end));
        Ok(def)
    }

    fn value_type(&mut self) -> PResult<ValueType> {
        let (word, _) = self.lident("a type")?;
        Ok(match word.as_str() {
            "int" => ValueType::Int,
            "bool" => ValueType::Bool,
            "text" => ValueType::Text,
            "money" => ValueType::Money,
            "percent" => ValueType::Percent,
            "enum" => ValueType::Enum(self.uident("enum name")?.0),
            "key" => ValueType::Key(self.uident("record name")?.0),
            other => {
                return Err(SyntaxError::new(self.prev_span(), format!("unknown type `{other}`")));
            }
        })
    }

    fn rule_decl(&mut self) -> PResult<RuleDecl> {
        let start = self.expect_word("rule")?;
        let (record, _) = self.uident("record name")?;
        self.expect(Tok::Dot)?;
        let (field, _) = self.lident("field name")?;
        self.expect(Tok::Assign)?;
        let body = if self.eat_word("none") {
            None
        } else {
            Some(self.expr()?)
        };
        Ok(RuleDecl {
            record,
            field,
            body,
            span: start.to(&self.prev_span()),
        })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        if self.peek().is_word("if") {
            let start = self.advance().span;
            let cond = self.expr()?;
            self.expect_word("then")?;
            let then = self.expr()?;
            self.expect_word("else")?;
            let otherwise = self.expr()?;
            let span = start.to(&otherwise.span);
            return Ok(Expr::new(
                ExprKind::If {
                    cond: Box::new(cond),
                    then: Box::new(then),
                    otherwise: Box::new(otherwise),
                },
                span,
            ));
        }
        self.or_expr()
    }

    fn binary(lhs: Expr, op: BinOp, rhs: Expr) -> Expr {
        let span = lhs.span.to(&rhs.span);
        Expr::new(
            ExprKind::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            span,
        )
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat_word("or") {
            let rhs = self.and_expr()?;
            lhs = Self::binary(lhs, BinOp::Or, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.cmp_expr()?;
        while self.eat_word("and") {
            let rhs = self.cmp_expr()?;
            lhs = Self::binary(lhs, BinOp::And, rhs);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.add_expr()?;
        Ok(Self::binary(lhs, op, rhs))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.mul_expr()?;
            lhs = Self::binary(lhs, op, rhs);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Self::binary(lhs, op, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            let start = self.advance().span;
            let inner = self.unary()?;
            let span = start.to(&inner.span);
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), span));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut base = self.primary()?;
        while *self.peek() == Tok::Dot {
            self.advance();
            let (field, fspan) = self.lident("field name")?;
            let span = base.span.to(&fspan);
            base = Expr::new(
                ExprKind::FieldAccess {
                    base: Box::new(base),
                    field,
                },
                span,
            );
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::LIdent(w) if w == "self" => {
                self.advance();
                Ok(Expr::new(ExprKind::SelfRef, span))
            }
            Tok::LIdent(w) if w == "true" || w == "false" => {
                self.advance();
                Ok(Expr::new(ExprKind::Literal(Literal::Bool(w == "true")), span))
            }
            Tok::LIdent(w) if AggKind::from_name(&w).is_some() && *self.peek_at(1) == Tok::LParen => {
                self.aggregate()
            }
            Tok::LIdent(w) if is_reserved(&w) => Err(self.unexpected("an expression")),
            Tok::LIdent(w) => {
                self.advance();
                Ok(Expr::new(ExprKind::Var(w), span))
            }
            Tok::Number(lexeme) => {
                self.advance();
                let percent = *self.peek() == Tok::Percent;
                let span = if percent { span.to(&self.advance().span) } else { span };
                Ok(Expr::new(ExprKind::Literal(Literal::Number { lexeme, percent }), span))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::new(ExprKind::Literal(Literal::Text(s)), span))
            }
            Tok::UIdent(enum_name) => {
                self.advance();
                self.expect(Tok::ColonColon)?;
                let (member, end) = self.uident("enum member")?;
                Ok(Expr::new(ExprKind::EnumLit { enum_name, member }, span.to(&end)))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn aggregate(&mut self) -> PResult<Expr> {
        let (name, start) = self.lident("aggregate")?;
        let kind = AggKind::from_name(&name).expect("checked by caller");
        self.expect(Tok::LParen)?;
        self.expect_word("all")?;
        let (record_type, _) = self.uident("record type")?;
        let (binder, bspan) = self.lident("binder name")?;
        if is_reserved(&binder) {
            return Err(SyntaxError::new(bspan, format!("`{binder}` is reserved and cannot name a binder")));
        }
        let filter = if self.eat_word("where") {
            Some(self.expr()?)
        } else {
            None
        };
        let select = if self.peek().is_word("select") {
            let sspan = self.advance().span;
            if kind == AggKind::Count {
                return Err(SyntaxError::new(sspan, "`count` takes no `select` clause"));
            }
            Some(self.expr()?)
        } else {
            if kind != AggKind::Count {
                return Err(self.unexpected(&format!("`select` clause for `{name}`")));
            }
            None
        };
        let end = self.expect(Tok::RParen)?;
        Ok(Expr::new(
            ExprKind::Aggregate(Box::new(Aggregate {
                kind,
                record_type,
                binder,
                filter,
                select,
            })),
            start.to(&end),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> ParsedRuleset {
        parse_source("test.regula", src).unwrap_or_else(|e| panic!("{e:?}"))
    }

    #[test]
    fn stock_based_compensation_rule_shape() {
        let p = parse(
            "rule Entity.stock_based_compensation =
               if self.stock_based_compensation_election
               then self.stock_based_compensation_expense - self.stock_based_compensation_deduction
                  + self.stock_based_compensation_expense_expired - self.stock_based_compensation_deduction_expired
               else 0",
        );
        let body = p.rules[0].body.as_ref().unwrap();
        let ExprKind::If { cond, otherwise, .. } = &body.kind else {
            panic!("expected if, got {body:?}")
        };
        let ExprKind::FieldAccess { base, field } = &cond.kind else {
            panic!()
        };
        assert_eq!(base.kind, ExprKind::SelfRef);
        assert_eq!(field, "stock_based_compensation_election");
        assert_eq!(
            otherwise.kind,
            ExprKind::Literal(Literal::Number {
                lexeme: "0".into(),
                percent: false
            })
        );
    }

    #[test]
    fn no_rule() {
        let p = parse("rule Jurisdiction.additional_current_top_up_tax = none");
        assert_eq!(p.rules.len(), 1);
        assert!(p.rules[0].body.is_none());
    }

    #[test]
    fn if_then_is_a_spanned_error() {
        let errs = parse_source("x.regula", "rule A.b = if then").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].span.to_string(), "x.regula:1:15");
    }

    #[test]
    fn recovers_at_declaration_boundaries() {
        let errs = parse_source("x.regula", "rule A.b = 1 +\nrecord R { a: input int }\nrule A.c = (\nrule A.d = 2")
            .unwrap_err();
        assert_eq!(errs.len(), 2);
        assert_eq!(errs[0].span.start_line, 2);
        assert_eq!(errs[1].span.start_line, 4);
    }

    #[test]
    fn aggregate_forms() {
        let p = parse(
            "rule J.t = sum(all Entity e where e.jurisdiction == self.key and e.entity_type != EntityType::InvestmentEntity select e.taxes)
             rule J.n = count(all Entity e)",
        );
        let ExprKind::Aggregate(agg) = &p.rules[0].body.as_ref().unwrap().kind else {
            panic!()
        };
        assert_eq!(agg.kind, AggKind::Sum);
        assert_eq!(agg.record_type, "Entity");
        assert!(agg.filter.is_some() && agg.select.is_some());
        assert!(parse_source("x", "rule J.n = count(all Entity e select e.x)").is_err());
        assert!(parse_source("x", "rule J.n = sum(all Entity e)").is_err());
    }

    #[test]
    fn record_and_enum_decls() {
        let p = parse(
            "enum EntityType { InvestmentEntity, NonSpecialEntity }
             record Entity {
               fiscal_year: input int
               jurisdiction: input key Jurisdiction
               entity_type: optional enum EntityType
             }",
        );
        let e = p.schema.record("Entity").unwrap();
        assert_eq!(e.fields.len(), 3);
        assert_eq!(e.fields[1].value_type, ValueType::Key("Jurisdiction".into()));
        assert_eq!(p.schema.enum_def("EntityType").unwrap().members.len(), 2);
    }

    #[test]
    fn precedence() {
        let e = parse_expr("t", "1 + 2 * 3 == 7 and true or false").unwrap();
        let ExprKind::Binary { op: BinOp::Or, lhs, .. } = e.kind else { panic!() };
        let ExprKind::Binary { op: BinOp::And, lhs, .. } = lhs.kind else { panic!() };
        let ExprKind::Binary { op: BinOp::Eq, lhs, .. } = lhs.kind else { panic!() };
        let ExprKind::Binary { op: BinOp::Add, rhs, .. } = lhs.kind else { panic!() };
        assert!(matches!(rhs.kind, ExprKind::Binary { op: BinOp::Mul, .. }));
        assert!(parse_expr("t", "1 < 2 < 3").is_err());
    }
}
