use std::sync::Arc;

use super::SyntaxError;
use crate::diagnostic::SourceSpan;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    UIdent(String),
    LIdent(String),
    Number(String),
    Str(String),
    Percent,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    ColonColon,
    Dot,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::UIdent(s) | Tok::LIdent(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Percent => "%",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::ColonColon => "::",
            Tok::Dot => ".",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            _ => "?",
        }
    }

    pub fn is_word(&self, word: &str) -> bool {
        matches!(self, Tok::LIdent(s) if s == word)
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

/// Splits `source` into tokens. Lexical errors are collected and lexing
/// continues past the offending character.
pub fn tokenize(file: &Arc<str>, source: &str) -> (Vec<Token>, Vec<SyntaxError>) {
    let mut lexer = Lexer {
        file: file.clone(),
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        tokens: Vec::new(),
        errors: Vec::new(),
    };
    lexer.run();
    (lexer.tokens, lexer.errors)
}

struct Lexer {
    file: Arc<str>,
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
    errors: Vec<SyntaxError>,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<char> {
        self.chars.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> (u32, u32) {
        (self.line, self.col)
    }

    fn span_from(&self, start: (u32, u32)) -> SourceSpan {
        SourceSpan::new(self.file.clone(), start, self.here())
    }

    fn push(&mut self, tok: Tok, start: (u32, u32)) {
        let span = self.span_from(start);
        self.tokens.push(Token { tok, span });
    }

    fn run(&mut self) {
        while let Some(c) = self.peek() {
            let start = self.here();
            match c {
                c if c.is_whitespace() => {
                    self.bump();
                }
                '-' if self.peek2() == Some('-') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                c if c.is_ascii_digit() => self.number(start),
                c if c.is_ascii_alphabetic() || c == '_' => self.word(start),
                '"' => self.string(start),
                _ => {
                    self.bump();
                    let next = self.peek();
                    let tok = match (c, next) {
                        (':', Some(':')) => {
                            self.bump();
                            Tok::ColonColon
                        }
                        ('=', Some('=')) => {
                            self.bump();
                            Tok::EqEq
                        }
                        ('!', Some('=')) => {
                            self.bump();
                            Tok::NotEq
                        }
                        ('<', Some('=')) => {
                            self.bump();
                            Tok::Le
                        }
                        ('>', Some('=')) => {
                            self.bump();
                            Tok::Ge
                        }
                        ('%', _) => Tok::Percent,
                        ('{', _) => Tok::LBrace,
                        ('}', _) => Tok::RBrace,
                        ('(', _) => Tok::LParen,
                        (')', _) => Tok::RParen,
                        (',', _) => Tok::Comma,
                        (':', _) => Tok::Colon,
                        ('.', _) => Tok::Dot,
                        ('=', _) => Tok::Assign,
                        ('+', _) => Tok::Plus,
                        ('-', _) => Tok::Minus,
                        ('*', _) => Tok::Star,
                        ('/', _) => Tok::Slash,
                        ('<', _) => Tok::Lt,
                        ('>', _) => Tok::Gt,
                        _ => {
                            let span = self.span_from(start);
                            self.errors
                                .push(SyntaxError::new(span, format!("unexpected character `{c}`")));
                            continue;
                        }
                    };
                    self.push(tok, start);
                }
            }
        }
        let here = self.here();
        self.push(Tok::Eof, here);
    }

    fn number(&mut self, start: (u32, u32)) {
        let mut text = String::new();
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            text.push(c);
            self.bump();
        }
        if self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            text.push('.');
            self.bump();
            while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                text.push(c);
                self.bump();
            }
        }
        self.push(Tok::Number(text), start);
    }

    fn word(&mut self, start: (u32, u32)) {
        let mut text = String::new();
        while let Some(c) = self.peek().filter(|c| c.is_ascii_alphanumeric() || *c == '_') {
            text.push(c);
            self.bump();
        }
        let tok = if text.starts_with(|c: char| c.is_ascii_uppercase()) {
            Tok::UIdent(text)
        } else {
            Tok::LIdent(text)
        };
        self.push(tok, start);
    }

    fn string(&mut self, start: (u32, u32)) {
        self.bump();
        let mut text = String::new();
        loop {
            match self.bump() {
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('n') => text.push('\n'),
                    Some('t') => text.push('\t'),
                    Some(c @ ('"' | '\\')) => text.push(c),
                    _ => {
                        let span = self.span_from(start);
                        self.errors.push(SyntaxError::new(span, "invalid escape in string literal"));
                    }
                },
                Some(c) => text.push(c),
                None => {
                    let span = self.span_from(start);
                    self.errors.push(SyntaxError::new(span, "unterminated string literal"));
                    break;
                }
            }
        }
        self.push(Tok::Str(text), start);
    }
}
