//! Recursive-descent parser for the formulation text form.
//!
//! ```text
//! line    := [name ":"] item
//! item    := "objective" ("maximize" | "minimize") expr
//!          | "constraint" expr (">=" real | "<=" real | "<" "0")
//! expr    := agg | real | "neg" "(" expr ")" | "sub" "(" expr "," expr ")"
//! agg     := ("min" | "max" | "mean") "(" metric "in" "[" real "," real "]" ")"
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Items without an
//! explicit name are numbered per kind (`obj1`, `c1`, ...). Literals are
//! normalized to six significant digits so that printing is lossless.

use std::collections::HashSet;

use super::print::format_real;
use super::{Aggregator, Band, Expr, Formulation, FormulationError, FormulationItem, ItemKind, Metric};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Ge,
    Le,
    Lt,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Lt => "`<`".into(),
        }
    }
}

struct Lexed {
    toks: Vec<(Tok, usize)>,
    end_column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> FormulationError {
    FormulationError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(line_no: usize, line: &str) -> Result<Lexed, FormulationError> {
    let chars: Vec<char> = line.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || c == '.'
            || ((c == '-' || c == '+') && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == '.'));
        if starts_number {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text
                .parse()
                .map_err(|_| syntax(line_no, col, format!("malformed number `{text}`")))?;
            toks.push((Tok::Number(value), col));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        let two = chars.get(i + 1).copied();
        let (tok, len) = match (c, two) {
            ('>', Some('=')) => (Tok::Ge, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('<', _) => (Tok::Lt, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            (',', _) => (Tok::Comma, 1),
            (':', _) => (Tok::Colon, 1),
            _ => return Err(syntax(line_no, col, format!("unexpected character `{c}`"))),
        };
        toks.push((tok, col));
        i += len;
    }
    Ok(Lexed {
        toks,
        end_column: chars.len() + 1,
    })
}

struct LineParser<'a> {
    line: usize,
    lexed: &'a Lexed,
    pos: usize,
}

impl<'a> LineParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.lexed.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.lexed
            .toks
            .get(self.pos)
            .map(|(_, c)| *c)
            .unwrap_or(self.lexed.end_column)
    }

    fn error(&self, expected: &str) -> FormulationError {
        let found = self
            .peek()
            .map(Tok::describe)
            .unwrap_or_else(|| "end of line".to_string());
        syntax(self.line, self.column(), format!("expected {expected}, found {found}"))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.lexed.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), FormulationError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&want.describe()))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<String, FormulationError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(expected)),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), FormulationError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(&format!("`{kw}`"))),
        }
    }

    fn number<T: Scalar>(&mut self) -> Result<T, FormulationError> {
        let col = self.column();
        match self.peek() {
            Some(Tok::Number(v)) => {
                let v = *v;
                self.pos += 1;
                if !v.is_finite() {
                    return Err(FormulationError::Invariant {
                        line: Some(self.line),
                        message: format!("literal at column {col} is not finite"),
                    });
                }
                Ok(canonical_literal(v))
            }
            _ => Err(self.error("a number")),
        }
    }

    fn invariant(&self, e: FormulationError) -> FormulationError {
        e.at_line(self.line)
    }

    fn expr<T: Scalar>(&mut self, depth: usize) -> Result<Expr<T>, FormulationError> {
        if depth > super::MAX_EXPR_DEPTH {
            return Err(FormulationError::Invariant {
                line: Some(self.line),
                message: format!("expression depth exceeds {}", super::MAX_EXPR_DEPTH),
            });
        }
        match self.peek() {
            Some(Tok::Number(_)) => Ok(Expr::Const(self.number()?)),
            Some(Tok::Ident(word)) => {
                let word = word.clone();
                if let Some(op) = Aggregator::from_keyword(&word) {
                    self.pos += 1;
                    return self.agg_rest(op);
                }
                match word.as_str() {
                    "neg" => {
                        self.pos += 1;
                        self.expect(Tok::LParen)?;
                        let inner = self.expr(depth + 1)?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::neg(inner))
                    }
                    "sub" => {
                        self.pos += 1;
                        self.expect(Tok::LParen)?;
                        let a = self.expr(depth + 1)?;
                        self.expect(Tok::Comma)?;
                        let b = self.expr(depth + 1)?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::sub(a, b))
                    }
                    _ => Err(self.error("`min`, `max`, `mean`, `neg`, `sub` or a number")),
                }
            }
            _ => Err(self.error("an expression")),
        }
    }

    fn agg_rest<T: Scalar>(&mut self, op: Aggregator) -> Result<Expr<T>, FormulationError> {
        self.expect(Tok::LParen)?;
        let metric = self.ident("a metric name")?;
        let metric = Metric::new(metric).map_err(|e| self.invariant(e))?;
        self.keyword("in")?;
        self.expect(Tok::LBracket)?;
        let lo = self.number::<T>()?;
        self.expect(Tok::Comma)?;
        let hi = self.number::<T>()?;
        self.expect(Tok::RBracket)?;
        self.expect(Tok::RParen)?;
        let band = Band::new(lo, hi).map_err(|e| self.invariant(e))?;
        Ok(Expr::agg(op, metric, band))
    }

    fn item<T: Scalar>(&mut self) -> Result<(Option<String>, ItemKind, Expr<T>), FormulationError> {
        let name = match (self.lexed.toks.first(), self.lexed.toks.get(1)) {
            (Some((Tok::Ident(n), _)), Some((Tok::Colon, _))) => {
                self.pos = 2;
                Some(n.clone())
            }
            _ => None,
        };
        let head = self.ident("`objective` or `constraint`")?;
        let (kind, expr) = match head.as_str() {
            "objective" => {
                let maximize = match self.peek() {
                    Some(Tok::Ident(d)) if d == "maximize" => true,
                    Some(Tok::Ident(d)) if d == "minimize" => false,
                    _ => return Err(self.error("`maximize` or `minimize`")),
                };
                self.pos += 1;
                let e = self.expr(1)?;
                if maximize {
                    (ItemKind::Objective, Expr::neg(e))
                } else {
                    (ItemKind::Objective, e)
                }
            }
            "constraint" => {
                let e = self.expr(1)?;
                let cmp_col = self.column();
                match self.next() {
                    Some(Tok::Ge) => {
                        let limit = self.number()?;
                        (ItemKind::Constraint, Expr::sub(Expr::Const(limit), e))
                    }
                    Some(Tok::Le) => {
                        let limit = self.number()?;
                        (ItemKind::Constraint, Expr::sub(e, Expr::Const(limit)))
                    }
                    Some(Tok::Lt) => {
                        let zero_col = self.column();
                        match self.next() {
                            Some(Tok::Number(0.0)) => (ItemKind::Constraint, e),
                            _ => {
                                return Err(syntax(
                                    self.line,
                                    zero_col,
                                    "raw residual constraints must end with `< 0`",
                                ))
                            }
                        }
                    }
                    _ => {
                        return Err(syntax(
                            self.line,
                            cmp_col,
                            "expected `>=`, `<=` or `< 0` after constraint expression",
                        ))
                    }
                }
            }
            _ => {
                self.pos -= 1;
                return Err(self.error("`objective` or `constraint`"));
            }
        };
        if self.peek().is_some() {
            return Err(self.error("end of line"));
        }
        Ok((name, kind, expr))
    }
}

fn canonical_literal<T: Scalar>(v: f64) -> T {
    let rounded: f64 = format_real(v).parse().expect("formatted real parses");
    T::from_f64_lossy(rounded)
}

/// Parses the text form into a formulation with an empty id.
pub fn parse_formulation<T: Scalar>(text: &str) -> Result<Formulation<T>, FormulationError> {
    let mut parsed = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let lexed = lex(line_no, raw)?;
        let mut p = LineParser {
            line: line_no,
            lexed: &lexed,
            pos: 0,
        };
        let (name, kind, expr) = p.item::<T>()?;
        parsed.push((line_no, name, kind, expr));
    }
    if parsed.is_empty() {
        return Err(FormulationError::invariant("formulation needs at least one item"));
    }

    let mut used: HashSet<String> = HashSet::new();
    for (line_no, name, _, _) in &parsed {
        if let Some(n) = name {
            if !used.insert(n.clone()) {
                return Err(FormulationError::Invariant {
                    line: Some(*line_no),
                    message: format!("duplicate item name {n:?}"),
                });
            }
        }
    }

    let (mut n_obj, mut n_con) = (0usize, 0usize);
    let mut items = Vec::with_capacity(parsed.len());
    for (line_no, name, kind, expr) in parsed {
        let name = match name {
            Some(n) => n,
            None => {
                let (prefix, counter) = match kind {
                    ItemKind::Objective => ("obj", &mut n_obj),
                    ItemKind::Constraint => ("c", &mut n_con),
                };
                loop {
                    *counter += 1;
                    let candidate = format!("{prefix}{counter}");
                    if used.insert(candidate.clone()) {
                        break candidate;
                    }
                }
            }
        };
        let item = FormulationItem::new(kind, name, expr).map_err(|e| e.at_line(line_no))?;
        items.push(item);
    }
    Formulation::new("", items)
}
