use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::Pow;

use super::{Expr, Func, Rational, Symbol};

/// Resolves identifiers to declared symbols.
pub trait SymbolTable {
    fn lookup(&self, name: &str) -> Option<Symbol>;
}

impl SymbolTable for HashMap<String, Symbol> {
    fn lookup(&self, name: &str) -> Option<Symbol> {
        self.get(name).cloned()
    }
}

impl<F> SymbolTable for F
where
    F: Fn(&str) -> Option<Symbol>,
{
    fn lookup(&self, name: &str) -> Option<Symbol> {
        self(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("unexpected `{0}`")]
    UnexpectedToken(String),
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("undeclared symbol `{0}`")]
    UndeclaredSymbol(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{name}` takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("malformed number `{0}`")]
    BadNumber(String),
}

/// Parse failure with a 1-based character column.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("column {column}: {kind}")]
pub struct ParseError {
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational, String),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Num(_, s) | Tok::Ident(s) => s.clone(),
            Tok::Op(c) => c.to_string(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Comma => ",".into(),
        }
    }
}

fn err(column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { column, kind }
}

fn decimal_to_rational(text: &str) -> Option<Rational> {
    let (mant, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int, frac) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        Rational::from_integer(digits * ten.pow(scale as u32))
    } else {
        Rational::new(digits, ten.pow((-scale) as u32))
    })
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let r = decimal_to_rational(&text)
                .ok_or_else(|| err(col, ParseErrorKind::BadNumber(text.clone())))?;
            out.push((Tok::Num(r, text), col));
            continue;
        }
        if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        let t = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => return Err(err(col, ParseErrorKind::UnexpectedChar(c))),
        };
        out.push((t, col));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_col: usize,
    table: &'a dyn SymbolTable,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            Some(t) => err(self.col(), ParseErrorKind::UnexpectedToken(t.text())),
            None => err(self.end_col, ParseErrorKind::UnexpectedEnd),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.product()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.product()?;
            acc = if op == '+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = if op == '*' { acc * rhs } else { acc / rhs };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() != Some(&Tok::Op('^')) {
            return Ok(base);
        }
        self.pos += 1;
        // right associative, and binds tighter than a unary minus on its left
        let exponent = self.unary()?.simplify();
        Ok(match exponent.as_rational() {
            Some(r) => base.pow_rational(r.clone()),
            None => (exponent * base.ln()).exp(),
        })
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.sum()?);
            match self.peek() {
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::RParen) => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(self.unexpected()),
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let col = self.col();
        match self.bump() {
            Some(Tok::Num(r, _)) => Ok(Expr::rational(r)),
            Some(Tok::LParen) => {
                let e = self.sum()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    let args = self.args()?;
                    return call(&name, args, col);
                }
                self.table
                    .lookup(&name)
                    .map(Expr::symbol)
                    .ok_or_else(|| err(col, ParseErrorKind::UndeclaredSymbol(name)))
            }
            Some(_) => {
                self.pos -= 1;
                Err(self.unexpected())
            }
            None => Err(err(self.end_col, ParseErrorKind::UnexpectedEnd)),
        }
    }
}

fn call(name: &str, mut args: Vec<Expr>, col: usize) -> Result<Expr, ParseError> {
    if name == "norm" {
        if args.is_empty() {
            return Err(err(
                col,
                ParseErrorKind::Arity {
                    name: name.into(),
                    expected: 1,
                    got: 0,
                },
            ));
        }
        return Ok(Expr::norm(args));
    }
    let f = match name {
        "sqrt" => None,
        _ => Some(
            Func::from_name(name)
                .ok_or_else(|| err(col, ParseErrorKind::UnknownFunction(name.into())))?,
        ),
    };
    if args.len() != 1 {
        return Err(err(
            col,
            ParseErrorKind::Arity {
                name: name.into(),
                expected: 1,
                got: args.len(),
            },
        ));
    }
    let a = args.pop().unwrap();
    Ok(match f {
        Some(f) => Expr::apply(f, a),
        None => a.sqrt(),
    })
}

/// Parse infix expression text. Identifiers are resolved through `table`;
/// decimal literals become exact rationals. The result is simplified.
pub fn parse_expr(src: &str, table: &dyn SymbolTable) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end_col: src.chars().count() + 1,
        table,
    };
    if p.peek().is_none() {
        return Err(err(1, ParseErrorKind::UnexpectedEnd));
    }
    let e = p.sum()?;
    if p.pos < p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(e.simplify())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{rat, Bindings};

    fn table() -> HashMap<String, Symbol> {
        let mut t = HashMap::new();
        for s in [
            Symbol::coordinate("q"),
            Symbol::coordinate("φ"),
            Symbol::velocity("qd"),
            Symbol::parameter("m"),
            Symbol::parameter("k"),
        ] {
            t.insert(s.name().to_string(), s);
        }
        t
    }

    #[test]
    fn precedence_and_associativity() {
        let t = table();
        let e = parse_expr("-q^2^1 + 2*q/4 - 1", &t).unwrap();
        let b: Bindings = [("q", 3.0)].into_iter().collect();
        assert_eq!(e.eval(&b).unwrap(), -9.0 + 1.5 - 1.0);
        let e = parse_expr("2^3^2", &t).unwrap();
        assert_eq!(e.as_rational(), Some(&rat(512, 1)));
    }

    #[test]
    fn decimals_are_exact() {
        let t = table();
        assert_eq!(
            parse_expr("0.1", &t).unwrap().as_rational(),
            Some(&rat(1, 10))
        );
        assert_eq!(
            parse_expr("9.8e-1", &t).unwrap().as_rational(),
            Some(&rat(49, 50))
        );
        assert_eq!(
            parse_expr("1.5E2", &t).unwrap().as_rational(),
            Some(&rat(150, 1))
        );
    }

    #[test]
    fn functions_and_unicode() {
        let t = table();
        let e = parse_expr("exp(k/m*q) + sin(φ) + sqrt(qd^2) + norm(q, qd)", &t).unwrap();
        let b: Bindings = [("q", 0.5), ("φ", 0.3), ("qd", -2.0), ("k", 1.0), ("m", 2.0)]
            .into_iter()
            .collect();
        let want = (0.25f64).exp() + 0.3f64.sin() + 2.0 + (0.25f64 + 4.0).sqrt();
        assert!((e.eval(&b).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn symbolic_exponent_goes_through_log() {
        let t = table();
        let e = parse_expr("q^qd", &t).unwrap();
        let b: Bindings = [("q", 2.0), ("qd", 3.0)].into_iter().collect();
        assert!((e.eval(&b).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn undeclared_symbol_reports_name_and_column() {
        let t = table();
        let e = parse_expr("q + 2*z", &t).unwrap_err();
        assert_eq!(e.column, 7);
        assert_eq!(e.kind, ParseErrorKind::UndeclaredSymbol("z".into()));
    }

    #[test]
    fn syntax_errors() {
        let t = table();
        assert_eq!(
            parse_expr("q +", &t).unwrap_err().kind,
            ParseErrorKind::UnexpectedEnd
        );
        assert!(matches!(
            parse_expr("q $ 1", &t).unwrap_err().kind,
            ParseErrorKind::UnexpectedChar('$')
        ));
        assert!(matches!(
            parse_expr("foo(q)", &t).unwrap_err().kind,
            ParseErrorKind::UnknownFunction(_)
        ));
        assert!(matches!(
            parse_expr("sin(q, q)", &t).unwrap_err().kind,
            ParseErrorKind::Arity { .. }
        ));
        assert!(matches!(
            parse_expr("(q", &t).unwrap_err().kind,
            ParseErrorKind::UnexpectedEnd
        ));
        assert!(matches!(
            parse_expr("q q", &t).unwrap_err().kind,
            ParseErrorKind::UnexpectedToken(_)
        ));
        assert!(parse_expr("_x", &t).is_err());
    }

    #[test]
    fn closure_table() {
        let lookup = |n: &str| (n == "x").then(|| Symbol::coordinate("x"));
        assert!(parse_expr("x^2", &lookup).is_ok());
    }
}
