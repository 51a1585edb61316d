//! Recursive-descent parser for the infix expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'i' | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-u^2`
//! is `-(u^2)` and `u^-1` is accepted.

use num_complex::Complex64;
use thiserror::Error;

use super::{Alphabet, Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {position}: expected {}", expected.join(" or "))]
    Syntax {
        position: usize,
        expected: Vec<String>,
    },
    #[error("unknown symbol `{name}` at {position}")]
    UnknownSymbol { name: String, position: usize },
    #[error("unknown function `{name}` at {position}")]
    UnknownFunction { name: String, position: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            d if d.is_ascii_digit() || d == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| ParseError::Syntax {
                    position: start,
                    expected: vec!["decimal literal".into()],
                })?;
                out.push((Tok::Num(v), start));
                continue;
            }
            a if a.is_ascii_alphabetic() => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                return Err(ParseError::Syntax {
                    position: start,
                    expected: vec!["operator, literal or identifier".into()],
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    alphabet: &'a Alphabet,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(&[what]))
        }
    }

    fn syntax(&self, expected: &[&str]) -> ParseError {
        let mut expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        expected.push(format!("(found {})", describe(self.peek())));
        ParseError::Syntax {
            position: self.offset(),
            expected,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(self.term()?.neg());
                }
                _ => break,
            }
        }
        Ok(Expr::sum(terms))
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = Expr::product(vec![acc, rhs]);
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = Expr::quot(acc, rhs);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(self.unary()?.neg())
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            Ok(Expr::pow(base, exponent))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::real(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction {
                        name: name.clone(),
                        position: at,
                    })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::apply(func, arg));
                }
                if name == "i" {
                    return Ok(Expr::Const(Complex64::new(0.0, 1.0)));
                }
                if Func::from_name(&name).is_some() {
                    return Err(self.syntax(&["`(` after function name"]));
                }
                if !self.alphabet.contains(&name) {
                    return Err(ParseError::UnknownSymbol { name, position: at });
                }
                Ok(Expr::Var(name))
            }
            _ => Err(self.syntax(&["number", "identifier", "`(`", "`-`"])),
        }
    }
}

/// Parses `text` against `alphabet`, returning a canonical tree.
pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        alphabet,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.syntax(&["operator", "end of input"]));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx() -> Alphabet {
        Alphabet::complex::<&str>(&[])
    }

    #[test]
    fn square_is_a_power_node() {
        let e = parse("u^2", &cx()).unwrap();
        assert_eq!(e, Expr::Pow(Box::new(Expr::var("u")), 2));
    }

    #[test]
    fn cubic_example_right_hand_side() {
        let e = parse("-3*u*up - u^3", &cx()).unwrap();
        match &e {
            Expr::Sum(cs) => {
                assert_eq!(cs.len(), 2);
                assert!(cs.iter().all(|c| matches!(c, Expr::Product(_))));
            }
            other => panic!("expected sum, got {other:?}"),
        }
    }

    #[test]
    fn function_application() {
        let e = parse("tan(z)", &cx()).unwrap();
        assert_eq!(e, Expr::Apply(Func::Tan, Box::new(Expr::var("z"))));
    }

    #[test]
    fn caret_binds_tighter_than_unary_minus() {
        let a = parse("-u^2", &cx()).unwrap();
        assert_eq!(a, Expr::powi(Expr::var("u"), 2).neg());
        let b = parse("2^3^2", &cx()).unwrap();
        assert_eq!(b, Expr::real(512.0));
        let c = parse("u^-1", &cx()).unwrap();
        assert_eq!(c, Expr::powi(Expr::var("u"), -1));
    }

    #[test]
    fn imaginary_unit_literal() {
        let e = parse("2 + 3*i", &cx()).unwrap();
        assert_eq!(e, Expr::Const(Complex64::new(2.0, 3.0)));
    }

    #[test]
    fn errors_carry_positions() {
        match parse("u + * z", &cx()) {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse("q + 1", &cx()),
            Err(ParseError::UnknownSymbol { ref name, position: 0 }) if name == "q"
        ));
        assert!(matches!(
            parse("sec(z)", &cx()),
            Err(ParseError::UnknownFunction { .. })
        ));
        assert!(matches!(parse("(u", &cx()), Err(ParseError::Syntax { .. })));
        assert!(matches!(
            parse("sin", &cx()),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(parse("", &cx()), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn whitespace_is_insignificant() {
        assert_eq!(
            parse(" z*  u ", &cx()).unwrap(),
            parse("z*u", &cx()).unwrap()
        );
    }
}
