//! Compact formula syntax used in the editor:
//!
//! ```text
//! formula := atom ( "(" formula ("," formula)* ")" )*
//! atom    := symref | var | int
//! symref  := ident "#" ident
//! var     := "$" ident
//! int     := ["-"] digit+
//! ```
//!
//! Call suffixes may be chained (`f#g(1)(2)`) so that applications with a
//! non-symbol head still have a textual form.

use std::fmt::Write as _;

use super::parse::parse_decimal;
use super::{LineIndex, ParseError, ParseErrorCode};
use crate::model::{Formula, SymbolRef};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Sym(SymbolRef),
    Var(String),
    Int(num_bigint::BigInt),
    Open,
    Close,
    Comma,
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    idx: &'a LineIndex<'a>,
}

impl Lexer<'_> {
    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &str {
        let start = self.pos;
        while let Some(c) = self.peek_char() {
            if !pred(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        let at = self.pos;
        match self.peek_char() {
            Some(c) if ident_start(c) => Ok(self.take_while(ident_char).to_owned()),
            _ => Err(self.idx.error(at, ParseErrorCode::Malformed, format!("expected {what}"))),
        }
    }

    fn next(&mut self) -> Result<Option<(Token, usize)>, ParseError> {
        self.take_while(char::is_whitespace);
        let start = self.pos;
        let Some(c) = self.peek_char() else {
            return Ok(None);
        };
        let tok = match c {
            '(' => {
                self.pos += 1;
                Token::Open
            }
            ')' => {
                self.pos += 1;
                Token::Close
            }
            ',' => {
                self.pos += 1;
                Token::Comma
            }
            '$' => {
                self.pos += 1;
                Token::Var(self.ident("variable name after `$`")?)
            }
            '-' | '0'..='9' => {
                if c == '-' {
                    self.pos += 1;
                }
                let digits = self.take_while(|c| c.is_ascii_digit());
                if digits.is_empty() {
                    return Err(self.idx.error(start, ParseErrorCode::BadInteger, "expected digits"));
                }
                if self.peek_char().is_some_and(ident_char) {
                    return Err(self.idx.error(start, ParseErrorCode::BadInteger, "malformed integer literal"));
                }
                let n = parse_decimal(&self.src[start..self.pos])
                    .ok_or_else(|| self.idx.error(start, ParseErrorCode::BadInteger, "malformed integer literal"))?;
                Token::Int(n)
            }
            c if ident_start(c) => {
                let theory = self.ident("theory name")?;
                if self.peek_char() != Some('#') {
                    return Err(self.idx.error(
                        self.pos,
                        ParseErrorCode::BadRef,
                        format!("expected `#` after `{theory}`"),
                    ));
                }
                self.pos += 1;
                let name = self.ident("symbol name after `#`")?;
                Token::Sym(SymbolRef::new(theory, name))
            }
            other => {
                return Err(self
                    .idx
                    .error(start, ParseErrorCode::Malformed, format!("unexpected character `{other}`")))
            }
        };
        Ok(Some((tok, start)))
    }
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    at: usize,
    end: usize,
    idx: &'a LineIndex<'a>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |(_, p)| *p)
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let found = match self.peek() {
            None => "end of input".to_owned(),
            Some(t) => format!("{t:?}"),
        };
        self.idx
            .error(self.offset(), ParseErrorCode::Malformed, format!("expected {wanted}, found {found}"))
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let mut f = match self.peek().cloned() {
            Some(Token::Sym(r)) => Formula::Sym(r),
            Some(Token::Var(v)) => Formula::Var(v),
            Some(Token::Int(n)) => Formula::Int(n),
            _ => return Err(self.unexpected("a formula")),
        };
        self.at += 1;
        while self.peek() == Some(&Token::Open) {
            self.at += 1;
            let mut args = vec![self.formula()?];
            loop {
                match self.peek() {
                    Some(Token::Comma) => {
                        self.at += 1;
                        args.push(self.formula()?);
                    }
                    Some(Token::Close) => {
                        self.at += 1;
                        break;
                    }
                    _ => return Err(self.unexpected("`,` or `)`")),
                }
            }
            f = Formula::apply(f, args);
        }
        Ok(f)
    }
}

pub fn parse_formula_ascii(src: &str) -> Result<Formula, ParseError> {
    let idx = LineIndex::new(src);
    let mut lexer = Lexer { src, pos: 0, idx: &idx };
    let mut tokens = Vec::new();
    while let Some(t) = lexer.next()? {
        tokens.push(t);
    }
    let mut parser = Parser {
        tokens,
        at: 0,
        end: src.len(),
        idx: &idx,
    };
    let f = parser.formula()?;
    if parser.peek().is_some() {
        return Err(parser.unexpected("end of input"));
    }
    Ok(f)
}

/// Canonical text: one space after each comma, none elsewhere.
pub fn print_formula_ascii(f: &Formula) -> String {
    let mut out = String::new();
    print_into(f, &mut out);
    out
}

fn print_into(f: &Formula, out: &mut String) {
    match f {
        Formula::Sym(r) => {
            let _ = write!(out, "{}#{}", r.theory, r.name);
        }
        Formula::Var(v) => {
            out.push('$');
            out.push_str(v);
        }
        Formula::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Formula::Apply { head, args } => {
            print_into(head, out);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_into(a, out);
            }
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn application_with_variable() {
        assert_eq!(
            parse_formula_ascii("arith#plus(1, $x)").unwrap(),
            Formula::apply(Formula::sym("arith", "plus"), vec![Formula::int(1), Formula::var("x")])
        );
    }

    #[test]
    fn bare_variable() {
        assert_eq!(parse_formula_ascii("$x").unwrap(), Formula::var("x"));
    }

    #[test]
    fn nested_with_negative() {
        let expected = Formula::apply(
            Formula::sym("arith", "plus"),
            vec![
                Formula::apply(Formula::sym("arith", "times"), vec![Formula::int(2), Formula::int(3)]),
                Formula::int(-4),
            ],
        );
        assert_eq!(parse_formula_ascii("arith#plus(arith#times(2,3), -4)").unwrap(), expected);
        assert_eq!(parse_formula_ascii(" arith#plus (\n arith#times( 2 ,3 ) ,-4 ) ").unwrap(), expected);
    }

    #[test]
    fn printing() {
        assert_eq!(print_formula_ascii(&Formula::int(0)), "0");
        let f = Formula::apply(Formula::sym("arith", "plus"), vec![Formula::int(1), Formula::int(2)]);
        assert_eq!(print_formula_ascii(&f), "arith#plus(1, 2)");
    }

    #[test]
    fn chained_application() {
        let f = Formula::apply(
            Formula::apply(Formula::sym("fn", "compose"), vec![Formula::var("f")]),
            vec![Formula::int(7)],
        );
        assert_eq!(print_formula_ascii(&f), "fn#compose($f)(7)");
        assert_eq!(parse_formula_ascii("fn#compose($f)(7)").unwrap(), f);
    }

    #[test]
    fn errors_are_positioned() {
        let e = parse_formula_ascii("arith#plus(1,\n  ?)").unwrap_err();
        assert_eq!((e.line, e.column, e.code), (2, 3, ParseErrorCode::Malformed));
        let e = parse_formula_ascii("arith").unwrap_err();
        assert_eq!(e.code, ParseErrorCode::BadRef);
        let e = parse_formula_ascii("- 4").unwrap_err();
        assert_eq!(e.code, ParseErrorCode::BadInteger);
        let e = parse_formula_ascii("12ab").unwrap_err();
        assert_eq!(e.code, ParseErrorCode::BadInteger);
        assert!(parse_formula_ascii("").is_err());
        assert!(parse_formula_ascii("a#b()").is_err());
        assert!(parse_formula_ascii("a#b(1").is_err());
        assert!(parse_formula_ascii("1 2").is_err());
    }
}
