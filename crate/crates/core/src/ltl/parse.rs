//! Recursive-descent parser for bounded LTL.
//!
//! ```text
//! until   := or ( "U<=" INT until )?
//! or      := and ( "|" and )*
//! and     := unary ( "&" unary )*
//! unary   := "!" unary | "X" unary | "F<=" INT unary | primary
//! primary := "true" | "false" | IDENT | "(" until ")"
//! ```
//!
//! `a | b`, `false` and `F<=t a` are expanded while parsing into
//! `!(!a & !b)`, `!true` and `true U<=t a`.

use super::Formula;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    True,
    False,
    Ident(String),
    And,
    Or,
    Not,
    Next,
    Until(usize),
    Eventually(usize),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn bound(&mut self, op: char) -> Result<usize> {
        self.skip_ws();
        if !self.src[self.pos..].starts_with("<=") {
            return Err(Error::Syntax {
                pos: self.pos,
                msg: format!("expected `<=` after `{op}` (only bounded operators are supported)"),
            });
        }
        self.pos += 2;
        self.skip_ws();
        let start = self.pos;
        let digits = self.src[start..]
            .bytes()
            .take_while(|b| b.is_ascii_digit())
            .count();
        if digits == 0 {
            return Err(Error::Syntax {
                pos: start,
                msg: "step bound must be a non-negative integer".into(),
            });
        }
        self.pos += digits;
        self.src[start..self.pos]
            .parse()
            .map_err(|_| Error::Syntax {
                pos: start,
                msg: "step bound out of range".into(),
            })
    }

    fn next(&mut self) -> Result<(usize, Tok)> {
        self.skip_ws();
        let start = self.pos;
        let Some(c) = self.src[self.pos..].chars().next() else {
            return Ok((start, Tok::End));
        };
        let single = match c {
            '&' => Some(Tok::And),
            '|' => Some(Tok::Or),
            '!' => Some(Tok::Not),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok((start, tok));
        }
        if !(c.is_ascii_alphabetic() || c == '_') {
            return Err(Error::Syntax {
                pos: start,
                msg: format!("unexpected character `{c}`"),
            });
        }
        let len = self.src[start..]
            .bytes()
            .take_while(|b| b.is_ascii_alphanumeric() || *b == b'_')
            .count();
        self.pos += len;
        let tok = match &self.src[start..self.pos] {
            "true" => Tok::True,
            "false" => Tok::False,
            "X" => Tok::Next,
            "U" => Tok::Until(self.bound('U')?),
            "F" => Tok::Eventually(self.bound('F')?),
            ident => Tok::Ident(ident.to_string()),
        };
        Ok((start, tok))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: (usize, Tok),
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(usize, Tok)> {
        let next = self.lexer.next()?;
        Ok(std::mem::replace(&mut self.peeked, next))
    }

    fn until(&mut self) -> Result<Formula> {
        let lhs = self.or()?;
        if let Tok::Until(t) = self.peeked.1 {
            self.bump()?;
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs, t));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula> {
        let mut lhs = self.and()?;
        while self.peeked.1 == Tok::Or {
            self.bump()?;
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while self.peeked.1 == Tok::And {
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peeked.1 {
            Tok::Not => {
                self.bump()?;
                Ok(Formula::not(self.unary()?))
            }
            Tok::Next => {
                self.bump()?;
                Ok(Formula::next(self.unary()?))
            }
            Tok::Eventually(t) => {
                self.bump()?;
                Ok(Formula::until(Formula::True, self.unary()?, t))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula> {
        let (pos, tok) = self.bump()?;
        match tok {
            Tok::True => Ok(Formula::True),
            Tok::False => Ok(Formula::not(Formula::True)),
            Tok::Ident(name) => Ok(Formula::Atom(name)),
            Tok::LParen => {
                let inner = self.until()?;
                let (pos, tok) = self.bump()?;
                if tok != Tok::RParen {
                    return Err(Error::Syntax {
                        pos,
                        msg: "expected `)`".into(),
                    });
                }
                Ok(inner)
            }
            Tok::End => Err(Error::Syntax {
                pos,
                msg: "unexpected end of formula".into(),
            }),
            other => Err(Error::Syntax {
                pos,
                msg: format!("unexpected {other:?}"),
            }),
        }
    }
}

pub fn parse(text: &str) -> Result<Formula> {
    let mut lexer = Lexer { src: text, pos: 0 };
    let first = lexer.next()?;
    let mut parser = Parser {
        lexer,
        peeked: first,
    };
    let f = parser.until()?;
    match parser.peeked {
        (_, Tok::End) => Ok(f),
        (pos, ref tok) => Err(Error::Syntax {
            pos,
            msg: format!("trailing input starting with {tok:?}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(s: &str) -> Formula {
        Formula::Atom(s.into())
    }

    #[test]
    fn basic_forms() {
        assert_eq!(parse("true").unwrap(), Formula::True);
        assert_eq!(
            parse("a U<=3 b").unwrap(),
            Formula::until(atom("a"), atom("b"), 3)
        );
        assert_eq!(
            parse("(X rain) & (X X rain)").unwrap(),
            Formula::and(
                Formula::next(atom("rain")),
                Formula::next(Formula::next(atom("rain")))
            )
        );
    }

    #[test]
    fn precedence() {
        // ! binds tighter than &, & tighter than U
        assert_eq!(
            parse("!a & b U<=2 c").unwrap(),
            Formula::until(Formula::and(Formula::not(atom("a")), atom("b")), atom("c"), 2)
        );
        // U is right-associative
        assert_eq!(
            parse("a U<=1 b U<=2 c").unwrap(),
            Formula::until(atom("a"), Formula::until(atom("b"), atom("c"), 2), 1)
        );
        assert_eq!(
            parse("X a & b").unwrap(),
            Formula::and(Formula::next(atom("a")), atom("b"))
        );
    }

    #[test]
    fn sugar_is_expanded() {
        assert_eq!(
            parse("a | b").unwrap(),
            Formula::not(Formula::and(Formula::not(atom("a")), Formula::not(atom("b"))))
        );
        assert_eq!(
            parse("F<=2 a").unwrap(),
            Formula::until(Formula::True, atom("a"), 2)
        );
        assert_eq!(parse("false").unwrap(), Formula::not(Formula::True));
    }

    #[test]
    fn errors_carry_positions() {
        match parse("a & (b") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("a U b"), Err(Error::Syntax { pos: 4, .. })));
        assert!(matches!(parse("a U<=-1 b"), Err(Error::Syntax { pos: 5, .. })));
        assert!(matches!(parse("a U<=x b"), Err(Error::Syntax { .. })));
        assert!(matches!(parse("a b"), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(parse("a # b"), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(parse(""), Err(Error::Syntax { pos: 0, .. })));
    }
}
