//! Bounded linear temporal logic over finite traces.
//!
//! The fragment is `true`, atoms, `&`, `!` and step-bounded until
//! `φ U<=t ψ`, extended with next `X φ`. Disjunction, `false` and
//! `F<=t φ` are accepted as input sugar and expanded by the parser.
//!
//! [`probability`] evaluates a formula exactly by a backward dynamic program
//! over pairs of (state, pending obligation). Obligations are produced by
//! progressing the formula through the label of the current state, so no
//! traces are enumerated. [`satisfying_traces`] is the enumeration route and
//! serves as a test oracle.

mod eval;
mod parse;

use std::fmt;

pub use eval::{closeness_bound, probability, satisfying_traces, Closeness, ORACLE_LIMIT};
pub use parse::parse;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    Atom(String),
    And(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    /// `l U<=t r`: `r` holds within `t` steps and `l` holds until then.
    Until(Box<Formula>, Box<Formula>, usize),
    Next(Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::not(Formula::and(Formula::not(l), Formula::not(r)))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn until(l: Formula, r: Formula, t: usize) -> Self {
        Formula::Until(Box::new(l), Box::new(r), t)
    }

    /// Number of transitions the formula can look ahead: satisfaction
    /// depends only on the first `horizon + 1` observations.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 0,
            Formula::And(l, r) => l.horizon().max(r.horizon()),
            Formula::Not(f) => f.horizon(),
            Formula::Next(f) => 1 + f.horizon(),
            Formula::Until(l, r, t) => t + l.horizon().max(r.horizon()),
        }
    }

    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::True => {}
            Formula::Atom(a) => out.push(a),
            Formula::And(l, r) | Formula::Until(l, r, _) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
            Formula::Not(f) | Formula::Next(f) => f.collect_atoms(out),
        }
    }
}

/// Prints in the parser's concrete syntax with every binary operator
/// parenthesized, so that `parse(&f.to_string()) == f`.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::And(l, r) => write!(f, "({l} & {r})"),
            Formula::Not(c) => write!(f, "!{c}"),
            Formula::Next(c) => write!(f, "X {c}"),
            Formula::Until(l, r, t) => write!(f, "({l} U<={t} {r})"),
        }
    }
}

impl std::str::FromStr for Formula {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn horizons() {
        assert_eq!(parse("a").unwrap().horizon(), 0);
        assert_eq!(parse("X X X a").unwrap().horizon(), 3);
        assert_eq!(parse("a U<=3 b").unwrap().horizon(), 3);
        assert_eq!(parse("(X a) U<=2 b").unwrap().horizon(), 3);
        assert_eq!(parse("a & X b").unwrap().horizon(), 1);
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            Just(Formula::True),
            "[a-c][a-z0-9_]{0,3}"
                .prop_filter("keyword", |s| s != "true" && s != "false")
                .prop_map(Formula::Atom),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
                inner.clone().prop_map(Formula::not),
                inner.clone().prop_map(Formula::next),
                (inner.clone(), inner, 0usize..5).prop_map(|(l, r, t)| Formula::until(l, r, t)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(f in arb_formula()) {
            let printed = f.to_string();
            prop_assert_eq!(parse(&printed).unwrap(), f.clone());
            // whitespace is insignificant
            let spaced = printed.replace('(', " ( ").replace(')', " ) ").replace('&', " & ");
            prop_assert_eq!(parse(&spaced).unwrap(), f);
        }
    }
}
