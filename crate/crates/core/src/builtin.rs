//! Small named models that exhibit the main theoretical facts.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lmc::FiniteLmc;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Builtin {
    /// Two trace-equivalent states that are not ε-bisimilar for ε < 1/2.
    Branching,
    /// A pair whose trace distance is exactly `1 - (1 - ε)^k`.
    Tightness { eps: f64 },
    /// A chain where the closed-set notion accepts a pair with divergent
    /// 2-step reachability.
    AltCounterexample { n: usize },
    /// Closed-form weather abstraction with `n` humidity cells.
    WeatherAbstract { n: usize },
}

impl Builtin {
    pub fn build(self) -> Result<FiniteLmc> {
        match self {
            Builtin::Branching => Ok(branching_example()),
            Builtin::Tightness { eps } => tightness(eps),
            Builtin::AltCounterexample { n } => alt_counterexample(n),
            Builtin::WeatherAbstract { n } => crate::abstraction::weather::weather_abstract(n),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Branching => write!(f, "branching"),
            Builtin::Tightness { eps } => write!(f, "tightness:{eps}"),
            Builtin::AltCounterexample { n } => write!(f, "alt:{n}"),
            Builtin::WeatherAbstract { n } => write!(f, "weather:{n}"),
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    /// `branching`, `tightness:EPS`, `alt:N`, `weather:N`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let need = |what: &str| {
            arg.ok_or_else(|| Error::domain(format!("builtin `{name}` needs a {what} parameter")))
        };
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::domain(format!("bad integer `{v}`")))
        };
        match name {
            "branching" => Ok(Builtin::Branching),
            "tightness" => {
                let v = need("epsilon")?;
                let eps = v
                    .parse::<f64>()
                    .map_err(|_| Error::domain(format!("bad epsilon `{v}`")))?;
                Ok(Builtin::Tightness { eps })
            }
            "alt" | "alt_counterexample" => Ok(Builtin::AltCounterexample {
                n: parse_usize(need("N")?)?,
            }),
            "weather" => Ok(Builtin::WeatherAbstract {
                n: parse_usize(need("N")?)?,
            }),
            _ => Err(Error::domain(format!("unknown builtin `{name}`"))),
        }
    }
}

/// `s1 -> m -> {end_b, end_c}` against `s2 -> {m_b, m_c} -> end_b / end_c`.
///
/// Both starts emit `{a}{a}{b}` and `{a}{a}{c}` with probability 1/2 each.
pub fn branching_example() -> FiniteLmc {
    let a: &[&str] = &["a"];
    FiniteLmc::from_transitions(
        &["a", "b", "c"],
        &[
            ("s1", a),
            ("s2", a),
            ("m", a),
            ("m_b", a),
            ("m_c", a),
            ("end_b", &["b"]),
            ("end_c", &["c"]),
        ],
        &[
            (0, 2, 1.0),
            (2, 5, 0.5),
            (2, 6, 0.5),
            (1, 3, 0.5),
            (1, 4, 0.5),
            (3, 5, 1.0),
            (4, 6, 1.0),
            (5, 5, 1.0),
            (6, 6, 1.0),
        ],
    )
    .expect("branching example is well formed")
}

/// `s1` loops forever; `s2` stays with probability `1 - eps` and otherwise
/// moves to the absorbing `a`-labelled state `v`.
pub fn tightness(eps: f64) -> Result<FiniteLmc> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::domain(format!("epsilon {eps} outside [0, 1]")));
    }
    FiniteLmc::from_transitions(
        &["a"],
        &[("s1", &[]), ("s2", &[]), ("v", &["a"])],
        &[(0, 0, 1.0), (1, 1, 1.0 - eps), (1, 2, eps), (2, 2, 1.0)],
    )
}

/// States `s1, s2, t_0..t_N, u1, u2`: `s1 -> t_0`, `s2 -> t_N`, and `t_i`
/// reaches the `a`-labelled `u1` with probability `1 - i/N`.
pub fn alt_counterexample(n: usize) -> Result<FiniteLmc> {
    if n < 1 {
        return Err(Error::domain("alt_counterexample needs N >= 1"));
    }
    let t = |i: usize| 2 + i;
    let u1 = n + 3;
    let u2 = n + 4;
    let mut names: Vec<String> = vec!["s1".into(), "s2".into()];
    names.extend((0..=n).map(|i| format!("t{i}")));
    names.push("u1".into());
    names.push("u2".into());
    let size = names.len();
    let mut kernel = vec![vec![0.0; size]; size];
    kernel[0][t(0)] = 1.0;
    kernel[1][t(n)] = 1.0;
    for i in 0..=n {
        let q = i as f64 / n as f64;
        kernel[t(i)][u1] = 1.0 - q;
        kernel[t(i)][u2] = q;
    }
    kernel[u1][u1] = 1.0;
    kernel[u2][u2] = 1.0;
    let states = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let label = if i == u1 { vec!["a".to_string()] } else { vec![] };
            (name, label)
        })
        .collect();
    FiniteLmc::new(vec!["a".into()], states, kernel)
}

/// The relation accepted by the closed-set notion on [`alt_counterexample`]:
/// `(s1, s2)` and consecutive `(t_i, t_{i+1})`, as ordered pairs (not
/// symmetrized).
pub fn alt_counterexample_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = vec![(0, 1)];
    pairs.extend((0..n).map(|i| (2 + i, 3 + i)));
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmc::{Observation, TraceSet};

    #[test]
    fn branching_emits_two_traces_from_both_starts() {
        let m = branching_example();
        let obs = |p: &str| m.observation(&[p]).unwrap();
        let (a, b, c) = (obs("a"), obs("b"), obs("c"));
        for start in ["s1", "s2"] {
            let s = m.state_index(start).unwrap();
            for end in [b, c] {
                let set = TraceSet::from_traces(2, [vec![a, a, end]]).unwrap();
                assert_eq!(m.trace_probability(s, &set).unwrap(), 0.5);
            }
        }
    }

    #[test]
    fn tightness_reachability() {
        let m = tightness(0.3).unwrap();
        let a = m.observation(&["a"]).unwrap();
        let e = Observation::EMPTY;
        // traces of length 3 from s2 that visit `a`
        let set =
            TraceSet::from_traces(2, [vec![e, a, a], vec![e, e, a]]).unwrap();
        let p = m.trace_probability(1, &set).unwrap();
        assert!((p - 0.51).abs() < 1e-12);
        assert_eq!(m.trace_probability(0, &set).unwrap(), 0.0);
        assert!(tightness(1.5).is_err());
        assert!(tightness(-0.1).is_err());
    }

    #[test]
    fn alt_counterexample_reachability() {
        let m = alt_counterexample(10).unwrap();
        assert_eq!(m.len(), 15);
        let a = m.observation(&["a"]).unwrap();
        let e = Observation::EMPTY;
        let reach = TraceSet::from_traces(2, [vec![e, e, a]]).unwrap();
        assert_eq!(m.trace_probability(0, &reach).unwrap(), 1.0);
        assert_eq!(m.trace_probability(1, &reach).unwrap(), 0.0);
        assert!(alt_counterexample(0).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("branching".parse::<Builtin>().unwrap(), Builtin::Branching);
        assert_eq!(
            "tightness:0.3".parse::<Builtin>().unwrap(),
            Builtin::Tightness { eps: 0.3 }
        );
        assert_eq!(
            "alt:4".parse::<Builtin>().unwrap(),
            Builtin::AltCounterexample { n: 4 }
        );
        assert!("tightness".parse::<Builtin>().is_err());
        assert!("nope".parse::<Builtin>().is_err());
    }
}
