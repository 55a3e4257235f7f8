use std::collections::HashMap;

use serde::Serialize;

use super::Formula;
use crate::bisim::{maximal_bisim, minimal_epsilon, DEFAULT_MIN_EPS_TOL};
use crate::error::{Error, Result};
use crate::lmc::{fill_all, FiniteLmc, Observation, TraceSet};
use crate::traces::bisim_bound;

/// [`satisfying_traces`] refuses trace spaces larger than this.
pub const ORACLE_LIMIT: u128 = 1_000_000;

/// Formula with atoms resolved to proposition indices, plus an explicit
/// `False` so progression can simplify.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Ob {
    True,
    False,
    Atom(usize),
    Not(Box<Ob>),
    And(Box<Ob>, Box<Ob>),
    Next(Box<Ob>),
    Until(Box<Ob>, Box<Ob>, usize),
}

impl Ob {
    fn resolve(f: &Formula, ap: &[String]) -> Result<Ob> {
        Ok(match f {
            Formula::True => Ob::True,
            Formula::Atom(a) => Ob::Atom(
                ap.iter()
                    .position(|p| p == a)
                    .ok_or_else(|| Error::UnknownProposition(a.clone()))?,
            ),
            Formula::And(l, r) => Ob::And(Box::new(Ob::resolve(l, ap)?), Box::new(Ob::resolve(r, ap)?)),
            Formula::Not(c) => Ob::Not(Box::new(Ob::resolve(c, ap)?)),
            Formula::Next(c) => Ob::Next(Box::new(Ob::resolve(c, ap)?)),
            Formula::Until(l, r, t) => Ob::Until(
                Box::new(Ob::resolve(l, ap)?),
                Box::new(Ob::resolve(r, ap)?),
                *t,
            ),
        })
    }

    fn not(self) -> Ob {
        match self {
            Ob::True => Ob::False,
            Ob::False => Ob::True,
            Ob::Not(inner) => *inner,
            other => Ob::Not(Box::new(other)),
        }
    }

    fn and(self, other: Ob) -> Ob {
        match (self, other) {
            (Ob::False, _) | (_, Ob::False) => Ob::False,
            (Ob::True, x) | (x, Ob::True) => x,
            (a, b) if a == b => a,
            (a, b) if a <= b => Ob::And(Box::new(a), Box::new(b)),
            (a, b) => Ob::And(Box::new(b), Box::new(a)),
        }
    }

    fn or(self, other: Ob) -> Ob {
        self.not().and(other.not()).not()
    }

    /// The obligation left on the path from the next position, after the
    /// current position emitted `obs`.
    fn progress(&self, obs: Observation) -> Ob {
        match self {
            Ob::True => Ob::True,
            Ob::False => Ob::False,
            Ob::Atom(p) => {
                if obs.contains(*p) {
                    Ob::True
                } else {
                    Ob::False
                }
            }
            Ob::Not(c) => c.progress(obs).not(),
            Ob::And(l, r) => l.progress(obs).and(r.progress(obs)),
            Ob::Next(c) => (**c).clone(),
            Ob::Until(l, r, t) => {
                let rest = if *t == 0 {
                    Ob::False
                } else {
                    Ob::Until(l.clone(), r.clone(), t - 1)
                };
                r.progress(obs).or(l.progress(obs).and(rest))
            }
        }
    }

    /// Direct finite-trace semantics at position `pos`.
    fn holds(&self, trace: &[Observation], pos: usize) -> bool {
        match self {
            Ob::True => true,
            Ob::False => false,
            Ob::Atom(p) => trace[pos].contains(*p),
            Ob::Not(c) => !c.holds(trace, pos),
            Ob::And(l, r) => l.holds(trace, pos) && r.holds(trace, pos),
            Ob::Next(c) => c.holds(trace, pos + 1),
            Ob::Until(l, r, t) => (0..=*t)
                .find(|&i| r.holds(trace, pos + i) || !l.holds(trace, pos + i))
                .is_some_and(|i| r.holds(trace, pos + i)),
        }
    }
}

/// Per-call tables: value of each obligation at every state, and the same
/// value pushed back one step through the kernel.
struct Evaluator<'a> {
    model: &'a FiniteLmc,
    observations: Vec<Observation>,
    value: HashMap<Ob, Vec<f64>>,
    expected_next: HashMap<Ob, Vec<f64>>,
}

impl<'a> Evaluator<'a> {
    fn new(model: &'a FiniteLmc) -> Self {
        let mut observations = model.labels().to_vec();
        observations.sort_unstable();
        observations.dedup();
        Evaluator {
            model,
            observations,
            value: HashMap::new(),
            expected_next: HashMap::new(),
        }
    }

    /// `v[s]` = probability that the path from `s` (its label included)
    /// satisfies `ob`.
    fn value(&mut self, ob: &Ob) -> Vec<f64> {
        if let Some(v) = self.value.get(ob) {
            return v.clone();
        }
        let n = self.model.len();
        let mut per_obs = HashMap::new();
        for &o in &self.observations.clone() {
            let residual = ob.progress(o);
            let column = match residual {
                Ob::True => None,
                Ob::False => None,
                ref r => Some(self.expected_next(r)),
            };
            per_obs.insert(o, (residual, column));
        }
        let v: Vec<f64> = (0..n)
            .map(|s| match &per_obs[&self.model.label(s)] {
                (Ob::True, _) => 1.0,
                (Ob::False, _) => 0.0,
                (_, Some(col)) => col[s],
                (_, None) => unreachable!("non-constant residual has a column"),
            })
            .collect();
        self.value.insert(ob.clone(), v.clone());
        v
    }

    /// `w[s] = Σ_u κ(s, u) · value(ob)[u]`.
    fn expected_next(&mut self, ob: &Ob) -> Vec<f64> {
        if let Some(w) = self.expected_next.get(ob) {
            return w.clone();
        }
        let v = self.value(ob);
        let w: Vec<f64> = (0..self.model.len())
            .map(|s| {
                self.model
                    .successors(s)
                    .iter()
                    .map(|&(u, p)| p * v[u])
                    .sum()
            })
            .collect();
        self.expected_next.insert(ob.clone(), w.clone());
        w
    }
}

/// Exact probability that a path from `start` satisfies `formula`.
pub fn probability(model: &FiniteLmc, start: usize, formula: &Formula) -> Result<f64> {
    model.check_state(start)?;
    let ob = Ob::resolve(formula, model.ap())?;
    let residual = ob.progress(model.label(start));
    Ok(match residual {
        Ob::True => 1.0,
        Ob::False => 0.0,
        r => {
            let mut ev = Evaluator::new(model);
            let v = ev.value(&r);
            model
                .successors(start)
                .iter()
                .map(|&(u, p)| p * v[u])
                .sum()
        }
    })
}

/// Every length-`k + 1` trace over the universe `ap` that satisfies
/// `formula`, by enumeration.
pub fn satisfying_traces(formula: &Formula, ap: &[String], k: usize) -> Result<TraceSet> {
    let h = formula.horizon();
    if k < h {
        return Err(Error::domain(format!(
            "horizon {k} is shorter than the formula's horizon {h}"
        )));
    }
    let space = 1u128
        .checked_shl((ap.len() * (k + 1)) as u32)
        .filter(|&s| s <= ORACLE_LIMIT);
    let Some(_) = space else {
        return Err(Error::ScaleGuard {
            what: "trace space",
            requested: 2u128.saturating_pow((ap.len() * (k + 1)) as u32),
            limit: ORACLE_LIMIT,
        });
    };
    let ob = Ob::resolve(formula, ap)?;
    let mut set = TraceSet::new(k);
    let mut cur = vec![Observation::EMPTY; k + 1];
    let mut sat = Vec::new();
    fill_all(ap.len(), 0, &mut cur, &mut |t| {
        if ob.holds(t, 0) {
            sat.push(t.to_vec());
        }
    });
    for t in sat {
        set.insert(t)?;
    }
    Ok(set)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Closeness {
    pub p_s: f64,
    pub p_t: f64,
    pub horizon: usize,
    pub bound: f64,
    pub within_bound: bool,
}

/// Probabilities of `formula` from two ε-bisimilar states together with the
/// `1 − (1 − ε)^k` bound on their difference, `k` the formula's horizon.
///
/// Fails if `s` and `t` are not related by the maximal ε-bisimulation.
pub fn closeness_bound(
    model: &FiniteLmc,
    s: usize,
    t: usize,
    formula: &Formula,
    eps: f64,
) -> Result<Closeness> {
    model.check_state(s)?;
    model.check_state(t)?;
    if !maximal_bisim(model, eps)?.contains(s, t) {
        return Err(Error::NotBisimilar {
            s: model.name(s).to_string(),
            t: model.name(t).to_string(),
            eps,
            min_eps: minimal_epsilon(model, s, t, DEFAULT_MIN_EPS_TOL)?,
        });
    }
    let p_s = probability(model, s, formula)?;
    let p_t = probability(model, t, formula)?;
    let horizon = formula.horizon();
    let bound = bisim_bound(eps, horizon)?;
    Ok(Closeness {
        p_s,
        p_t,
        horizon,
        bound,
        within_bound: (p_s - p_t).abs() <= bound + 1e-9,
    })
}
