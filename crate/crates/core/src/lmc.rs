//! Finite labelled Markov chains.
//!
//! A [`FiniteLmc`] holds a finite set of named states, a label set per state
//! drawn from a finite universe of atomic propositions, and a row-stochastic
//! transition matrix. Labels are stored as bitmasks ([`Observation`]) over the
//! proposition universe, which caps the universe at 64 propositions.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums must be within this distance of 1 for a model to be accepted.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Non-strict loading renormalizes rows whose sum is within this distance of 1.
pub const RENORMALIZE_TOL: f64 = 1e-6;
/// Slack used when comparing probabilities against each other.
pub const CMP_SLACK: f64 = 1e-12;
/// Prefixes carrying less mass than this are dropped by the trace dynamic programs.
pub const PRUNE_MASS: f64 = 1e-15;

pub const MAX_PROPOSITIONS: usize = 64;

/// A label set, encoded as a bitmask over the model's proposition universe.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Observation(pub u64);

impl Observation {
    pub const EMPTY: Observation = Observation(0);

    pub fn contains(self, prop: usize) -> bool {
        self.0 >> prop & 1 == 1
    }

    pub fn with(self, prop: usize) -> Self {
        Observation(self.0 | 1 << prop)
    }

    /// Every observation over a universe of `n_props` propositions, in mask order.
    pub fn all(n_props: usize) -> impl Iterator<Item = Observation> {
        (0..1u64 << n_props).map(Observation)
    }
}

/// A finite trace: the observations emitted at times 0..=k.
pub type Trace = Vec<Observation>;

/// A set of traces sharing one horizon `k` (every member has length `k + 1`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceSet {
    horizon: usize,
    traces: BTreeSet<Trace>,
}

impl TraceSet {
    pub fn new(horizon: usize) -> Self {
        TraceSet {
            horizon,
            traces: BTreeSet::new(),
        }
    }

    pub fn from_traces(horizon: usize, traces: impl IntoIterator<Item = Trace>) -> Result<Self> {
        let mut set = TraceSet::new(horizon);
        for t in traces {
            set.insert(t)?;
        }
        Ok(set)
    }

    /// All `|O|^(k+1)` traces over a universe of `n_props` propositions.
    pub fn full(n_props: usize, horizon: usize) -> Self {
        let mut traces = BTreeSet::new();
        let mut cur = vec![Observation::EMPTY; horizon + 1];
        fill_all(n_props, 0, &mut cur, &mut |t| {
            traces.insert(t.to_vec());
        });
        TraceSet { horizon, traces }
    }

    pub fn insert(&mut self, trace: Trace) -> Result<()> {
        if trace.len() != self.horizon + 1 {
            return Err(Error::Dimension {
                expected: self.horizon + 1,
                actual: trace.len(),
            });
        }
        self.traces.insert(trace);
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trace> {
        self.traces.iter()
    }

    pub fn contains(&self, trace: &[Observation]) -> bool {
        self.traces.contains(trace)
    }
}

pub(crate) fn fill_all(
    n_props: usize,
    pos: usize,
    cur: &mut Vec<Observation>,
    visit: &mut dyn FnMut(&[Observation]),
) {
    if pos == cur.len() {
        visit(cur);
        return;
    }
    for o in Observation::all(n_props) {
        cur[pos] = o;
        fill_all(n_props, pos + 1, cur, visit);
    }
}

/// On-disk form of a model: proposition universe, named states with labels,
/// and a dense kernel given row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmcDocument {
    pub ap: Vec<String>,
    pub states: Vec<StateDocument>,
    pub kernel: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDocument {
    pub name: String,
    #[serde(default)]
    pub label: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Issue {
    RowCount { expected: usize, actual: usize },
    RowLength { row: usize, expected: usize, actual: usize },
    NonFinite { row: usize, col: usize },
    Negative { row: usize, col: usize, value: f64 },
    AboveOne { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    UnknownProposition { state: String, prop: String },
    DuplicateState { name: String },
    DuplicateProposition { prop: String },
    TooManyPropositions { count: usize },
    NoStates,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::RowCount { expected, actual } => {
                write!(f, "kernel has {actual} rows, expected {expected}")
            }
            Issue::RowLength {
                row,
                expected,
                actual,
            } => write!(f, "row {row} has {actual} entries, expected {expected}"),
            Issue::NonFinite { row, col } => write!(f, "entry ({row}, {col}) is not finite"),
            Issue::Negative { row, col, value } => {
                write!(f, "entry ({row}, {col}) is negative: {value}")
            }
            Issue::AboveOne { row, col, value } => {
                write!(f, "entry ({row}, {col}) exceeds 1: {value}")
            }
            Issue::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
            Issue::UnknownProposition { state, prop } => {
                write!(f, "state {state} has unknown proposition {prop}")
            }
            Issue::DuplicateState { name } => write!(f, "duplicate state name {name}"),
            Issue::DuplicateProposition { prop } => write!(f, "duplicate proposition {prop}"),
            Issue::TooManyPropositions { count } => {
                write!(f, "{count} propositions, at most {MAX_PROPOSITIONS} supported")
            }
            Issue::NoStates => write!(f, "model has no states"),
        }
    }
}

/// A row that non-strict loading rescaled to sum to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Adjustment {
    pub row: usize,
    pub original_sum: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
    pub adjustments: Vec<Adjustment>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            write!(f, "valid")?;
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{issue}")?;
        }
        for adj in &self.adjustments {
            write!(
                f,
                "; row {} renormalized (sum was {})",
                adj.row, adj.original_sum
            )?;
        }
        Ok(())
    }
}

/// Check a model document against the structural invariants.
///
/// In strict mode every row must sum to 1 within [`ROW_SUM_TOL`]. Otherwise
/// rows off by at most [`RENORMALIZE_TOL`] are accepted and recorded as
/// adjustments.
pub fn validate(doc: &LmcDocument, strict: bool) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = doc.states.len();
    if n == 0 {
        report.issues.push(Issue::NoStates);
    }
    if doc.ap.len() > MAX_PROPOSITIONS {
        report.issues.push(Issue::TooManyPropositions {
            count: doc.ap.len(),
        });
    }
    let mut seen = HashSet::new();
    for p in &doc.ap {
        if !seen.insert(p.as_str()) {
            report
                .issues
                .push(Issue::DuplicateProposition { prop: p.clone() });
        }
    }
    let mut names = HashSet::new();
    for st in &doc.states {
        if !names.insert(st.name.as_str()) {
            report.issues.push(Issue::DuplicateState {
                name: st.name.clone(),
            });
        }
        for p in &st.label {
            if !seen.contains(p.as_str()) {
                report.issues.push(Issue::UnknownProposition {
                    state: st.name.clone(),
                    prop: p.clone(),
                });
            }
        }
    }
    if doc.kernel.len() != n {
        report.issues.push(Issue::RowCount {
            expected: n,
            actual: doc.kernel.len(),
        });
    }
    for (i, row) in doc.kernel.iter().enumerate() {
        if row.len() != n {
            report.issues.push(Issue::RowLength {
                row: i,
                expected: n,
                actual: row.len(),
            });
            continue;
        }
        let mut entries_ok = true;
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                report.issues.push(Issue::NonFinite { row: i, col: j });
                entries_ok = false;
            } else if v < 0.0 {
                report.issues.push(Issue::Negative {
                    row: i,
                    col: j,
                    value: v,
                });
                entries_ok = false;
            } else if v > 1.0 + ROW_SUM_TOL {
                report.issues.push(Issue::AboveOne {
                    row: i,
                    col: j,
                    value: v,
                });
                entries_ok = false;
            }
        }
        if !entries_ok {
            continue;
        }
        let sum: f64 = row.iter().sum();
        let defect = (sum - 1.0).abs();
        if defect <= ROW_SUM_TOL && strict {
            continue;
        }
        if !strict && defect <= RENORMALIZE_TOL {
            if defect > CMP_SLACK {
                report.adjustments.push(Adjustment {
                    row: i,
                    original_sum: sum,
                });
            }
            continue;
        }
        report.issues.push(Issue::RowSum { row: i, sum });
    }
    report
}

/// A finite labelled Markov chain with a row-stochastic kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteLmc {
    ap: Vec<String>,
    names: Vec<String>,
    labels: Vec<Observation>,
    kernel: Vec<f64>,
    succ: Vec<Vec<(usize, f64)>>,
}

impl FiniteLmc {
    /// Build a model from dense rows, validating strictly.
    pub fn new(
        ap: Vec<String>,
        states: Vec<(String, Vec<String>)>,
        kernel: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let doc = LmcDocument {
            ap,
            states: states
                .into_iter()
                .map(|(name, label)| StateDocument { name, label })
                .collect(),
            kernel,
        };
        Self::from_document(&doc, true)
    }

    /// Build a model from a list of `(from, to, probability)` transitions.
    /// Repeated transitions accumulate.
    pub fn from_transitions(
        ap: &[&str],
        states: &[(&str, &[&str])],
        transitions: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let n = states.len();
        let mut kernel = vec![vec![0.0; n]; n];
        for &(i, j, p) in transitions {
            if i >= n || j >= n {
                return Err(Error::UnknownState(format!("#{}", i.max(j))));
            }
            kernel[i][j] += p;
        }
        Self::new(
            ap.iter().map(|s| s.to_string()).collect(),
            states
                .iter()
                .map(|(name, label)| (name.to_string(), label.iter().map(|s| s.to_string()).collect()))
                .collect(),
            kernel,
        )
    }

    /// Load a document. With `strict = false`, rows within
    /// [`RENORMALIZE_TOL`] of stochastic are rescaled.
    pub fn from_document(doc: &LmcDocument, strict: bool) -> Result<Self> {
        let report = validate(doc, strict);
        if !report.is_valid() {
            return Err(Error::InvalidModel(report));
        }
        let n = doc.states.len();
        let prop_index = |p: &str| doc.ap.iter().position(|q| q == p);
        let labels = doc
            .states
            .iter()
            .map(|st| {
                st.label.iter().fold(Observation::EMPTY, |o, p| {
                    o.with(prop_index(p).expect("validated proposition"))
                })
            })
            .collect();
        let mut kernel = Vec::with_capacity(n * n);
        for row in &doc.kernel {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > CMP_SLACK && !strict {
                kernel.extend(row.iter().map(|v| v / sum));
            } else {
                kernel.extend_from_slice(row);
            }
        }
        Ok(Self::from_raw(
            doc.ap.clone(),
            doc.states.iter().map(|s| s.name.clone()).collect(),
            labels,
            kernel,
        ))
    }

    pub(crate) fn from_raw(
        ap: Vec<String>,
        names: Vec<String>,
        labels: Vec<Observation>,
        kernel: Vec<f64>,
    ) -> Self {
        let n = names.len();
        debug_assert_eq!(kernel.len(), n * n);
        let succ = (0..n)
            .map(|i| {
                kernel[i * n..(i + 1) * n]
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, &p)| (j, p))
                    .collect()
            })
            .collect();
        FiniteLmc {
            ap,
            names,
            labels,
            kernel,
            succ,
        }
    }

    pub fn to_document(&self) -> LmcDocument {
        let n = self.len();
        LmcDocument {
            ap: self.ap.clone(),
            states: (0..n)
                .map(|i| StateDocument {
                    name: self.names[i].clone(),
                    label: self.label_names(i),
                })
                .collect(),
            kernel: (0..n).map(|i| self.row(i).to_vec()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ap(&self) -> &[String] {
        &self.ap
    }

    pub fn prop_index(&self, prop: &str) -> Option<usize> {
        self.ap.iter().position(|p| p == prop)
    }

    pub fn name(&self, state: usize) -> &str {
        &self.names[state]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub(crate) fn check_state(&self, state: usize) -> Result<()> {
        if state < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownState(format!("#{state}")))
        }
    }

    pub fn label(&self, state: usize) -> Observation {
        self.labels[state]
    }

    pub fn labels(&self) -> &[Observation] {
        &self.labels
    }

    pub fn label_names(&self, state: usize) -> Vec<String> {
        self.observation_names(self.labels[state])
    }

    pub fn observation_names(&self, obs: Observation) -> Vec<String> {
        self.ap
            .iter()
            .enumerate()
            .filter(|(i, _)| obs.contains(*i))
            .map(|(_, p)| p.clone())
            .collect()
    }

    /// Parse a label given as proposition names.
    pub fn observation<S: AsRef<str>>(&self, props: &[S]) -> Result<Observation> {
        props.iter().try_fold(Observation::EMPTY, |o, p| {
            let p = p.as_ref();
            self.prop_index(p)
                .map(|i| o.with(i))
                .ok_or_else(|| Error::UnknownProposition(p.to_string()))
        })
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.kernel[from * self.len() + to]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let n = self.len();
        &self.kernel[state * n..(state + 1) * n]
    }

    /// Nonzero successors of `state` in increasing index order.
    pub fn successors(&self, state: usize) -> &[(usize, f64)] {
        &self.succ[state]
    }

    /// One step of the chain applied to a mass vector.
    pub(crate) fn push_forward(&self, mass: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (s, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for &(t, p) in &self.succ[s] {
                out[t] += m * p;
            }
        }
    }

    /// Probability that the label sequence of `X_0..X_k` from `start` lies in `traces`.
    pub fn trace_probability(&self, start: usize, traces: &TraceSet) -> Result<f64> {
        self.check_state(start)?;
        let sorted: Vec<&Trace> = traces.iter().collect();
        if sorted.is_empty() {
            return Ok(0.0);
        }
        let mut init = vec![0.0; self.len()];
        init[start] = 1.0;
        Ok(self.trie_mass(&init, &sorted, 0))
    }

    // `group` is sorted and shares its first `depth` observations; `mass` is
    // the state distribution after matching them (already filtered).
    fn trie_mass(&self, mass: &[f64], group: &[&Trace], depth: usize) -> f64 {
        let mut total = 0.0;
        let mut i = 0;
        while i < group.len() {
            let obs = group[i][depth];
            let mut j = i;
            while j < group.len() && group[j][depth] == obs {
                j += 1;
            }
            let filtered: Vec<f64> = if depth == 0 {
                mass.iter()
                    .enumerate()
                    .map(|(s, &m)| if self.labels[s] == obs { m } else { 0.0 })
                    .collect()
            } else {
                let mut next = vec![0.0; self.len()];
                self.push_forward(mass, &mut next);
                for (s, v) in next.iter_mut().enumerate() {
                    if self.labels[s] != obs {
                        *v = 0.0;
                    }
                }
                next
            };
            let m: f64 = filtered.iter().sum();
            if m >= PRUNE_MASS {
                if depth + 1 == group[i].len() {
                    total += m;
                } else {
                    total += self.trie_mass(&filtered, &group[i..j], depth + 1);
                }
            }
            i = j;
        }
        total
    }

    /// Sample one trace of `k` transitions from `start`.
    pub fn simulate(&self, start: usize, k: usize, seed: u64) -> Result<Trace> {
        self.check_state(start)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.sample_trace(start, k, &mut rng))
    }

    pub(crate) fn sample_trace<R: Rng>(&self, start: usize, k: usize, rng: &mut R) -> Trace {
        let mut trace = Vec::with_capacity(k + 1);
        let mut cur = start;
        trace.push(self.labels[cur]);
        for _ in 0..k {
            cur = self.sample_successor(cur, rng);
            trace.push(self.labels[cur]);
        }
        trace
    }

    fn sample_successor<R: Rng>(&self, state: usize, rng: &mut R) -> usize {
        let succ = &self.succ[state];
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(t, p) in succ {
            acc += p;
            if u < acc {
                return t;
            }
        }
        // rounding left u above the accumulated sum
        succ.last().map(|&(t, _)| t).unwrap_or(state)
    }

    /// Maximum absolute row-sum defect.
    pub fn max_row_defect(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Result of [`direct_sum`]: the combined model and, for each input, the
/// index of each of its states in the sum.
#[derive(Clone, Debug)]
pub struct DirectSum {
    pub model: FiniteLmc,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Disjoint union of two chains with a block-diagonal kernel.
///
/// Proposition universes are merged by union (left order first). State names
/// are prefixed with `1.` and `2.`.
pub fn direct_sum(m1: &FiniteLmc, m2: &FiniteLmc) -> Result<DirectSum> {
    let mut ap = m1.ap.clone();
    for p in &m2.ap {
        if !ap.contains(p) {
            ap.push(p.clone());
        }
    }
    if ap.len() > MAX_PROPOSITIONS {
        return Err(Error::InvalidModel(ValidationReport {
            issues: vec![Issue::TooManyPropositions { count: ap.len() }],
            adjustments: vec![],
        }));
    }
    let remap = |m: &FiniteLmc, obs: Observation| {
        (0..m.ap.len())
            .filter(|&i| obs.contains(i))
            .fold(Observation::EMPTY, |o, i| {
                o.with(ap.iter().position(|p| *p == m.ap[i]).unwrap())
            })
    };
    let (n1, n2) = (m1.len(), m2.len());
    let n = n1 + n2;
    let mut names = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n1 {
        names.push(format!("1.{}", m1.names[i]));
        labels.push(remap(m1, m1.labels[i]));
    }
    for i in 0..n2 {
        names.push(format!("2.{}", m2.names[i]));
        labels.push(remap(m2, m2.labels[i]));
    }
    let mut kernel = vec![0.0; n * n];
    for i in 0..n1 {
        kernel[i * n..i * n + n1].copy_from_slice(m1.row(i));
    }
    for i in 0..n2 {
        let r = n1 + i;
        kernel[r * n + n1..(r + 1) * n].copy_from_slice(m2.row(i));
    }
    Ok(DirectSum {
        model: FiniteLmc::from_raw(ap, names, labels, kernel),
        left: (0..n1).collect(),
        right: (n1..n).collect(),
    })
}
