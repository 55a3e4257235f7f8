//! Exact and ε-approximate probabilistic bisimulation on finite chains.
//!
//! A relation `R` is an ε-bisimulation when it is symmetric, related states
//! carry equal labels, and for every related `(s1, s2)` and every set of
//! states `T`,
//!
//! ```text
//! κ(s2, R(T)) ≥ κ(s1, T) − ε
//! ```
//!
//! On a finite state space this lifting condition is a Hall-type condition
//! and is decided by a single max-flow computation per ordered pair (see
//! [`lifting_check`]). A subset-enumeration mode is kept as an oracle.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::lmc::{FiniteLmc, CMP_SLACK};

/// Distributions given to [`lifting_check`] must sum to one within this.
const DIST_TOL: f64 = 1e-9;
/// Exact partition refinement treats masses this close as equal.
const EXACT_TOL: f64 = 1e-9;
/// Subset enumeration refuses supports larger than this.
pub const ENUMERATION_LIMIT: usize = 20;
/// [`closed_sets`] refuses relations over more states than this.
pub const CLOSED_SET_LIMIT: usize = 24;
pub const DEFAULT_MIN_EPS_TOL: f64 = 1e-9;

/// A binary relation over the states `0..n` of one model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    n: usize,
    bits: Vec<bool>,
}

impl Relation {
    pub fn empty(n: usize) -> Self {
        Relation {
            n,
            bits: vec![false; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut r = Relation::empty(n);
        for i in 0..n {
            r.insert(i, i);
        }
        r
    }

    /// All pairs of states with equal labels (including reflexive pairs).
    pub fn label_equal(model: &FiniteLmc) -> Self {
        let n = model.len();
        let mut r = Relation::empty(n);
        for i in 0..n {
            for j in 0..n {
                if model.label(i) == model.label(j) {
                    r.insert(i, j);
                }
            }
        }
        r
    }

    /// Exactly the given ordered pairs.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut r = Relation::empty(n);
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::UnknownState(format!("#{}", i.max(j))));
            }
            r.insert(i, j);
        }
        Ok(r)
    }

    /// The given pairs together with their reverses.
    pub fn symmetric_from_pairs(
        n: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut r = Relation::from_pairs(n, pairs)?;
        r.symmetrize();
        Ok(r)
    }

    /// The relation whose pairs are exactly those within a common class.
    pub fn from_partition(n: usize, classes: &[Vec<usize>]) -> Self {
        let mut r = Relation::empty(n);
        for class in classes {
            for &i in class {
                for &j in class {
                    r.insert(i, j);
                }
            }
        }
        r
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn insert(&mut self, i: usize, j: usize) {
        self.bits[i * self.n + j] = true;
    }

    pub fn insert_symmetric(&mut self, i: usize, j: usize) {
        self.insert(i, j);
        self.insert(j, i);
    }

    pub fn remove_symmetric(&mut self, i: usize, j: usize) {
        self.bits[i * self.n + j] = false;
        self.bits[j * self.n + i] = false;
    }

    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                if self.contains(i, j) || self.contains(j, i) {
                    self.insert_symmetric(i, j);
                }
            }
        }
    }

    /// First ordered pair whose reverse is missing.
    pub fn asymmetric_pair(&self) -> Option<(usize, usize)> {
        self.pairs().find(|&(i, j)| !self.contains(j, i))
    }

    /// Ordered pairs in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / n, k % n))
    }

    /// Pairs with `i <= j` (the upper triangle).
    pub fn unordered_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs().filter(|&(i, j)| i <= j)
    }

    pub fn pair_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &Relation) -> bool {
        self.n == other.n && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// `R(T) = { u : (t, u) ∈ R for some t ∈ T }`.
    pub fn image(&self, set: &[bool]) -> Vec<bool> {
        let mut out = vec![false; self.n];
        for (t, _) in set.iter().enumerate().filter(|(_, &b)| b) {
            for (u, o) in out.iter_mut().enumerate() {
                *o |= self.contains(t, u);
            }
        }
        out
    }

    /// Connected components of the relation graph (its reflexive, symmetric,
    /// transitive closure), each sorted, ordered by least member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut comp = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for root in 0..self.n {
            if comp[root] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![root];
            comp[root] = id;
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                for u in 0..self.n {
                    if comp[u] == usize::MAX && (self.contains(v, u) || self.contains(u, v)) {
                        comp[u] = id;
                        members.push(u);
                        stack.push(u);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn to_document(&self, model: &FiniteLmc, eps: f64) -> RelationDocument {
        RelationDocument {
            eps,
            pairs: self
                .pairs()
                .map(|(i, j)| (model.name(i).to_string(), model.name(j).to_string()))
                .collect(),
            symmetrize: false,
        }
    }
}

/// On-disk form of a relation: named pairs and the tolerance they were
/// computed or are to be checked at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationDocument {
    pub eps: f64,
    pub pairs: Vec<(String, String)>,
    /// Add the reverse of every listed pair when loading.
    #[serde(default)]
    pub symmetrize: bool,
}

impl RelationDocument {
    pub fn to_relation(&self, model: &FiniteLmc) -> Result<Relation> {
        let pairs = self
            .pairs
            .iter()
            .map(|(a, b)| Ok((model.state_index(a)?, model.state_index(b)?)))
            .collect::<Result<Vec<_>>>()?;
        if self.symmetrize {
            Relation::symmetric_from_pairs(model.len(), pairs)
        } else {
            Relation::from_pairs(model.len(), pairs)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LiftingMode {
    /// One max-flow computation; the witness comes from a minimum cut.
    #[default]
    Flow,
    /// Enumerate every subset of the support of the first distribution.
    Enumerate,
}

/// Outcome of a lifting check.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftingWitness {
    pub holds: bool,
    /// A set `T` maximizing `mu1(T) − mu2(R(T))`; empty when the check holds.
    pub witness_set: Vec<usize>,
    /// `mu1(T) − mu2(R(T)) − ε` for the witness set.
    pub excess: f64,
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::domain(format!("epsilon {eps} outside [0, 1]")))
    }
}

fn check_distribution(mu: &[f64], which: &str) -> Result<f64> {
    let sum: f64 = mu.iter().sum();
    if mu.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > DIST_TOL {
        return Err(Error::domain(format!(
            "{which} is not a probability distribution (sum {sum})"
        )));
    }
    Ok(sum)
}

/// Decide whether `mu2(R(T)) ≥ mu1(T) − eps − 1e-12` for every set `T`.
pub fn lifting_check(
    mu1: &[f64],
    mu2: &[f64],
    rel: &Relation,
    eps: f64,
    mode: LiftingMode,
) -> Result<LiftingWitness> {
    let n = rel.len();
    for len in [mu1.len(), mu2.len()] {
        if len != n {
            return Err(Error::Dimension {
                expected: n,
                actual: len,
            });
        }
    }
    check_eps(eps)?;
    check_distribution(mu1, "mu1")?;
    check_distribution(mu2, "mu2")?;
    match mode {
        LiftingMode::Flow => Ok(lifting_by_flow(mu1, mu2, rel, eps)),
        LiftingMode::Enumerate => lifting_by_enumeration(mu1, mu2, rel, eps),
    }
}

fn set_excess(mu1: &[f64], mu2: &[f64], rel: &Relation, set: &[usize], eps: f64) -> f64 {
    let mut mask = vec![false; rel.len()];
    for &t in set {
        mask[t] = true;
    }
    let image = rel.image(&mask);
    let m1: f64 = set.iter().map(|&t| mu1[t]).sum();
    let m2: f64 = image
        .iter()
        .zip(mu2)
        .filter(|(&b, _)| b)
        .map(|(_, &p)| p)
        .sum();
    m1 - m2 - eps
}

// Network: source -> t (cap mu1(t)) -> u for (t,u) ∈ R (unbounded) -> sink
// (cap mu2(u)), plus t -> slack (unbounded) -> sink (cap eps). Full flow
// exists iff every nonempty T has mu2(R(T)) + eps ≥ mu1(T).
fn lifting_by_flow(mu1: &[f64], mu2: &[f64], rel: &Relation, eps: f64) -> LiftingWitness {
    let left: Vec<usize> = (0..mu1.len()).filter(|&t| mu1[t] > 0.0).collect();
    let right: Vec<usize> = (0..mu2.len()).filter(|&u| mu2[u] > 0.0).collect();
    let source = 0;
    let slack = left.len() + right.len() + 1;
    let sink = slack + 1;
    let mut net = FlowNetwork::new(sink + 1);
    let mut right_node = vec![usize::MAX; mu2.len()];
    for (k, &u) in right.iter().enumerate() {
        right_node[u] = 1 + left.len() + k;
        net.add_edge(right_node[u], sink, mu2[u]);
    }
    for (k, &t) in left.iter().enumerate() {
        let node = 1 + k;
        net.add_edge(source, node, mu1[t]);
        for &u in &right {
            if rel.contains(t, u) {
                net.add_edge(node, right_node[u], f64::INFINITY);
            }
        }
        net.add_edge(node, slack, f64::INFINITY);
    }
    net.add_edge(slack, sink, eps);
    let total: f64 = left.iter().map(|&t| mu1[t]).sum();
    let flow = net.max_flow(source, sink);
    if flow >= total - CMP_SLACK {
        return LiftingWitness {
            holds: true,
            witness_set: Vec::new(),
            excess: 0.0,
        };
    }
    let side = net.source_side(source);
    let witness: Vec<usize> = left
        .iter()
        .enumerate()
        .filter(|(k, _)| side[1 + k])
        .map(|(_, &t)| t)
        .collect();
    let excess = set_excess(mu1, mu2, rel, &witness, eps);
    LiftingWitness {
        holds: false,
        witness_set: witness,
        excess: excess.max(total - flow),
    }
}

fn lifting_by_enumeration(
    mu1: &[f64],
    mu2: &[f64],
    rel: &Relation,
    eps: f64,
) -> Result<LiftingWitness> {
    let support: Vec<usize> = (0..mu1.len()).filter(|&t| mu1[t] > 0.0).collect();
    if support.len() > ENUMERATION_LIMIT {
        return Err(Error::ScaleGuard {
            what: "lifting enumeration support",
            requested: support.len() as u128,
            limit: ENUMERATION_LIMIT as u128,
        });
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for mask in 1u32..(1 << support.len()) {
        let set: Vec<usize> = support
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &t)| t)
            .collect();
        let excess = set_excess(mu1, mu2, rel, &set, eps);
        if excess > best.0 {
            best = (excess, set);
        }
    }
    if best.0 <= CMP_SLACK {
        Ok(LiftingWitness {
            holds: true,
            witness_set: Vec::new(),
            excess: 0.0,
        })
    } else {
        Ok(LiftingWitness {
            holds: false,
            witness_set: best.1,
            excess: best.0,
        })
    }
}

/// Why a related pair fails.
#[derive(Clone, Debug, PartialEq)]
pub enum PairFailure {
    Labels,
    /// `κ(s, T) − κ(t, R(T))` exceeds ε for the witness set.
    Lifting(LiftingWitness),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationCheck {
    pub holds: bool,
    /// First violating ordered pair (row-major order) and the reason.
    pub violation: Option<(usize, usize, PairFailure)>,
}

fn check_dims(model: &FiniteLmc, rel: &Relation) -> Result<()> {
    if rel.len() != model.len() {
        return Err(Error::Dimension {
            expected: model.len(),
            actual: rel.len(),
        });
    }
    Ok(())
}

fn reject_asymmetric(model: &FiniteLmc, rel: &Relation) -> Result<()> {
    if let Some((i, j)) = rel.asymmetric_pair() {
        return Err(Error::AsymmetricRelation(
            model.name(i).to_string(),
            model.name(j).to_string(),
        ));
    }
    Ok(())
}

/// Check that `rel` is an ε-bisimulation on `model`.
pub fn check_relation(model: &FiniteLmc, rel: &Relation, eps: f64) -> Result<RelationCheck> {
    check_dims(model, rel)?;
    check_eps(eps)?;
    reject_asymmetric(model, rel)?;
    for (i, j) in rel.pairs() {
        if model.label(i) != model.label(j) {
            return Ok(RelationCheck {
                holds: false,
                violation: Some((i, j, PairFailure::Labels)),
            });
        }
        let w = lifting_check(model.row(i), model.row(j), rel, eps, LiftingMode::Flow)?;
        if !w.holds {
            return Ok(RelationCheck {
                holds: false,
                violation: Some((i, j, PairFailure::Lifting(w))),
            });
        }
    }
    Ok(RelationCheck {
        holds: true,
        violation: None,
    })
}

fn pair_survives(model: &FiniteLmc, rel: &Relation, i: usize, j: usize, eps: f64) -> bool {
    if i == j {
        return true;
    }
    let holds = |a: usize, b: usize| {
        lifting_by_flow(model.row(a), model.row(b), rel, eps).holds
    };
    holds(i, j) && holds(j, i)
}

/// The largest ε-bisimulation on `model`.
///
/// Starts from all label-equal pairs and deletes, sweep by sweep, every pair
/// failing the lifting condition against the current relation, until stable.
pub fn maximal_bisim(model: &FiniteLmc, eps: f64) -> Result<Relation> {
    check_eps(eps)?;
    let mut rel = Relation::label_equal(model);
    loop {
        let failing: Vec<(usize, usize)> = rel
            .unordered_pairs()
            .filter(|&(i, j)| !pair_survives(model, &rel, i, j, eps))
            .collect();
        if failing.is_empty() {
            return Ok(rel);
        }
        for (i, j) in failing {
            rel.remove_symmetric(i, j);
        }
    }
}

/// Smallest ε (up to `tol`) at which `s` and `t` are ε-bisimilar.
///
/// Returns `f64::INFINITY` when the labels differ. The returned value is the
/// upper end of the final bisection bracket, so the pair is related at it.
pub fn minimal_epsilon(model: &FiniteLmc, s: usize, t: usize, tol: f64) -> Result<f64> {
    model.check_state(s)?;
    model.check_state(t)?;
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance {tol} must be positive")));
    }
    if model.label(s) != model.label(t) {
        return Ok(f64::INFINITY);
    }
    let related = |eps: f64| maximal_bisim(model, eps).map(|r| r.contains(s, t));
    if related(0.0)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if related(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Coarsest exact probabilistic bisimulation, as sorted equivalence classes
/// ordered by least member.
pub fn exact_bisim(model: &FiniteLmc) -> Vec<Vec<usize>> {
    let n = model.len();
    let mut block = vec![0usize; n];
    let mut labels: Vec<_> = Vec::new();
    for (s, b) in block.iter_mut().enumerate() {
        let l = model.label(s);
        *b = match labels.iter().position(|&x| x == l) {
            Some(k) => k,
            None => {
                labels.push(l);
                labels.len() - 1
            }
        };
    }
    let mut count = labels.len();
    loop {
        let signature = |s: usize| {
            let mut sig = vec![0.0; count];
            for &(t, p) in model.successors(s) {
                sig[block[t]] += p;
            }
            sig
        };
        let mut next = vec![usize::MAX; n];
        let mut next_count = 0;
        for b in 0..count {
            // representatives (signature, new block id) for this block
            let mut groups: Vec<(Vec<f64>, usize)> = Vec::new();
            for s in (0..n).filter(|&s| block[s] == b) {
                let sig = signature(s);
                let found = groups.iter().find(|(g, _)| {
                    g.iter().zip(&sig).all(|(x, y)| (x - y).abs() <= EXACT_TOL)
                });
                next[s] = match found {
                    Some(&(_, id)) => id,
                    None => {
                        groups.push((sig, next_count));
                        next_count += 1;
                        next_count - 1
                    }
                };
            }
        }
        let stable = next_count == count;
        block = next;
        count = next_count;
        if stable {
            break;
        }
    }
    let mut classes = vec![Vec::new(); count];
    for (s, &b) in block.iter().enumerate() {
        classes[b].push(s);
    }
    classes.sort_by_key(|c| c[0]);
    classes
}

/// Every `T` with `R(T) ⊆ T`, by filtering the powerset. Sets are sorted and
/// listed in increasing bitmask order.
pub fn closed_sets(rel: &Relation) -> Result<Vec<Vec<usize>>> {
    let n = rel.len();
    if n > CLOSED_SET_LIMIT {
        return Err(Error::ScaleGuard {
            what: "closed-set enumeration states",
            requested: n as u128,
            limit: CLOSED_SET_LIMIT as u128,
        });
    }
    let succ: Vec<u32> = (0..n)
        .map(|t| (0..n).filter(|&u| rel.contains(t, u)).fold(0u32, |m, u| m | 1 << u))
        .collect();
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let image = (0..n)
            .filter(|&t| mask >> t & 1 == 1)
            .fold(0u32, |m, t| m | succ[t]);
        if image & !mask == 0 {
            out.push((0..n).filter(|&t| mask >> t & 1 == 1).collect());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AltViolation {
    pub pair: (usize, usize),
    pub closed_set: Vec<usize>,
    /// `|κ(s1, T) − κ(s2, T)|` on the reported closed set.
    pub difference: f64,
    pub labels_differ: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AltCheck {
    pub holds: bool,
    pub violation: Option<AltViolation>,
}

/// Check the closed-set notion: related states have equal labels and
/// `|κ(s1, T) − κ(s2, T)| ≤ ε` for every `R`-closed `T`.
///
/// For a symmetric relation the closed sets are exactly the unions of
/// connected components, so the maximum over closed sets is the larger of
/// the positive and negative parts of the per-component mass differences.
pub fn check_alt_bisim(model: &FiniteLmc, rel: &Relation, eps: f64) -> Result<AltCheck> {
    check_dims(model, rel)?;
    check_eps(eps)?;
    reject_asymmetric(model, rel)?;
    let comps = rel.components();
    let mut comp_of = vec![0; model.len()];
    for (c, members) in comps.iter().enumerate() {
        for &s in members {
            comp_of[s] = c;
        }
    }
    let comp_mass = |s: usize| {
        let mut m = vec![0.0; comps.len()];
        for &(t, p) in model.successors(s) {
            m[comp_of[t]] += p;
        }
        m
    };
    for (i, j) in rel.unordered_pairs() {
        if model.label(i) != model.label(j) {
            return Ok(AltCheck {
                holds: false,
                violation: Some(AltViolation {
                    pair: (i, j),
                    closed_set: Vec::new(),
                    difference: f64::NAN,
                    labels_differ: true,
                }),
            });
        }
        let (mi, mj) = (comp_mass(i), comp_mass(j));
        let diffs: Vec<f64> = mi.iter().zip(&mj).map(|(a, b)| a - b).collect();
        let pos: f64 = diffs.iter().filter(|d| **d > 0.0).sum();
        let neg: f64 = -diffs.iter().filter(|d| **d < 0.0).sum::<f64>();
        let (difference, take_positive) = if pos >= neg { (pos, true) } else { (neg, false) };
        if difference > eps + CMP_SLACK {
            let closed_set: BTreeSet<usize> = diffs
                .iter()
                .enumerate()
                .filter(|(_, &d)| if take_positive { d > 0.0 } else { d < 0.0 })
                .flat_map(|(c, _)| comps[c].iter().copied())
                .collect();
            return Ok(AltCheck {
                holds: false,
                violation: Some(AltViolation {
                    pair: (i, j),
                    closed_set: closed_set.into_iter().collect(),
                    difference,
                    labels_differ: false,
                }),
            });
        }
    }
    Ok(AltCheck {
        holds: true,
        violation: None,
    })
}
