//! Finite-horizon trace distributions and their total-variation distance.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmc::{FiniteLmc, Observation, Trace, CMP_SLACK, PRUNE_MASS};

/// The dynamic programs refuse to hold more than this many mass entries
/// (live prefixes times states) at once.
pub const MAX_LIVE_ENTRIES: usize = 1 << 24;

/// Exact distribution of the length-`k + 1` label sequence from one start.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceDistribution {
    pub horizon: usize,
    pub entries: BTreeMap<Trace, f64>,
}

impl TraceDistribution {
    pub fn prob(&self, trace: &[Observation]) -> f64 {
        self.entries.get(trace).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn to_document(&self, model: &FiniteLmc) -> TraceDistributionDocument {
        TraceDistributionDocument {
            horizon: self.horizon,
            entries: self
                .entries
                .iter()
                .map(|(t, &p)| {
                    (
                        t.iter().map(|&o| model.observation_names(o)).collect(),
                        p,
                    )
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceDistributionDocument {
    pub horizon: usize,
    pub entries: Vec<(Vec<Vec<String>>, f64)>,
}

fn guard(live: usize, n: usize) -> Result<()> {
    let entries = live.saturating_mul(n);
    if entries > MAX_LIVE_ENTRIES {
        return Err(Error::ScaleGuard {
            what: "live trace prefix entries",
            requested: entries as u128,
            limit: MAX_LIVE_ENTRIES as u128,
        });
    }
    Ok(())
}

/// Push every mass vector one step and split it by the observation emitted
/// at the new state. Returns one `(observation, vectors)` entry per
/// observation in increasing order.
fn split_step<const W: usize>(
    model: &FiniteLmc,
    masses: &[Vec<f64>; W],
) -> Vec<(Observation, [Vec<f64>; W])> {
    let n = model.len();
    let mut by_obs: BTreeMap<Observation, [Vec<f64>; W]> = BTreeMap::new();
    for (w, mass) in masses.iter().enumerate() {
        let mut next = vec![0.0; n];
        model.push_forward(mass, &mut next);
        for (s, &m) in next.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let entry = by_obs
                .entry(model.label(s))
                .or_insert_with(|| std::array::from_fn(|_| vec![0.0; n]));
            entry[w][s] = m;
        }
    }
    by_obs.into_iter().collect()
}

/// Exact distribution of traces of `k` transitions from `start`.
pub fn trace_distribution(model: &FiniteLmc, start: usize, k: usize) -> Result<TraceDistribution> {
    model.check_state(start)?;
    let n = model.len();
    let mut init = vec![0.0; n];
    init[start] = 1.0;
    let mut level: Vec<(Trace, [Vec<f64>; 1])> = vec![(vec![model.label(start)], [init])];
    for _ in 0..k {
        let mut next = Vec::new();
        for (prefix, masses) in &level {
            for (obs, split) in split_step(model, masses) {
                if split[0].iter().sum::<f64>() < PRUNE_MASS {
                    continue;
                }
                let mut trace = prefix.clone();
                trace.push(obs);
                next.push((trace, split));
            }
            guard(next.len(), n)?;
        }
        level = next;
    }
    Ok(TraceDistribution {
        horizon: k,
        entries: level
            .into_iter()
            .map(|(t, [m])| (t, m.iter().sum()))
            .collect(),
    })
}

/// `d_TV` between the trace distributions of `s` and `t` for every horizon
/// `0..=k`, by one joint pass over shared prefixes.
pub fn trace_distances_upto(
    model: &FiniteLmc,
    s: usize,
    t: usize,
    k: usize,
) -> Result<Vec<f64>> {
    model.check_state(s)?;
    model.check_state(t)?;
    let n = model.len();
    let mut out = Vec::with_capacity(k + 1);
    let mut level: Vec<[Vec<f64>; 2]> = Vec::new();
    let point = |i: usize| {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };
    if model.label(s) == model.label(t) {
        level.push([point(s), point(t)]);
        out.push(0.0);
    } else {
        level.push([point(s), vec![0.0; n]]);
        level.push([vec![0.0; n], point(t)]);
        out.push(1.0);
    }
    for _ in 0..k {
        let mut next = Vec::new();
        let mut l1 = 0.0;
        for masses in &level {
            for (_, split) in split_step(model, masses) {
                let ms: f64 = split[0].iter().sum();
                let mt: f64 = split[1].iter().sum();
                if ms < PRUNE_MASS && mt < PRUNE_MASS {
                    continue;
                }
                l1 += (ms - mt).abs();
                next.push(split);
            }
            guard(next.len(), n)?;
        }
        out.push(0.5 * l1);
        level = next;
    }
    Ok(out)
}

/// Total-variation distance between the length-`k + 1` trace distributions
/// of `s` and `t`, computed as half the L1 distance.
pub fn trace_distance(model: &FiniteLmc, s: usize, t: usize, k: usize) -> Result<f64> {
    Ok(*trace_distances_upto(model, s, t, k)?.last().expect("nonempty"))
}

/// `1 − (1 − ε)^k`, the trace-distance bound implied by ε-bisimilarity.
pub fn bisim_bound(eps: f64, k: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::domain(format!("epsilon {eps} outside [0, 1]")));
    }
    if k == 0 || eps == 0.0 {
        return Ok(0.0);
    }
    if eps == 1.0 {
        return Ok(1.0);
    }
    Ok(-(k as f64 * (-eps).ln_1p()).exp_m1())
}

/// Optimal probability of naming the source of one observed trace when the
/// source is `s` or `t` with equal probability.
pub fn distinguishability_exact(model: &FiniteLmc, s: usize, t: usize, k: usize) -> Result<f64> {
    Ok(0.5 + 0.5 * trace_distance(model, s, t, k)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameReport {
    pub rounds: u64,
    pub wins: u64,
    pub empirical_rate: f64,
    pub exact_rate: f64,
    pub d_tv: f64,
}

/// Play the guessing game: a fair coin picks `s` or `t`, one trace is
/// sampled, and the observer guesses the source with the larger exact trace
/// probability (ties go to `s`).
pub fn distinguishability_game(
    model: &FiniteLmc,
    s: usize,
    t: usize,
    k: usize,
    rounds: u64,
    seed: u64,
) -> Result<GameReport> {
    if rounds == 0 {
        return Err(Error::domain("the game needs at least one round"));
    }
    let ps = trace_distribution(model, s, k)?;
    let pt = trace_distribution(model, t, k)?;
    let d_tv = trace_distance(model, s, t, k)?;
    let mut cache: HashMap<Trace, bool> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wins = 0;
    for _ in 0..rounds {
        let source_is_s: bool = rng.gen();
        let start = if source_is_s { s } else { t };
        let trace = model.sample_trace(start, k, &mut rng);
        let guess_s = *cache
            .entry(trace)
            .or_insert_with_key(|tr| ps.prob(tr) >= pt.prob(tr));
        if guess_s == source_is_s {
            wins += 1;
        }
    }
    Ok(GameReport {
        rounds,
        wins,
        empirical_rate: wins as f64 / rounds as f64,
        exact_rate: 0.5 + 0.5 * d_tv,
        d_tv,
    })
}

/// Check `d_TV(s, t, k) ≤ f(k)` for every `k ≤ kmax`.
///
/// `f` is given as `(k, value)` samples and must cover `0..=kmax`, be
/// non-decreasing in `k` and take values in `[0, 1]`.
pub fn trace_equivalence_check(
    model: &FiniteLmc,
    s: usize,
    t: usize,
    f: &[(usize, f64)],
    kmax: usize,
) -> Result<bool> {
    let mut points = f.to_vec();
    points.sort_by_key(|&(k, _)| k);
    for w in points.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::domain(format!("f given twice at k = {}", w[0].0)));
        }
        if w[1].1 < w[0].1 {
            return Err(Error::domain(format!(
                "f decreases between k = {} and k = {}",
                w[0].0, w[1].0
            )));
        }
    }
    if let Some(&(k, v)) = points.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
        return Err(Error::domain(format!("f({k}) = {v} outside [0, 1]")));
    }
    let bound: BTreeMap<usize, f64> = points.into_iter().collect();
    if let Some(k) = (0..=kmax).find(|k| !bound.contains_key(k)) {
        return Err(Error::domain(format!("f is not given at k = {k}")));
    }
    let distances = trace_distances_upto(model, s, t, kmax)?;
    Ok(distances
        .iter()
        .enumerate()
        .all(|(k, &d)| d <= bound[&k] + CMP_SLACK))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{branching_example, tightness};

    #[test]
    fn branching_distribution() {
        let m = branching_example();
        let d = trace_distribution(&m, 0, 2).unwrap();
        let obs = |p: &str| m.observation(&[p]).unwrap();
        let (a, b, c) = (obs("a"), obs("b"), obs("c"));
        assert_eq!(d.entries.len(), 2);
        assert_eq!(d.prob(&[a, a, b]), 0.5);
        assert_eq!(d.prob(&[a, a, c]), 0.5);
        let doc = d.to_document(&m);
        assert_eq!(doc.entries[0].0, vec![vec!["a"], vec!["a"], vec!["b"]]);
    }

    #[test]
    fn horizon_zero_is_point_mass() {
        let m = branching_example();
        for s in 0..m.len() {
            let d = trace_distribution(&m, s, 0).unwrap();
            assert_eq!(d.entries.len(), 1);
            assert_eq!(d.prob(&[m.label(s)]), 1.0);
        }
    }

    #[test]
    fn distributions_sum_to_one() {
        let m = tightness(0.3).unwrap();
        for k in 0..8 {
            assert!((trace_distribution(&m, 1, k).unwrap().total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_distance_examples() {
        let m = branching_example();
        for k in 0..=6 {
            assert_eq!(trace_distance(&m, 0, 1, k).unwrap(), 0.0);
        }
        let t = tightness(0.3).unwrap();
        assert!((trace_distance(&t, 0, 1, 2).unwrap() - 0.51).abs() < 1e-12);
        assert_eq!(trace_distance(&t, 1, 1, 5).unwrap(), 0.0);
        assert_eq!(trace_distance(&t, 1, 2, 0).unwrap(), 1.0);
        assert!(trace_distance(&t, 0, 3, 1).is_err());
    }

    #[test]
    fn bound_values() {
        for k in 0..5 {
            assert_eq!(bisim_bound(0.0, k).unwrap(), 0.0);
        }
        for k in 1..5 {
            assert_eq!(bisim_bound(1.0, k).unwrap(), 1.0);
        }
        assert!((bisim_bound(0.001, 3).unwrap() - 0.002997001).abs() < 1e-15);
        assert!(bisim_bound(1.1, 3).is_err());
        // small-ε accuracy: 1 − (1 − ε)^k ≈ kε
        let tiny = bisim_bound(1e-15, 2).unwrap();
        assert!((tiny - 2e-15).abs() / 2e-15 < 1e-12);
    }

    #[test]
    fn exact_distinguishability() {
        let m = branching_example();
        assert_eq!(distinguishability_exact(&m, 0, 1, 3).unwrap(), 0.5);
        let t = tightness(0.5).unwrap();
        assert!((distinguishability_exact(&t, 0, 1, 1).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(distinguishability_exact(&t, 1, 1, 4).unwrap(), 0.5);
    }

    #[test]
    fn game_on_identical_states() {
        let t = tightness(0.5).unwrap();
        let r = distinguishability_game(&t, 1, 1, 3, 10_000, 7).unwrap();
        assert!((r.empirical_rate - 0.5).abs() <= 3.0 * 0.5 / 100.0);
        assert_eq!(r.exact_rate, 0.5);
        assert_eq!(r, distinguishability_game(&t, 1, 1, 3, 10_000, 7).unwrap());
        assert!(distinguishability_game(&t, 0, 1, 1, 0, 7).is_err());
    }

    #[test]
    fn equivalence_check() {
        let t = tightness(0.3).unwrap();
        let zero: Vec<_> = (0..=3).map(|k| (k, 0.0)).collect();
        assert!(trace_equivalence_check(&t, 1, 1, &zero, 3).unwrap());
        assert!(!trace_equivalence_check(&t, 0, 1, &zero, 1).unwrap());
        let f: Vec<_> = (0..=6).map(|k| (k, bisim_bound(0.3, k).unwrap())).collect();
        assert!(trace_equivalence_check(&t, 0, 1, &f, 6).unwrap());
        let decreasing = [(0, 0.5), (1, 0.2)];
        assert!(trace_equivalence_check(&t, 0, 1, &decreasing, 1).is_err());
        assert!(trace_equivalence_check(&t, 0, 1, &[(0, 0.0)], 2).is_err());
    }
}
