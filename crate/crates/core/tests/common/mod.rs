//! Random instances shared by the acceptance and property suites.
//!
//! Probabilities are multiples of 1/8 so that sums are exact in `f64` and
//! ties in the exact checks are real ties.

#![allow(dead_code)]

use lmc_approx::bisim::Relation;
use lmc_approx::ltl::Formula;
use lmc_approx::FiniteLmc;
use rand::seq::SliceRandom;
use rand::Rng;

pub const UNITS: u32 = 8;

/// `UNITS` eighths spread over `targets`, at least one unit somewhere.
fn dyadic_row<R: Rng>(rng: &mut R, n: usize, targets: &[usize]) -> Vec<f64> {
    let mut row = vec![0.0; n];
    for _ in 0..UNITS {
        row[*targets.choose(rng).expect("nonempty")] += 1.0 / UNITS as f64;
    }
    row
}

pub fn ap_names(n_ap: usize) -> Vec<String> {
    ["a", "b", "c"][..n_ap].iter().map(|s| s.to_string()).collect()
}

fn random_label<R: Rng>(rng: &mut R, ap: &[String]) -> Vec<String> {
    ap.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect()
}

/// A random chain with `n` states, `n_ap` propositions and rows supported on
/// at most `fanout` states.
pub fn random_model<R: Rng>(rng: &mut R, n: usize, n_ap: usize, fanout: usize) -> FiniteLmc {
    let ap = ap_names(n_ap);
    let all: Vec<usize> = (0..n).collect();
    let kernel = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=fanout.min(n));
            let targets: Vec<usize> = all.choose_multiple(rng, k).copied().collect();
            dyadic_row(rng, n, &targets)
        })
        .collect();
    let states = (0..n)
        .map(|i| (format!("s{i}"), random_label(rng, &ap)))
        .collect();
    FiniteLmc::new(ap, states, kernel).expect("generated rows are stochastic")
}

/// A chain built by copying every state of a random quotient and splitting
/// each class-to-class mass among the copies of the target class, so that
/// copies of one quotient state are exactly bisimilar. Returns the model and
/// the class of each state. States are shuffled.
pub fn lifted_model<R: Rng>(rng: &mut R, max_classes: usize, max_copies: usize, n_ap: usize) -> (FiniteLmc, Vec<usize>) {
    let m = rng.gen_range(1..=max_classes);
    let ap = ap_names(n_ap);
    let class_labels: Vec<Vec<String>> = (0..m).map(|_| random_label(rng, &ap)).collect();
    let class_units: Vec<Vec<u32>> = (0..m)
        .map(|_| {
            let mut units = vec![0u32; m];
            for _ in 0..UNITS {
                units[rng.gen_range(0..m)] += 1;
            }
            units
        })
        .collect();
    let mut class_of: Vec<usize> = Vec::new();
    for c in 0..m {
        class_of.extend(std::iter::repeat_n(c, rng.gen_range(1..=max_copies)));
    }
    class_of.shuffle(rng);
    let n = class_of.len();
    let copies: Vec<Vec<usize>> = (0..m)
        .map(|c| (0..n).filter(|&s| class_of[s] == c).collect())
        .collect();
    let kernel = (0..n)
        .map(|s| {
            let mut row = vec![0.0; n];
            for (d, &units) in class_units[class_of[s]].iter().enumerate() {
                for _ in 0..units {
                    row[*copies[d].choose(rng).expect("class is nonempty")] += 1.0 / UNITS as f64;
                }
            }
            row
        })
        .collect();
    let states = (0..n)
        .map(|s| (format!("s{s}"), class_labels[class_of[s]].clone()))
        .collect();
    (FiniteLmc::new(ap, states, kernel).expect("lifted rows are stochastic"), class_of)
}

/// A dyadic distribution on `n` points supported on at most `support`.
pub fn random_distribution<R: Rng>(rng: &mut R, n: usize, support: usize) -> Vec<f64> {
    let all: Vec<usize> = (0..n).collect();
    let k = rng.gen_range(1..=support.min(n));
    let targets: Vec<usize> = all.choose_multiple(rng, k).copied().collect();
    dyadic_row(rng, n, &targets)
}

pub fn random_relation<R: Rng>(rng: &mut R, n: usize, density: f64) -> Relation {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|_| rng.gen_bool(density))
        .collect();
    Relation::from_pairs(n, pairs).expect("indices in range")
}

/// A random formula over `ap` whose horizon is at most `budget`.
pub fn random_formula<R: Rng>(rng: &mut R, ap: &[String], budget: usize, depth: usize) -> Formula {
    let leaf = |rng: &mut R| {
        if ap.is_empty() || rng.gen_bool(0.15) {
            Formula::True
        } else {
            Formula::atom(ap.choose(rng).expect("nonempty").clone())
        }
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.gen_range(0..6) {
        0 => leaf(rng),
        1 => Formula::and(
            random_formula(rng, ap, budget, depth - 1),
            random_formula(rng, ap, budget, depth - 1),
        ),
        2 => Formula::not(random_formula(rng, ap, budget, depth - 1)),
        3 if budget > 0 => Formula::next(random_formula(rng, ap, budget - 1, depth - 1)),
        4 if budget > 0 => {
            let t = rng.gen_range(0..=budget);
            Formula::until(
                random_formula(rng, ap, budget - t, depth - 1),
                random_formula(rng, ap, budget - t, depth - 1),
                t,
            )
        }
        _ => Formula::or(
            random_formula(rng, ap, budget, depth - 1),
            random_formula(rng, ap, budget, depth - 1),
        ),
    }
}

/// Classes as sorted lists, sorted by first element.
pub fn normalize(mut classes: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for c in &mut classes {
        c.sort_unstable();
    }
    classes.sort();
    classes
}
