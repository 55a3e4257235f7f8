mod common;

use std::collections::HashMap;

use approx::assert_abs_diff_eq;
use lmc_approx::abstraction::weather::{weather_abstract, weather_concrete, weather_partition};
use lmc_approx::abstraction::{aggregated_row, grid_partition, ContinuousModel, Domain, Point, Quadrature};
use lmc_approx::bisim::{check_relation, maximal_bisim, minimal_epsilon, Relation};
use lmc_approx::lmc::{direct_sum, LmcDocument, StateDocument};
use lmc_approx::ltl::{self, closeness_bound, satisfying_traces};
use lmc_approx::traces::{bisim_bound, trace_distances_upto, trace_distribution, trace_equivalence_check};
use lmc_approx::{FiniteLmc, Observation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small_model(seed: u64) -> FiniteLmc {
    let mut r = rng(seed);
    let n = r.gen_range(1..=5);
    let n_ap = r.gen_range(0..=2);
    common::random_model(&mut r, n, n_ap, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_distribution_sums_to_one(seed in any::<u64>(), k in 0usize..5) {
        let m = small_model(seed);
        for s in 0..m.len() {
            prop_assert!((trace_distribution(&m, s, k).unwrap().total() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn trace_distance_is_a_monotone_pseudometric(seed in any::<u64>()) {
        let m = small_model(seed);
        let n = m.len();
        let k = 4;
        let mut d = vec![vec![0.0; n]; n];
        for s in 0..n {
            for t in 0..n {
                let per_k = trace_distances_upto(&m, s, t, k).unwrap();
                prop_assert!(per_k.windows(2).all(|w| w[0] <= w[1] + 1e-15));
                d[s][t] = per_k[k];
            }
        }
        for s in 0..n {
            prop_assert_eq!(d[s][s], 0.0);
            for t in 0..n {
                prop_assert!((d[s][t] - d[t][s]).abs() <= 1e-15);
                for u in 0..n {
                    prop_assert!(d[s][u] <= d[s][t] + d[t][u] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn maximal_bisimulation_is_sound_and_monotone(seed in any::<u64>(), e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
        let m = small_model(seed);
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let r_lo = maximal_bisim(&m, lo).unwrap();
        let r_hi = maximal_bisim(&m, hi).unwrap();
        prop_assert!(check_relation(&m, &r_lo, lo).unwrap().holds);
        prop_assert!(r_lo.is_subset_of(&r_hi));
        prop_assert!(Relation::identity(m.len()).is_subset_of(&r_lo));
        prop_assert!(r_hi.is_subset_of(&Relation::label_equal(&m)));
    }

    #[test]
    fn bisimilar_states_have_close_traces(seed in any::<u64>(), eps in 0.0f64..0.6) {
        let m = small_model(seed);
        let rel = maximal_bisim(&m, eps).unwrap();
        let f: Vec<(usize, f64)> = (0..=4).map(|k| (k, bisim_bound(eps, k).unwrap() + 1e-9)).collect();
        for (s, t) in rel.pairs() {
            prop_assert!(trace_equivalence_check(&m, s, t, &f, 4).unwrap());
        }
    }

    #[test]
    fn formula_probabilities_respect_the_bound(seed in any::<u64>(), fseed in any::<u64>()) {
        let m = small_model(seed);
        let mut r = rng(fseed);
        let f = common::random_formula(&mut r, m.ap(), 3, 4);
        for s in 0..m.len() {
            for t in 0..m.len() {
                let eps = minimal_epsilon(&m, s, t, 1e-9).unwrap();
                if !eps.is_finite() {
                    continue;
                }
                let eps = (eps + 1e-9).min(1.0);
                let c = closeness_bound(&m, s, t, &f, eps).unwrap();
                prop_assert!(c.within_bound, "{:?}", c);
                // the difference is also bounded by the trace distance at the horizon
                let d = trace_distances_upto(&m, s, t, c.horizon).unwrap()[c.horizon];
                prop_assert!((c.p_s - c.p_t).abs() <= d + 1e-12);
            }
        }
    }

    #[test]
    fn padding_the_horizon_keeps_probabilities(seed in any::<u64>(), fseed in any::<u64>(), extra in 0usize..3) {
        let m = small_model(seed);
        let mut r = rng(fseed);
        let f = common::random_formula(&mut r, m.ap(), 2, 3);
        for s in 0..m.len() {
            let tight = m.trace_probability(s, &satisfying_traces(&f, m.ap(), f.horizon()).unwrap()).unwrap();
            let padded = m.trace_probability(s, &satisfying_traces(&f, m.ap(), f.horizon() + extra).unwrap()).unwrap();
            prop_assert!((tight - padded).abs() <= 1e-12);
            prop_assert!((ltl::probability(&m, s, &f).unwrap() - tight).abs() <= 1e-12);
        }
    }

    #[test]
    fn direct_sum_preserves_each_side(s1 in any::<u64>(), s2 in any::<u64>(), fseed in any::<u64>(), eps in 0.0f64..1.0) {
        let (a, b) = (small_model(s1), small_model(s2));
        let sum = direct_sum(&a, &b).unwrap();
        let mut r = rng(fseed);
        let f = common::random_formula(&mut r, a.ap(), 3, 4);
        for i in 0..a.len() {
            let here = ltl::probability(&a, i, &f).unwrap();
            let there = ltl::probability(&sum.model, sum.left[i], &f).unwrap();
            prop_assert!((here - there).abs() <= 1e-12);
        }
        let ra = maximal_bisim(&a, eps).unwrap();
        let rs = maximal_bisim(&sum.model, eps).unwrap();
        for i in 0..a.len() {
            for j in 0..a.len() {
                prop_assert_eq!(ra.contains(i, j), rs.contains(sum.left[i], sum.left[j]));
            }
        }
    }

    #[test]
    fn grid_cells_meet_their_diameter(dim in 1usize..4, eps in 0.01f64..1.0, k in 0.1f64..20.0, modes in 1usize..3) {
        struct Flat(Domain, f64);
        impl ContinuousModel for Flat {
            fn domain(&self) -> &Domain { &self.0 }
            fn ap(&self) -> &[String] { &[] }
            fn density(&self, _: &Point, _: usize, _: &[f64]) -> f64 { 1.0 / self.0.volume() }
            fn label(&self, _: &Point) -> Observation { Observation::EMPTY }
            fn lipschitz(&self) -> f64 { self.1 }
        }
        let upper: Vec<f64> = (0..dim).map(|i| 0.5 + i as f64 * 0.3).collect();
        let model = Flat(Domain::new(vec![0.0; dim], upper, modes).unwrap(), k);
        prop_assume!(model.domain().volume() * k / (2.0 * eps) < 40.0);
        let (p, budget) = grid_partition(&model, eps).unwrap();
        for c in p.cells() {
            prop_assert!(c.diameter() <= budget.max_diameter * (1.0 + 1e-12));
        }
    }
}

#[test]
fn simulation_frequencies_match_exact_probabilities() {
    let mut r = rng(77);
    for _ in 0..5 {
        let m = common::random_model(&mut r, 4, 1, 3);
        let k = 3;
        let exact = trace_distribution(&m, 0, k).unwrap();
        let runs = 20_000;
        let mut counts: HashMap<Vec<Observation>, usize> = HashMap::new();
        for seed in 0..runs {
            *counts.entry(m.simulate(0, k, seed).unwrap()).or_default() += 1;
        }
        for (trace, p) in &exact.entries {
            let freq = *counts.get(trace).unwrap_or(&0) as f64 / runs as f64;
            // five standard deviations
            let sd = (p * (1.0 - p) / runs as f64).sqrt();
            assert!((freq - p).abs() <= 5.0 * sd + 1e-3, "{trace:?}: {freq} vs {p}");
        }
        assert!(counts.keys().all(|t| exact.prob(t) > 0.0));
    }
}

/// The sampled finite fragment of the weather model: representatives plus
/// extra same-cell points, each sending its cell-aggregated mass to the
/// representative of the target cell.
fn sampled_weather(n: usize, extra: usize, seed: u64) -> (FiniteLmc, Vec<usize>) {
    let model = weather_concrete();
    let partition = weather_partition(n).unwrap();
    let mut r = rng(seed);
    let mut points: Vec<(Point, usize)> = partition
        .representatives()
        .iter()
        .cloned()
        .enumerate()
        .map(|(c, p)| (p, c))
        .collect();
    for _ in 0..extra {
        let c = r.gen_range(0..partition.len());
        let cell = &partition.cells()[c];
        let x = r.gen_range(cell.lower[0]..cell.upper[0]);
        points.push((Point::new(cell.mode, vec![x]), c));
    }
    let size = points.len();
    let kernel = points
        .iter()
        .map(|(p, _)| {
            let agg = aggregated_row(&model, p, &partition, Quadrature::default()).unwrap();
            let total: f64 = agg.iter().sum();
            let mut row = vec![0.0; size];
            for (c, mass) in agg.iter().enumerate() {
                row[c] = mass / total;
            }
            row
        })
        .collect();
    let states = points
        .iter()
        .enumerate()
        .map(|(i, (p, _))| StateDocument {
            name: format!("p{i}"),
            label: if p.mode == 1 { vec!["rain".into()] } else { vec![] },
        })
        .collect();
    let doc = LmcDocument {
        ap: vec!["rain".into()],
        states,
        kernel,
    };
    let cells = points.iter().map(|(_, c)| *c).collect();
    (FiniteLmc::from_document(&doc, false).unwrap(), cells)
}

#[test]
fn abstraction_is_bisimilar_to_sampled_concrete_states() {
    for n in [4usize, 10] {
        let abs = weather_abstract(n).unwrap();
        let (concrete, cell_of) = sampled_weather(n, 3 * n, n as u64);
        let sum = direct_sum(&abs, &concrete).unwrap();
        let mut rel = Relation::identity(sum.model.len());
        for (i, &c) in cell_of.iter().enumerate() {
            rel.insert_symmetric(sum.left[c], sum.right[i]);
            for (j, &d) in cell_of.iter().enumerate() {
                if c == d {
                    rel.insert_symmetric(sum.right[i], sum.right[j]);
                }
            }
        }
        for (c, _) in abs.names().iter().enumerate() {
            rel.insert(sum.left[c], sum.left[c]);
        }
        let eps = 1.0 / n as f64 + 1e-6;
        let check = check_relation(&sum.model, &rel, eps).unwrap();
        assert!(check.holds, "N = {n}: {:?}", check.violation);
        // and not at a much smaller precision
        assert!(!check_relation(&sum.model, &rel, 0.25 / n as f64).unwrap().holds);
    }
}

#[test]
fn bisim_bound_edge_cases() {
    assert_eq!(bisim_bound(0.3, 0).unwrap(), 0.0);
    assert_eq!(bisim_bound(0.0, 7).unwrap(), 0.0);
    assert_eq!(bisim_bound(1.0, 3).unwrap(), 1.0);
    assert_abs_diff_eq!(bisim_bound(0.001, 3).unwrap(), 0.002997001, epsilon = 1e-12);
    assert!(bisim_bound(1.5, 1).is_err());
}
