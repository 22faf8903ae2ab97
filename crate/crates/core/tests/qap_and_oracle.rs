mod common;

use std::collections::HashSet;

use common::{instance, instance_in, naive_objective, permutation, symmetric_int};
use proptest::prelude::*;
use qap_exact::oracle::{all_permutations, brute_force_qap, canonical_form, enumerate_graphs, Graph};
use qap_exact::qap::{lift_permutation, lifted_objective, pair_index, qap_objective, relabel, unpair_index};
use qap_exact::sdp::{build_relaxation, check_feasibility, Variant};
use qap_exact::QapInstance;

fn sorted_values(inst: &QapInstance) -> Vec<f64> {
    let mut v: Vec<f64> = all_permutations(inst.n())
        .iter()
        .map(|p| qap_objective(inst, p).unwrap())
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn pair_index_is_a_bijection() {
    for n in 1..=7 {
        let mut seen = HashSet::new();
        for i in 1..=n {
            for k in 1..=n {
                let p = pair_index(i, k, n).unwrap();
                assert!((1..=n * n).contains(&p) && seen.insert(p));
                assert_eq!(unpair_index(p, n).unwrap(), (i, k));
            }
        }
    }
}

#[test]
fn graph_class_counts() {
    for (n, count) in [(2, 2), (3, 4), (4, 11), (5, 34), (6, 156)] {
        let graphs = enumerate_graphs(n).unwrap();
        assert_eq!(graphs.len(), count, "n = {n}");
        let canon: HashSet<u64> = graphs.iter().map(|g| canonical_form(g).unwrap().code()).collect();
        assert_eq!(canon.len(), count);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lifted_permutations_are_exactly_feasible(
        (inst, sigma) in (2usize..=4).prop_flat_map(|n| (
            (symmetric_int(n, -3, 3), symmetric_int(n, -3, 3)).prop_map(|(a, b)| QapInstance::new(a, b).unwrap()),
            permutation(n),
        )),
        arrow in any::<bool>(),
    ) {
        let variant = if arrow { Variant::WithArrow } else { Variant::Standard };
        let prob = build_relaxation(&inst, variant).unwrap();
        let report = check_feasibility(&prob, &lift_permutation(&sigma)).unwrap();
        prop_assert_eq!(report.max_linear(), 0.0, "{:?}", report);
        prop_assert_eq!(report.nonneg.max(report.asymmetry), 0.0);
        prop_assert!(report.psd_violation() <= 1e-12, "{:?}", report);
    }

    #[test]
    fn objective_agrees_with_lifted_objective(
        (inst, sigma) in (1usize..=6).prop_flat_map(|n| (instance(n), permutation(n)))
    ) {
        let direct = qap_objective(&inst, &sigma).unwrap();
        let lifted = lifted_objective(&inst, &lift_permutation(&sigma).big_x);
        let naive = naive_objective(&inst, sigma.as_slice());
        let scale = 1.0 + naive.abs();
        prop_assert!((direct - naive).abs() <= 1e-10 * scale);
        prop_assert!((lifted - naive).abs() <= 1e-10 * scale);
        let kron = inst.cost_tensor().dot(&lift_permutation(&sigma).big_x);
        prop_assert!((kron - naive).abs() <= 1e-10 * scale);
    }

    #[test]
    fn relabel_composes_permutations(
        (inst, sigma, pi) in (1usize..=6).prop_flat_map(|n| (instance(n), permutation(n), permutation(n)))
    ) {
        let moved = relabel(&inst, &sigma).unwrap();
        let composed: Vec<usize> = pi.as_slice().iter().map(|&j| sigma.apply(j)).collect();
        let lhs = qap_objective(&moved, &pi).unwrap();
        let rhs = naive_objective(&inst, &composed);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn relabel_preserves_value_multiset(
        (inst, sigma) in (1usize..=5).prop_flat_map(|n| (instance(n), permutation(n)))
    ) {
        let moved = relabel(&inst, &sigma).unwrap();
        let (a, b) = (sorted_values(&inst), sorted_values(&moved));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
        let (bf, bf_moved) = (brute_force_qap(&inst).unwrap(), brute_force_qap(&moved).unwrap());
        prop_assert!((bf.best_value - bf_moved.best_value).abs() <= 1e-10 * (1.0 + bf.best_value.abs()));
        prop_assert!((bf.best_value - a[0]).abs() <= 1e-12 * (1.0 + a[0].abs()));
    }

    #[test]
    fn brute_force_reports_an_attaining_permutation(inst in instance_in(1..=6)) {
        let bf = brute_force_qap(&inst).unwrap();
        let at = naive_objective(&inst, bf.best_sigma.as_slice());
        prop_assert!((at - bf.best_value).abs() <= 1e-10 * (1.0 + at.abs()));
    }

    #[test]
    fn random_graphs_canonicalize_into_the_enumeration(n in 2usize..=6, mask in any::<u64>()) {
        let mut edges = Vec::new();
        let mut bit = 0;
        for i in 0..n {
            for j in i + 1..n {
                if mask >> bit & 1 == 1 {
                    edges.push((i, j));
                }
                bit += 1;
            }
        }
        let g = Graph::from_edges(n, &edges).unwrap();
        let canon = canonical_form(&g).unwrap();
        prop_assert_eq!(canon.edge_count(), g.edge_count());
        let members = enumerate_graphs(n).unwrap();
        prop_assert!(members.iter().any(|m| canonical_form(m).unwrap() == canon));
    }
}
