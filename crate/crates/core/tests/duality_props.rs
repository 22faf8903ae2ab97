mod common;

use common::{instance_in, permutation, square, symmetric};
use proptest::prelude::*;
use qap_exact::certify::{construct_subgraph, Certificate};
use qap_exact::duality::{
    dual_objective, geometric_example, predicted_min_eigenvalue, s_sequence, s_target,
    slater_point, t_membership, DualPoint, SMember,
};
use qap_exact::linalg::min_eigenvalue;
use qap_exact::oracle::Graph;
use qap_exact::qap::{lift_permutation, pidx};
use qap_exact::{Matrix, QapInstance};

/// Alternating row and column normalisation of a positive matrix.
fn sinkhorn(mut x: Matrix) -> Matrix {
    let n = x.rows();
    for _ in 0..2000 {
        for i in 0..n {
            let s: f64 = (0..n).map(|j| x[(i, j)]).sum();
            (0..n).for_each(|j| x[(i, j)] /= s);
        }
        for j in 0..n {
            let s: f64 = (0..n).map(|i| x[(i, j)]).sum();
            (0..n).for_each(|i| x[(i, j)] /= s);
        }
    }
    x
}

fn dual_point(n: usize) -> impl Strategy<Value = DualPoint> {
    (square(n, -2.0, 2.0), square(n, -2.0, 2.0), symmetric(n * n, -2.0, 2.0))
        .prop_map(|(g, h, z)| DualPoint { g, h, z })
}

/// Term-by-term expansion of the dual objective.
fn expanded_dual_objective(x: &Matrix, dp: &DualPoint, inst: &QapInstance) -> f64 {
    let n = inst.n();
    let mut total = 0.0;
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let entry = inst.a()[(i, j)] * inst.b()[(k, l)] + dp.g[(i, j)] + dp.h[(k, l)]
                        - dp.z[(pidx(i, k, n), pidx(j, l, n))];
                    total += x[(i, k)] * entry * x[(j, l)];
                }
            }
        }
    }
    total - dp.g.as_slice().iter().sum::<f64>() - dp.h.as_slice().iter().sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn slater_slack_dominates_identity(inst in instance_in(1..=5)) {
        let dp = slater_point(&inst).unwrap();
        let feas = dp.feasibility(&inst).unwrap();
        prop_assert!(feas.min_eigenvalue >= 1.0 - 1e-9, "{:?}", feas);
        prop_assert_eq!(feas.sign_violation, 0.0);
    }

    #[test]
    fn row_and_column_multipliers_cancel_on_doubly_stochastic_points(
        (inst, dp, seed) in (1usize..=5).prop_flat_map(|n| (
            common::instance(n),
            dual_point(n),
            square(n, 0.05, 1.0),
        ))
    ) {
        let x = sinkhorn(seed);
        let vec_x = x.as_slice().to_vec();
        let got = dual_objective(&vec_x, &dp, &inst).unwrap();
        let without = DualPoint { g: Matrix::zeros(inst.n(), inst.n()), h: Matrix::zeros(inst.n(), inst.n()), z: dp.z.clone() };
        let expected = (&inst.cost_tensor() - &without.z).quad_form(&vec_x);
        prop_assert!((got - expected).abs() <= 1e-10 * (1.0 + expected.abs()), "{got} vs {expected}");
    }

    #[test]
    fn dual_objective_matches_expansion_at_permutations(
        (inst, dp, sigma) in (1usize..=5).prop_flat_map(|n| (common::instance(n), dual_point(n), permutation(n)))
    ) {
        let x = lift_permutation(&sigma).x;
        let got = dual_objective(x.as_slice(), &dp, &inst).unwrap();
        let expected = expanded_dual_objective(&x, &dp, &inst);
        prop_assert!((got - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
    }

    #[test]
    fn sequence_terms_are_psd_and_converge(
        (u, i, j) in (2usize..=4).prop_flat_map(|n| (prop::collection::vec(-2.0f64..2.0, n), 0..n, 0..n)),
    ) {
        let target = s_target(&u, i, j).unwrap();
        let mut last = f64::INFINITY;
        for k in [1u64, 10, 100, 1000, 10000] {
            let term = s_sequence(&u, i, j, k).unwrap();
            let lifted = term.lifted();
            let scale = 1.0 + lifted.max_abs();
            prop_assert!(min_eigenvalue(&lifted).unwrap() >= -1e-9 * scale, "k = {k}");
            let dev = (&term.p - &target).max_abs();
            prop_assert!(dev <= last * 1.0000001, "k = {k}: {dev} after {last}");
            last = dev;
        }
        let first = (&s_sequence(&u, i, j, 1).unwrap().p - &target).max_abs();
        prop_assert!(last <= first / 100.0 + 1e-9);
    }

    #[test]
    fn certificate_limits_are_approached(n in 2usize..=4, big in any::<u64>(), keep in any::<u64>(), v_seed in prop::collection::vec(-1.0f64..1.0, 16)) {
        let mut edges_b = Vec::new();
        let mut edges_a = Vec::new();
        let mut bit = 0;
        for i in 0..n {
            for j in i + 1..n {
                if big >> bit & 1 == 1 {
                    edges_b.push((i, j));
                    if keep >> bit & 1 == 1 {
                        edges_a.push((i, j));
                    }
                }
                bit += 1;
            }
        }
        let ga = Graph::from_edges(n, &edges_a).unwrap();
        let gb = Graph::from_edges(n, &edges_b).unwrap();
        let mut cert: Certificate = construct_subgraph(&ga, &gb).unwrap();
        for (idx, x) in cert.v_mut(0, 1).iter_mut().enumerate() {
            *x = v_seed[idx];
        }
        let member = SMember::from_certificate(&cert);
        let d1 = member.deviation(1).unwrap();
        let d = member.deviation(1000).unwrap();
        prop_assert!(d <= d1 / 100.0 + 1e-9, "{d} vs {d1}");
        let lifted = member.term(1000).unwrap().lifted();
        prop_assert!(min_eigenvalue(&lifted).unwrap() >= -1e-9 * (1.0 + lifted.max_abs()));
        prop_assert!(t_membership(&construct_subgraph(&ga, &gb).unwrap()).unwrap().member);
    }
}

#[test]
fn geometric_block_eigenvalues_follow_the_closed_form() {
    let ex = geometric_example();
    for s in [-10.0, -5.0, -1.0, 0.0, 0.5, 1.0, 5.0, 10.0] {
        let got = ex.shifted_min_eigenvalue(s).unwrap();
        let want = predicted_min_eigenvalue(s);
        assert!((got - want).abs() <= 1e-8, "s = {s}: {got} vs {want}");
        assert!(got < 0.0);
    }
    assert!((predicted_min_eigenvalue(0.0) + 1.0).abs() < 1e-15);
}
