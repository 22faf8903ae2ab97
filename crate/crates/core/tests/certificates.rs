mod common;

use common::{instance, instance_in, permutation, symmetric, symmetric_int};
use proptest::prelude::*;
use qap_exact::certify::{
    construct_comonotone, construct_n3, construct_perturbation, construct_subgraph,
    normal_cone_decompose, perturbation_instance, search_certificate, verify_certificate,
    Certificate, Search,
};
use qap_exact::duality::{build_P, closure_conditions};
use qap_exact::oracle::{all_permutations, brute_force_qap, for_each_permutation, Graph};
use qap_exact::qap::{lift_permutation, relabel};
use qap_exact::sdp::{build_relaxation, solve_relaxation, SolverOptions, Variant, TOL_EXACT};
use qap_exact::{Matrix, Permutation, QapInstance};

fn certificate(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Certificate> {
    let pairs = n * (n + 1) / 2;
    (
        prop::collection::vec(prop::collection::vec(lo..hi, n), pairs),
        prop::collection::vec(prop::collection::vec(lo..hi, n), pairs),
    )
        .prop_map(move |(u, v)| {
            let slot = |i: usize, j: usize| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                a * n - a * (a + 1) / 2 + b
            };
            Certificate::from_fn(n, |i, j, k| u[slot(i, j)][k], |k, l, i| v[slot(k, l)][i])
        })
}

/// `Σ_ij u^(ij)_σ(i) + u^(ij)_σ(j) + v^(ij)_σ⁻¹(i) + v^(ij)_σ⁻¹(j)` over ordered pairs.
fn gradient_pairing(cert: &Certificate, sigma: &[usize]) -> f64 {
    let n = cert.n();
    let mut inv = vec![0; n];
    for (i, &s) in sigma.iter().enumerate() {
        inv[s] = i;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (u, v) = (cert.u(i, j), cert.v(i, j));
            total += u[sigma[i]] + u[sigma[j]] + v[inv[i]] + v[inv[j]];
        }
    }
    total
}

fn enumerated_req3(cert: &Certificate) -> f64 {
    let n = cert.n();
    let base = gradient_pairing(cert, &(0..n).collect::<Vec<_>>());
    let mut best = f64::INFINITY;
    for_each_permutation(n, |p| best = best.min(gradient_pairing(cert, p) - base));
    best
}

fn identity_optimal(inst: &QapInstance) -> QapInstance {
    relabel(inst, &brute_force_qap(inst).unwrap().best_sigma).unwrap()
}

/// Valid certificates must make the identity optimal with value `Σ A_ij B_ij`.
fn assert_certifies_identity(inst: &QapInstance, cert: &Certificate) -> Result<(), TestCaseError> {
    let report = verify_certificate(inst, cert).unwrap();
    prop_assert!(report.valid, "{:?}", report);
    let bf = brute_force_qap(inst).unwrap();
    let id = inst.identity_value();
    prop_assert!((bf.best_value - id).abs() <= 1e-9 * (1.0 + id.abs()), "{} vs {}", bf.best_value, id);
    let z = &inst.cost_tensor() - &build_P(cert);
    let closure = closure_conditions(&z, inst.n()).unwrap();
    prop_assert!(closure.sign_violation <= report.tolerance, "{:?}", closure);
    prop_assert!(closure.diagonal_pair_violation <= report.tolerance, "{:?}", closure);
    Ok(())
}

fn random_graph(n: usize, mask: u64) -> Graph {
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
    Graph::from_edges(n, &edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn req3_via_assignment_matches_enumeration(
        cert in (1usize..=6).prop_flat_map(|n| certificate(n, -2.0, 2.0)),
        a_scale in 0.0f64..1.0,
    ) {
        let n = cert.n();
        let inst = QapInstance::new(Matrix::identity(n).scale(a_scale), Matrix::identity(n)).unwrap();
        let report = verify_certificate(&inst, &cert).unwrap();
        let brute = enumerated_req3(&cert);
        prop_assert!((report.req3_margin - brute).abs() <= 1e-10 * (1.0 + brute.abs()), "{} vs {}", report.req3_margin, brute);
    }

    #[test]
    fn gradient_matrix_pairs_with_permutations(
        (cert, sigma) in (1usize..=6).prop_flat_map(|n| (certificate(n, -2.0, 2.0), permutation(n)))
    ) {
        let k = cert.gradient_matrix();
        let via_k: f64 = (0..cert.n()).map(|i| k[(i, sigma.apply(i))]).sum();
        let direct = gradient_pairing(&cert, sigma.as_slice());
        prop_assert!((via_k - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
        let x = lift_permutation(&sigma).x;
        let vec_x: Vec<f64> = x.as_slice().to_vec();
        let quad = build_P(&cert).quad_form(&vec_x);
        prop_assert!((quad - direct).abs() <= 1e-10 * (1.0 + direct.abs()), "{quad} vs {direct}");
    }

    #[test]
    fn constant_vectors_have_no_permutation_gain(
        n in 1usize..=6,
        vals in prop::collection::vec(-16i32..=16, 72),
    ) {
        let pairs = n * (n + 1) / 2;
        let quarter = |x: i32| f64::from(x) / 4.0;
        let slot = |i: usize, j: usize| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            a * n - a * (a + 1) / 2 + b
        };
        let cert = Certificate::from_fn(
            n,
            |i, j, _| quarter(vals[slot(i, j)]),
            |k, l, _| quarter(vals[pairs + slot(k, l)]),
        );
        prop_assert!(cert.is_subscript_free());
        let inst = QapInstance::new(Matrix::zeros(n, n), Matrix::zeros(n, n)).unwrap();
        prop_assert_eq!(verify_certificate(&inst, &cert).unwrap().req3_margin, 0.0);
    }

    #[test]
    fn subgraph_certificates_are_valid(n in 2usize..=6, big in any::<u64>(), keep in any::<u64>()) {
        let gb = random_graph(n, big);
        let ga = random_graph(n, big & keep);
        let inst = QapInstance::new(ga.adjacency(), gb.adjacency().scale(-1.0)).unwrap();
        assert_certifies_identity(&inst, &construct_subgraph(&ga, &gb).unwrap())?;
    }

    #[test]
    fn comonotone_certificate_for_negated_nonnegative_flow(a in (1usize..=6).prop_flat_map(|n| symmetric(n, 0.0, 3.0))) {
        let inst = QapInstance::new(a.clone(), a.scale(-1.0)).unwrap();
        assert_certifies_identity(&inst, &construct_comonotone(&inst))?;
    }

    #[test]
    fn unperturbed_negation_is_certified(c in (1usize..=6).prop_flat_map(|n| symmetric(n, -3.0, 3.0))) {
        let n = c.rows();
        let zero = Matrix::zeros(n, n);
        let inst = perturbation_instance(&c, &zero).unwrap();
        let cert = construct_perturbation(&c, &zero).unwrap();
        assert_certifies_identity(&inst, &cert)?;
    }

    #[test]
    fn perturbation_margin_matches_direct_scan(
        (c, delta) in (2usize..=5).prop_flat_map(|n| (symmetric(n, -3.0, 3.0), symmetric(n, -1.0, 1.0)))
    ) {
        let n = c.rows();
        let inst = perturbation_instance(&c, &delta).unwrap();
        let report = verify_certificate(&inst, &construct_perturbation(&c, &delta).unwrap()).unwrap();
        prop_assert!(report.req3_margin.abs() <= 1e-12);
        // Requirement 1 slack written out from A = C + Δ, B = -C + Δ.
        let slack = |i: usize, j: usize, k: usize, l: usize| {
            let (a, b) = (c[(i, j)] + delta[(i, j)], -c[(k, l)] + delta[(k, l)]);
            let u = -a * a / 4.0 + delta[(i, j)].powi(2) / 2.0;
            let v = -b * b / 4.0 + delta[(k, l)].powi(2) / 2.0;
            a * b - 2.0 * u - 2.0 * v
        };
        let mut worst = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        if (i != j && k != l) || (i == j && k == l) {
                            worst = worst.min(slack(i, j, k, l));
                        }
                    }
                }
            }
        }
        prop_assert!((report.req1_margin - worst).abs() <= 1e-10 * (1.0 + worst.abs()));
        if report.valid {
            assert_certifies_identity(&inst, &construct_perturbation(&c, &delta).unwrap())?;
        }
    }

    #[test]
    fn three_vertex_construction_is_tight(inst in instance(3)) {
        let inst = identity_optimal(&inst);
        let cert = construct_n3(&inst).unwrap();
        let report = verify_certificate(&inst, &cert).unwrap();
        prop_assert!(report.req1_margin.abs() <= report.tolerance, "{:?}", report);
        assert_certifies_identity(&inst, &cert)?;
    }

    #[test]
    fn random_valid_certificates_certify_the_identity(
        (inst, cert) in (2usize..=4).prop_flat_map(|n| (instance(n), certificate(n, -1.0, 1.0)))
    ) {
        // Rarely valid as drawn; the implication is checked whenever it is.
        if verify_certificate(&inst, &cert).unwrap().valid {
            assert_certifies_identity(&inst, &cert)?;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn found_certificates_verify(inst in instance_in(2..=4)) {
        let inst = identity_optimal(&inst);
        match search_certificate(&inst).unwrap() {
            Search::Found { value } => {
                prop_assert!(value.report.valid, "{:?}", value.report);
                prop_assert_eq!(&verify_certificate(&inst, &value.certificate).unwrap(), &value.report);
                assert_certifies_identity(&inst, &value.certificate)?;
            }
            Search::Infeasible => {}
            Search::Indeterminate { reason } => prop_assert!(false, "indeterminate: {reason}"),
        }
    }

    #[test]
    fn found_certificates_on_integer_data(
        inst in (2usize..=5).prop_flat_map(|n| (symmetric_int(n, 0, 1), symmetric_int(n, -1, 0)))
            .prop_map(|(a, b)| QapInstance::new(a, b).unwrap())
    ) {
        let inst = identity_optimal(&inst);
        if let Search::Found { value } = search_certificate(&inst).unwrap() {
            assert_certifies_identity(&inst, &value.certificate)?;
        }
    }

    #[test]
    fn normal_cone_members_pass_the_permutation_test(
        (w, p, q) in (1usize..=5).prop_flat_map(|n| (
            prop::collection::vec(0.0f64..2.0, n * n),
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(-2.0f64..2.0, n),
        ))
    ) {
        let n = p.len();
        let m = Matrix::from_fn(n, n, |a, b| if a == b { 0.0 } else { -w[a * n + b] } + p[b] + q[a]);
        let dec = normal_cone_decompose(&m).unwrap();
        let Some(dec) = dec.found() else {
            return Err(TestCaseError::fail("constructed member not recognised"));
        };
        prop_assert!((&dec.compose() - &m).max_abs() <= 1e-8);
        for sigma in all_permutations(n) {
            let pm = &sigma.to_matrix() - &Matrix::identity(n);
            prop_assert!(m.dot(&pm) <= 1e-9);
        }
    }

    #[test]
    fn normal_cone_decisions_agree_with_enumeration_for_two(m in common::square(2, -2.0, 2.0)) {
        let swap = &Permutation::new(vec![1, 0]).unwrap().to_matrix() - &Matrix::identity(2);
        let member = m.dot(&swap) <= 0.0;
        let found = normal_cone_decompose(&m).unwrap().found().is_some();
        prop_assert_eq!(found, member, "{:?}", m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn certified_instances_have_exact_relaxations(n in 2usize..=4, big in any::<u64>(), keep in any::<u64>()) {
        let gb = random_graph(n, big);
        let ga = random_graph(n, big & keep);
        let inst = QapInstance::new(ga.adjacency(), gb.adjacency().scale(-1.0)).unwrap();
        prop_assert!(verify_certificate(&inst, &construct_subgraph(&ga, &gb).unwrap()).unwrap().valid);
        let report = solve_relaxation(&build_relaxation(&inst, Variant::Standard).unwrap(), &SolverOptions::default()).unwrap();
        prop_assert!(report.converged);
        prop_assert!((report.objective - inst.identity_value()).abs() <= TOL_EXACT, "{} vs {}", report.objective, inst.identity_value());
    }
}
