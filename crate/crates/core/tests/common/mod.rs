#![allow(dead_code)]

pub mod lp_vertex;

use proptest::prelude::*;
use qap_exact::oracle::for_each_permutation;
use qap_exact::{Matrix, Permutation, QapInstance};

pub fn square(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(lo..hi, n * n).prop_map(move |v| Matrix::from_vec(n, n, v))
}

pub fn symmetric(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    square(n, lo, hi).prop_map(|m| m.symmetrized())
}

pub fn symmetric_int(n: usize, lo: i32, hi: i32) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(lo..=hi, n * n).prop_map(move |v| {
        Matrix::from_fn(n, n, |i, j| {
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            f64::from(v[r * n + c])
        })
    })
}

pub fn permutation(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|m| Permutation::new(m).unwrap())
}

pub fn instance(n: usize) -> impl Strategy<Value = QapInstance> {
    (symmetric(n, -2.0, 2.0), symmetric(n, -2.0, 2.0))
        .prop_map(|(a, b)| QapInstance::new(a, b).unwrap())
}

pub fn instance_in(sizes: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = QapInstance> {
    sizes.prop_flat_map(instance)
}

/// `min_σ Σ_i K[i, σ(i)]` by enumeration.
pub fn enumerated_assignment(k: &Matrix) -> f64 {
    let mut best = f64::INFINITY;
    for_each_permutation(k.rows(), |p| {
        best = best.min(p.iter().enumerate().map(|(i, &j)| k[(i, j)]).sum());
    });
    best
}

/// `Σ_ij A_ij B_σ(i)σ(j)`, written out independently of the library.
pub fn naive_objective(inst: &QapInstance, sigma: &[usize]) -> f64 {
    let n = inst.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += inst.a()[(i, j)] * inst.b()[(sigma[i], sigma[j])];
        }
    }
    total
}
