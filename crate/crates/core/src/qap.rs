//! Instances, permutations, the lifted point, and the pair-index convention.
//!
//! Indices are 0-based inside the library. The public `pair_index` /
//! `unpair_index` helpers and everything serialized to disk use 1-based
//! indices. The pair `(i, k)` (facility `i`, location `k`) maps to the linear
//! index `i * n + k`, so that `(A ⊗ B)[(i,k),(j,l)] = A[i,j] * B[k,l]` and a
//! rank-one lift satisfies `X[(i,k),(j,l)] = X[i,k] * X[j,l]`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{arg_err, QapError, Result};
use crate::matrix::Matrix;

/// Relative asymmetry accepted before symmetrizing an input matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// 0-based pair index `(i, k) -> i * n + k`.
#[inline]
pub fn pidx(i: usize, k: usize, n: usize) -> usize {
    i * n + k
}

/// 1-based pair index: `(i, k) -> (i - 1) * n + k`.
pub fn pair_index(i: usize, k: usize, n: usize) -> Result<usize> {
    if i == 0 || k == 0 || i > n || k > n {
        return arg_err(format!("pair ({i},{k}) out of range for n = {n}"));
    }
    Ok((i - 1) * n + k)
}

/// Inverse of [`pair_index`]: a 1-based linear index in `[1, n^2]` back to `(i, k)`.
pub fn unpair_index(p: usize, n: usize) -> Result<(usize, usize)> {
    if p == 0 || p > n * n {
        return arg_err(format!("linear index {p} out of range for n = {n}"));
    }
    Ok(((p - 1) / n + 1, (p - 1) % n + 1))
}

/// A QAP instance: symmetric `A` (flow) and `B` (distance) of equal order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QapInstance {
    a: Matrix,
    b: Matrix,
}

impl QapInstance {
    /// Validates and symmetrizes `A` and `B`. Fails when either is non-square,
    /// sizes differ, entries are non-finite, or asymmetry exceeds
    /// `1e-12 * max|entry|`.
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if !a.is_square() || !b.is_square() {
            return arg_err("A and B must be square");
        }
        if a.rows() != b.rows() {
            return arg_err(format!("size mismatch: A is {}, B is {}", a.rows(), b.rows()));
        }
        if a.rows() == 0 {
            return arg_err("n must be at least 1");
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(QapError::NonFinite);
        }
        for m in [&a, &b] {
            let tolerance = SYMMETRY_TOLERANCE * m.max_abs();
            let asymmetry = m.max_asymmetry();
            if asymmetry > tolerance {
                return Err(QapError::NotSymmetric { asymmetry, tolerance });
            }
        }
        Ok(QapInstance {
            a: a.symmetrized(),
            b: b.symmetrized(),
        })
    }

    pub fn from_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(a), Matrix::from_rows(b))
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// `A ⊗ B` under the pair-index convention.
    pub fn cost_tensor(&self) -> Matrix {
        self.a.kron(&self.b)
    }

    /// `Σ_ij A_ij B_ij`: the objective at the identity permutation.
    pub fn identity_value(&self) -> f64 {
        self.a.dot(&self.b)
    }

    /// `max |A_ij B_kl|`.
    pub fn max_abs_product(&self) -> f64 {
        self.a.max_abs() * self.b.max_abs()
    }
}

/// A bijection `σ` on `{0, .., n-1}`, stored as `map[i] = σ(i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &s in &map {
            if s >= n || seen[s] {
                return arg_err(format!("{map:?} is not a permutation of 0..{n}"));
            }
            seen[s] = true;
        }
        Ok(Permutation { map })
    }

    /// Builds from 1-based images, e.g. `[2, 1, 4, 3]`.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return arg_err("1-based permutation contains 0");
        }
        Self::new(images.iter().map(|&s| s - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.map.iter().map(|s| s + 1).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &s) in self.map.iter().enumerate() {
            inv[s] = i;
        }
        Permutation { map: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &s)| i == s)
    }

    /// Permutation matrix with `P[i, σ(i)] = 1`.
    pub fn to_matrix(&self) -> Matrix {
        let n = self.map.len();
        let mut p = Matrix::zeros(n, n);
        for (i, &s) in self.map.iter().enumerate() {
            p[(i, s)] = 1.0;
        }
        p
    }

    /// Recovers `σ` from a 0/1 permutation matrix.
    pub fn from_matrix(p: &Matrix) -> Result<Self> {
        if !p.is_square() {
            return arg_err("permutation matrix must be square");
        }
        let n = p.rows();
        let mut map = Vec::with_capacity(n);
        for i in 0..n {
            let row = p.row(i);
            if row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return arg_err("permutation matrix entries must be 0 or 1");
            }
            let hits: Vec<usize> = (0..n).filter(|&j| row[j] == 1.0).collect();
            if hits.len() != 1 {
                return arg_err(format!("row {} has {} ones", i + 1, hits.len()));
            }
            map.push(hits[0]);
        }
        Self::new(map)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(usize::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let images = Vec::<usize>::deserialize(d)?;
        Permutation::from_one_based(&images).map_err(serde::de::Error::custom)
    }
}

/// The lifted pair `(X, 𝐗)` with `X` an `n x n` matrix and `𝐗` of order `n^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub x: Matrix,
    pub big_x: Matrix,
}

impl LiftedPoint {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// `Y = [[𝐗, vec X], [vec X^T, 1]]` of order `n^2 + 1`.
    pub fn assemble(&self) -> Matrix {
        let n = self.n();
        let m = n * n;
        let mut y = Matrix::zeros(m + 1, m + 1);
        y.set_block(0, 0, &self.big_x);
        for i in 0..n {
            for k in 0..n {
                let p = pidx(i, k, n);
                y[(p, m)] = self.x[(i, k)];
                y[(m, p)] = self.x[(i, k)];
            }
        }
        y[(m, m)] = 1.0;
        y
    }

    /// Splits an assembled `Y` back into `(X, 𝐗)`; `X` is read from the last column.
    pub fn from_assembled(y: &Matrix) -> Result<Self> {
        let size = y.rows();
        let n = (1..=size).find(|n| n * n + 1 == size);
        let Some(n) = n else {
            return arg_err(format!("order {size} is not n^2 + 1"));
        };
        let m = n * n;
        let big_x = y.block(0, 0, m, m);
        let x = Matrix::from_fn(n, n, |i, k| y[(pidx(i, k, n), m)]);
        Ok(LiftedPoint { x, big_x })
    }

    /// `<A ⊗ B, 𝐗>`.
    pub fn objective(&self, inst: &QapInstance) -> f64 {
        lifted_objective(inst, &self.big_x)
    }
}

/// `<A ⊗ B, 𝐗>` evaluated without forming the Kronecker product.
pub fn lifted_objective(inst: &QapInstance, big_x: &Matrix) -> f64 {
    let n = inst.n();
    let (a, b) = (inst.a(), inst.b());
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..n {
                let row = big_x.row(pidx(i, k, n));
                for l in 0..n {
                    total += aij * b[(k, l)] * row[pidx(j, l, n)];
                }
            }
        }
    }
    total
}

/// `Σ_ij A_ij B_σ(i)σ(j)`.
pub fn qap_objective(inst: &QapInstance, sigma: &Permutation) -> Result<f64> {
    let n = inst.n();
    if sigma.len() != n {
        return arg_err(format!("permutation of size {} for n = {n}", sigma.len()));
    }
    Ok(objective_unchecked(inst, sigma.as_slice()))
}

/// Objective for a raw image slice; the caller guarantees the size.
#[inline]
pub(crate) fn objective_unchecked(inst: &QapInstance, map: &[usize]) -> f64 {
    let n = map.len();
    let (a, b) = (inst.a(), inst.b());
    let mut total = 0.0;
    for i in 0..n {
        let arow = a.row(i);
        let brow = b.row(map[i]);
        for j in 0..n {
            total += arow[j] * brow[map[j]];
        }
    }
    total
}

/// Rank-one lift of a permutation matrix: `X = P`, `𝐗 = vec(P) vec(P)^T`.
pub fn lift(p: &Matrix) -> Result<LiftedPoint> {
    let sigma = Permutation::from_matrix(p)?;
    Ok(lift_permutation(&sigma))
}

pub fn lift_permutation(sigma: &Permutation) -> LiftedPoint {
    let x = sigma.to_matrix();
    let v = x.as_slice().to_vec();
    LiftedPoint {
        big_x: Matrix::outer(&v, &v),
        x,
    }
}

/// Returns `(A, B')` with `B'_ab = B_σ(a)σ(b)`, i.e. `B' = P B P^T` for
/// `P[i, σ(i)] = 1`. The objective of `τ` on the result equals the objective
/// of `σ ∘ τ` on the input, so an optimal `σ` becomes an optimal identity.
pub fn relabel(inst: &QapInstance, sigma: &Permutation) -> Result<QapInstance> {
    let n = inst.n();
    if sigma.len() != n {
        return arg_err(format!("permutation of size {} for n = {n}", sigma.len()));
    }
    let b = inst.b();
    let relabeled = Matrix::from_fn(n, n, |a, c| b[(sigma.apply(a), sigma.apply(c))]);
    Ok(QapInstance {
        a: inst.a().clone(),
        b: relabeled,
    })
}
