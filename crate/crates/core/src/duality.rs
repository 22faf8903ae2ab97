//! Dual side of the relaxation: dual points, the Slater point, limits of
//! dual-feasible sequences, and the 4x4 instance whose dual feasible set is
//! not closed.

use serde::{Deserialize, Serialize};

use crate::certify::{permutation_margin, Certificate, CERT_TOLERANCE};
use crate::error::{arg_err, Result};
use crate::linalg::{min_eigenvalue, sym_eig};
use crate::matrix::Matrix;
use crate::qap::{pidx, QapInstance};

/// Multipliers `G`, `H` for the row/column sum constraints and `Z` for the
/// nonnegativity and gangster constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    pub g: Matrix,
    pub h: Matrix,
    pub z: Matrix,
}

impl DualPoint {
    fn check(&self, n: usize) -> Result<()> {
        let ok = |m: &Matrix, d: usize| m.rows() == d && m.cols() == d;
        if !ok(&self.g, n) || !ok(&self.h, n) || !ok(&self.z, n * n) {
            return arg_err(format!("dual point dimensions do not match n = {n}"));
        }
        Ok(())
    }

    /// `A⊗B + G⊗E + E⊗H - Z`, which must be PSD.
    pub fn slack_matrix(&self, inst: &QapInstance) -> Result<Matrix> {
        let n = inst.n();
        self.check(n)?;
        let e = Matrix::ones(n, n);
        let sum = &(&inst.cost_tensor() + &self.g.kron(&e)) + &e.kron(&self.h);
        Ok(&sum - &self.z)
    }

    pub fn feasibility(&self, inst: &QapInstance) -> Result<DualFeasibility> {
        let slack = self.slack_matrix(inst)?;
        Ok(DualFeasibility {
            min_eigenvalue: min_eigenvalue(&slack)?,
            sign_violation: sign_violation(&self.z, inst.n()),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualFeasibility {
    pub min_eigenvalue: f64,
    /// Largest negative part of `Z` on its sign-constrained entries.
    pub sign_violation: f64,
}

/// `Z` is sign constrained where `(i != j, k != l)` or `(i = j, k = l)`.
fn sign_constrained(i: usize, k: usize, j: usize, l: usize) -> bool {
    (i != j && k != l) || (i == j && k == l)
}

fn sign_violation(z: &Matrix, n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for p in 0..n * n {
        for q in 0..n * n {
            let (i, k, j, l) = (p / n, p % n, q / n, q % n);
            if sign_constrained(i, k, j, l) && -z[(p, q)] > worst {
                worst = -z[(p, q)];
            }
        }
    }
    worst
}

/// `xᵀ(A⊗B + G⊗E + E⊗H - Z)x - <G + H, E>`.
pub fn dual_objective(x: &[f64], dp: &DualPoint, inst: &QapInstance) -> Result<f64> {
    let n = inst.n();
    if x.len() != n * n {
        return arg_err(format!("x has length {}, expected {}", x.len(), n * n));
    }
    let slack = dp.slack_matrix(inst)?;
    let offset: f64 = dp.g.as_slice().iter().chain(dp.h.as_slice()).sum();
    Ok(slack.quad_form(x) - offset)
}

/// Strictly feasible dual point with slack matrix `A⊗B + (t+1)I`, where
/// `t = max(0, -λ_min(A⊗B))`.
pub fn slater_point(inst: &QapInstance) -> Result<DualPoint> {
    let n = inst.n();
    let t = (-min_eigenvalue(&inst.cost_tensor())?).max(0.0);
    let nn = n * n;
    let z = &Matrix::ones(nn, nn).scale(t + 2.0) - &Matrix::identity(nn).scale(t + 1.0);
    Ok(DualPoint {
        g: Matrix::zeros(n, n),
        h: Matrix::ones(n, n).scale(t + 2.0),
        z,
    })
}

/// `P[(i,k),(j,l)] = u^(ij)_k + u^(ij)_l + v^(kl)_i + v^(kl)_j`.
#[allow(non_snake_case)]
pub fn build_P(cert: &Certificate) -> Matrix {
    let n = cert.n();
    Matrix::from_fn(n * n, n * n, |p, q| {
        let (i, k, j, l) = (p / n, p % n, q / n, q % n);
        let (u, v) = (cert.u(i, j), cert.v(k, l));
        u[k] + u[l] + v[i] + v[j]
    })
}

/// `u 1ᵀ + 1 uᵀ`.
fn sym_outer_sum(u: &[f64]) -> Matrix {
    let n = u.len();
    Matrix::from_fn(n, n, |k, l| u[k] + u[l])
}

fn e_sym(n: usize, i: usize, j: usize) -> Matrix {
    &Matrix::basis(n, i, j) + &Matrix::basis(n, j, i)
}

/// Same matrix through Kronecker products, counting each unordered pair once:
/// `Σ_{i<j} (E_ij + E_ji) ⊗ M(u^(ij)) + M(v^(ij)) ⊗ (E_ij + E_ji)` plus half
/// of the `i = j` terms.
#[allow(non_snake_case)]
pub fn build_P_kronecker(cert: &Certificate) -> Matrix {
    let n = cert.n();
    let mut out = Matrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in i..n {
            let w = if i == j { 0.5 } else { 1.0 };
            let e = e_sym(n, i, j);
            let part = &e.kron(&sym_outer_sum(cert.u(i, j))) + &sym_outer_sum(cert.v(i, j)).kron(&e);
            out = &out + &part.scale(w);
        }
    }
    out
}

/// One element of a sequence `(G_k, H_k, P_k)` with `G_k⊗E + E⊗H_k + P_k`
/// PSD and `P_k` converging to a target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceTerm {
    pub k: u64,
    pub g: Matrix,
    pub h: Matrix,
    pub p: Matrix,
}

impl SequenceTerm {
    /// `G_k⊗E + E⊗H_k + P_k`.
    pub fn lifted(&self) -> Matrix {
        let n = self.g.rows();
        let e = Matrix::ones(n, n);
        &(&self.g.kron(&e) + &e.kron(&self.h)) + &self.p
    }

    fn add(&self, other: &SequenceTerm) -> SequenceTerm {
        SequenceTerm {
            k: self.k,
            g: &self.g + &other.g,
            h: &self.h + &other.h,
            p: &self.p + &other.p,
        }
    }

    /// Conjugates by the pair swap `(i,k) <-> (k,i)`, which exchanges the roles
    /// of `G` and `H`.
    fn swapped(self) -> SequenceTerm {
        SequenceTerm {
            k: self.k,
            g: self.h,
            h: self.g,
            p: swap_pairs(&self.p),
        }
    }
}

fn swap_pairs(m: &Matrix) -> Matrix {
    let n2 = m.rows();
    let n = (n2 as f64).sqrt().round() as usize;
    let s = |p: usize| pidx(p % n, p / n, n);
    Matrix::from_fn(n2, n2, |p, q| m[(s(p), s(q))])
}

/// Target `(E_ij + E_ji) ⊗ (u 1ᵀ + 1 uᵀ)` of [`s_sequence`].
pub fn s_target(u: &[f64], i: usize, j: usize) -> Result<Matrix> {
    let n = u.len();
    if i >= n || j >= n {
        return arg_err(format!("indices ({i}, {j}) out of range for n = {n}"));
    }
    Ok(e_sym(n, i, j).kron(&sym_outer_sum(u)))
}

/// The `k`-th element of a rank-one construction converging to
/// [`s_target`]`(u, i, j)`, with `P_k - P = O(1/k)`.
pub fn s_sequence(u: &[f64], i: usize, j: usize, k: u64) -> Result<SequenceTerm> {
    let n = u.len();
    if i >= n || j >= n {
        return arg_err(format!("indices ({i}, {j}) out of range for n = {n}"));
    }
    if k == 0 {
        return arg_err("sequence index must be positive");
    }
    let kf = k as f64;
    let nn = n * n;
    let e = Matrix::ones(n, n);
    // `block ⊗ vec` pattern: block-scaled copies of one length-n vector
    let stacked = |coef: &dyn Fn(usize) -> f64, vec: &[f64]| -> Vec<f64> {
        (0..nn).map(|p| coef(p / n) * vec[p % n]).collect()
    };
    let (v_k, g) = if i == j {
        let w: Vec<f64> = u.iter().map(|x| 1.0 + 2.0 * x / kf).collect();
        let v = stacked(&|a| if a == i { 1.0 } else { 0.0 }, &w);
        let v_k = Matrix::outer(&v, &v).scale(kf);
        (v_k, Matrix::basis(n, i, i).scale(kf))
    } else {
        let minus: Vec<f64> = u.iter().map(|x| 1.0 - x / kf).collect();
        let plus: Vec<f64> = u.iter().map(|x| 1.0 + x / kf).collect();
        // 0 for i, 1 for j, 2 for the remaining blocks
        let kind = |a: usize| match a {
            _ if a == i => 0,
            _ if a == j => 1,
            _ => 2,
        };
        let v1 = stacked(&|a| [1.0, -1.0, 0.0][kind(a)], &minus);
        let v2 = stacked(&|a| [0.0, 0.0, 1.0][kind(a)], &minus);
        let v3 = stacked(&|a| [1.0, 1.0, -1.0][kind(a)], &plus);
        let v_k = &(&Matrix::outer(&v1, &v1).scale(2.0) + &Matrix::outer(&v2, &v2).scale(2.0))
            + &Matrix::outer(&v3, &v3);
        let g = Matrix::from_fn(n, n, |a, b| match (kind(a), kind(b)) {
            (x, y) if x == y && x < 2 => 3.0,
            (2, 2) => 3.0,
            _ => -1.0,
        });
        (v_k.scale(kf / 4.0), g.scale(kf / 4.0))
    };
    let h = if i == j {
        Matrix::zeros(n, n)
    } else {
        sym_outer_sum(u).scale(-0.25)
    };
    let p = &(&v_k - &g.kron(&e)) - &e.kron(&h);
    Ok(SequenceTerm { k, g, h, p })
}

/// [`build_P`] of a certificate as a sum of sequence targets, with the
/// matching sequence witnessing membership of the limit set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SMember {
    pub target: Matrix,
    n: usize,
    /// `(i, j, u, from_v)`: one `s_sequence` target per pair and family.
    parts: Vec<(usize, usize, Vec<f64>, bool)>,
}

impl SMember {
    pub fn from_certificate(cert: &Certificate) -> Self {
        let n = cert.n();
        let mut parts = Vec::new();
        for i in 0..n {
            for j in i..n {
                let w = if i == j { 0.5 } else { 1.0 };
                for (vec, from_v) in [(cert.u(i, j), false), (cert.v(i, j), true)] {
                    if vec.iter().any(|&x| x != 0.0) {
                        parts.push((i, j, vec.iter().map(|x| w * x).collect(), from_v));
                    }
                }
            }
        }
        SMember {
            target: build_P(cert),
            n,
            parts,
        }
    }

    pub fn term(&self, k: u64) -> Result<SequenceTerm> {
        let n = self.n;
        let mut acc = SequenceTerm {
            k,
            g: Matrix::zeros(n, n),
            h: Matrix::zeros(n, n),
            p: Matrix::zeros(n * n, n * n),
        };
        for (i, j, u, from_v) in &self.parts {
            let t = s_sequence(u, *i, *j, k)?;
            acc = acc.add(&if *from_v { t.swapped() } else { t });
        }
        Ok(acc)
    }

    /// `max |P_k - P|`.
    pub fn deviation(&self, k: u64) -> Result<f64> {
        Ok((&self.term(k)?.p - &self.target).max_abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TMembership {
    /// `min_σ <P_σ, K> - <I, K>`.
    pub margin: f64,
    pub tolerance: f64,
    pub member: bool,
}

/// Whether the quadratic form of [`build_P`] over doubly stochastic
/// matrices is minimized at the identity, decided on permutations.
pub fn t_membership(cert: &Certificate) -> Result<TMembership> {
    let k = cert.gradient_matrix();
    let margin = permutation_margin(&k)?;
    let tolerance = CERT_TOLERANCE * (1.0 + k.max_abs());
    Ok(TMembership {
        margin,
        tolerance,
        member: margin >= -tolerance,
    })
}

/// The conditions on `Z` under which exactness follows from `A⊗B - Z`
/// lying in both limit sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureConditions {
    /// Largest negative part on the sign-constrained entries.
    pub sign_violation: f64,
    /// `max |Z_{(i,i),(j,j)}|`.
    pub diagonal_pair_violation: f64,
}

pub fn closure_conditions(z: &Matrix, n: usize) -> Result<ClosureConditions> {
    if z.rows() != n * n || !z.is_square() {
        return arg_err(format!("Z must be {0}x{0}", n * n));
    }
    let mut diag: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            diag = diag.max(z[(pidx(i, i, n), pidx(j, j, n))].abs());
        }
    }
    Ok(ClosureConditions {
        sign_violation: sign_violation(z, n),
        diagonal_pair_violation: diag,
    })
}

/// The 4x4 instance, its `P`, and `Z = A⊗B - P`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometricExample {
    pub instance: QapInstance,
    /// The repeated 4x4 block `-(e₂1ᵀ + 1e₂ᵀ)`.
    pub block: Matrix,
    pub certificate: Certificate,
    pub p: Matrix,
    pub z: Matrix,
}

pub fn geometric_example() -> GeometricExample {
    let a = Matrix::from_rows(&[
        vec![0.0, 1.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![0.0, 0.0, 1.0, 0.0],
    ]);
    let b = Matrix::from_rows(&[
        vec![0.0, -1.0, 0.0, 0.0],
        vec![-1.0, 0.0, -1.0, 0.0],
        vec![0.0, -1.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0],
    ]);
    let instance = QapInstance::new(a, b).expect("symmetric data");
    let mut e2 = vec![0.0; 4];
    e2[1] = -1.0;
    let mut certificate = Certificate::zeros(4);
    certificate.u_mut(0, 1).copy_from_slice(&e2);
    certificate.u_mut(2, 3).copy_from_slice(&e2);
    let block = sym_outer_sum(&e2);
    let p = build_P(&certificate);
    let z = &instance.cost_tensor() - &p;
    GeometricExample {
        instance,
        block,
        certificate,
        p,
        z,
    }
}

impl GeometricExample {
    /// `λ_min(-P + sE)` for the 4x4 block, computed numerically.
    pub fn shifted_min_eigenvalue(&self, s: f64) -> Result<f64> {
        let m = &self.block.scale(-1.0) + &Matrix::ones(4, 4).scale(s);
        min_eigenvalue(&m)
    }

    /// Full spectrum of `-P + sE`.
    pub fn shifted_spectrum(&self, s: f64) -> Result<Vec<f64>> {
        let m = &self.block.scale(-1.0) + &Matrix::ones(4, 4).scale(s);
        Ok(sym_eig(&m)?.values)
    }
}

/// Closed form `2s + 1 - 2√(s² + s + 1)`, negative for every `s`.
pub fn predicted_min_eigenvalue(s: f64) -> f64 {
    2.0 * s + 1.0 - 2.0 * (s * s + s + 1.0).sqrt()
}

/// Eigenvector in `span{1, e₂}` for [`predicted_min_eigenvalue`].
///
/// On that span `-P + sE` acts as `[[3s, 1+s], [3(1+s), 2+s]]` in the basis
/// `(1 - e₂, e₂)`; either row gives a null vector of the shifted 2x2 block
/// and the larger of the two is returned.
pub fn predicted_eigenvector(s: f64) -> Vec<f64> {
    let lambda = predicted_min_eigenvalue(s);
    let first = (1.0 + s, lambda - 3.0 * s);
    let second = (lambda - 2.0 - s, 3.0 * (1.0 + s));
    let norm = |(a, b): (f64, f64)| a.hypot(b);
    let (a, b) = if norm(first) >= norm(second) { first } else { second };
    vec![a, b, a, a]
}
