//! Exactness certificates: vector families `u^(ij)`, `v^(kl)` whose three
//! requirements together prove that the identity solves both the QAP and its
//! lifted relaxation.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::assignment::solve_lap;
use crate::error::{arg_err, Result};
use crate::lp::{solve_lp, Bounds, LinearProgram, LpStatus};
use crate::matrix::Matrix;
use crate::oracle::Graph;
use crate::qap::QapInstance;

/// Relative tolerance for the three requirements, scaled by `1 + max|A_ij B_kl|`.
pub const CERT_TOLERANCE: f64 = 1e-7;

#[inline]
fn slot(i: usize, j: usize, n: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Vector families indexed by unordered pairs; `u(i, j)` and `u(j, i)` are the
/// same vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    n: usize,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Certificate {
    pub fn zeros(n: usize) -> Self {
        let pairs = n * (n + 1) / 2;
        Certificate {
            n,
            u: vec![vec![0.0; n]; pairs],
            v: vec![vec![0.0; n]; pairs],
        }
    }

    /// Builds both families from per-entry rules `u(i, j, k)` and `v(k, l, i)`,
    /// evaluated for `i <= j` (resp. `k <= l`).
    pub fn from_fn(
        n: usize,
        mut u: impl FnMut(usize, usize, usize) -> f64,
        mut v: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut cert = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let s = slot(i, j, n);
                for k in 0..n {
                    cert.u[s][k] = u(i, j, k);
                    cert.v[s][k] = v(i, j, k);
                }
            }
        }
        cert
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn u(&self, i: usize, j: usize) -> &[f64] {
        &self.u[slot(i, j, self.n)]
    }

    pub fn v(&self, k: usize, l: usize) -> &[f64] {
        &self.v[slot(k, l, self.n)]
    }

    pub fn u_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let s = slot(i, j, self.n);
        &mut self.u[s]
    }

    pub fn v_mut(&mut self, k: usize, l: usize) -> &mut [f64] {
        let s = slot(k, l, self.n);
        &mut self.v[s]
    }

    /// `K[a][b] = Σ_{(i,j)} (δ_ai + δ_aj) u^(ij)_b + (δ_bi + δ_bj) v^(ij)_a`
    /// over ordered pairs, so that `Σ_a K[a][σ(a)]` is the left side of the
    /// permutation requirement.
    pub fn gradient_matrix(&self) -> Matrix {
        let n = self.n;
        Matrix::from_fn(n, n, |a, b| {
            2.0 * (0..n).map(|j| self.u(a, j)[b] + self.v(b, j)[a]).sum::<f64>()
        })
    }

    /// Both families are constant vectors.
    pub fn is_subscript_free(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .all(|vec| vec.iter().all(|&x| x == vec[0]))
    }
}

#[derive(Serialize, Deserialize)]
struct CertificateFile {
    n: usize,
    u: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Serialize for Certificate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.n;
        let mut u = BTreeMap::new();
        let mut v = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                let key = format!("{},{}", i + 1, j + 1);
                u.insert(key.clone(), self.u(i, j).to_vec());
                v.insert(key, self.v(i, j).to_vec());
            }
        }
        CertificateFile { n, u, v }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Certificate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let file = CertificateFile::deserialize(d)?;
        let n = file.n;
        let mut cert = Certificate::zeros(n);
        for (family, map) in [("u", &file.u), ("v", &file.v)] {
            if map.len() != n * (n + 1) / 2 {
                return Err(D::Error::custom(format!("{family}: expected one entry per pair i <= j")));
            }
            for (key, vals) in map {
                let parsed: Option<(usize, usize)> = key.split_once(',').and_then(|(a, b)| {
                    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
                });
                let Some((i, j)) = parsed.filter(|&(i, j)| 1 <= i && i <= j && j <= n) else {
                    return Err(D::Error::custom(format!("{family}: bad key {key:?}")));
                };
                if vals.len() != n || vals.iter().any(|x| !x.is_finite()) {
                    return Err(D::Error::custom(format!("{family}[{key}]: need {n} finite values")));
                }
                let target = if family == "u" {
                    cert.u_mut(i - 1, j - 1)
                } else {
                    cert.v_mut(i - 1, j - 1)
                };
                target.copy_from_slice(vals);
            }
        }
        Ok(cert)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `min (A_ij B_kl - u^(ij)_k - u^(ij)_l - v^(kl)_i - v^(kl)_j)` over
    /// `(i != j, k != l)` and `(i = j, k = l)`.
    pub req1_margin: f64,
    /// `max |u^(ij)_i + u^(ij)_j + v^(ij)_i + v^(ij)_j - A_ij B_ij|`.
    pub req2_violation: f64,
    /// `min_σ <P_σ - I, K>`.
    pub req3_margin: f64,
    pub tolerance: f64,
    pub valid: bool,
}

pub fn certificate_tolerance(inst: &QapInstance) -> f64 {
    CERT_TOLERANCE * (1.0 + inst.max_abs_product())
}

/// `A_ij B_kl - (u^(ij)_k + u^(ij)_l + v^(kl)_i + v^(kl)_j)`.
fn slack(inst: &QapInstance, cert: &Certificate, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let u = cert.u(i, j);
    let v = cert.v(k, l);
    inst.a()[(i, j)] * inst.b()[(k, l)] - (u[k] + u[l] + v[i] + v[j])
}

/// Calls `f(i, j, k, l)` once per distinct requirement-1 inequality: pairs
/// `i < j`, `k < l`, plus the diagonal `(i, i, k, k)`.
fn for_each_req1(n: usize, mut f: impl FnMut(usize, usize, usize, usize)) {
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                for l in (k + 1)..n {
                    f(i, j, k, l);
                }
            }
        }
    }
    for i in 0..n {
        for k in 0..n {
            f(i, i, k, k);
        }
    }
}

/// `min_σ <P_σ - I, K>` through one assignment solve.
pub fn permutation_margin(k: &Matrix) -> Result<f64> {
    Ok(solve_lap(k)?.cost - k.trace())
}

pub fn verify_certificate(inst: &QapInstance, cert: &Certificate) -> Result<CertificateReport> {
    let n = inst.n();
    if cert.n() != n {
        return arg_err(format!(
            "certificate has size {}, instance has size {n}",
            cert.n()
        ));
    }
    let mut req1_margin = f64::INFINITY;
    for_each_req1(n, |i, j, k, l| {
        req1_margin = req1_margin.min(slack(inst, cert, i, j, k, l));
    });
    let mut req2_violation: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            req2_violation = req2_violation.max(slack(inst, cert, i, j, i, j).abs());
        }
    }
    let req3_margin = permutation_margin(&cert.gradient_matrix())?;
    let tolerance = certificate_tolerance(inst);
    let valid = req1_margin >= -tolerance && req2_violation <= tolerance && req3_margin >= -tolerance;
    Ok(CertificateReport {
        req1_margin,
        req2_violation,
        req3_margin,
        tolerance,
        valid,
    })
}

/// Certificate meeting requirement 1 with equality for `n = 3`.
pub fn construct_n3(inst: &QapInstance) -> Result<Certificate> {
    if inst.n() != 3 {
        return arg_err("the n = 3 construction needs n = 3");
    }
    let (a, b) = (inst.a(), inst.b());
    // the two indices other than `k`
    let rest = |k: usize| match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let u = |i: usize, j: usize, k: usize| {
        if i == j {
            a[(i, i)] * b[(k, k)] / 4.0
        } else {
            let (s, t) = rest(k);
            a[(i, j)] * (b[(k, s)] + b[(k, t)] - b[(s, t)]) / 4.0
        }
    };
    let v = |k: usize, l: usize, i: usize| {
        if k == l {
            a[(i, i)] * b[(k, k)] / 4.0
        } else {
            let (s, t) = rest(i);
            b[(k, l)] * (a[(i, s)] + a[(i, t)] - a[(s, t)]) / 4.0
        }
    };
    Ok(Certificate::from_fn(3, u, v))
}

/// Constant-vector certificate for `(A, B) = (C + Δ, -C + Δ)`.
pub fn construct_perturbation(c: &Matrix, delta: &Matrix) -> Result<Certificate> {
    if !c.is_square() || c.rows() != delta.rows() || c.cols() != delta.cols() {
        return arg_err("C and Δ must be square of equal size");
    }
    let n = c.rows();
    let u = |i: usize, j: usize, _: usize| {
        let s = c[(i, j)] + delta[(i, j)];
        -s * s / 4.0 + delta[(i, j)] * delta[(i, j)] / 2.0
    };
    let v = |k: usize, l: usize, _: usize| {
        let s = -c[(k, l)] + delta[(k, l)];
        -s * s / 4.0 + delta[(k, l)] * delta[(k, l)] / 2.0
    };
    Ok(Certificate::from_fn(n, u, v))
}

/// The instance `(C + Δ, -C + Δ)`.
pub fn perturbation_instance(c: &Matrix, delta: &Matrix) -> Result<QapInstance> {
    QapInstance::new(c + delta, &(-c) + delta)
}

/// Certificate for `(A, B) = (adj(gA), -adj(gB))`; valid when `gA` is a subgraph of `gB`.
pub fn construct_subgraph(ga: &Graph, gb: &Graph) -> Result<Certificate> {
    if ga.n() != gb.n() {
        return arg_err("graphs have different vertex counts");
    }
    let adj = ga.adjacency();
    Ok(Certificate::from_fn(
        ga.n(),
        |i, j, _| -adj[(i, j)] / 2.0,
        |_, _, _| 0.0,
    ))
}

pub fn construct_comonotone(inst: &QapInstance) -> Certificate {
    let (a, b) = (inst.a(), inst.b());
    let w = |i: usize, j: usize, _: usize| a[(i, j)] * b[(i, j)] / 4.0;
    Certificate::from_fn(inst.n(), w, w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalConeDecomposition {
    /// Nonnegative with zero diagonal.
    pub w: Matrix,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl NormalConeDecomposition {
    /// `-W + 1 p^T + q 1^T`.
    pub fn compose(&self) -> Matrix {
        let n = self.p.len();
        Matrix::from_fn(n, n, |a, b| -self.w[(a, b)] + self.p[b] + self.q[a])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum Search<T> {
    Found { value: T },
    Infeasible,
    /// The LP solver could not decide.
    Indeterminate { reason: String },
}

impl<T> Search<T> {
    pub fn found(&self) -> Option<&T> {
        match self {
            Search::Found { value } => Some(value),
            _ => None,
        }
    }
}

/// Column layout of the certificate LP: `u`, `v`, off-diagonal `W`, `p`, `q`.
struct Layout {
    n: usize,
}

impl Layout {
    fn pairs(&self) -> usize {
        self.n * (self.n + 1) / 2
    }
    fn u(&self, i: usize, j: usize, k: usize) -> usize {
        slot(i, j, self.n) * self.n + k
    }
    fn v(&self, k: usize, l: usize, i: usize) -> usize {
        (self.pairs() + slot(k, l, self.n)) * self.n + i
    }
    fn w_start(&self) -> usize {
        2 * self.pairs() * self.n
    }
    /// Column of `W[a][b]`, `a != b`.
    fn w(&self, a: usize, b: usize) -> usize {
        let offset = a * (self.n - 1) + if b > a { b - 1 } else { b };
        self.w_start() + offset
    }
    fn p(&self, b: usize) -> usize {
        self.w_start() + self.n * (self.n - 1) + b
    }
    fn q(&self, a: usize) -> usize {
        self.p(self.n) + a
    }
    fn total(&self) -> usize {
        self.q(self.n)
    }
}

/// Adds `-K + W - 1 p^T - q 1^T = -target` where `K` is linear in the
/// certificate columns (or absent, in which case `target` plays `K`).
fn add_cone_rows(lp: &mut LinearProgram, layout: &Layout, target: Option<&Matrix>) {
    let n = layout.n;
    for a in 0..n {
        for b in 0..n {
            let mut row = vec![0.0; lp.num_vars];
            let mut rhs = 0.0;
            match target {
                Some(m) => rhs = -m[(a, b)],
                None => {
                    // K[a][b] = 2 Σ_j u^(aj)_b + 2 Σ_j v^(bj)_a
                    for j in 0..n {
                        row[layout.u(a, j, b)] -= 2.0;
                        row[layout.v(b, j, a)] -= 2.0;
                    }
                }
            }
            if a != b {
                row[layout.w(a, b)] += 1.0;
            }
            row[layout.p(b)] -= 1.0;
            row[layout.q(a)] -= 1.0;
            lp.add_eq(row, rhs);
        }
    }
}

fn extract_decomposition(layout: &Layout, x: &[f64]) -> NormalConeDecomposition {
    let n = layout.n;
    let w = Matrix::from_fn(n, n, |a, b| if a == b { 0.0 } else { x[layout.w(a, b)] });
    NormalConeDecomposition {
        w,
        p: (0..n).map(|b| x[layout.p(b)]).collect(),
        q: (0..n).map(|a| x[layout.q(a)]).collect(),
    }
}

/// Searches for `M = -W + 1 p^T + q 1^T` with `W >= 0`, `diag W = 0`.
pub fn normal_cone_decompose(m: &Matrix) -> Result<Search<NormalConeDecomposition>> {
    if !m.is_square() {
        return arg_err("matrix must be square");
    }
    let n = m.rows();
    // reuse the certificate layout with zero-width certificate blocks
    let layout = Layout { n };
    let mut lp = LinearProgram::new(layout.total());
    for col in 0..layout.w_start() {
        lp.set_bounds(col, Bounds { lower: Some(0.0), upper: Some(0.0) });
    }
    for col in layout.p(0)..layout.total() {
        lp.set_bounds(col, Bounds::FREE);
    }
    add_cone_rows(&mut lp, &layout, Some(m));
    let out = solve_lp(&lp)?;
    Ok(match out.status {
        LpStatus::Optimal => Search::Found {
            value: extract_decomposition(&layout, out.point.as_ref().expect("optimal point")),
        },
        LpStatus::Infeasible => Search::Infeasible,
        other => Search::Indeterminate {
            reason: format!("LP status {other:?} after {} pivots (phase-1 value {:e})", out.pivots, out.phase_one_value),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoundCertificate {
    pub certificate: Certificate,
    pub decomposition: NormalConeDecomposition,
    pub report: CertificateReport,
}

/// LP search for a certificate whose gradient matrix `K` has `-K` in the
/// normal cone of the doubly stochastic matrices at `I` (which implies the
/// permutation requirement). The identity is assumed QAP-optimal; relabel first.
pub fn search_certificate(inst: &QapInstance) -> Result<Search<FoundCertificate>> {
    let n = inst.n();
    let layout = Layout { n };
    let mut lp = LinearProgram::new(layout.total());
    for col in 0..layout.w_start() {
        lp.set_bounds(col, Bounds::FREE);
    }
    for col in layout.p(0)..layout.total() {
        lp.set_bounds(col, Bounds::FREE);
    }
    let (a, b) = (inst.a(), inst.b());
    let coefficients = |i: usize, j: usize, k: usize, l: usize| {
        let mut row = vec![0.0; layout.total()];
        row[layout.u(i, j, k)] += 1.0;
        row[layout.u(i, j, l)] += 1.0;
        row[layout.v(k, l, i)] += 1.0;
        row[layout.v(k, l, j)] += 1.0;
        row
    };
    for_each_req1(n, |i, j, k, l| {
        lp.add_le(coefficients(i, j, k, l), a[(i, j)] * b[(k, l)]);
    });
    for i in 0..n {
        for j in i..n {
            lp.add_eq(coefficients(i, j, i, j), a[(i, j)] * b[(i, j)]);
        }
    }
    add_cone_rows(&mut lp, &layout, None);

    let out = solve_lp(&lp)?;
    match out.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(Search::Infeasible),
        other => {
            return Ok(Search::Indeterminate {
                reason: format!("LP status {other:?} after {} pivots (phase-1 value {:e})", out.pivots, out.phase_one_value),
            })
        }
    }
    let x = out.point.expect("optimal point");
    let certificate = Certificate::from_fn(
        n,
        |i, j, k| x[layout.u(i, j, k)],
        |k, l, i| x[layout.v(k, l, i)],
    );
    let decomposition = extract_decomposition(&layout, &x);
    let report = verify_certificate(inst, &certificate)?;
    if !report.valid {
        return Ok(Search::Indeterminate {
            reason: format!("LP point fails verification: {report:?}"),
        });
    }
    Ok(Search::Found {
        value: FoundCertificate {
            certificate,
            decomposition,
            report,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slots_are_dense() {
        let n = 4;
        let mut seen = vec![false; n * (n + 1) / 2];
        for i in 0..n {
            for j in i..n {
                assert_eq!(slot(i, j, n), slot(j, i, n));
                seen[slot(i, j, n)] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn zero_certificate_fails_on_negative_products() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let inst = QapInstance::new(a.clone(), a.scale(-1.0)).unwrap();
        let r = verify_certificate(&inst, &Certificate::zeros(2)).unwrap();
        assert!(r.req1_margin < 0.0);
        assert!(!r.valid);
    }

    #[test]
    fn json_uses_one_based_pair_keys() {
        let mut cert = Certificate::zeros(2);
        cert.u_mut(1, 0)[1] = 3.5;
        let s = serde_json::to_string(&cert).unwrap();
        assert!(s.contains("\"1,2\":[0.0,3.5]"));
        let back: Certificate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cert);
        assert!(serde_json::from_str::<Certificate>(&s.replace("1,2", "2,1")).is_err());
    }

    #[test]
    fn constant_vectors_have_zero_permutation_margin() {
        let cert = Certificate::from_fn(4, |i, j, _| (i + 2 * j) as f64, |k, l, _| (k * l) as f64 - 1.0);
        assert!(cert.is_subscript_free());
        assert!(permutation_margin(&cert.gradient_matrix()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn normal_cone_simple_members() {
        let lp_row = Matrix::from_fn(3, 3, |_, b| [1.0, -2.0, 0.5][b]);
        assert!(normal_cone_decompose(&lp_row).unwrap().found().is_some());
        let w = Matrix::from_fn(3, 3, |a, b| if a == b { 0.0 } else { (a + b) as f64 });
        assert!(normal_cone_decompose(&w.scale(-1.0)).unwrap().found().is_some());
        // <E - 2I, P_swap - I> = 4 > 0: not in the cone
        let m = &Matrix::ones(2, 2) - &Matrix::identity(2).scale(2.0);
        assert_eq!(normal_cone_decompose(&m).unwrap(), Search::Infeasible);
    }
}
