use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::linalg::min_eigenvalue;
use crate::matrix::Matrix;
use crate::qap::{pidx, LiftedPoint, QapInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Standard,
    /// Adds `Y_pp = Y_pN` linking rows and per-row trace rows.
    WithArrow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowFamily {
    /// `Σ_{i,j} Y[(i,k),(j,l)] = 1`.
    PairSumFirst,
    /// `Σ_{i,j} Y[(k,i),(l,j)] = 1`.
    PairSumSecond,
    /// `Σ_k x_(i,k) = 1`.
    RowSum,
    /// `Σ_i x_(i,k) = 1`.
    ColumnSum,
    Corner,
    Arrow,
    Trace,
}

/// One linear equality `Σ coeff · Y[p][q] = rhs` over a symmetric `Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqRow {
    pub family: RowFamily,
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: f64,
}

impl EqRow {
    pub fn evaluate(&self, y: &Matrix) -> f64 {
        self.entries.iter().map(|&(p, q, c)| c * y[(p, q)]).sum()
    }

    pub fn residual(&self, y: &Matrix) -> f64 {
        (self.evaluate(y) - self.rhs).abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedKind {
    Gangster,
    Corner,
}

/// Entry `Y[p][q] = Y[q][p] = value`, stored with `p <= q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedEntry {
    pub kind: FixedKind,
    pub p: usize,
    pub q: usize,
    pub value: f64,
}

/// The lifted relaxation over `Y = [[𝐗, x], [x^T, 1]]` of order `n^2 + 1`.
///
/// All positions are 0-based; the last row and column hold `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub n: usize,
    pub variant: Variant,
    pub cost: Matrix,
    pub eq_rows: Vec<EqRow>,
    /// Upper-triangle positions `(p, q)`, `p <= q`, constrained to be nonnegative.
    pub nonneg_mask: Vec<(usize, usize)>,
    pub fixed_entries: Vec<FixedEntry>,
}

impl ConicProblem {
    /// Matrix order `n^2 + 1`.
    pub fn order(&self) -> usize {
        self.n * self.n + 1
    }

    pub fn objective(&self, y: &Matrix) -> f64 {
        self.cost.dot(y)
    }

    pub fn rows_of(&self, family: RowFamily) -> impl Iterator<Item = &EqRow> {
        self.eq_rows.iter().filter(move |r| r.family == family)
    }

    /// JSON fixture with 1-based positions.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.shifted(|v| v + 1))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ConicProblem = serde_json::from_str(s)?;
        let order = file.order();
        if file.cost.rows() != order || file.cost.cols() != order {
            return arg_err("cost matrix order does not match n");
        }
        let in_range = |p: usize, q: usize| (1..=order).contains(&p) && (1..=order).contains(&q);
        let rows_ok = file
            .eq_rows
            .iter()
            .all(|r| r.entries.iter().all(|&(p, q, _)| in_range(p, q)));
        let fixed_ok = file.fixed_entries.iter().all(|f| in_range(f.p, f.q));
        let mask_ok = file.nonneg_mask.iter().all(|&(p, q)| in_range(p, q));
        if !(rows_ok && fixed_ok && mask_ok) {
            return arg_err("constraint position out of range");
        }
        Ok(file.shifted(|v| v - 1))
    }

    fn shifted(&self, f: impl Fn(usize) -> usize) -> ConicProblem {
        let mut out = self.clone();
        for row in &mut out.eq_rows {
            for e in &mut row.entries {
                e.0 = f(e.0);
                e.1 = f(e.1);
            }
        }
        for fixed in &mut out.fixed_entries {
            fixed.p = f(fixed.p);
            fixed.q = f(fixed.q);
        }
        for m in &mut out.nonneg_mask {
            *m = (f(m.0), f(m.1));
        }
        out
    }
}

/// Whether `(p, q)` is a gangster position: two pairs sharing a first index
/// or a second index but not both.
pub(crate) fn is_gangster(p: usize, q: usize, n: usize) -> bool {
    if p == q {
        return false;
    }
    let (i, k) = (p / n, p % n);
    let (j, l) = (q / n, q % n);
    i == j || k == l
}

/// Builds the relaxation for `inst`. `n >= 2` is required.
pub fn build_relaxation(inst: &QapInstance, variant: Variant) -> Result<ConicProblem> {
    let n = inst.n();
    if n < 2 {
        return arg_err("the relaxation needs n >= 2");
    }
    let m = n * n;
    let corner = m;
    let mut cost = Matrix::zeros(m + 1, m + 1);
    cost.set_block(0, 0, &inst.cost_tensor());

    let mut eq_rows = Vec::with_capacity(2 * m + 2 * n + 1 + (m + n) * 2);
    for (family, first) in [(RowFamily::PairSumFirst, true), (RowFamily::PairSumSecond, false)] {
        for k in 0..n {
            for l in 0..n {
                let mut entries = Vec::with_capacity(m);
                for i in 0..n {
                    for j in 0..n {
                        let (p, q) = if first {
                            (pidx(i, k, n), pidx(j, l, n))
                        } else {
                            (pidx(k, i, n), pidx(l, j, n))
                        };
                        entries.push((p, q, 1.0));
                    }
                }
                eq_rows.push(EqRow {
                    family,
                    entries,
                    rhs: 1.0,
                });
            }
        }
    }
    for i in 0..n {
        eq_rows.push(EqRow {
            family: RowFamily::RowSum,
            entries: (0..n).map(|k| (pidx(i, k, n), corner, 1.0)).collect(),
            rhs: 1.0,
        });
    }
    for k in 0..n {
        eq_rows.push(EqRow {
            family: RowFamily::ColumnSum,
            entries: (0..n).map(|i| (pidx(i, k, n), corner, 1.0)).collect(),
            rhs: 1.0,
        });
    }
    eq_rows.push(EqRow {
        family: RowFamily::Corner,
        entries: vec![(corner, corner, 1.0)],
        rhs: 1.0,
    });
    if variant == Variant::WithArrow {
        for p in 0..m {
            eq_rows.push(EqRow {
                family: RowFamily::Arrow,
                entries: vec![(p, p, 1.0), (p, corner, -1.0)],
                rhs: 0.0,
            });
        }
        for i in 0..n {
            eq_rows.push(EqRow {
                family: RowFamily::Trace,
                entries: (0..n)
                    .map(|k| (pidx(i, k, n), pidx(i, k, n), 1.0))
                    .collect(),
                rhs: 1.0,
            });
        }
    }

    let mut fixed_entries = Vec::new();
    let mut nonneg_mask = Vec::new();
    for p in 0..m {
        for q in p..m {
            if is_gangster(p, q, n) {
                fixed_entries.push(FixedEntry {
                    kind: FixedKind::Gangster,
                    p,
                    q,
                    value: 0.0,
                });
            }
            nonneg_mask.push((p, q));
        }
        nonneg_mask.push((p, corner));
    }
    fixed_entries.push(FixedEntry {
        kind: FixedKind::Corner,
        p: corner,
        q: corner,
        value: 1.0,
    });

    Ok(ConicProblem {
        n,
        variant,
        cost,
        eq_rows,
        nonneg_mask,
        fixed_entries,
    })
}

/// Per-family maximum violations of a candidate point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub pair_sum: f64,
    pub row_column_sum: f64,
    pub corner: f64,
    /// Arrow and trace rows; zero for the standard variant.
    pub arrow: f64,
    pub gangster: f64,
    /// Largest negative masked entry, as a positive number.
    pub nonneg: f64,
    pub asymmetry: f64,
    pub min_eigenvalue: f64,
}

impl FeasibilityReport {
    /// Largest violation over the equality rows and fixed entries.
    pub fn max_linear(&self) -> f64 {
        self.pair_sum
            .max(self.row_column_sum)
            .max(self.corner)
            .max(self.arrow)
            .max(self.gangster)
    }

    /// Largest violation of any constraint, counting a negative eigenvalue.
    pub fn max_violation(&self) -> f64 {
        self.max_linear()
            .max(self.nonneg)
            .max(self.asymmetry)
            .max(self.psd_violation())
    }

    pub fn psd_violation(&self) -> f64 {
        (-self.min_eigenvalue).max(0.0)
    }
}

pub fn check_feasibility(prob: &ConicProblem, point: &LiftedPoint) -> Result<FeasibilityReport> {
    if point.n() != prob.n || point.big_x.rows() != prob.n * prob.n || !point.big_x.is_square() {
        return arg_err("point dimensions do not match the problem");
    }
    check_assembled(prob, &point.assemble())
}

/// Same as [`check_feasibility`] for an already assembled `Y`.
pub fn check_assembled(prob: &ConicProblem, y: &Matrix) -> Result<FeasibilityReport> {
    let order = prob.order();
    if y.rows() != order || y.cols() != order {
        return arg_err("matrix order does not match the problem");
    }
    let mut r = FeasibilityReport::default();
    for row in &prob.eq_rows {
        let v = row.residual(y);
        let slot = match row.family {
            RowFamily::PairSumFirst | RowFamily::PairSumSecond => &mut r.pair_sum,
            RowFamily::RowSum | RowFamily::ColumnSum => &mut r.row_column_sum,
            RowFamily::Corner => &mut r.corner,
            RowFamily::Arrow | RowFamily::Trace => &mut r.arrow,
        };
        *slot = slot.max(v);
    }
    for f in &prob.fixed_entries {
        let v = (y[(f.p, f.q)] - f.value).abs().max((y[(f.q, f.p)] - f.value).abs());
        match f.kind {
            FixedKind::Gangster => r.gangster = r.gangster.max(v),
            FixedKind::Corner => r.corner = r.corner.max(v),
        }
    }
    for &(p, q) in &prob.nonneg_mask {
        r.nonneg = r.nonneg.max(-y[(p, q)]).max(-y[(q, p)]);
    }
    r.asymmetry = y.max_asymmetry();
    r.min_eigenvalue = min_eigenvalue(&y.symmetrized())?;
    Ok(r)
}

/// Largest violation of the implied marginals `Σ_i 𝐗[(i,j),(k,l)] = X_kl` and
/// `Σ_i 𝐗[(j,i),(k,l)] = X_kl` over all `j, k, l`.
pub fn marginal_residual(point: &LiftedPoint) -> f64 {
    let n = point.n();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for l in 0..n {
            let q = pidx(k, l, n);
            let target = point.x[(k, l)];
            for j in 0..n {
                let first: f64 = (0..n).map(|i| point.big_x[(pidx(i, j, n), q)]).sum();
                let second: f64 = (0..n).map(|i| point.big_x[(pidx(j, i, n), q)]).sum();
                worst = worst
                    .max((first - target).abs())
                    .max((second - target).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::all_permutations;
    use crate::qap::lift_permutation;

    fn zero_instance(n: usize) -> QapInstance {
        QapInstance::new(Matrix::zeros(n, n), Matrix::zeros(n, n)).unwrap()
    }

    #[test]
    fn catalogue_sizes() {
        for n in 2..=5 {
            let prob = build_relaxation(&zero_instance(n), Variant::Standard).unwrap();
            assert_eq!(prob.eq_rows.len(), 2 * n * n + 2 * n + 1);
            assert_eq!(prob.order(), n * n + 1);
            let arrow = build_relaxation(&zero_instance(n), Variant::WithArrow).unwrap();
            assert_eq!(arrow.eq_rows.len(), 3 * n * n + 3 * n + 1);
        }
    }

    #[test]
    fn gangster_count_n2() {
        let prob = build_relaxation(&zero_instance(2), Variant::Standard).unwrap();
        let upper = prob
            .fixed_entries
            .iter()
            .filter(|f| f.kind == FixedKind::Gangster)
            .count();
        // 4 unordered positions, 8 counting both (p,q) and (q,p)
        assert_eq!(upper, 4);
        assert_eq!(2 * upper, 2 * 2 * (4 - 2));
    }

    #[test]
    fn pair_sum_row_pattern() {
        let n = 3;
        let prob = build_relaxation(&zero_instance(n), Variant::Standard).unwrap();
        let (k, l) = (0, 2);
        let row = prob.rows_of(RowFamily::PairSumFirst).nth(k * n + l).unwrap();
        assert_eq!(row.rhs, 1.0);
        assert_eq!(row.entries.len(), n * n);
        for i in 0..n {
            for j in 0..n {
                assert!(row.entries.contains(&(pidx(i, k, n), pidx(j, l, n), 1.0)));
            }
        }
    }

    #[test]
    fn lifted_permutations_are_feasible() {
        let prob = build_relaxation(&zero_instance(3), Variant::WithArrow).unwrap();
        for sigma in all_permutations(3) {
            let r = check_feasibility(&prob, &lift_permutation(&sigma)).unwrap();
            assert_eq!(r.max_linear(), 0.0);
            assert_eq!(r.nonneg, 0.0);
            assert!(r.min_eigenvalue > -1e-12);
            assert_eq!(marginal_residual(&lift_permutation(&sigma)), 0.0);
        }
    }

    #[test]
    fn perturbed_row_sum_is_reported() {
        let prob = build_relaxation(&zero_instance(3), Variant::Standard).unwrap();
        let mut point = lift_permutation(&crate::qap::Permutation::identity(3));
        point.x.as_mut_slice()[1] += 0.1;
        let r = check_feasibility(&prob, &point).unwrap();
        assert!((r.row_column_sum - 0.1).abs() < 1e-12);
        assert_eq!(r.pair_sum, 0.0);
    }

    #[test]
    fn json_roundtrip_rejects_bad_positions() {
        let prob = build_relaxation(&zero_instance(2), Variant::Standard).unwrap();
        let s = prob.to_json().unwrap();
        assert_eq!(ConicProblem::from_json(&s).unwrap(), prob);
        let bad = s.replacen("\"p\":1", "\"p\":99", 1);
        assert_ne!(bad, s);
        assert!(ConicProblem::from_json(&bad).is_err());
    }
}
