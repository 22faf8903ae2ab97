//! Splitting solver for the lifted relaxation.
//!
//! Every feasible `Y` satisfies `Y a = 0` for the `2n` vectors `a` encoding
//! `Σ_k x_(i,k) - y_N` and `Σ_i x_(i,k) - y_N`, so `Y = V R V^T` with `V` an
//! orthonormal basis of their common null space. On that face the pair-sum
//! and row/column rows hold identically, leaving a PSD block `R` and an
//! entrywise set (gangster zeros, corner, bounds [0, 1], optional arrow link).
//! The two are coupled by ADMM on `Y = V R V^T` with over-relaxation and
//! residual-balanced penalty updates.
//!
//! Termination is decided by a Lagrangian lower bound. Every feasible `Y`
//! has trace `n + 1`, so for the multiplier `Z` of the coupling,
//! `min_{entrywise set} <C + Z, Y> + (n + 1) λ_min(-V^T Z V)` bounds the
//! optimum from below.

use serde::{Deserialize, Serialize};

use super::problem::{check_assembled, is_gangster, ConicProblem, FeasibilityReport, Variant};
use crate::error::{arg_err, QapError, Result};
use crate::linalg::{sym_eig, sym_eig_warm};
use crate::matrix::Matrix;
use crate::qap::{pidx, LiftedPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on equality-row and fixed-entry violations.
    pub eps_primal: f64,
    /// Bound on negative eigenvalues and negative masked entries.
    pub eps_cone: f64,
    /// Relative gap between the objective and the Lagrangian lower bound
    /// accepted as optimal.
    pub eps_gap: f64,
    /// Iterations between lower-bound evaluations.
    pub check_interval: usize,
    pub max_iterations: usize,
    pub initial_penalty: f64,
    pub relaxation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            eps_primal: 1e-7,
            eps_cone: 1e-8,
            eps_gap: 1e-6,
            check_interval: 10,
            max_iterations: 200_000,
            initial_penalty: 0.3,
            relaxation: 1.6,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConeResiduals {
    pub psd: f64,
    pub nonneg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub y: Matrix,
    pub objective: f64,
    pub primal_residual: f64,
    pub cone_residuals: ConeResiduals,
    /// Relative dual residual at the last iteration.
    pub dual_residual: f64,
    /// Lagrangian lower bound on the optimum from the last evaluation.
    pub lower_bound: f64,
    /// `(objective - lower_bound) / (1 + |objective|)`.
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SolverReport {
    pub fn point(&self) -> LiftedPoint {
        LiftedPoint::from_assembled(&self.y).expect("solver output has order n^2 + 1")
    }
}

/// Orthonormal basis (columns) of the face containing every feasible `Y`,
/// of size `(n^2 + 1) x ((n - 1)^2 + 1)`.
pub fn face_basis(n: usize) -> Result<Matrix> {
    let m = n * n;
    let order = m + 1;
    let mut gram = Matrix::zeros(order, order);
    let mut add = |a: &[f64]| {
        for p in 0..order {
            if a[p] == 0.0 {
                continue;
            }
            for q in 0..order {
                gram[(p, q)] += a[p] * a[q];
            }
        }
    };
    for t in 0..n {
        let mut row = vec![0.0; order];
        let mut col = vec![0.0; order];
        for s in 0..n {
            row[pidx(t, s, n)] = 1.0;
            col[pidx(s, t, n)] = 1.0;
        }
        row[m] = -1.0;
        col[m] = -1.0;
        add(&row);
        add(&col);
    }
    let eig = sym_eig(&gram)?;
    let dim = (n - 1) * (n - 1) + 1;
    let cutoff = 1e-9 * eig.values.last().copied().unwrap_or(1.0).max(1.0);
    let kept: Vec<usize> = (0..order).filter(|&j| eig.values[j] <= cutoff).collect();
    if kept.len() != dim {
        return Err(QapError::NonConvergence {
            what: "face basis",
            iterations: kept.len(),
        });
    }
    Ok(Matrix::from_fn(order, dim, |i, c| eig.vectors[(i, kept[c])]))
}

#[derive(Clone, Copy, PartialEq)]
enum EntryRule {
    Free,
    Zero,
    One,
}

struct Workspace {
    n: usize,
    order: usize,
    rank: usize,
    basis: Matrix,
    cost: Matrix,
    rules: Vec<EntryRule>,
    arrow: bool,
}

impl Workspace {
    fn new(prob: &ConicProblem) -> Result<Self> {
        let n = prob.n;
        if n < 2 {
            return arg_err("the relaxation needs n >= 2");
        }
        let order = prob.order();
        if prob.cost.rows() != order || prob.cost.cols() != order {
            return arg_err("cost matrix order does not match n");
        }
        if !prob.cost.is_finite() {
            return Err(QapError::NonFinite);
        }
        let m = n * n;
        let basis = face_basis(n)?;
        let rank = basis.cols();
        let scale = prob.cost.max_abs().max(1.0);
        let mut rules = vec![EntryRule::Free; order * order];
        for p in 0..m {
            for q in 0..m {
                if is_gangster(p, q, n) {
                    rules[p * order + q] = EntryRule::Zero;
                }
            }
        }
        rules[m * order + m] = EntryRule::One;
        Ok(Workspace {
            n,
            order,
            rank,
            basis,
            cost: prob.cost.scale(1.0 / scale),
            rules,
            arrow: prob.variant == Variant::WithArrow,
        })
    }

    /// Average of all lifted permutations.
    fn barycenter(&self) -> Matrix {
        let n = self.n;
        let m = n * n;
        let nf = n as f64;
        Matrix::from_fn(self.order, self.order, |p, q| {
            if p == m || q == m {
                if p == q {
                    1.0
                } else {
                    1.0 / nf
                }
            } else if p == q {
                1.0 / nf
            } else if is_gangster(p, q, n) {
                0.0
            } else {
                1.0 / (nf * (nf - 1.0))
            }
        })
    }

    /// Nearest point of the entrywise set, in place.
    fn project_entrywise(&self, y: &mut Matrix) {
        let order = self.order;
        let m = order - 1;
        let data = y.as_mut_slice();
        if self.arrow {
            // average the linked triple first; the bounds then act on all three alike
            for p in 0..m {
                let a = (data[p * order + p] + data[p * order + m] + data[m * order + p]) / 3.0;
                data[p * order + p] = a;
                data[p * order + m] = a;
                data[m * order + p] = a;
            }
        }
        for (v, rule) in data.iter_mut().zip(&self.rules) {
            *v = match rule {
                EntryRule::Zero => 0.0,
                EntryRule::One => 1.0,
                EntryRule::Free => v.clamp(0.0, 1.0),
            };
        }
    }
}

impl Workspace {
    /// `min <G, Y>` over the entrywise set.
    fn entrywise_min(&self, g: &Matrix) -> f64 {
        let order = self.order;
        let m = order - 1;
        let data = g.as_slice();
        let mut total = 0.0;
        for (idx, (v, rule)) in data.iter().zip(&self.rules).enumerate() {
            let (p, q) = (idx / order, idx % order);
            if self.arrow && p != q && (p == m || q == m) || self.arrow && p == q && p < m {
                continue;
            }
            total += match rule {
                EntryRule::Zero => 0.0,
                EntryRule::One => *v,
                EntryRule::Free => v.min(0.0),
            };
        }
        if self.arrow {
            for p in 0..m {
                total += (data[p * order + p] + data[p * order + m] + data[m * order + p]).min(0.0);
            }
        }
        total
    }

    /// Lagrangian lower bound (in scaled cost units) for multiplier `z`.
    fn lower_bound(&self, z: &Matrix) -> Result<f64> {
        let nf = self.n as f64;
        let reduced = self.basis.t_matmul(&z.matmul(&self.basis)).symmetrized().scale(-1.0);
        let lambda = crate::linalg::min_eigenvalue(&reduced)?;
        Ok(self.entrywise_min(&(&self.cost + z)) + (nf + 1.0) * lambda)
    }
}

fn frobenius_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Violations of the entrywise constraints on a face point `W`:
/// `(fixed-entry violation, negative-entry violation)`.
fn entrywise_violations(ws: &Workspace, w: &Matrix) -> (f64, f64) {
    let mut fixed: f64 = 0.0;
    let mut negative: f64 = 0.0;
    for (v, rule) in w.as_slice().iter().zip(&ws.rules) {
        match rule {
            EntryRule::Zero => fixed = fixed.max(v.abs()),
            EntryRule::One => fixed = fixed.max((v - 1.0).abs()),
            EntryRule::Free => negative = negative.max(-v),
        }
    }
    if ws.arrow {
        let order = ws.order;
        let m = order - 1;
        for p in 0..m {
            fixed = fixed.max((w[(p, p)] - w[(p, m)]).abs());
        }
    }
    (fixed, negative)
}

fn within_tolerance(feas: &FeasibilityReport, opts: &SolverOptions) -> bool {
    feas.max_linear() <= opts.eps_primal
        && feas.psd_violation() <= opts.eps_cone
        && feas.nonneg <= opts.eps_cone
}

/// Solves the relaxation produced by `build_relaxation`.
///
/// The returned `Y` lies on the face exactly (up to rounding) and is PSD; its
/// distance to the entrywise set is what `primal_residual` and the nonneg
/// cone residual measure.
pub fn solve_relaxation(prob: &ConicProblem, opts: &SolverOptions) -> Result<SolverReport> {
    let ws = Workspace::new(prob)?;
    let order = ws.order;
    let rank = ws.rank;
    let v = &ws.basis;
    let vt = v.transpose();

    let mut beta = opts.initial_penalty;
    let mut y = ws.barycenter();
    let mut z = Matrix::zeros(order, order);
    let mut w = y.clone();
    let mut eig_basis = Matrix::identity(rank);
    let scale = prob.cost.max_abs().max(1.0);
    let mut bound = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut dual_rel = f64::INFINITY;
    let alpha = opts.relaxation;
    let mut next_full_check = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        // PSD step on the face
        let mut shifted = z.scale(1.0 / beta);
        for (s, yv) in shifted.as_mut_slice().iter_mut().zip(y.as_slice()) {
            *s += yv;
        }
        let reduced = vt.matmul(&shifted.matmul(v)).symmetrized();
        let eig = sym_eig_warm(&reduced, &eig_basis)?;
        let positive: Vec<usize> = (0..rank).filter(|&j| eig.values[j] > 0.0).collect();
        // W = F F^T with F = V Q_+ diag(sqrt(λ_+))
        let mut factor = Matrix::zeros(order, positive.len());
        if !positive.is_empty() {
            let q_plus = Matrix::from_fn(rank, positive.len(), |i, c| {
                eig.vectors[(i, positive[c])] * eig.values[positive[c]].sqrt()
            });
            factor = v.matmul(&q_plus);
        }
        eig_basis = eig.vectors;
        w = factor.matmul(&factor.transpose());

        // entrywise step on the relaxed point
        let y_prev = y;
        let mut relaxed = w.scale(alpha);
        for (r, yp) in relaxed.as_mut_slice().iter_mut().zip(y_prev.as_slice()) {
            *r += (1.0 - alpha) * yp;
        }
        y = Matrix::from_fn(order, order, |p, q| {
            relaxed[(p, q)] - (z[(p, q)] + ws.cost[(p, q)]) / beta
        });
        ws.project_entrywise(&mut y);
        for ((zv, yv), rv) in z
            .as_mut_slice()
            .iter_mut()
            .zip(y.as_slice())
            .zip(relaxed.as_slice())
        {
            *zv += beta * (yv - rv);
        }

        let primal = frobenius_diff(&y, &w);
        let step = vt.matmul(&(&y - &y_prev).matmul(v)).frobenius_norm();
        let dual = beta * step;
        let primal_rel = primal / (1.0 + w.frobenius_norm().max(y.frobenius_norm()));
        dual_rel = dual / (1.0 + z.frobenius_norm());

        let (fixed, negative) = entrywise_violations(&ws, &w);
        if fixed <= opts.eps_primal && negative <= opts.eps_cone && iterations >= next_full_check {
            next_full_check = iterations + opts.check_interval.max(1);
            let objective = ws.cost.dot(&w);
            bound = bound.max(ws.lower_bound(&z)?);
            let gap = (objective - bound) / (1.0 + objective.abs());
            // the cheap test skips rows implied only approximately (trace rows)
            if gap <= opts.eps_gap && within_tolerance(&check_assembled(prob, &w)?, opts) {
                converged = true;
                break;
            }
        }

        if iterations % 20 == 0 {
            if primal_rel > 10.0 * dual_rel && beta < 1e6 {
                beta *= 2.0;
            } else if dual_rel > 10.0 * primal_rel && beta > 1e-6 {
                beta /= 2.0;
            }
        }
    }

    let feas = check_assembled(prob, &w)?;
    let converged = converged && within_tolerance(&feas, opts);
    let objective = prob.objective(&w);
    let lower_bound = bound * scale;
    let cone_residuals = ConeResiduals {
        psd: feas.psd_violation(),
        nonneg: feas.nonneg,
    };
    let primal_residual = feas.max_linear();
    Ok(SolverReport {
        objective,
        duality_gap: (objective - lower_bound) / (1.0 + objective.abs()),
        lower_bound,
        y: w,
        primal_residual,
        cone_residuals,
        dual_residual: dual_rel,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_basis_is_orthonormal_and_annihilates_sums() {
        for n in 2..=4 {
            let v = face_basis(n).unwrap();
            let gram = v.t_matmul(&v);
            assert!((&gram - &Matrix::identity(v.cols())).max_abs() < 1e-12);
            let m = n * n;
            for c in 0..v.cols() {
                for t in 0..n {
                    let row: f64 = (0..n).map(|s| v[(pidx(t, s, n), c)]).sum::<f64>() - v[(m, c)];
                    let col: f64 = (0..n).map(|s| v[(pidx(s, t, n), c)]).sum::<f64>() - v[(m, c)];
                    assert!(row.abs() < 1e-12 && col.abs() < 1e-12);
                }
            }
        }
    }
}
