//! The lifted SDP relaxation: constraint catalogue, solver, feasibility
//! checks and the exactness decision.

mod problem;
mod solver;

pub use problem::{
    build_relaxation, check_assembled, check_feasibility, marginal_residual, ConicProblem, EqRow,
    FeasibilityReport, FixedEntry, FixedKind, RowFamily, Variant,
};
pub use solver::{face_basis, solve_relaxation, ConeResiduals, SolverOptions, SolverReport};

use serde::{Deserialize, Serialize};

use crate::assignment::{permutation_deviation, round_to_permutation};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::qap::{objective_unchecked, LiftedPoint, Permutation, QapInstance};

pub const TOL_EXACT: f64 = 1e-4;
pub const TOL_PERM: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactnessCriterion {
    /// SDP value equals the known QAP optimum.
    ObjectiveMatch { qap_optimum: f64 },
    /// The SDP solution rounds to a permutation it is already close to, and
    /// that permutation attains the SDP value.
    PermutationSolution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Exact,
    NotExact,
    /// The solver did not converge; no claim is made.
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactnessTolerances {
    pub tol_exact: f64,
    pub tol_perm: f64,
}

impl Default for ExactnessTolerances {
    fn default() -> Self {
        ExactnessTolerances {
            tol_exact: TOL_EXACT,
            tol_perm: TOL_PERM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactnessVerdict {
    pub criterion: ExactnessCriterion,
    pub verdict: Verdict,
    pub sdp_value: f64,
    /// Value the SDP objective was compared against.
    pub reference_value: Option<f64>,
    /// `|sdp - reference|` and the allowed `tol_exact (1 + |reference|)`.
    pub objective_gap: Option<f64>,
    pub objective_tolerance: Option<f64>,
    pub rounded: Option<Permutation>,
    /// `max |X - P|` for the rounded permutation.
    pub deviation: Option<f64>,
}

pub fn decide_exactness(
    inst: &QapInstance,
    report: &SolverReport,
    criterion: ExactnessCriterion,
    tol: &ExactnessTolerances,
) -> Result<ExactnessVerdict> {
    let mut out = ExactnessVerdict {
        criterion,
        verdict: Verdict::Indeterminate,
        sdp_value: report.objective,
        reference_value: None,
        objective_gap: None,
        objective_tolerance: None,
        rounded: None,
        deviation: None,
    };
    let reference = match criterion {
        ExactnessCriterion::ObjectiveMatch { qap_optimum } => qap_optimum,
        ExactnessCriterion::PermutationSolution => {
            let x = report.point().x;
            let sigma = round_to_permutation(&x)?;
            let deviation = permutation_deviation(&x, &sigma);
            let value = objective_unchecked(inst, sigma.as_slice());
            out.rounded = Some(sigma);
            out.deviation = Some(deviation);
            if deviation > tol.tol_perm && report.converged {
                out.reference_value = Some(value);
                out.verdict = Verdict::NotExact;
                return Ok(out);
            }
            value
        }
    };
    let gap = (report.objective - reference).abs();
    let allowed = tol.tol_exact * (1.0 + reference.abs());
    out.reference_value = Some(reference);
    out.objective_gap = Some(gap);
    out.objective_tolerance = Some(allowed);
    if report.converged {
        out.verdict = if gap <= allowed {
            Verdict::Exact
        } else {
            Verdict::NotExact
        };
    }
    Ok(out)
}

fn counterexample_blocks() -> [Matrix; 3] {
    let y1 = Matrix::identity(6).scale(8.0);
    let y2 = Matrix::from_rows(&[
        vec![0.0, 4.0, 1.0, 1.0, 1.0, 1.0],
        vec![4.0, 0.0, 1.0, 1.0, 1.0, 1.0],
        vec![1.0, 1.0, 0.0, 4.0, 1.0, 1.0],
        vec![1.0, 1.0, 4.0, 0.0, 1.0, 1.0],
        vec![1.0, 1.0, 1.0, 1.0, 0.0, 4.0],
        vec![1.0, 1.0, 1.0, 1.0, 4.0, 0.0],
    ]);
    let y3 = Matrix::from_rows(&[
        vec![0.0, 0.0, 2.0, 2.0, 2.0, 2.0],
        vec![0.0, 0.0, 2.0, 2.0, 2.0, 2.0],
        vec![2.0, 2.0, 0.0, 0.0, 2.0, 2.0],
        vec![2.0, 2.0, 0.0, 0.0, 2.0, 2.0],
        vec![2.0, 2.0, 2.0, 2.0, 0.0, 0.0],
        vec![2.0, 2.0, 2.0, 2.0, 0.0, 0.0],
    ]);
    [y1, y2, y3]
}

/// The inexact `n = 6` instance: `A` is a perfect matching, `-B` a triangle,
/// with the fractional point `X = E/6` and the printed block matrix.
///
/// Block `(I, J)` of the 36x36 matrix is selected by the group pattern
/// `{1,2,3}`, `{4,5,6}`: `Y1` on the diagonal, `Y2` within a group and `Y3`
/// across groups, all scaled by 1/48. Blocks are indexed by the second pair
/// index (column-stacking order): entry `((i,k),(j,l))` of `𝐗` is entry
/// `(i,j)` of block `(k,l)`.
pub fn counterexample_instance() -> (QapInstance, LiftedPoint) {
    let n = 6;
    let mut a = Matrix::zeros(n, n);
    for (i, j) in [(0, 1), (2, 3), (4, 5)] {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    let mut b = Matrix::zeros(n, n);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        b[(i, j)] = -1.0;
        b[(j, i)] = -1.0;
    }
    let inst = QapInstance::new(a, b).expect("symmetric data");
    let [y1, y2, y3] = counterexample_blocks();
    let big_x = Matrix::from_fn(n * n, n * n, |p, q| {
        let (i, k) = (p / n, p % n);
        let (j, l) = (q / n, q % n);
        let block = if k == l {
            &y1
        } else if k / 3 == l / 3 {
            &y2
        } else {
            &y3
        };
        block[(i, j)] / 48.0
    });
    let x = Matrix::ones(n, n).scale(1.0 / 6.0);
    (inst, LiftedPoint { x, big_x })
}
