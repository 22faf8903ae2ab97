//! The inexact six-vertex instance and the non-closed dual set example.

use qap_exact::duality::{
    closure_conditions, geometric_example, predicted_eigenvector, predicted_min_eigenvalue,
    slater_point, t_membership, ClosureConditions, SMember, TMembership,
};
use qap_exact::linalg::min_eigenvalue;
use qap_exact::oracle::brute_force_qap;
use qap_exact::sdp::{
    build_relaxation, check_feasibility, counterexample_instance, decide_exactness,
    solve_relaxation, ExactnessCriterion, ExactnessTolerances, ExactnessVerdict,
    FeasibilityReport, SolverOptions, Variant,
};
use qap_exact::{Matrix, Permutation};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiment::REPORT_VERSION;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub version: u32,
    pub qap_optimum: f64,
    pub qap_optimal_permutation: Permutation,
    pub point_feasibility: FeasibilityReport,
    pub point_max_violation: f64,
    pub point_objective: f64,
    pub solver_objective: f64,
    pub solver_lower_bound: f64,
    pub solver_converged: bool,
    pub solver_iterations: usize,
    pub verdict: ExactnessVerdict,
    /// `qap_optimum - solver_objective`.
    pub gap: f64,
}

pub fn demo_counterexample(opts: &SolverOptions) -> Result<CounterexampleReport> {
    let (inst, point) = counterexample_instance();
    let bf = brute_force_qap(&inst)?;
    let prob = build_relaxation(&inst, Variant::Standard)?;
    let feas = check_feasibility(&prob, &point)?;
    let report = solve_relaxation(&prob, opts)?;
    let criterion = ExactnessCriterion::ObjectiveMatch {
        qap_optimum: bf.best_value,
    };
    let verdict = decide_exactness(&inst, &report, criterion, &ExactnessTolerances::default())?;
    Ok(CounterexampleReport {
        version: REPORT_VERSION,
        qap_optimum: bf.best_value,
        qap_optimal_permutation: bf.best_sigma,
        point_max_violation: feas.max_violation(),
        point_feasibility: feas,
        point_objective: point.objective(&inst),
        solver_objective: report.objective,
        solver_lower_bound: report.lower_bound,
        solver_converged: report.converged,
        solver_iterations: report.iterations,
        gap: bf.best_value - report.objective,
        verdict,
    })
}

/// Shifts at which the block eigenvalue is tabulated.
pub const SHIFT_GRID: [f64; 8] = [-10.0, -5.0, -1.0, 0.0, 0.5, 1.0, 5.0, 10.0];
/// Sequence indices tabulated for the limit construction.
pub const SEQUENCE_GRID: [u64; 4] = [1, 10, 100, 1000];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub s: f64,
    pub numeric: f64,
    pub predicted: f64,
    /// `‖(-P + sE)v - λv‖ / ‖v‖` for the closed-form eigenvector.
    pub eigenvector_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    pub k: u64,
    /// `max |P_k - P|`.
    pub deviation: f64,
    /// Smallest eigenvalue of `G_k⊗E + E⊗H_k + P_k`.
    pub min_eigenvalue: f64,
    /// `max |G_k⊗E + E⊗H_k + P_k|`, the scale of the eigenvalue test.
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub version: u32,
    pub block: Matrix,
    pub eigen_rows: Vec<EigenRow>,
    pub sequence_rows: Vec<SequenceRow>,
    pub closure: ClosureConditions,
    pub permutation_condition: TMembership,
    /// `λ_min` of the Slater slack matrix, at least 1.
    pub slater_min_eigenvalue: f64,
}

impl GeometryReport {
    /// Deviation at the largest tabulated `k` over the deviation at `k = 1`.
    pub fn decay_ratio(&self) -> f64 {
        let first = self.sequence_rows.first().map_or(f64::NAN, |r| r.deviation);
        let last = self.sequence_rows.last().map_or(f64::NAN, |r| r.deviation);
        last / first
    }
}

pub fn demo_geometry() -> Result<GeometryReport> {
    let ex = geometric_example();
    let mut eigen_rows = Vec::with_capacity(SHIFT_GRID.len());
    for s in SHIFT_GRID {
        let numeric = ex.shifted_min_eigenvalue(s)?;
        let predicted = predicted_min_eigenvalue(s);
        let m = &ex.block.scale(-1.0) + &Matrix::ones(4, 4).scale(s);
        let v = predicted_eigenvector(s);
        let mv = m.mat_vec(&v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let residual = mv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - predicted * b).powi(2))
            .sum::<f64>()
            .sqrt()
            / norm;
        eigen_rows.push(EigenRow {
            s,
            numeric,
            predicted,
            eigenvector_residual: residual,
        });
    }
    let member = SMember::from_certificate(&ex.certificate);
    let mut sequence_rows = Vec::with_capacity(SEQUENCE_GRID.len());
    for k in SEQUENCE_GRID {
        let term = member.term(k)?;
        let lifted = term.lifted();
        sequence_rows.push(SequenceRow {
            k,
            deviation: (&term.p - &member.target).max_abs(),
            min_eigenvalue: min_eigenvalue(&lifted)?,
            magnitude: lifted.max_abs(),
        });
    }
    let slater = slater_point(&ex.instance)?;
    Ok(GeometryReport {
        version: REPORT_VERSION,
        block: ex.block.clone(),
        eigen_rows,
        sequence_rows,
        closure: closure_conditions(&ex.z, 4)?,
        permutation_condition: t_membership(&ex.certificate)?,
        slater_min_eigenvalue: slater.feasibility(&ex.instance)?.min_eigenvalue,
    })
}
