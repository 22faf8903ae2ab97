//! Single-instance `solve` and `certify`.

use qap_exact::certify::{search_certificate, verify_certificate, Certificate, CertificateReport, Search};
use qap_exact::oracle::{brute_force_qap, MAX_BRUTE_FORCE_N};
use qap_exact::qap::relabel;
use qap_exact::sdp::{
    build_relaxation, decide_exactness, solve_relaxation, ExactnessCriterion, ExactnessTolerances,
    ExactnessVerdict, SolverOptions, Variant,
};
use qap_exact::{Permutation, QapInstance};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiment::REPORT_VERSION;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub version: u32,
    pub n: usize,
    pub variant: Variant,
    pub objective: f64,
    pub lower_bound: f64,
    pub primal_residual: f64,
    pub psd_residual: f64,
    pub nonneg_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub x: Vec<Vec<f64>>,
    pub permutation_verdict: ExactnessVerdict,
    /// Present when `n` is small enough to enumerate.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub qap_optimum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objective_verdict: Option<ExactnessVerdict>,
}

pub fn solve_instance(inst: &QapInstance, variant: Variant, opts: &SolverOptions) -> Result<SolveOutput> {
    let report = solve_relaxation(&build_relaxation(inst, variant)?, opts)?;
    let tol = ExactnessTolerances::default();
    let permutation_verdict =
        decide_exactness(inst, &report, ExactnessCriterion::PermutationSolution, &tol)?;
    let (qap_optimum, objective_verdict) = if inst.n() <= MAX_BRUTE_FORCE_N {
        let bf = brute_force_qap(inst)?;
        let criterion = ExactnessCriterion::ObjectiveMatch {
            qap_optimum: bf.best_value,
        };
        (
            Some(bf.best_value),
            Some(decide_exactness(inst, &report, criterion, &tol)?),
        )
    } else {
        (None, None)
    };
    Ok(SolveOutput {
        version: REPORT_VERSION,
        n: inst.n(),
        variant,
        objective: report.objective,
        lower_bound: report.lower_bound,
        primal_residual: report.primal_residual,
        psd_residual: report.cone_residuals.psd,
        nonneg_residual: report.cone_residuals.nonneg,
        iterations: report.iterations,
        converged: report.converged,
        x: report.point().x.to_rows(),
        permutation_verdict,
        qap_optimum,
        objective_verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertifyStatus {
    Valid,
    Invalid,
    NotFound,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOutput {
    pub version: u32,
    pub n: usize,
    pub status: CertifyStatus,
    /// Relabeling applied to `B` before the search, when one was made.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relabeling: Option<Permutation>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report: Option<CertificateReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

/// Verifies `cert` on the instance as given, or searches for a certificate
/// after relabeling a brute-force optimum to the identity.
pub fn certify_instance(inst: &QapInstance, cert: Option<Certificate>) -> Result<CertifyOutput> {
    let mut out = CertifyOutput {
        version: REPORT_VERSION,
        n: inst.n(),
        status: CertifyStatus::Indeterminate,
        relabeling: None,
        report: None,
        certificate: None,
        reason: None,
    };
    if let Some(cert) = cert {
        let report = verify_certificate(inst, &cert)?;
        out.status = if report.valid {
            CertifyStatus::Valid
        } else {
            CertifyStatus::Invalid
        };
        out.report = Some(report);
        out.certificate = Some(cert);
        return Ok(out);
    }
    let bf = brute_force_qap(inst)?;
    let relabeled = relabel(inst, &bf.best_sigma)?;
    out.relabeling = Some(bf.best_sigma);
    match search_certificate(&relabeled)? {
        Search::Found { value } => {
            out.status = CertifyStatus::Valid;
            out.report = Some(value.report);
            out.certificate = Some(value.certificate);
        }
        Search::Infeasible => out.status = CertifyStatus::NotFound,
        Search::Indeterminate { reason } => out.reason = Some(reason),
    }
    Ok(out)
}
