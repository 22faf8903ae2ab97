//! Text and CSV renderings. JSON goes through serde directly.

use std::fmt::Write;

use qap_exact::sdp::Verdict;
use serde::Serialize;

use crate::demo::{CounterexampleReport, GeometryReport};
use crate::error::Result;
use crate::experiment::{AlignmentTable, CertificateStatus, ExperimentKind, ExperimentReport};
use crate::single::{CertifyOutput, SolveOutput};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    #[default]
    Text,
}

pub trait Render: Serialize {
    fn text(&self) -> String;
    fn csv(&self) -> String;

    fn render(&self, format: Format) -> Result<String> {
        Ok(match format {
            Format::Json => serde_json::to_string_pretty(self)? + "\n",
            Format::Csv => self.csv(),
            Format::Text => self.text(),
        })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.9}"))
}

fn verdict_name(v: Option<Verdict>) -> &'static str {
    match v {
        Some(Verdict::Exact) => "exact",
        Some(Verdict::NotExact) => "not-exact",
        Some(Verdict::Indeterminate) => "indeterminate",
        None => "error",
    }
}

fn certificate_name(c: &CertificateStatus) -> &'static str {
    match c {
        CertificateStatus::NotAttempted => "not-attempted",
        CertificateStatus::Found => "found",
        CertificateStatus::NotFound => "not-found",
        CertificateStatus::Indeterminate(_) => "indeterminate",
    }
}

/// One column per report, one row per quantity.
pub fn summary_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("metric");
    for r in reports {
        write!(out, ",n={}", r.n).unwrap();
    }
    out.push('\n');
    let rows: [(&str, &dyn Fn(&ExperimentReport) -> String); 7] = [
        ("instances", &|r| r.instance_count.to_string()),
        ("exact", &|r| r.exact_count.to_string()),
        ("certified", &|r| r.certified_count.to_string()),
        ("exact_percent", &|r| format!("{:.1}", r.exact_percent())),
        ("certified_percent_of_exact", &|r| format!("{:.1}", r.certified_percent_of_exact())),
        ("certified_percent_of_all", &|r| format!("{:.1}", r.certified_percent_of_all())),
        ("indeterminate_or_failed", &|r| (r.indeterminate_count + r.failed_count).to_string()),
    ];
    for (name, f) in rows {
        out.push_str(name);
        for r in reports {
            write!(out, ",{}", f(r)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn records_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "id,label,sdp_value,qap_value,verdict,certificate,primal_residual,dual_residual,iterations\n",
    );
    for r in &report.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.id,
            r.label,
            opt(r.sdp_value),
            opt(r.qap_value),
            verdict_name(r.verdict),
            certificate_name(&r.certificate),
            r.primal_residual.map_or_else(String::new, |x| format!("{x:.3e}")),
            r.dual_residual.map_or_else(String::new, |x| format!("{x:.3e}")),
            r.iterations.map_or_else(String::new, |x| x.to_string()),
        )
        .unwrap();
    }
    out
}

impl Render for ExperimentReport {
    fn text(&self) -> String {
        let mut out = String::new();
        let title = match self.kind {
            ExperimentKind::Graphs => "graph pairs",
            ExperimentKind::Distances => "distance trials",
        };
        writeln!(out, "{title}, n = {}", self.n).unwrap();
        if let Some(seed) = self.seed {
            writeln!(out, "  seed                 {seed}").unwrap();
        }
        if let Some(s) = self.shard {
            writeln!(out, "  shard                {}/{}", s.index, s.count).unwrap();
        }
        writeln!(out, "  conventions          {}", self.conventions).unwrap();
        writeln!(out, "  instances            {}", self.instance_count).unwrap();
        writeln!(out, "  exact                {} ({:.1}%)", self.exact_count, self.exact_percent()).unwrap();
        writeln!(
            out,
            "  certified            {} ({:.1}% of exact)",
            self.certified_count,
            self.certified_percent_of_exact()
        )
        .unwrap();
        writeln!(out, "  indeterminate        {}", self.indeterminate_count).unwrap();
        writeln!(out, "  failed               {}", self.failed_count).unwrap();
        for r in &self.records {
            if !r.is_exact() || !r.is_certified() {
                writeln!(
                    out,
                    "  {:>5} {:<28} {:<13} {:<13} sdp {} qap {}",
                    r.id,
                    r.label,
                    verdict_name(r.verdict),
                    certificate_name(&r.certificate),
                    opt(r.sdp_value),
                    opt(r.qap_value),
                )
                .unwrap();
            }
        }
        out
    }

    fn csv(&self) -> String {
        summary_csv(std::slice::from_ref(self))
    }
}

impl Render for Vec<ExperimentReport> {
    fn text(&self) -> String {
        self.iter().map(Render::text).collect::<Vec<_>>().join("\n")
    }

    fn csv(&self) -> String {
        summary_csv(self)
    }
}

impl Render for AlignmentTable {
    fn text(&self) -> String {
        let g = self.graph_count;
        let mut out = String::from("    ");
        for c in 1..=g {
            write!(out, "{c:>4}").unwrap();
        }
        out.push('\n');
        for r in 1..=g {
            write!(out, "{r:>4}").unwrap();
            for c in 1..=g {
                match (c > r).then(|| self.value(r, c)).flatten() {
                    Some(v) => write!(out, "{:>4}", format!("{v:.0}")).unwrap(),
                    None => out.push_str("    "),
                }
            }
            out.push('\n');
        }
        out
    }

    fn csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for cell in &self.cells {
            writeln!(out, "{},{},{}", cell.row, cell.col, opt(cell.value)).unwrap();
        }
        out
    }
}

impl Render for CounterexampleReport {
    fn text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "six-vertex matching vs triangle").unwrap();
        writeln!(out, "  QAP optimum          {:.9} at {}", self.qap_optimum, self.qap_optimal_permutation).unwrap();
        writeln!(out, "  fractional point     objective {:.9}", self.point_objective).unwrap();
        writeln!(out, "                       max violation {:.3e}", self.point_max_violation).unwrap();
        writeln!(
            out,
            "  solver               objective {:.9} (lower bound {:.9}, {} iterations, converged {})",
            self.solver_objective, self.solver_lower_bound, self.solver_iterations, self.solver_converged
        )
        .unwrap();
        writeln!(out, "  gap                  {:.9}", self.gap).unwrap();
        writeln!(out, "  verdict              {}", verdict_name(Some(self.verdict.verdict))).unwrap();
        out
    }

    fn csv(&self) -> String {
        format!(
            "qap_optimum,point_objective,point_max_violation,solver_objective,solver_lower_bound,gap,verdict\n{},{},{},{},{},{},{}\n",
            self.qap_optimum,
            self.point_objective,
            self.point_max_violation,
            self.solver_objective,
            self.solver_lower_bound,
            self.gap,
            verdict_name(Some(self.verdict.verdict))
        )
    }
}

impl Render for GeometryReport {
    fn text(&self) -> String {
        let mut out = String::from("smallest eigenvalue of -P + sE\n");
        writeln!(out, "  {:>6} {:>20} {:>20} {:>10} {:>12}", "s", "numeric", "closed form", "diff", "eigvec res").unwrap();
        for r in &self.eigen_rows {
            writeln!(
                out,
                "  {:>6} {:>20.15} {:>20.15} {:>10.2e} {:>12.2e}",
                r.s,
                r.numeric,
                r.predicted,
                (r.numeric - r.predicted).abs(),
                r.eigenvector_residual
            )
            .unwrap();
        }
        writeln!(out, "limit sequence for P").unwrap();
        writeln!(out, "  {:>6} {:>12} {:>14} {:>12}", "k", "max|P_k-P|", "min eig", "magnitude").unwrap();
        for r in &self.sequence_rows {
            writeln!(
                out,
                "  {:>6} {:>12.4e} {:>14.4e} {:>12.4e}",
                r.k, r.deviation, r.min_eigenvalue, r.magnitude
            )
            .unwrap();
        }
        writeln!(out, "  decay ratio          {:.3e}", self.decay_ratio()).unwrap();
        writeln!(
            out,
            "Z = A⊗B - P: sign violation {:.3e}, diagonal pairs {:.3e}",
            self.closure.sign_violation, self.closure.diagonal_pair_violation
        )
        .unwrap();
        writeln!(
            out,
            "permutation condition margin {:.3e} (holds: {})",
            self.permutation_condition.margin, self.permutation_condition.member
        )
        .unwrap();
        writeln!(out, "Slater slack min eigenvalue {:.6}", self.slater_min_eigenvalue).unwrap();
        out
    }

    fn csv(&self) -> String {
        let mut out = String::from("s,numeric,predicted,eigenvector_residual\n");
        for r in &self.eigen_rows {
            writeln!(out, "{},{},{},{}", r.s, r.numeric, r.predicted, r.eigenvector_residual).unwrap();
        }
        out
    }
}

impl Render for SolveOutput {
    fn text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "n = {}, {:?} relaxation", self.n, self.variant).unwrap();
        writeln!(out, "  objective            {:.9}", self.objective).unwrap();
        writeln!(out, "  lower bound          {:.9}", self.lower_bound).unwrap();
        writeln!(
            out,
            "  residuals            linear {:.2e}, psd {:.2e}, nonneg {:.2e}",
            self.primal_residual, self.psd_residual, self.nonneg_residual
        )
        .unwrap();
        writeln!(out, "  iterations           {} (converged {})", self.iterations, self.converged).unwrap();
        let pv = &self.permutation_verdict;
        if let Some(p) = &pv.rounded {
            writeln!(
                out,
                "  rounded              {} (deviation {:.2e}, verdict {})",
                p,
                pv.deviation.unwrap_or(f64::NAN),
                verdict_name(Some(pv.verdict))
            )
            .unwrap();
        }
        if let (Some(q), Some(v)) = (self.qap_optimum, &self.objective_verdict) {
            writeln!(out, "  QAP optimum          {:.9} (verdict {})", q, verdict_name(Some(v.verdict))).unwrap();
        }
        out
    }

    fn csv(&self) -> String {
        format!(
            "n,objective,lower_bound,iterations,converged,qap_optimum\n{},{},{},{},{},{}\n",
            self.n,
            self.objective,
            self.lower_bound,
            self.iterations,
            self.converged,
            opt(self.qap_optimum)
        )
    }
}

impl Render for CertifyOutput {
    fn text(&self) -> String {
        let mut out = format!("status {:?}\n", self.status);
        if let Some(p) = &self.relabeling {
            writeln!(out, "  relabeling           {p}").unwrap();
        }
        if let Some(r) = &self.report {
            writeln!(out, "  requirement 1 margin {:.3e}", r.req1_margin).unwrap();
            writeln!(out, "  requirement 2 error  {:.3e}", r.req2_violation).unwrap();
            writeln!(out, "  requirement 3 margin {:.3e}", r.req3_margin).unwrap();
        }
        if let Some(reason) = &self.reason {
            writeln!(out, "  reason               {reason}").unwrap();
        }
        out
    }

    fn csv(&self) -> String {
        let r = self.report.as_ref();
        format!(
            "status,req1_margin,req2_violation,req3_margin\n{:?},{},{},{}\n",
            self.status,
            opt(r.map(|r| r.req1_margin)),
            opt(r.map(|r| r.req2_violation)),
            opt(r.map(|r| r.req3_margin)),
        )
    }
}
