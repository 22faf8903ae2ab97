//! Sweeps over graph pairs and random distance instances.

use std::time::Instant;

use qap_exact::assignment::{permutation_deviation, round_to_permutation};
use qap_exact::certify::{search_certificate, Search};
use qap_exact::oracle::{brute_force_qap, enumerate_graphs, for_each_permutation, pair_count, Graph, MAX_BRUTE_FORCE_N};
use qap_exact::qap::{qap_objective, relabel};
use qap_exact::sdp::{
    build_relaxation, decide_exactness, solve_relaxation, ExactnessCriterion, ExactnessTolerances,
    SolverOptions, SolverReport, Variant, Verdict,
};
use qap_exact::{Matrix, Permutation, QapInstance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clouds::{sample_point_clouds, trial_seeds};
use crate::error::{invalid, Result};

pub const REPORT_VERSION: u32 = 1;

/// Largest graph size swept without [`RunOptions::full`].
pub const QUICK_GRAPH_N: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PairMode {
    /// Unordered pairs including each graph with itself.
    WithSelf,
    /// Unordered pairs of different graphs.
    Distinct,
}

/// Runs every `count`-th instance starting at `index` (both 1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub index: usize,
    pub count: usize,
}

impl Shard {
    pub fn parse(s: &str) -> Result<Shard> {
        let parsed = s
            .split_once('/')
            .and_then(|(i, m)| Some((i.trim().parse().ok()?, m.trim().parse().ok()?)));
        match parsed {
            Some((index, count)) if 1 <= index && index <= count => Ok(Shard { index, count }),
            _ => invalid(format!("shard must look like i/m with 1 <= i <= m, got {s:?}")),
        }
    }

    fn contains(&self, id: usize) -> bool {
        (id - 1) % self.count == self.index - 1
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub solver: SolverOptions,
    pub tolerances: ExactnessTolerances,
    /// Allows sweeps beyond [`QUICK_GRAPH_N`].
    pub full: bool,
    pub shard: Option<Shard>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Stores wall times, which makes reports differ between runs.
    pub record_timings: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateStatus {
    /// Not searched because the relaxation was not exact.
    NotAttempted,
    Found,
    NotFound,
    Indeterminate(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    /// 1-based position in the sweep.
    pub id: usize,
    pub label: String,
    pub sdp_value: Option<f64>,
    pub qap_value: Option<f64>,
    pub verdict: Option<Verdict>,
    pub certificate: CertificateStatus,
    pub primal_residual: Option<f64>,
    pub dual_residual: Option<f64>,
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl InstanceRecord {
    fn new(id: usize, label: String) -> Self {
        InstanceRecord {
            id,
            label,
            sdp_value: None,
            qap_value: None,
            verdict: None,
            certificate: CertificateStatus::NotAttempted,
            primal_residual: None,
            dual_residual: None,
            iterations: None,
            wall_ms: None,
            error: None,
        }
    }

    fn record_solve(&mut self, report: &SolverReport) {
        self.sdp_value = Some(report.objective);
        self.primal_residual = Some(report.primal_residual);
        self.dual_residual = Some(report.dual_residual);
        self.iterations = Some(report.iterations);
    }

    pub fn is_exact(&self) -> bool {
        self.verdict == Some(Verdict::Exact)
    }

    pub fn is_certified(&self) -> bool {
        self.certificate == CertificateStatus::Found
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Graphs,
    Distances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: u32,
    pub kind: ExperimentKind,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pair_mode: Option<PairMode>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shard: Option<Shard>,
    pub instance_count: usize,
    pub exact_count: usize,
    pub certified_count: usize,
    pub indeterminate_count: usize,
    pub failed_count: usize,
    pub conventions: String,
    pub records: Vec<InstanceRecord>,
}

impl ExperimentReport {
    fn assemble(
        kind: ExperimentKind,
        n: usize,
        conventions: String,
        mut records: Vec<InstanceRecord>,
    ) -> Self {
        records.sort_by_key(|r| r.id);
        let count = |f: &dyn Fn(&InstanceRecord) -> bool| records.iter().filter(|r| f(r)).count();
        ExperimentReport {
            version: REPORT_VERSION,
            kind,
            n,
            pair_mode: None,
            seed: None,
            shard: None,
            instance_count: records.len(),
            exact_count: count(&|r| r.is_exact()),
            certified_count: count(&|r| r.is_exact() && r.is_certified()),
            indeterminate_count: count(&|r| r.verdict == Some(Verdict::Indeterminate)),
            failed_count: count(&|r| r.error.is_some()),
            conventions,
            records,
        }
    }

    pub fn exact_percent(&self) -> f64 {
        percent(self.exact_count, self.instance_count)
    }

    /// Certified instances as a share of the exact ones.
    pub fn certified_percent_of_exact(&self) -> f64 {
        percent(self.certified_count, self.exact_count)
    }

    pub fn certified_percent_of_all(&self) -> f64 {
        percent(self.certified_count, self.instance_count)
    }
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(t) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(job)),
    }
}

fn certificate_status(inst: &QapInstance, optimum: &qap_exact::Permutation) -> CertificateStatus {
    let outcome = relabel(inst, optimum).and_then(|r| search_certificate(&r));
    match outcome {
        Ok(Search::Found { .. }) => CertificateStatus::Found,
        Ok(Search::Infeasible) => CertificateStatus::NotFound,
        Ok(Search::Indeterminate { reason }) => CertificateStatus::Indeterminate(reason),
        Err(e) => CertificateStatus::Indeterminate(e.to_string()),
    }
}

/// Brute force, SDP solve, objective-match verdict and, for exact instances,
/// a certificate search after relabeling the optimum to the identity.
fn graph_record(id: usize, label: String, inst: &QapInstance, opts: &RunOptions) -> InstanceRecord {
    let start = Instant::now();
    let mut rec = InstanceRecord::new(id, label);
    let outcome = (|| -> qap_exact::Result<()> {
        let bf = brute_force_qap(inst)?;
        rec.qap_value = Some(bf.best_value);
        let report = solve_relaxation(&build_relaxation(inst, Variant::Standard)?, &opts.solver)?;
        rec.record_solve(&report);
        let criterion = ExactnessCriterion::ObjectiveMatch {
            qap_optimum: bf.best_value,
        };
        let verdict = decide_exactness(inst, &report, criterion, &opts.tolerances)?;
        rec.verdict = Some(verdict.verdict);
        if verdict.verdict == Verdict::Exact {
            rec.certificate = certificate_status(inst, &bf.best_sigma);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
    }
    if opts.record_timings {
        rec.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    rec
}

/// Instance `(adj(C), -adj(D))` of a graph pair.
pub fn graph_instance(c: &Graph, d: &Graph) -> QapInstance {
    QapInstance::new(c.adjacency(), d.adjacency().scale(-1.0)).expect("adjacency matrices are symmetric")
}

/// `(id, i, j)` for each pair of graph indices in sweep order.
pub fn graph_pairs(count: usize, mode: PairMode) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::with_capacity(pair_count(count, mode == PairMode::WithSelf));
    for i in 0..count {
        let start = if mode == PairMode::WithSelf { i } else { i + 1 };
        for j in start..count {
            out.push((out.len() + 1, i, j));
        }
    }
    out
}

pub fn run_graph_experiment(n: usize, mode: PairMode, opts: &RunOptions) -> Result<ExperimentReport> {
    if !(3..=6).contains(&n) {
        return invalid(format!("graph sweeps need 3 <= n <= 6, got {n}"));
    }
    if n > QUICK_GRAPH_N && !opts.full {
        return invalid(format!("the n = {n} sweep is long-running; pass --full"));
    }
    let graphs = enumerate_graphs(n)?;
    let pairs: Vec<_> = graph_pairs(graphs.len(), mode)
        .into_iter()
        .filter(|&(id, _, _)| opts.shard.is_none_or(|s| s.contains(id)))
        .collect();
    let records = with_pool(opts.threads, || {
        pairs
            .par_iter()
            .map(|&(id, i, j)| {
                let label = format!("G{}-G{}", i + 1, j + 1);
                graph_record(id, label, &graph_instance(&graphs[i], &graphs[j]), opts)
            })
            .collect::<Vec<_>>()
    })?;
    let conventions = format!(
        "{} graph classes; {} pairs with self-pairs, {} distinct pairs; this run: {}",
        graphs.len(),
        pair_count(graphs.len(), true),
        pair_count(graphs.len(), false),
        match mode {
            PairMode::WithSelf => "with-self",
            PairMode::Distinct => "distinct",
        }
    );
    let mut report = ExperimentReport::assemble(ExperimentKind::Graphs, n, conventions, records);
    report.pair_mode = Some(mode);
    report.shard = opts.shard;
    Ok(report)
}

/// Instance `(C, -D)` for the distance experiment.
pub fn distance_instance(c: &Matrix, d: &Matrix) -> qap_exact::Result<QapInstance> {
    QapInstance::new(c.clone(), d.scale(-1.0))
}

fn distance_record(id: usize, seed: u64, n: usize, opts: &RunOptions) -> InstanceRecord {
    let start = Instant::now();
    let mut rec = InstanceRecord::new(id, format!("trial {id} seed {seed:#018x}"));
    let outcome = (|| -> qap_exact::Result<()> {
        let clouds = sample_point_clouds(n, seed);
        let inst = distance_instance(&clouds.c, &clouds.d)?;
        let report = solve_relaxation(&build_relaxation(&inst, Variant::Standard)?, &opts.solver)?;
        rec.record_solve(&report);
        let verdict = decide_exactness(
            &inst,
            &report,
            ExactnessCriterion::PermutationSolution,
            &opts.tolerances,
        )?;
        rec.verdict = Some(verdict.verdict);
        if verdict.verdict == Verdict::Exact {
            let bf = brute_force_qap(&inst)?;
            rec.qap_value = Some(bf.best_value);
            rec.certificate = certificate_status(&inst, &bf.best_sigma);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
    }
    if opts.record_timings {
        rec.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    rec
}

pub fn run_distance_experiment(
    n: usize,
    trials: usize,
    seed: u64,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    if !(3..=MAX_BRUTE_FORCE_N).contains(&n) {
        return invalid(format!("distance experiments need 3 <= n <= {MAX_BRUTE_FORCE_N}, got {n}"));
    }
    let seeds: Vec<_> = trial_seeds(seed, trials)
        .into_iter()
        .enumerate()
        .map(|(t, s)| (t + 1, s))
        .filter(|&(id, _)| opts.shard.is_none_or(|s| s.contains(id)))
        .collect();
    let records = with_pool(opts.threads, || {
        seeds
            .par_iter()
            .map(|&(id, s)| distance_record(id, s, n, opts))
            .collect::<Vec<_>>()
    })?;
    let conventions = "exact when the SDP solution rounds to a permutation attaining the SDP value; \
                       certificates searched after relabeling the brute-force optimum"
        .to_string();
    let mut report = ExperimentReport::assemble(ExperimentKind::Distances, n, conventions, records);
    report.seed = Some(seed);
    report.shard = opts.shard;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCell {
    pub row: usize,
    pub col: usize,
    /// `‖X C Xᵀ - D‖²_F` with `X` the permutation rounded from the SDP solution.
    pub value: Option<f64>,
    pub sdp_value: Option<f64>,
    /// `max |X_sdp - X|`; zero up to solver accuracy unless the graphs have
    /// several optimal alignments.
    pub rounding_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTable {
    pub version: u32,
    pub n: usize,
    pub graph_count: usize,
    /// Edge lists (1-based) of the graphs in table order.
    pub graphs: Vec<Vec<(usize, usize)>>,
    /// Upper triangle including the diagonal, row-major, 1-based indices.
    pub cells: Vec<AlignmentCell>,
}

impl AlignmentTable {
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        self.cells
            .iter()
            .find(|cell| cell.row == r && cell.col == c)
            .and_then(|cell| cell.value)
    }
}

/// Best-objective permutation among those supported by `x`, falling back to
/// plain rounding when no permutation fits inside the support.
///
/// When the optimum is attained by several permutations the solver returns a
/// point inside their convex hull, which rounding alone may not resolve.
pub fn extract_permutation(inst: &QapInstance, x: &Matrix) -> qap_exact::Result<Permutation> {
    const SUPPORT: f64 = 1e-3;
    let n = x.rows();
    let mut best: Option<(f64, Permutation)> = None;
    if n <= MAX_BRUTE_FORCE_N {
        for_each_permutation(n, |p| {
            if p.iter().enumerate().all(|(i, &k)| x[(i, k)] > SUPPORT) {
                let sigma = Permutation::new(p.to_vec()).expect("enumerated permutation");
                let value = qap_objective(inst, &sigma).expect("sizes match");
                if best.as_ref().is_none_or(|(v, _)| value < *v) {
                    best = Some((value, sigma));
                }
            }
        });
    }
    match best {
        Some((_, sigma)) => Ok(sigma),
        None => round_to_permutation(x),
    }
}

/// `‖X C Xᵀ - D‖²_F`.
pub fn alignment_error(x: &Matrix, c: &Matrix, d: &Matrix) -> f64 {
    let diff = &x.matmul(c).matmul(&x.transpose()) - d;
    diff.dot(&diff)
}

pub fn pairwise_alignment_table(n: usize, opts: &RunOptions) -> Result<AlignmentTable> {
    if n != 5 {
        return invalid(format!("the alignment table is defined for n = 5, got {n}"));
    }
    let graphs = enumerate_graphs(n)?;
    let pairs = graph_pairs(graphs.len(), PairMode::WithSelf);
    let cells = with_pool(opts.threads, || {
        pairs
            .par_iter()
            .map(|&(_, i, j)| {
                let (c, d) = (graphs[i].adjacency(), graphs[j].adjacency());
                let inst = graph_instance(&graphs[i], &graphs[j]);
                let solved = build_relaxation(&inst, Variant::Standard)
                    .and_then(|p| solve_relaxation(&p, &opts.solver));
                let rounded = solved.and_then(|r| {
                    let x = r.point().x;
                    let sigma = extract_permutation(&inst, &x)?;
                    Ok((r.objective, permutation_deviation(&x, &sigma), sigma))
                });
                match rounded {
                    Ok((sdp, deviation, sigma)) => AlignmentCell {
                        row: i + 1,
                        col: j + 1,
                        value: Some(alignment_error(&sigma.to_matrix().transpose(), &c, &d)),
                        sdp_value: Some(sdp),
                        rounding_deviation: Some(deviation),
                        error: None,
                    },
                    Err(e) => AlignmentCell {
                        row: i + 1,
                        col: j + 1,
                        value: None,
                        sdp_value: None,
                        rounding_deviation: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect::<Vec<_>>()
    })?;
    let edges = graphs
        .iter()
        .map(|g| {
            let mut e = Vec::new();
            for a in 0..n {
                for b in (a + 1)..n {
                    if g.has_edge(a, b) {
                        e.push((a + 1, b + 1));
                    }
                }
            }
            e
        })
        .collect();
    Ok(AlignmentTable {
        version: REPORT_VERSION,
        n,
        graph_count: graphs.len(),
        graphs: edges,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shard_parsing_and_partition() {
        assert!(Shard::parse("0/3").is_err());
        assert!(Shard::parse("4/3").is_err());
        assert!(Shard::parse("x").is_err());
        let shards: Vec<_> = (1..=3).map(|i| Shard::parse(&format!("{i}/3")).unwrap()).collect();
        for id in 1..=20 {
            assert_eq!(shards.iter().filter(|s| s.contains(id)).count(), 1);
        }
    }

    #[test]
    fn pair_enumeration_counts() {
        assert_eq!(graph_pairs(4, PairMode::WithSelf).len(), 10);
        assert_eq!(graph_pairs(4, PairMode::Distinct).len(), 6);
        let ids: Vec<_> = graph_pairs(11, PairMode::WithSelf).iter().map(|p| p.0).collect();
        assert_eq!(ids, (1..=66).collect::<Vec<_>>());
    }

    #[test]
    fn alignment_error_of_identity() {
        let c = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(alignment_error(&Matrix::identity(2), &c, &c), 0.0);
        assert_eq!(alignment_error(&Matrix::identity(2), &c, &Matrix::zeros(2, 2)), 2.0);
    }

    #[test]
    fn n6_requires_full() {
        assert!(run_graph_experiment(6, PairMode::WithSelf, &RunOptions::default()).is_err());
        assert!(run_graph_experiment(7, PairMode::WithSelf, &RunOptions::default()).is_err());
    }
}
