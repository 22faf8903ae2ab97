use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qap_exact::certify::Certificate;
use qap_exact::io::read_matrix;
use qap_exact::sdp::{SolverOptions, Variant};
use qap_exact::QapInstance;
use qap_exact_cli::demo::{demo_counterexample, demo_geometry};
use qap_exact_cli::error::{CliError, Result};
use qap_exact_cli::experiment::{
    pairwise_alignment_table, run_distance_experiment, ExperimentReport, run_graph_experiment, PairMode, RunOptions,
    Shard,
};
use qap_exact_cli::report::{Format, Render};
use qap_exact_cli::single::{certify_instance, solve_instance};

#[derive(Parser)]
#[command(name = "qap-exact", version, about = "SDP relaxation exactness for the quadratic assignment problem")]
struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the SDP relaxation of one instance.
    Solve {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = VariantArg::Standard)]
        variant: VariantArg,
    },
    /// Verify a dual certificate, or search for one.
    Certify {
        a: PathBuf,
        b: PathBuf,
        /// JSON certificate to verify instead of searching.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    #[command(subcommand)]
    Experiment(Experiment),
    /// Pairwise alignment errors over the five-vertex graphs.
    Table3 {
        #[command(flatten)]
        run: RunArgs,
    },
    #[command(subcommand)]
    Demo(Demo),
}

#[derive(Subcommand)]
enum Experiment {
    /// All pairs of non-isomorphic graphs on n vertices.
    Graphs {
        #[arg(long = "n", required = true, num_args = 1..)]
        n: Vec<usize>,
        #[arg(long, value_enum, default_value_t = PairMode::WithSelf)]
        pair_mode: PairMode,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Random Euclidean distance instances.
    Distances {
        #[arg(long = "n", required = true, num_args = 1..)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Subcommand)]
enum Demo {
    /// The instance whose relaxation is not exact.
    Counterexample,
    /// The dual set that is not closed.
    Geometry,
}

#[derive(Args)]
struct RunArgs {
    /// Allow the n = 6 graph sweep.
    #[arg(long)]
    full: bool,
    /// Run only instances with id ≡ i (mod m), given as `i/m`.
    #[arg(long)]
    shard: Option<String>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
    /// Record wall times per instance.
    #[arg(long)]
    timings: bool,
}

impl RunArgs {
    fn options(&self) -> Result<RunOptions> {
        Ok(RunOptions {
            full: self.full,
            shard: self.shard.as_deref().map(Shard::parse).transpose()?,
            threads: self.threads,
            record_timings: self.timings,
            ..RunOptions::default()
        })
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum VariantArg {
    Standard,
    WithArrow,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Standard => Variant::Standard,
            VariantArg::WithArrow => Variant::WithArrow,
        }
    }
}

fn load_instance(a: &Path, b: &Path) -> Result<QapInstance> {
    Ok(QapInstance::new(read_matrix(a)?, read_matrix(b)?)?)
}

fn load_certificate(path: &Path) -> Result<Certificate> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn run(cli: &Cli) -> Result<String> {
    let f = cli.format;
    match &cli.command {
        Command::Solve { a, b, variant } => {
            let inst = load_instance(a, b)?;
            solve_instance(&inst, (*variant).into(), &SolverOptions::default())?.render(f)
        }
        Command::Certify { a, b, certificate } => {
            let inst = load_instance(a, b)?;
            let cert = certificate.as_deref().map(load_certificate).transpose()?;
            certify_instance(&inst, cert)?.render(f)
        }
        Command::Experiment(Experiment::Graphs { n, pair_mode, run }) => {
            let opts = run.options()?;
            let reports = n
                .iter()
                .map(|&n| run_graph_experiment(n, *pair_mode, &opts))
                .collect::<Result<Vec<_>>>()?;
            render_reports(reports, f)
        }
        Command::Experiment(Experiment::Distances { n, trials, seed, run }) => {
            let opts = run.options()?;
            let reports = n
                .iter()
                .map(|&n| run_distance_experiment(n, *trials, *seed, &opts))
                .collect::<Result<Vec<_>>>()?;
            render_reports(reports, f)
        }
        Command::Table3 { run } => pairwise_alignment_table(5, &run.options()?)?.render(f),
        Command::Demo(Demo::Counterexample) => demo_counterexample(&SolverOptions::default())?.render(f),
        Command::Demo(Demo::Geometry) => demo_geometry()?.render(f),
    }
}

fn render_reports(mut reports: Vec<ExperimentReport>, f: Format) -> Result<String> {
    if reports.len() == 1 {
        reports.remove(0).render(f)
    } else {
        reports.render(f)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let rendered = match run(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(source) = std::fs::write(path, rendered) {
                eprintln!("error: {}: {source}", path.display());
                return ExitCode::FAILURE;
            }
        }
        None => print!("{rendered}"),
    }
    ExitCode::SUCCESS
}
