use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kdist_tda::experiment::{error_json, run, ExperimentConfig};
use kdist_tda::kdistance::DEFAULT_BARYCENTER_BUDGET;
use kdist_tda::projection::DEFAULT_JL_CONSTANT;
use kdist_tda::Error;

/// Persistent homology of k-distance filtrations under random projections.
#[derive(Debug, Parser)]
#[command(name = "kdist-tda", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Project a point cloud and audit what its k-distance filtration keeps.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Numeric matrix, one point per row (CSV or whitespace separated).
    #[arg(long)]
    input: PathBuf,
    /// auto, csv or whitespace.
    #[arg(long, default_value = "auto")]
    format: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    epsilon: f64,
    /// Failure probability, used by --dim auto-gw.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// gaussian, rademacher or sparse.
    #[arg(long, default_value = "gaussian")]
    kind: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// auto-jl, auto-gw or an explicit target dimension.
    #[arg(long, default_value = "auto-jl")]
    dim: String,
    /// Constant c in the target dimension c·ln(n)/ε².
    #[arg(long, default_value_t = DEFAULT_JL_CONSTANT)]
    jl_constant: f64,
    /// exact-cech, approx-cech or rips.
    #[arg(long, default_value = "approx-cech")]
    filtration: String,
    /// Highest homology degree to compute.
    #[arg(long, default_value_t = 1)]
    maxdeg: usize,
    /// Largest filtration value (radius units); "inf" keeps every simplex.
    #[arg(long)]
    alpha_max: f64,
    /// Largest number of k-subsets the barycentric cloud may have.
    #[arg(long, default_value_t = DEFAULT_BARYCENTER_BUDGET)]
    budget: usize,
    /// Random probes for the approximation sandwich audit.
    #[arg(long, default_value_t = 1000)]
    probes: usize,
    /// Simplices sampled for each radius audit.
    #[arg(long, default_value_t = 500)]
    radius_samples: usize,
    #[arg(long, default_value_t = 6)]
    radius_max_card: usize,
    /// Where to write the JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Directory for h<degree>_before.svg / h<degree>_after.svg plots.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Use the identity map instead of a random projection.
    #[arg(long)]
    no_project: bool,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig, Error> {
        let mut c = ExperimentConfig::new(self.input, self.alpha_max);
        c.format = self.format.parse()?;
        c.k = self.k;
        c.epsilon = self.epsilon;
        c.delta = self.delta;
        c.projector_kind = self.kind.parse()?;
        c.seed = self.seed;
        c.target_dim = self.dim.parse()?;
        c.jl_constant = self.jl_constant;
        c.project = !self.no_project;
        c.filtration = self.filtration.parse()?;
        c.max_homology_degree = self.maxdeg;
        c.budget = self.budget;
        c.probes = self.probes;
        c.radius_samples = self.radius_samples;
        c.radius_max_card = self.radius_max_card;
        c.output_path = Some(self.out);
        c.svg_dir = self.svg;
        Ok(c)
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("{}", error_json(e));
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&Error::Config(e.kind().to_string() + ": " + &e.render().to_string())),
    };
    let Command::Run(args) = cli.command;
    let config = match args.into_config() {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match run(&config) {
        Ok(report) => {
            println!(
                "n = {}, d = {}{}: distortion {}, pointwise {}, interleaving {} (log-bottleneck {:.4}, threshold {:.4})",
                report.n_points,
                report.projection.target_dim,
                if report.projection.target_dim_clamped { " (clamped)" } else { "" },
                verdict(report.implications.distortion_pass),
                verdict(report.implications.pointwise_pass),
                verdict(report.interleaving.passes),
                report.interleaving.log_bottleneck,
                report.interleaving.threshold,
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}
