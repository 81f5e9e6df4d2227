use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "clipaudit", version, about = "ClipAudit ballot-polling risk-limiting audits")]
pub struct Cli {
    /// Output format for results on stdout.
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resolve the stopping constant beta(n, alpha).
    Beta(BetaArgs),
    /// Regenerate beta table rows by simulation.
    Table(TableArgs),
    /// Run an audit against a ballot manifest.
    Audit(AuditArgs),
    /// Measure the average sample number of simulated audits.
    Simulate(SimulateArgs),
    /// Closed-form expected sample sizes for ClipAudit and Bravo.
    Estimate(EstimateArgs),
    /// Serve live audit sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Table,
    Formula,
    Upper,
    Simulate,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Monte Carlo trials.
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BetaArgs {
    pub n: u64,
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Source::Table)]
    pub source: Source,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Comma-separated ballot counts.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub n_list: Vec<u64>,
    /// Comma-separated risk limits.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub alpha_list: Vec<f64>,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Also write the table as CSV to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How an audit obtains beta when not given explicitly.
#[derive(Debug, Args)]
pub struct BetaChoiceArgs {
    #[arg(long, value_enum, default_value_t = Source::Table)]
    pub beta_source: Source,
    /// Use this beta directly, overriding --beta-source.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Trials when --beta-source=simulate.
    #[arg(long, default_value_t = 1_000_000)]
    pub beta_trials: u64,
    /// Seed when --beta-source=simulate.
    #[arg(long, default_value_t = 1)]
    pub beta_seed: u64,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["interactive", "replay"]))]
pub struct AuditArgs {
    /// Ballot manifest CSV: ballot_id,contest_id,choice.
    #[arg(long)]
    pub manifest: PathBuf,
    /// JSON contest spec, or an array of them.
    #[arg(long)]
    pub contest_spec: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    /// Seed of the ballot draw order.
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub beta: BetaChoiceArgs,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Read interpretations from the terminal.
    #[arg(long)]
    pub interactive: bool,
    /// Read interpretations from a file in manifest format.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: u64,
    /// True fraction for the winner minus fraction for the loser.
    #[arg(long)]
    pub margin: f64,
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    pub beta: BetaChoiceArgs,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write per-trial CSV here.
    #[arg(long)]
    pub trials_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub n: u64,
    pub alpha: f64,
    pub margin: f64,
    #[arg(long, value_enum, default_value_t = Source::Formula)]
    pub beta_source: Source,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub beta_trials: u64,
    #[arg(long, default_value_t = 1)]
    pub beta_seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "CLIPAUDIT_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Session logs directory; sessions are kept in memory if absent.
    #[arg(long, env = "CLIPAUDIT_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
}
