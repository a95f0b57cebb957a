//! `soliton`: verify, construct and classify gradient Ricci solitons.
//!
//! Exit status: 0 when every check passes (or a classification is definite),
//! 1 when a check fails or the input is not a soliton, 2 on usage or input
//! errors.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "soliton",
    version,
    about = "Gradient Ricci soliton diagnostics"
)]
pub struct Cli {
    /// Omit the timestamped `meta` block so reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_meta: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Dump curvature, conformal and D tensors at sample points.
    Tensors(PointArgs),
    /// Run the soliton identity and level-set suite.
    Verify(VerifyArgs),
    /// Build a Bryant profile and fit its asymptotics.
    Bryant(BryantArgs),
    /// Decide the classification branch of a steady soliton.
    Classify(ClassifyArgs),
    /// Reference geometries.
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Catalog entry name.
    #[arg(long, conflicts_with = "profile", required_unless_present = "profile")]
    pub catalog: Option<String>,
    /// Catalog parameter `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Warped-product profile CSV.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Total dimension of the profile (inferred when omitted).
    #[arg(long = "dim")]
    pub dim: Option<usize>,
    /// Fiber Einstein constant of the profile (inferred when omitted).
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Explicit point `x1,x2,...`; repeatable, replaces sampling.
    #[arg(long = "point", value_name = "X1,X2,...")]
    pub points: Vec<String>,
}

#[derive(Args, Debug)]
pub struct PointArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub sampling: SampleArgs,
    /// JSON output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub sampling: SampleArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Relative soliton gate.
    #[arg(long, default_value_t = 1e-4)]
    pub soliton_tol: f64,
    /// Relative tolerance for the algebraic D identities.
    #[arg(long, default_value_t = 1e-6)]
    pub identity_tol: f64,
    /// Relative tolerance for the D-norm identity.
    #[arg(long, default_value_t = 1e-4)]
    pub norm_identity_tol: f64,
    /// Relative tolerance for agreement of the two Bach routes.
    #[arg(long, default_value_t = 1e-3)]
    pub bach_tol: f64,
    /// Tolerance on the Hamilton constant `R + |∇F|²`.
    #[arg(long, default_value_t = 1e-6)]
    pub energy_tol: f64,
}

#[derive(Args, Debug)]
pub struct BryantArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long = "rmax", default_value_t = 1000.0)]
    pub r_max: f64,
    #[arg(long = "rseed", default_value_t = 1e-3)]
    pub r_seed: f64,
    /// Scalar curvature at the tip.
    #[arg(long, default_value_t = 1.0)]
    pub normalization: f64,
    #[arg(long, default_value_t = 7)]
    pub series_order: usize,
    /// Profile CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 40)]
    pub samples: usize,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    #[arg(long)]
    pub soliton_tol: Option<f64>,
    #[arg(long)]
    pub d_tol: Option<f64>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum CatalogCommand {
    /// One entry name per line.
    List,
    /// Description and expected properties of one entry.
    Show {
        name: String,
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every expected property of every entry.
    Sweep {
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports help and version as errors with exit status 0
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
