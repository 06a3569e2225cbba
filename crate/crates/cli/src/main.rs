//! `cqlf`: decide, certify and verify common quadratic Lyapunov functions
//! for stable pairs with a rank-one difference.

mod commands;
mod input;
mod json;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cqlf_core::{Error, ToleranceConfig};

use crate::json::Json;

/// Exit codes shared by every subcommand.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INPUT: u8 = 2;
    pub const NO_CQLF: u8 = 3;
    pub const UNCERTIFIED: u8 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "cqlf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Residual tolerance; eigenvalue and PSD tolerances scale with it.
    #[arg(long, global = true, env = "CQLF_TOL")]
    tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether a CQLF exists and certify the answer.
    Decide {
        /// Pair file (`-` for standard input).
        input: PathBuf,
        /// Report the verdict without constructing a certificate.
        #[arg(long)]
        no_certificate: bool,
    },
    /// Check the certificate contained in a pair file or decide report.
    Verify { input: PathBuf },
    /// Decompose a signed Hankel sequence `z` into atoms.
    Moment { input: PathBuf },
    /// Extract a rank-one witness from a PSD solution `(X, Y)`.
    Extract { input: PathBuf },
    /// Run the randomized property suites.
    Selftest {
        #[arg(long, default_value_t = 500)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// A failed command: exit code, message and extra diagnostic fields.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub details: Vec<(&'static str, Json)>,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: exit::INPUT,
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn detail(mut self, key: &'static str, value: impl Into<Json>) -> Self {
        self.details.push((key, value.into()));
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::CertificateSearchFailed { .. } => exit::UNCERTIFIED,
            _ => exit::INPUT,
        };
        let mut f = Failure {
            code,
            message: e.to_string(),
            details: Vec::new(),
        };
        match &e {
            Error::NotPsd { min_eigenvalue } => f = f.detail("min_eigenvalue", *min_eigenvalue),
            Error::Extraction(x) => {
                f = f
                    .detail("stage", x.stage.to_string())
                    .detail("trace", commands::trace_json(&x.trace));
            }
            _ => {}
        }
        f
    }
}

/// Successful run: exit code and report.
pub struct Outcome {
    pub code: u8,
    pub report: Json,
}

pub fn echo(report: Json, cfg: Option<&ToleranceConfig>) -> Json {
    let report = match cfg {
        Some(cfg) => report.with(
            "tolerances",
            Json::obj()
                .with("residual_tol", cfg.residual_tol)
                .with("eig_tol", cfg.eig_tol)
                .with("psd_tol", cfg.psd_tol)
                .with("scan_points", cfg.scan_points),
        ),
        None => report,
    };
    report.with(
        "versions",
        Json::obj()
            .with("cqlf", env!("CARGO_PKG_VERSION"))
            .with("report_format", 1usize),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Decide {
            input,
            no_certificate,
        } => commands::decide(input, cli.tol, !no_certificate),
        Command::Verify { input } => commands::verify(input, cli.tol),
        Command::Moment { input } => commands::moment(input, cli.tol),
        Command::Extract { input } => commands::extract(input, cli.tol),
        Command::Selftest { cases, seed } => commands::selftest(*cases, *seed, cli.tol),
    };
    let (code, report) = match result {
        Ok(out) => (out.code, out.report),
        Err(f) => {
            eprintln!("error: {}", f.message);
            let mut report = Json::obj()
                .with("verdict", "error")
                .with("message", f.message);
            for (k, v) in f.details {
                report = report.with(k, v);
            }
            (f.code, echo(report, None))
        }
    };
    match cli.format {
        Format::Json => print!("{}", report.render()),
        Format::Text => print!("{}", report.render_text()),
    }
    ExitCode::from(code)
}
