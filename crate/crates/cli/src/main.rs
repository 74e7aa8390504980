use std::path::PathBuf;
use std::process::exit;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use sigma2_cli::audit::AuditParams;
use sigma2_cli::config::parse_config;
use sigma2_cli::runner::{
    cmd_audit, cmd_oracle_check, cmd_refine, cmd_run, cmd_sweep, CliError,
};

/// Conformal σ-curvature functionals and the normalized perturbed flow on
/// the round 3-sphere.
#[derive(Parser)]
#[command(name = "sigma2", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the flow for one scenario and emit report/timeseries/checkpoint
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Run the flow once per eps from the same initial data
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma list overriding the scenario's eps values
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        quiet: bool,
    },
    /// Sample random C1 metrics and audit the integral inequalities
    Audit {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// eps at which membership and the nu1/mu bound are evaluated
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        quiet: bool,
    },
    /// Cross-check derivative closed forms and the two curvature routes
    OracleCheck {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Grid-doubling convergence study of the curvature-route disagreement
    Refine {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

fn parse_eps_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad eps value '{t}'")))
        })
        .collect()
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.cmd {
        Cmd::Run { scenario, out, quiet } => {
            let text = std::fs::read_to_string(&scenario)?;
            let sc = parse_config(&text)?;
            cmd_run(&sc, &out, quiet)
        }
        Cmd::Sweep { scenario, out, eps, quiet } => {
            let text = std::fs::read_to_string(&scenario)?;
            let sc = parse_config(&text)?;
            let over = eps.map(|t| parse_eps_list(&t)).transpose()?;
            cmd_sweep(&sc, over, &out, quiet)
        }
        Cmd::Audit { n, seed, out, eps, quiet } => {
            let mut params = AuditParams { n_samples: n, seed, ..Default::default() };
            if let Some(text) = eps {
                let list = parse_eps_list(&text)?;
                match list.as_slice() {
                    [single] => params.eps = *single,
                    _ => {
                        return Err(CliError::Usage(
                            "audit expects a single eps value".into(),
                        ))
                    }
                }
            }
            cmd_audit(&params, &out, quiet)
        }
        Cmd::OracleCheck { out, quiet } => cmd_oracle_check(out.as_deref(), quiet),
        Cmd::Refine { out, quiet } => cmd_refine(out.as_deref(), quiet),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            exit(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            exit(2);
        }
    }
}
