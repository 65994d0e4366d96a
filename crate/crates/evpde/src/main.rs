use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evpde::config::parse_config;
use evpde::{cmd_run, list_geometries, report_suite, run_suite, Failure};
use evpde_core::suite::SuiteOptions;

#[derive(Parser)]
#[command(name = "evpde", version, about = "Parabolic problems on evolving curves and moving domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the problem described by a JSON config and write CSV/VTK output.
    Run {
        config: PathBuf,
    },
    /// Run the verification suite and print a pass/fail table.
    Verify {
        /// Only run one group (transport, jacobian, conservation, steklov, eoc, energy, dynamic).
        #[arg(long)]
        only: Option<String>,
        /// Run the checks one after another instead of in parallel.
        #[arg(long)]
        serial: bool,
        /// Flip the sign of the diffusion coefficient, to see the suite catch it.
        #[arg(long, hide = true)]
        corrupt_stiffness: bool,
    },
    /// List the built-in geometry ids.
    ListGeometries,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config } => parse_config(&config).map_err(Failure::from).and_then(|cfg| cmd_run(&cfg)).map(|s| {
            let error = s.max_error_l2.map(|e| format!(", max L2 error {e:.3e}")).unwrap_or_default();
            println!("{} steps, {} files in {}{error}", s.steps, s.files.len(), s.output_dir.display());
        }),
        Command::Verify { only, serial, corrupt_stiffness } => {
            let opts = SuiteOptions { corrupt_stiffness };
            run_suite(&opts, only.as_deref(), !serial).and_then(|rows| report_suite(std::io::stdout().lock(), &rows))
        }
        Command::ListGeometries => list_geometries(std::io::stdout().lock())
            .map_err(|e| Failure { code: Failure::RUN, message: e.to_string() }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
