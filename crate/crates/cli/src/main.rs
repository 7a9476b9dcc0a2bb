use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wgfem_cli::{audit_mesh, run_study, CliError, Overrides, StudyConfig};

#[derive(Parser)]
#[command(
    name = "wgfem",
    about = "Weak Galerkin convergence studies on curved polygonal meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study described by a TOML config.
    Study {
        config: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        solution: Option<String>,
        #[arg(long)]
        beta1: Option<f64>,
        #[arg(long)]
        beta2: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a mesh and print its shape-regularity data.
    Audit { mesh: PathBuf },
}

fn study(config: PathBuf, overrides: Overrides) -> Result<(), CliError> {
    let mut config = StudyConfig::load(&config)?;
    config.apply(overrides);
    let report = run_study(&config)?;
    print!("{}", report.to_table());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Study {
            config,
            k,
            problem,
            solution,
            beta1,
            beta2,
            tol,
            out,
        } => study(
            config,
            Overrides {
                k,
                problem,
                solution,
                beta1,
                beta2,
                tol,
                out,
            },
        ),
        Command::Audit { mesh } => audit_mesh(&mesh).and_then(|r| {
            print!("{}", r.text);
            if r.accepted {
                Ok(())
            } else {
                Err(CliError::Validation("mesh rejected".into()))
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
