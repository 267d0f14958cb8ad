use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nullfem_cli::{
    dump_matrices, emit, exit, parse_problem, run, CliError, Format, Method, RunOptions,
};

#[derive(Parser)]
#[command(name = "nullfem", version, about = "Constrained finite-element solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file.
    Solve {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Nullspace)]
        method: MethodArg,
        /// Penalty parameter (default 1e8 × max diagonal of K).
        #[arg(long)]
        alpha: Option<f64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Write B, C, K_red, v_p and v_DB into this directory.
        #[arg(long, value_name = "DIR")]
        dump_matrices: Option<PathBuf>,
        /// Fail with a nonzero exit code if any invariant check fails.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Nullspace,
    Elimination,
    Penalty,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Text,
}

fn solve(cmd: Command) -> Result<(), CliError> {
    let Command::Solve {
        file,
        method,
        alpha,
        out,
        format,
        dump_matrices: dump_dir,
        verify,
    } = cmd;
    let method = match method {
        MethodArg::Nullspace => Method::Nullspace,
        MethodArg::Elimination => Method::Elimination,
        MethodArg::Penalty => Method::Penalty,
    };
    let format = match format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Text => Format::Text,
    };
    let problem = parse_problem(&file)?;
    let solution = run(&problem, RunOptions { method, alpha })?;
    let results = &solution.results;
    for (stage, secs) in &results.diagnostics.timings {
        eprintln!("timing\t{stage}\t{secs:.6}");
    }
    if let Some(dir) = &dump_dir {
        dump_matrices(dir, &solution.artifacts)?;
    }
    emit(results, format, out.as_deref())?;
    if verify {
        let failures = results.diagnostics.failures();
        if !failures.is_empty() {
            return Err(CliError::Verification(failures.join("; ")));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match solve(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
