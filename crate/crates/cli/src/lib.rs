//! Batch front end for `nullfem`: problem files in, results and
//! diagnostics out.

pub mod error;
pub mod output;
pub mod problem;
pub mod run;

pub use error::{exit, CliError};
pub use output::{dump_matrices, emit, read_text, write_text, Format};
pub use problem::{parse_problem, parse_problem_str, ProblemFile};
pub use run::{run, Method, ResultSet, RunOptions, Solution};
