//! CSV ingestion and command orchestration for the `notmf` binary.

pub mod args;
pub mod csvio;
pub mod error;
pub mod run;

pub use args::Cli;
pub use csvio::{load_csv, read_panel, save_panel, write_panel, LabeledPanel};
pub use error::{CliError, CliResult};
pub use run::run;
