//! Command-line front end: argument parsing, CSV ingestion and trace output.

pub mod args;
pub mod io;
pub mod run;

pub use args::Cli;
pub use run::run;
