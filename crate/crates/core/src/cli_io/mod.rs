//! Configuration ingestion, CSV and SVG output, and the command line.

pub mod cli;
pub mod config;
pub mod csv;
pub mod manifest;
pub mod plot;

pub use cli::{cli_main, EXIT_INVALID, EXIT_OK, EXIT_SOLVER};
pub use config::{parse_config, parse_document, parse_table, Branch, ConfigDocument, ConfigError};
pub use self::csv::{read_csv, write_csv, CsvError};
pub use manifest::{sha256_hex, RunManifest};
pub use plot::{emit_plot, PlotError};
