//! Command-line surface: instance files, seeded generation and reports.

pub mod cli;
pub mod commands;
pub mod generate;
pub mod instance_file;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub use cli::run_command;
pub use generate::generate_instance;
pub use instance_file::{
    emit_instance, parse_instance, parse_instance_str, InstanceFile, LoadedInstance,
};

/// Environment variable naming the default directory for report files.
pub const OUT_DIR_ENV: &str = "SPEEDSCALE_OUT_DIR";

/// Exit code for a clean run.
pub const EXIT_OK: i32 = 0;
/// Exit code when a check finds an infeasibility or violation.
pub const EXIT_FINDINGS: i32 = 1;
/// Exit code for usage, schema and I/O errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] crate::error::Error),

    #[error("{0}")]
    Usage(String),
}

/// Writes `contents` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
