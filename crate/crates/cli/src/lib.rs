//! Command-line orchestration: strict JSON configs, task sweeps and CSV/text output.

pub mod config;
pub mod report;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{parse_config, serialize_config, ConfigError, RunConfig, Task};
pub use report::{emit_report, write_outputs};
pub use run::{run_sweep, RunError, RunResults};

pub const OUTPUT_DIR_ENV: &str = "PARAMOP_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "paramop-output";

/// Flag, then environment, then config, then the built-in default.
pub fn resolve_output_dir(flag: Option<&Path>, env: Option<&str>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}
