//! The user-facing surface: metric-definition files, verdict reports and
//! the subcommand implementations dispatched by the `fcl` binary.
//!
//! Exit codes: 0 verdict PASS (or plain success), 1 verdict FAIL,
//! 2 usage/validation error, 3 numerical-domain error.

pub mod commands;
pub mod metricfile;
pub mod report;

pub use commands::{cmd_check, cmd_geodesic, cmd_info, cmd_spray, cmd_verify, CheckArgs};
pub use metricfile::{FileOptions, MetricFile, Mode};
pub use report::{render_verdict_report, ReportMeta};

use crate::error::Error;

/// Exit code for an error per the CLI contract.
pub fn error_exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}
