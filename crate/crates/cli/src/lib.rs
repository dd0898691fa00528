//! Command-line front end: batch runs, the reference suite, sweeps and the
//! teleoperation server.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod manifest;
pub mod server;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SOFTSCREEN_OUT_DIR";

/// Exit codes shared by every subcommand.
pub mod exit {
    pub const OK: u8 = 0;
    pub const ERROR: u8 = 1;
    pub const STALL: u8 = 2;
}
