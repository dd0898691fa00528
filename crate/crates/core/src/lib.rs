//! Quasi-static simulator of a shape-shifting tracked capsule robot.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod contact;
pub mod error;
pub mod lumen;
pub mod membrane;
pub mod navigation;
mod roots;
pub mod scenario;
pub mod service;
pub mod suite;
pub mod transmission;

pub use calibration::Calibration;
pub use error::{Error, Result};
pub use navigation::{Robot, SimConfig, SimTrace, Termination};
pub use scenario::{ResolvedScenario, ScenarioSpec};
pub use service::{CommandFrame, ServerMessage, Session, StateFrame, PROTO_VERSION};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
