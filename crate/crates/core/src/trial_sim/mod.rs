//! Closed-loop simulation of the 20 s tracking trial and the experimental
//! protocol built from it.

pub mod cloud;
pub mod plant;
pub mod protocol;
pub mod target;

use thiserror::Error;

pub use crate::condition::{HapticLevel, NoiseCondition, VisualLevel};
pub use cloud::{cloud_step, CloudFrame};
pub use plant::{coupling_torque, simulate, simulate_trial, tracking_error, ControllerStandin, PlantConfig, TrialRecord, TrialSetup};
pub use protocol::{run_protocol, DatasetRow, ProtocolSpec, Rule};
pub use target::{offset_zero_set, perturbation_torque, sample_offset, target_position, TargetSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("invalid plant configuration: {0}")]
    Config(String),
    #[error("simulation diverged (non-finite state) at t = {t} s")]
    NonFinite { t: f64 },
    #[error("empty trial record")]
    Empty,
    #[error(transparent)]
    Adaptation(#[from] crate::adaptation::AdaptationError),
    #[error(transparent)]
    Emg(#[from] crate::emg::EmgError),
}
