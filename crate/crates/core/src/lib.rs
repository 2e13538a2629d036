//! Simulation and control of a tethered towing kite on the constrained-kite
//! design model.
//!
//! * [`kinematics`]: geometry, body triad, steady-state relations.
//! * [`plant`]: RK4 plant, steering pod, wind and sensors.
//! * [`controller`]: cascaded model-following controller.
//! * [`guidance`]: figure-eight pattern, bang-bang excitation, azimuth hold.
//! * [`sysid`]: batch and recursive identification of the turn-rate law.
//! * [`scenario`], [`telemetry`], [`harness`]: scenario files, CSV logs and
//!   the runner behind the `kitepilot` binary.

pub mod controller;
pub mod guidance;
pub mod harness;
pub mod kinematics;
pub mod plant;
pub mod scenario;
pub mod selftest;
pub mod sysid;
pub mod telemetry;

pub use controller::{ControlInput, ControlOutput, Controller, ControllerConfig};
pub use harness::{run_scenario, Outcome, RunSummary};
pub use kinematics::Angles;
pub use plant::{AeroParams, Plant, SimError};
pub use scenario::{parse_scenario, serialize_scenario, Mode, Scenario, ScenarioError};
pub use sysid::{FlightLogRow, RlsState, SysidError};
pub use telemetry::{read_log, write_log, LogRow};
