//! Scenario configuration, the simulation loop and its outputs.

pub mod config;
pub mod plots;
pub mod sim;
pub mod telemetry;

pub use config::{Scenario, ScenarioConfig};
pub use plots::emit_plots;
pub use sim::{run, Aborted, Simulation, Truth};
pub use telemetry::{emit_csv, Record, Telemetry};
