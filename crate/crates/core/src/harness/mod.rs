//! Simulation harness: scenarios, the closed-loop engine, metrics, sweeps and
//! built-in presets.

pub mod engine;
pub mod linear;
pub mod metrics;
pub mod presets;
pub mod scenario;
pub mod sweep;
pub mod trace;

pub use engine::run_scenario;
pub use metrics::{improvement, metrics, window_metrics, Metrics};
pub use presets::{preset, Figure, Preset};
pub use scenario::Scenario;
pub use sweep::{run_sweep, Axis, ControllerVariant, SweepSummary};
pub use trace::{SimTrace, TraceRow};
