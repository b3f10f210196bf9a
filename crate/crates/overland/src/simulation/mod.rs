//! Scenario driver: spin-up at constant discharge, hydrograph forcing,
//! maxima maps, mass balance, snapshots and checkpoints.

mod checkpoint;
mod hydrograph;
mod monitor;
mod run;
mod scenario;
pub mod synthetic;

pub use checkpoint::{params_hash, Checkpoint};
pub use hydrograph::{interpolate_q, Forcing, Hydrograph, SpinUp};
pub use monitor::{relative_change, steady_state_monitor, SteadyStateMonitor};
pub use run::{run, snapshot_name, MassBalance, MaximaMaps, RunOutcome, Simulation};
pub use scenario::{EdgeKind, Scenario, Terrain};
