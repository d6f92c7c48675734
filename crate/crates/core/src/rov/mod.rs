//! Desk-scale ROV mission simulator: lawnmower waypoints, a mission state
//! machine, per-axis PID control of a first-order plant, and noisy acoustic
//! and depth measurements.

mod mission;
mod pid;
mod plan;
mod plant;
mod sensor;

pub use mission::{
    parse_trajectory_csv, run_mission, state_machine_step, MissionLog, MissionState, MissionStatus, SimConfig, SpeedJitter,
    TrajectorySample, CAPTURE_RADIUS, TRAJECTORY_HEADER,
};
pub use pid::{pid_step, PidGains, PidMemory, DERIVATIVE_SMOOTHING};
pub use plan::{generate_lawnmower, MissionPlan, Waypoint, WaypointKind};
pub use plant::{plant_step, PlantParams, RovState};
pub use sensor::{Sensor, SensorModel};
