use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pid::{pid_step, PidGains, PidMemory};
use super::plan::{generate_lawnmower, MissionPlan, Waypoint, WaypointKind};
use super::plant::{plant_step, PlantParams, RovState};
use super::sensor::{Sensor, SensorModel};
use crate::error::{invalid, Error, Result};

pub const CAPTURE_RADIUS: f64 = 0.1;
pub const TRAJECTORY_HEADER: &str = "t,x_true,y_true,z_true,x_meas,y_meas,z_meas,state,u_x,u_z,capture_flag";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionState {
    GoToStart,
    Transect,
    Descend,
    Resurface,
    Done,
}

impl MissionState {
    pub fn name(self) -> &'static str {
        match self {
            MissionState::GoToStart => "go_to_start",
            MissionState::Transect => "transect",
            MissionState::Descend => "descend",
            MissionState::Resurface => "resurface",
            MissionState::Done => "done",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            MissionState::GoToStart,
            MissionState::Transect,
            MissionState::Descend,
            MissionState::Resurface,
            MissionState::Done,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

/// Advances the mission state machine once the vehicle at `(x, z)` is within
/// `radius` of the active waypoint. Waypoints that coincide with the one just
/// reached (the start point and the first row point) are skipped together.
pub fn state_machine_step(
    state: MissionState,
    active: usize,
    x: f64,
    z: f64,
    waypoints: &[Waypoint],
    radius: f64,
) -> (MissionState, usize) {
    if state == MissionState::Done || waypoints.is_empty() {
        return (MissionState::Done, active);
    }
    let wp = &waypoints[active];
    if wp.distance_xz(x, z) > radius {
        return (state, active);
    }
    let mut next = active + 1;
    while next < waypoints.len() && waypoints[next].distance(wp) < 1e-9 {
        next += 1;
    }
    if next >= waypoints.len() {
        return (MissionState::Done, active);
    }
    let state = match waypoints[next].kind {
        WaypointKind::Row { col: 0, .. } => MissionState::Descend,
        WaypointKind::Row { .. } => MissionState::Transect,
        WaypointKind::End => MissionState::Resurface,
        WaypointKind::Start => MissionState::GoToStart,
    };
    (state, next)
}

/// Seeded surges and stops of the reference speed, standing in for an
/// operator or current that breaks uniform motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedJitter {
    /// chance per second of starting a dash
    pub dash_rate: f64,
    pub dash_speed: f64,
    pub dash_duration: f64,
    /// chance per second of starting a hover
    pub hover_rate: f64,
    pub hover_duration: f64,
}

impl Default for SpeedJitter {
    fn default() -> Self {
        Self {
            dash_rate: 0.02,
            dash_speed: 0.45,
            dash_duration: 4.0,
            hover_rate: 0.015,
            hover_duration: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub gains_x: PidGains,
    pub gains_z: PidGains,
    pub plant: PlantParams,
    pub sensor: SensorModel,
    pub seed: u64,
    /// frame capture period during transects (s)
    pub capture_period: f64,
    /// give up after this multiple of the nominal duration
    pub timeout_factor: f64,
    pub jitter: Option<SpeedJitter>,
    /// vehicle position at t = 0; defaults to the surface above the start point
    pub initial_position: Option<[f64; 3]>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            gains_x: PidGains::default(),
            gains_z: PidGains::default(),
            plant: PlantParams::default(),
            sensor: SensorModel::default(),
            seed: 0,
            capture_period: 1.0,
            timeout_factor: 3.0,
            jitter: None,
            initial_position: None,
        }
    }
}

impl SimConfig {
    pub fn noiseless() -> Self {
        Self {
            sensor: SensorModel::noiseless(),
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub true_position: [f64; 3],
    pub true_velocity: [f64; 3],
    pub measured_position: [f64; 3],
    pub state: MissionState,
    pub active_waypoint: usize,
    pub u_x: f64,
    pub u_z: f64,
    pub capture: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionStatus {
    Completed,
    TimedOut,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionLog {
    pub plan: MissionPlan,
    pub waypoints: Vec<Waypoint>,
    pub samples: Vec<TrajectorySample>,
    pub status: MissionStatus,
    /// path length over target speed (s)
    pub nominal_duration: f64,
}

impl MissionLog {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn captures(&self) -> impl Iterator<Item = &TrajectorySample> {
        self.samples.iter().filter(|s| s.capture)
    }

    pub fn capture_times(&self) -> Vec<f64> {
        self.captures().map(|s| s.t).collect()
    }

    /// Distinct states in the order they were entered.
    pub fn state_sequence(&self) -> Vec<MissionState> {
        let mut out: Vec<MissionState> = Vec::new();
        for s in &self.samples {
            if out.last() != Some(&s.state) {
                out.push(s.state);
            }
        }
        out
    }

    /// Closest true approach to each waypoint in the (x, z) plane.
    pub fn waypoint_misses(&self) -> Vec<f64> {
        self.waypoints
            .iter()
            .map(|w| {
                self.samples
                    .iter()
                    .map(|s| w.distance_xz(s.true_position[0], s.true_position[2]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// RMS distance of the true track from the waypoint polyline, over all
    /// samples after the vehicle first reached the start point.
    pub fn cross_track_rms(&self) -> f64 {
        let segs: Vec<(&Waypoint, &Waypoint)> = self.waypoints.iter().zip(self.waypoints.iter().skip(1)).collect();
        let (mut sum, mut n) = (0.0, 0usize);
        for s in self.samples.iter().filter(|s| s.state != MissionState::GoToStart) {
            let (x, z) = (s.true_position[0], s.true_position[2]);
            let d = segs
                .iter()
                .map(|(a, b)| point_segment_distance((x, z), (a.x, a.z), (b.x, b.z)))
                .fold(f64::INFINITY, f64::min);
            sum += d * d;
            n += 1;
        }
        if n == 0 {
            return 0.0;
        }
        (sum / n as f64).sqrt()
    }

    /// `t,x_true,y_true,z_true,x_meas,y_meas,z_meas,state,u_x,u_z,capture_flag`
    pub fn to_csv(&self) -> String {
        let mut s = format!("{TRAJECTORY_HEADER}\n");
        for r in &self.samples {
            let [xt, yt, zt] = r.true_position;
            let [xm, ym, zm] = r.measured_position;
            writeln!(
                s,
                "{:.1},{xt:.6},{yt:.6},{zt:.6},{xm:.6},{ym:.6},{zm:.6},{},{:.6},{:.6},{}",
                r.t,
                r.state.name(),
                r.u_x,
                r.u_z,
                r.capture as u8
            )
            .unwrap();
        }
        s
    }

    /// The ideal track as `x,y,z,kind` rows, for plotting next to the log.
    pub fn ideal_track_csv(&self) -> String {
        let mut s = String::from("x,y,z,kind\n");
        for w in &self.waypoints {
            let kind = match w.kind {
                WaypointKind::Start => "start".to_string(),
                WaypointKind::Row { row, col } => format!("row{row}_col{col}"),
                WaypointKind::End => "end".to_string(),
            };
            writeln!(s, "{},{},{},{kind}", w.x, w.y, w.z).unwrap();
        }
        s
    }
}

/// Reads back the samples written by [`MissionLog::to_csv`]. Velocities and
/// the active waypoint are not part of the file and come back as zero.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectorySample>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(TRAJECTORY_HEADER) {
        return Err(Error::Parse("trajectory csv: unexpected header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = || Error::Parse(format!("trajectory csv line {}: `{l}`", i + 2));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 11 {
                return Err(bad());
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad());
            Ok(TrajectorySample {
                t: num(0)?,
                true_position: [num(1)?, num(2)?, num(3)?],
                true_velocity: [0.0; 3],
                measured_position: [num(4)?, num(5)?, num(6)?],
                state: MissionState::from_name(f[7]).ok_or_else(bad)?,
                active_waypoint: 0,
                u_x: num(8)?,
                u_z: num(9)?,
                capture: match f[10] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                },
            })
        })
        .collect()
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dz) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dz * dz;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dz) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dz)
}

/// Reference-speed schedule drawn once per second.
struct SpeedSchedule {
    jitter: Option<SpeedJitter>,
    rng: ChaCha8Rng,
    base: f64,
    current: f64,
    until: f64,
    next_draw: f64,
}

impl SpeedSchedule {
    fn new(jitter: Option<SpeedJitter>, base: f64, seed: u64) -> Self {
        Self {
            jitter,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_5eed),
            base,
            current: base,
            until: 0.0,
            next_draw: 0.0,
        }
    }

    fn speed(&mut self, t: f64) -> f64 {
        let Some(j) = self.jitter else {
            return self.base;
        };
        if t + 1e-9 >= self.until {
            self.current = self.base;
        }
        if t + 1e-9 >= self.next_draw {
            self.next_draw += 1.0;
            let r: f64 = self.rng.random();
            if t + 1e-9 >= self.until {
                if r < j.dash_rate {
                    self.current = j.dash_speed;
                    self.until = t + j.dash_duration;
                } else if r < j.dash_rate + j.hover_rate {
                    self.current = 0.0;
                    self.until = t + j.hover_duration;
                }
            }
        }
        self.current
    }
}

/// Closed-loop mission: a reference point moves along the waypoint polyline
/// at the target speed, and per-axis PID loops on the measured position chase
/// it. Frames are captured on whole-second ticks while in a transect.
pub fn run_mission(plan: &MissionPlan, cfg: &SimConfig) -> Result<MissionLog> {
    if !(cfg.dt > 0.0 && cfg.dt <= 0.5) {
        return Err(invalid(format!("dt must be in (0, 0.5], got {}", cfg.dt)));
    }
    if !(cfg.capture_period > 0.0) || !(cfg.timeout_factor > 0.0) {
        return Err(invalid("capture period and timeout factor must be positive"));
    }
    cfg.gains_x.validate()?;
    cfg.gains_z.validate()?;
    let waypoints = generate_lawnmower(plan)?;
    let mut plant_params = cfg.plant;
    plant_params.standoff = plan.standoff;

    let start = waypoints[0];
    let initial = cfg.initial_position.unwrap_or([start.x, plan.standoff, 0.0]);
    let mut rov = RovState {
        position: initial,
        velocity: [0.0; 3],
    };
    let mut sensor = Sensor::new(cfg.sensor, cfg.seed)?;
    let mut speeds = SpeedSchedule::new(cfg.jitter, plan.speed_target, cfg.seed);
    let (mut mem_x, mut mem_z) = (PidMemory::default(), PidMemory::default());

    let path = waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum::<f64>()
        + start.distance_xz(initial[0], initial[2]);
    let nominal_duration = path / plan.speed_target;
    let max_steps = (cfg.timeout_factor * nominal_duration / cfg.dt).ceil() as u64;
    let capture_every = (cfg.capture_period / cfg.dt).round().max(1.0) as u64;

    let mut state = MissionState::GoToStart;
    let mut active = 0usize;
    let mut carrot = (initial[0], initial[2]);
    let mut samples = Vec::with_capacity(max_steps.min(1 << 20) as usize);
    let mut status = MissionStatus::TimedOut;

    for step in 0..=max_steps {
        let t = step as f64 * cfg.dt;
        let meas = sensor.sense(rov.position, t);
        let (next_state, next_active) =
            state_machine_step(state, active, meas[0], meas[2], &waypoints, CAPTURE_RADIUS);
        if next_active != active {
            // the reference restarts from the waypoint just reached
            let reached = &waypoints[active];
            carrot = (reached.x, reached.z);
        }
        state = next_state;
        active = next_active;
        if state == MissionState::Done {
            samples.push(TrajectorySample {
                t,
                true_position: rov.position,
                true_velocity: rov.velocity,
                measured_position: meas,
                state,
                active_waypoint: active,
                u_x: 0.0,
                u_z: 0.0,
                capture: false,
            });
            status = MissionStatus::Completed;
            break;
        }

        let target = &waypoints[active];
        let v_ref = speeds.speed(t);
        let (dx, dz) = (target.x - carrot.0, target.z - carrot.1);
        let gap = dx.hypot(dz);
        let stride = v_ref * cfg.dt;
        carrot = if gap <= stride {
            (target.x, target.z)
        } else {
            (carrot.0 + dx / gap * stride, carrot.1 + dz / gap * stride)
        };

        let u_x = pid_step(&cfg.gains_x, carrot.0 - meas[0], meas[0], cfg.dt, &mut mem_x);
        let u_z = pid_step(&cfg.gains_z, carrot.1 - meas[2], meas[2], cfg.dt, &mut mem_z);
        samples.push(TrajectorySample {
            t,
            true_position: rov.position,
            true_velocity: rov.velocity,
            measured_position: meas,
            state,
            active_waypoint: active,
            u_x,
            u_z,
            capture: state == MissionState::Transect && step % capture_every == 0,
        });
        rov = plant_step(&rov, u_x, u_z, cfg.dt, &plant_params);
    }

    Ok(MissionLog {
        plan: *plan,
        waypoints,
        samples,
        status,
        nominal_duration,
    })
}
