//! Config keys understood by the commands, with their defaults.
//!
//! ```text
//! net.pitch  net.twine
//! camera.focal_mm  camera.sensor_width_mm  camera.sensor_height_mm  camera.width  camera.height
//! scene.distance  scene.coverage  scene.patch_size  scene.seed
//! degrade.blur  degrade.gradient  degrade.skew  degrade.noise
//! mission.coverage  mission.standoff  mission.seed  mission.net_width  mission.net_height  mission.exposure
//! plan.x_min  plan.x_max  plan.z_min  plan.z_max  plan.n_horizontal  plan.n_vertical  plan.speed
//! sim.seed  sim.dt  sim.noiseless  sim.sigma_xy  sim.xy_rate  sim.dropout  sim.sigma_z  sim.jitter  sim.timeout_factor
//! estimate.min_centers  estimate.track  estimate.min_speed  estimate.max_speed  estimate.median_tolerance
//! train.colorspace  train.epochs  train.learning_rate  train.threshold  train.max_pixels  train.seed  train.split
//! ```

use pengauge::cluster::ColorSpace;
use pengauge::config::Config;
use pengauge::error::{Error, Result};
use pengauge::fouling::{EstimateConfig, TrackSource};
use pengauge::geometry::{CameraModel, NetSpec};
use pengauge::rov::{MissionPlan, SensorModel, SimConfig, SpeedJitter};
use pengauge::segmentation::TrainConfig;
use pengauge::synth::{Degradation, MissionSceneSpec, SceneSpec};

pub fn net(cfg: &Config) -> Result<NetSpec> {
    let d = NetSpec::default();
    NetSpec::new(cfg.get_or("net.pitch", d.pitch)?, cfg.get_or("net.twine", d.twine)?)
}

pub fn camera(cfg: &Config) -> Result<CameraModel> {
    let d = CameraModel::synthetic();
    let cam = CameraModel {
        focal_length: cfg.get_or("camera.focal_mm", d.focal_length)?,
        sensor_width: cfg.get_or("camera.sensor_width_mm", d.sensor_width)?,
        sensor_height: cfg.get_or("camera.sensor_height_mm", d.sensor_height)?,
        image_width: cfg.get_or("camera.width", d.image_width)?,
        image_height: cfg.get_or("camera.height", d.image_height)?,
    };
    cam.validate()?;
    Ok(cam)
}

pub fn degradation(cfg: &Config) -> Result<Degradation> {
    let d = Degradation::default();
    Ok(Degradation {
        blur_sigma: cfg.get_or("degrade.blur", d.blur_sigma)?,
        brightness_gradient: cfg.get_or("degrade.gradient", d.brightness_gradient)?,
        skew: cfg.get_or("degrade.skew", d.skew)?,
        noise_sigma: cfg.get_or("degrade.noise", d.noise_sigma)?,
    })
}

pub fn scene_spec(cfg: &Config) -> Result<SceneSpec> {
    let d = SceneSpec::default();
    Ok(SceneSpec {
        net: net(cfg)?,
        cam: camera(cfg)?,
        distance: cfg.get_or("scene.distance", d.distance)?,
        patch_size: cfg.get_or("scene.patch_size", d.patch_size)?,
        target_coverage: cfg.get_or("scene.coverage", d.target_coverage)?,
        seed: cfg.get_or("scene.seed", d.seed)?,
        degradation: degradation(cfg)?,
    })
}

pub fn mission_scene(cfg: &Config) -> Result<MissionSceneSpec> {
    let d = MissionSceneSpec::default();
    let spec = MissionSceneSpec {
        net: net(cfg)?,
        cam: camera(cfg)?,
        net_width: cfg.get_or("mission.net_width", d.net_width)?,
        net_height: cfg.get_or("mission.net_height", d.net_height)?,
        patch_size: cfg.get_or("scene.patch_size", d.patch_size)?,
        target_coverage: cfg.get_or("mission.coverage", d.target_coverage)?,
        seed: cfg.get_or("mission.seed", d.seed)?,
        degradation: degradation(cfg)?,
        exposure: cfg.get_or("mission.exposure", d.exposure)?,
    };
    spec.validate()?;
    Ok(spec)
}

/// The inspection lawnmower for the mission net, with any `plan.*` keys
/// taking precedence.
pub fn mission_plan(cfg: &Config, scene: &MissionSceneSpec) -> Result<MissionPlan> {
    let base = scene.inspection_plan(cfg.get_or("mission.standoff", 1.0)?);
    let plan = MissionPlan {
        x_min: cfg.get_or("plan.x_min", base.x_min)?,
        x_max: cfg.get_or("plan.x_max", base.x_max)?,
        z_min: cfg.get_or("plan.z_min", base.z_min)?,
        z_max: cfg.get_or("plan.z_max", base.z_max)?,
        n_horizontal: cfg.get_or("plan.n_horizontal", base.n_horizontal)?,
        n_vertical: cfg.get_or("plan.n_vertical", base.n_vertical)?,
        standoff: base.standoff,
        speed_target: cfg.get_or("plan.speed", base.speed_target)?,
    };
    plan.validate()?;
    Ok(plan)
}

pub fn sim_config(cfg: &Config) -> Result<SimConfig> {
    let base = if cfg.get_or("sim.noiseless", false)? {
        SimConfig::noiseless()
    } else {
        SimConfig::default()
    };
    let s = base.sensor;
    Ok(SimConfig {
        seed: cfg.get_or("sim.seed", cfg.get_or("mission.seed", 0u64)?)?,
        dt: cfg.get_or("sim.dt", base.dt)?,
        timeout_factor: cfg.get_or("sim.timeout_factor", base.timeout_factor)?,
        sensor: SensorModel {
            sigma_xy: cfg.get_or("sim.sigma_xy", s.sigma_xy)?,
            xy_rate: cfg.get_or("sim.xy_rate", s.xy_rate)?,
            dropout: cfg.get_or("sim.dropout", s.dropout)?,
            sigma_z: cfg.get_or("sim.sigma_z", s.sigma_z)?,
        },
        jitter: cfg.get_or("sim.jitter", false)?.then(SpeedJitter::default),
        ..base
    })
}

pub fn estimate_config(cfg: &Config) -> Result<EstimateConfig> {
    let d = EstimateConfig::default();
    let track = match cfg.get_str("estimate.track") {
        None | Some("true") => TrackSource::True,
        Some("measured") => TrackSource::Measured,
        Some(other) => {
            return Err(Error::Config(format!(
                "`estimate.track` = `{other}`: expected true or measured"
            )))
        }
    };
    let mut movement = d.movement;
    movement.min_speed = cfg.get_or("estimate.min_speed", movement.min_speed)?;
    movement.max_speed = cfg.get_or("estimate.max_speed", movement.max_speed)?;
    movement.median_tolerance = cfg.get_or("estimate.median_tolerance", movement.median_tolerance)?;
    Ok(EstimateConfig {
        net: net(cfg)?,
        camera: camera(cfg)?,
        movement,
        track,
        min_centers: cfg.get_or("estimate.min_centers", d.min_centers)?,
        ..d
    })
}

pub fn train_config(cfg: &Config) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    Ok(TrainConfig {
        colorspace: cfg.get_or("train.colorspace", ColorSpace::Rgb)?,
        epochs: cfg.get_or("train.epochs", d.epochs)?,
        learning_rate: cfg.get_or("train.learning_rate", d.learning_rate)?,
        threshold: cfg.get_or("train.threshold", d.threshold)?,
        max_pixels: cfg.get_or("train.max_pixels", d.max_pixels)?,
        seed: cfg.get_or("train.seed", d.seed)?,
    })
}
