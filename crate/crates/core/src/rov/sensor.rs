use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Noise model of the acoustic positioning fix (x, y) and the depth gauge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub sigma_xy: f64,
    /// acoustic fix rate (Hz)
    pub xy_rate: f64,
    /// probability that an acoustic fix is lost and the last one is held
    pub dropout: f64,
    pub sigma_z: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            sigma_xy: 0.15,
            xy_rate: 2.0,
            dropout: 0.05,
            sigma_z: 0.01,
        }
    }
}

impl SensorModel {
    pub fn noiseless() -> Self {
        Self {
            sigma_xy: 0.0,
            dropout: 0.0,
            sigma_z: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_xy >= 0.0
            && self.sigma_z >= 0.0
            && self.xy_rate > 0.0
            && (0.0..1.0).contains(&self.dropout)
            && self.sigma_xy.is_finite()
            && self.sigma_z.is_finite();
        if !ok {
            return Err(invalid(format!("invalid sensor model: {self:?}")));
        }
        Ok(())
    }
}

/// Stateful measurement source: acoustic xy at `xy_rate` with hold-last on
/// dropout, depth at every call.
#[derive(Clone, Debug)]
pub struct Sensor {
    model: SensorModel,
    rng: ChaCha8Rng,
    xy_noise: Normal<f64>,
    z_noise: Normal<f64>,
    next_fix: f64,
    held_xy: Option<[f64; 2]>,
}

impl Sensor {
    pub fn new(model: SensorModel, seed: u64) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            xy_noise: Normal::new(0.0, model.sigma_xy).expect("validated sigma"),
            z_noise: Normal::new(0.0, model.sigma_z).expect("validated sigma"),
            next_fix: 0.0,
            held_xy: None,
        })
    }

    /// Measures `truth` at time `t`; calls must come in non-decreasing `t`.
    pub fn sense(&mut self, truth: [f64; 3], t: f64) -> [f64; 3] {
        let period = 1.0 / self.model.xy_rate;
        if t + 1e-9 >= self.next_fix {
            // the very first fix is never dropped so there is always a value to hold
            let lost = self.held_xy.is_some() && self.rng.random::<f64>() < self.model.dropout;
            let nx = self.xy_noise.sample(&mut self.rng);
            let ny = self.xy_noise.sample(&mut self.rng);
            if !lost {
                self.held_xy = Some([truth[0] + nx, truth[1] + ny]);
            }
            while self.next_fix <= t + 1e-9 {
                self.next_fix += period;
            }
        }
        let [x, y] = self.held_xy.expect("first call takes a fix");
        [x, y, truth[2] + self.z_noise.sample(&mut self.rng)]
    }
}
