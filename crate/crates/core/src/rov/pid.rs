use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// symmetric clamp on the command
    pub output_limit: f64,
    /// symmetric clamp on the accumulated error integral (m·s)
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 0.8,
            ki: 0.05,
            kd: 0.2,
            output_limit: 1.0,
            integral_limit: 2.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<()> {
        let all = [self.kp, self.ki, self.kd, self.output_limit, self.integral_limit];
        if all.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(invalid(format!("PID gains and limits must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }
}

/// Smoothing factor of the derivative filter: weight on the previous value.
pub const DERIVATIVE_SMOOTHING: f64 = 0.8;

/// Controller memory between steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PidMemory {
    pub integral: f64,
    pub derivative: f64,
    pub last_measurement: Option<f64>,
}

/// One PID update. The derivative acts on the measurement rather than the
/// error, so setpoint jumps do not kick the output, and is low-pass filtered.
pub fn pid_step(gains: &PidGains, error: f64, measurement: f64, dt: f64, mem: &mut PidMemory) -> f64 {
    debug_assert!(dt > 0.0);
    mem.integral = (mem.integral + error * dt).clamp(-gains.integral_limit, gains.integral_limit);
    let raw = match mem.last_measurement {
        Some(prev) => -(measurement - prev) / dt,
        None => 0.0,
    };
    mem.derivative = DERIVATIVE_SMOOTHING * mem.derivative + (1.0 - DERIVATIVE_SMOOTHING) * raw;
    mem.last_measurement = Some(measurement);
    let u = gains.kp * error + gains.ki * mem.integral + gains.kd * mem.derivative;
    u.clamp(-gains.output_limit, gains.output_limit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_only(kp: f64) -> PidGains {
        PidGains {
            kp,
            ki: 0.0,
            kd: 0.0,
            ..PidGains::default()
        }
    }

    #[test]
    fn zero_error_zero_output() {
        let mut m = PidMemory::default();
        assert_eq!(pid_step(&PidGains::default(), 0.0, 3.0, 0.1, &mut m), 0.0);
    }

    #[test]
    fn proportional_and_saturation() {
        let mut m = PidMemory::default();
        assert_eq!(pid_step(&p_only(1.0), 0.5, 0.0, 0.1, &mut m), 0.5);
        let mut m = PidMemory::default();
        assert_eq!(pid_step(&p_only(2.0), 1.0, 0.0, 0.1, &mut m), 1.0);
        assert_eq!(pid_step(&p_only(2.0), -1.0, 0.0, 0.1, &mut m), -1.0);
    }

    #[test]
    fn integral_is_clamped() {
        let g = PidGains {
            kp: 0.0,
            ki: 1.0,
            kd: 0.0,
            output_limit: 10.0,
            integral_limit: 0.5,
        };
        let mut m = PidMemory::default();
        for _ in 0..100 {
            let u = pid_step(&g, 1.0, 0.0, 0.1, &mut m);
            assert!(m.integral.abs() <= 0.5);
            assert!(u <= 0.5 + 1e-12);
        }
        assert_eq!(m.integral, 0.5);
    }

    #[test]
    fn derivative_on_measurement_is_smoothed() {
        let g = PidGains {
            kp: 0.0,
            ki: 0.0,
            kd: 1.0,
            output_limit: 100.0,
            integral_limit: 1.0,
        };
        let mut m = PidMemory::default();
        assert_eq!(pid_step(&g, 5.0, 0.0, 0.1, &mut m), 0.0, "no derivative on the first step");
        // measurement rises 0.1 per 0.1 s: raw derivative -1, filtered 0.2 * -1
        let u = pid_step(&g, 5.0, 0.1, 0.1, &mut m);
        assert!((u + 0.2).abs() < 1e-12);
        let u = pid_step(&g, 5.0, 0.2, 0.1, &mut m);
        assert!((u + 0.36).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_gains() {
        assert!(p_only(-1.0).validate().is_err());
        assert!(PidGains::default().validate().is_ok());
    }
}
