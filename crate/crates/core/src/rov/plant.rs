use serde::{Deserialize, Serialize};

/// Vehicle state in net coordinates: `x` along the net, `y` distance to
/// the net, `z` depth (positive down). Heading is held constant and not
/// modeled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RovState {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// velocity time constant (s)
    pub tau: f64,
    /// speed reached at full thrust (m/s)
    pub v_max: f64,
    /// standoff the passive axis relaxes toward (m)
    pub standoff: f64,
    /// spring rate of the passive axis (1/s)
    pub standoff_stiffness: f64,
    /// constant current pushing along the passive axis (m/s)
    pub disturbance: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            tau: 0.5,
            v_max: 0.5,
            standoff: 1.0,
            standoff_stiffness: 0.5,
            disturbance: 0.0,
        }
    }
}

/// Advances one axis of `v' = (target - v) / tau` exactly over `dt` with a
/// constant target; returns (new velocity, displacement).
fn first_order(v: f64, target: f64, tau: f64, dt: f64) -> (f64, f64) {
    let decay = (-dt / tau).exp();
    let v_next = target + (v - target) * decay;
    let dx = target * dt + (v - target) * tau * (1.0 - decay);
    (v_next, dx)
}

/// Advances the plant by `dt` under thrust commands `u_x`, `u_z` in [-1, 1].
///
/// Each axis is a first-order velocity lag driven toward `u * v_max`; the
/// solution is integrated in closed form, so the response is exact for any
/// step size. The passive axis is pulled toward the standoff by a weak
/// spring plus the disturbance current.
pub fn plant_step(state: &RovState, u_x: f64, u_z: f64, dt: f64, p: &PlantParams) -> RovState {
    let [x, y, z] = state.position;
    let [vx, vy, vz] = state.velocity;
    let (vx, dx) = first_order(vx, u_x.clamp(-1.0, 1.0) * p.v_max, p.tau, dt);
    let (vz, dz) = first_order(vz, u_z.clamp(-1.0, 1.0) * p.v_max, p.tau, dt);
    let y_target = (p.standoff_stiffness * (p.standoff - y) + p.disturbance).clamp(-p.v_max, p.v_max);
    let (vy, dy) = first_order(vy, y_target, p.tau, dt);
    let mut next = RovState {
        position: [x + dx, y + dy, z + dz],
        velocity: [vx, vy, vz],
    };
    if next.position[2] < 0.0 {
        next.position[2] = 0.0;
        next.velocity[2] = next.velocity[2].max(0.0);
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at_rest(y: f64) -> RovState {
        RovState {
            position: [1.0, y, 2.0],
            velocity: [0.0; 3],
        }
    }

    #[test]
    fn no_thrust_no_motion() {
        let p = PlantParams::default();
        let s = at_rest(p.standoff);
        assert_eq!(plant_step(&s, 0.0, 0.0, 0.1, &p), s);
    }

    /// v(t) = v_max (1 - e^{-t/tau}), x(t) = v_max (t - tau (1 - e^{-t/tau}))
    fn closed_form(v0: f64, target: f64, tau: f64, t: f64) -> (f64, f64) {
        let e = (-t / tau).exp();
        (target + (v0 - target) * e, target * t + (v0 - target) * tau * (1.0 - e))
    }

    #[test]
    fn step_response_matches_closed_form() {
        let p = PlantParams::default();
        let mut s = at_rest(p.standoff);
        let x0 = s.position[0];
        for k in 1..=50 {
            s = plant_step(&s, 1.0, 0.0, 0.1, &p);
            let t = k as f64 * 0.1;
            let (v, x) = closed_form(0.0, p.v_max, p.tau, t);
            assert!((s.velocity[0] - v).abs() < 1e-3);
            assert!((s.position[0] - x0 - x).abs() < 1e-3);
            if k == 5 {
                let want = p.v_max * (1.0 - (-1.0f64).exp());
                assert!((s.velocity[0] - want).abs() < 1e-3, "v(tau) = {}", s.velocity[0]);
            }
        }
        assert!(s.velocity[0] < p.v_max);
    }

    #[test]
    fn reversal_matches_closed_form() {
        let p = PlantParams::default();
        let mut s = at_rest(p.standoff);
        for _ in 0..10 {
            s = plant_step(&s, 0.0, 1.0, 0.1, &p);
        }
        let (v1, _) = closed_form(0.0, p.v_max, p.tau, 1.0);
        assert!((s.velocity[2] - v1).abs() < 1e-3);
        let mut crossed = false;
        for k in 1..=20 {
            s = plant_step(&s, 0.0, -1.0, 0.1, &p);
            let (v, _) = closed_form(v1, -p.v_max, p.tau, k as f64 * 0.1);
            assert!((s.velocity[2] - v).abs() < 1e-3);
            crossed |= s.velocity[2] < 0.0;
        }
        assert!(crossed);
    }

    #[test]
    fn depth_never_negative() {
        let p = PlantParams::default();
        let mut s = RovState {
            position: [0.0, 1.0, 0.05],
            velocity: [0.0, 0.0, -0.5],
        };
        for _ in 0..20 {
            s = plant_step(&s, 0.0, -1.0, 0.1, &p);
            assert!(s.position[2] >= 0.0);
        }
        assert_eq!(s.position[2], 0.0);
    }

    #[test]
    fn standoff_spring_and_disturbance() {
        let p = PlantParams::default();
        let mut s = at_rest(1.4);
        for _ in 0..400 {
            s = plant_step(&s, 0.0, 0.0, 0.1, &p);
        }
        assert!((s.position[1] - 1.0).abs() < 1e-3);
        let pushed = PlantParams {
            disturbance: 0.05,
            ..p
        };
        for _ in 0..400 {
            s = plant_step(&s, 0.0, 0.0, 0.1, &pushed);
        }
        // equilibrium where k (standoff - y) + d = 0
        assert!((s.position[1] - 1.1).abs() < 1e-3);
    }
}
