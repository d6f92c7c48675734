use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Lawnmower coverage program over a rectangle of the net plane.
///
/// `x` runs along the net, `z` is depth (positive down), `standoff` is the
/// camera-to-net distance held on the passive axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionPlan {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub n_horizontal: usize,
    pub n_vertical: usize,
    pub standoff: f64,
    pub speed_target: f64,
}

impl Default for MissionPlan {
    /// A 14 m x 3 m net covered by 8 transects between 0.5 m and 2.5 m depth.
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 14.0,
            z_min: 0.5,
            z_max: 2.5,
            n_horizontal: 2,
            n_vertical: 8,
            standoff: 1.0,
            speed_target: 0.15,
        }
    }
}

impl MissionPlan {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.z_min, self.z_max, self.standoff, self.speed_target]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("mission plan has non-finite values"));
        }
        if !(self.x_min < self.x_max) {
            return Err(invalid(format!("need x_min < x_max, got {} and {}", self.x_min, self.x_max)));
        }
        if !(self.z_min < self.z_max) && self.n_vertical > 1 {
            return Err(invalid(format!("need z_min < z_max, got {} and {}", self.z_min, self.z_max)));
        }
        if self.z_min < 0.0 {
            return Err(invalid(format!("depth cannot be negative, got z_min {}", self.z_min)));
        }
        if self.n_horizontal < 2 || self.n_vertical < 1 {
            return Err(invalid(format!(
                "need n_horizontal >= 2 and n_vertical >= 1, got {} and {}",
                self.n_horizontal, self.n_vertical
            )));
        }
        if !(self.standoff > 0.0) || !(self.speed_target > 0.0) {
            return Err(invalid("standoff and speed_target must be positive"));
        }
        Ok(())
    }

    /// Depth of each transect row, shallowest first.
    pub fn row_depths(&self) -> Vec<f64> {
        if self.n_vertical == 1 {
            return vec![self.z_min];
        }
        let step = (self.z_max - self.z_min) / (self.n_vertical - 1) as f64;
        (0..self.n_vertical).map(|i| self.z_min + step * i as f64).collect()
    }

    fn columns(&self) -> Vec<f64> {
        let step = (self.x_max - self.x_min) / (self.n_horizontal - 1) as f64;
        (0..self.n_horizontal).map(|i| self.x_min + step * i as f64).collect()
    }

    /// Length of the waypoint polyline, from the start point to the end point.
    pub fn path_length(&self) -> Result<f64> {
        let wps = generate_lawnmower(self)?;
        Ok(wps.windows(2).map(|w| w[0].distance(&w[1])).sum())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WaypointKind {
    Start,
    Row { row: usize, col: usize },
    End,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub kind: WaypointKind,
}

impl Waypoint {
    /// Distance in the controlled (x, z) plane.
    pub fn distance_xz(&self, x: f64, z: f64) -> f64 {
        (self.x - x).hypot(self.z - z)
    }

    pub fn distance(&self, o: &Waypoint) -> f64 {
        self.distance_xz(o.x, o.z)
    }
}

/// Serpentine waypoints: the start point (the first row's first point),
/// `n_vertical` rows of `n_horizontal` points alternating direction, and a
/// surface point above the last one.
pub fn generate_lawnmower(plan: &MissionPlan) -> Result<Vec<Waypoint>> {
    plan.validate()?;
    let y = plan.standoff;
    let cols = plan.columns();
    let mut out = Vec::with_capacity(plan.n_horizontal * plan.n_vertical + 2);
    for (row, &z) in plan.row_depths().iter().enumerate() {
        let order: Box<dyn Iterator<Item = &f64>> = if row % 2 == 0 {
            Box::new(cols.iter())
        } else {
            Box::new(cols.iter().rev())
        };
        for (col, &x) in order.enumerate() {
            out.push(Waypoint {
                x,
                y,
                z,
                kind: WaypointKind::Row { row, col },
            });
        }
    }
    let first = out[0];
    let last = *out.last().expect("at least one row");
    out.insert(
        0,
        Waypoint {
            kind: WaypointKind::Start,
            ..first
        },
    );
    out.push(Waypoint {
        x: last.x,
        y,
        z: 0.0,
        kind: WaypointKind::End,
    });
    Ok(out)
}
