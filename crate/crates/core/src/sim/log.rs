use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{frame_rng, in_fov, propagate_truth, render_measurements, world_to_ego, Scenario};
use crate::types::{CameraMeasurement, EgoMotion, LidarMeasurement, ObjectClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoRecord {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl EgoRecord {
    pub fn motion(&self) -> EgoMotion {
        EgoMotion::new(self.vx, self.vy, self.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

/// One agent's truth at a frame, in the world and relative to the ego.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub id: u64,
    pub class: ObjectClass,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
    pub omega: f64,
    pub rel: RelativePose,
    /// Inside the field of view of at least one sensor.
    pub in_view: bool,
}

/// One line of the simulation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFrameRecord {
    pub frame: usize,
    pub t: f64,
    pub ego: EgoRecord,
    pub truth: Vec<TruthRecord>,
    pub camera_meas: Vec<CameraMeasurement>,
    pub lidar_meas: Vec<LidarMeasurement>,
}

/// Runs a scenario. Frames are rendered in parallel; each uses its own RNG
/// stream so the output does not depend on scheduling.
pub fn simulate(scenario: &Scenario) -> Vec<SimFrameRecord> {
    let world = propagate_truth(scenario);
    let sensors = &scenario.sensors;
    world
        .par_iter()
        .map(|wf| {
            let mut rng = frame_rng(scenario.seed, wf.frame);
            let rendered = render_measurements(wf, sensors, &mut rng);
            let e = &wf.ego;
            let truth = wf
                .agents
                .iter()
                .map(|a| {
                    let rel = world_to_ego(a, &e.pose);
                    TruthRecord {
                        id: a.id,
                        class: a.class,
                        x: a.pose.x,
                        y: a.pose.y,
                        psi: a.pose.psi,
                        v: a.v,
                        omega: a.omega,
                        rel: RelativePose { x: rel.x, y: rel.y, psi: rel.psi },
                        in_view: in_fov(rel.x, rel.y, sensors.camera.fov_deg, sensors.camera.range_m)
                            || in_fov(rel.x, rel.y, sensors.lidar.fov_deg, sensors.lidar.range_m),
                    }
                })
                .collect();
            SimFrameRecord {
                frame: wf.frame,
                t: wf.t,
                ego: EgoRecord { x: e.pose.x, y: e.pose.y, psi: e.pose.psi, vx: e.vx, vy: e.vy, omega: e.omega },
                truth,
                camera_meas: rendered.camera,
                lidar_meas: rendered.lidar,
            }
        })
        .collect()
}
