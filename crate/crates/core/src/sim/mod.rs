//! Synthetic world: ground-truth kinematics, sensor models and the
//! measurement/truth log.
//!
//! Everything is deterministic given the scenario and its seed. Each frame
//! draws from its own RNG stream, so frames can be generated in any order.

mod consistency;
mod kinematics;
mod log;
mod sensors;

pub use consistency::{consistency_check, monte_carlo_nees, ConsistencyReport, NeesReport, StepDiscrepancy};
pub use kinematics::{propagate_truth, world_to_ego, AgentTruthState, EgoTruthState, Pose, WorldFrame};
pub use log::{simulate, EgoRecord, RelativePose, SimFrameRecord, TruthRecord};
pub use sensors::{frame_rng, in_fov, render_measurements, RenderedFrame};

use serde::{Deserialize, Serialize};

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::lidar::ClusteringParams;
use crate::types::{ObjectClass, PerClass};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

/// Constant-velocity piece of a motion profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration_frames: usize,
    /// Speed along the heading, m/s.
    pub v: f64,
    /// Yaw rate, rad/s.
    pub omega: f64,
    /// Lateral body velocity, m/s. Only meaningful for the ego.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub vy: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl Segment {
    pub fn new(duration_frames: usize, v: f64, omega: f64) -> Self {
        Self { duration_frames, v, omega, vy: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec {
    pub pose0: Pose,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: u64,
    pub class: ObjectClass,
    pub pose0: Pose,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    /// Full horizontal field of view, degrees.
    pub fov_deg: f64,
    pub range_m: f64,
    pub p_detect: f64,
    pub sigma_pos_per_class: PerClass<f64>,
    pub sigma_yaw_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LidarMode {
    /// Noisy centroids directly.
    Centroid,
    /// Sampled box point clouds through the clustering pipeline.
    Cloud,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarModel {
    pub mode: LidarMode,
    pub fov_deg: f64,
    pub range_m: f64,
    pub p_detect: f64,
    /// Centroid noise in centroid mode, per-point noise in cloud mode.
    pub sigma_pos: f64,
    /// Box length, width, height per class (cloud mode).
    #[serde(default = "default_box_dims")]
    pub box_dims: PerClass<[f64; 3]>,
    #[serde(default = "default_points_per_face")]
    pub points_per_face: usize,
    /// Ground points sampled in the sensor sector (cloud mode).
    #[serde(default = "default_ground_points")]
    pub ground_points: usize,
    #[serde(default)]
    pub clustering: ClusteringParams,
}

fn default_box_dims() -> PerClass<[f64; 3]> {
    PerClass {
        pedestrian: [0.5, 0.5, 1.75],
        cyclist: [1.8, 0.6, 1.7],
        car: [4.5, 1.8, 1.5],
        other: [1.0, 1.0, 1.0],
    }
}

fn default_points_per_face() -> usize {
    150
}

fn default_ground_points() -> usize {
    1500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    pub camera: CameraModel,
    pub lidar: LidarModel,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            camera: CameraModel {
                fov_deg: 120.0,
                range_m: 70.0,
                p_detect: 0.9,
                sigma_pos_per_class: PerClass { pedestrian: 0.6, cyclist: 0.55, car: 0.5, other: 0.5 },
                sigma_yaw_deg: 5.0,
            },
            lidar: LidarModel {
                mode: LidarMode::Centroid,
                fov_deg: 180.0,
                range_m: 80.0,
                p_detect: 0.95,
                sigma_pos: 0.1,
                box_dims: default_box_dims(),
                points_per_face: default_points_per_face(),
                ground_points: default_ground_points(),
                clustering: ClusteringParams::default(),
            },
        }
    }
}

impl SensorModel {
    /// Default tracker settings with measurement noise set from this model.
    /// The camera position noise is the car class's.
    pub fn matched_tracker_config(&self, ts: f64) -> TrackerConfig {
        TrackerConfig::default().with_ts(ts).with_sensor_sigmas(
            self.lidar.sigma_pos,
            self.camera.sigma_pos_per_class.car,
            self.camera.sigma_yaw_deg.to_radians(),
        )
    }
}

/// A complete simulation description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format_version: u32,
    #[serde(rename = "Ts")]
    pub ts: f64,
    pub n_frames: usize,
    pub seed: u64,
    pub ego: EgoSpec,
    pub agents: Vec<AgentSpec>,
    pub sensors: SensorModel,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.format_version != SCENARIO_FORMAT_VERSION {
            return bad(format!("unsupported scenario format_version {}", self.format_version));
        }
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return bad(format!("Ts must be > 0, got {}", self.ts));
        }
        if self.n_frames == 0 {
            return bad("n_frames must be at least 1".into());
        }
        let profiles = std::iter::once(("ego".to_string(), &self.ego.pose0, &self.ego.segments)).chain(
            self.agents.iter().map(|a| (format!("agent {}", a.id), &a.pose0, &a.segments)),
        );
        for (who, pose, segs) in profiles {
            if segs.is_empty() {
                return bad(format!("{who} has no motion segments"));
            }
            if ![pose.x, pose.y, pose.psi].iter().all(|v| v.is_finite())
                || segs.iter().any(|s| ![s.v, s.omega, s.vy].iter().all(|v| v.is_finite()))
            {
                return bad(format!("{who} has non-finite motion values"));
            }
        }
        let mut ids: Vec<u64> = self.agents.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("agent ids must be unique".into());
        }
        let cam = &self.sensors.camera;
        let lid = &self.sensors.lidar;
        for (name, p) in [("camera p_detect", cam.p_detect), ("lidar p_detect", lid.p_detect)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        let sigmas = cam.sigma_pos_per_class.values().into_iter().chain([cam.sigma_yaw_deg, lid.sigma_pos]);
        for s in sigmas {
            if s.is_nan() || s < 0.0 {
                return bad(format!("noise standard deviations must be >= 0, got {s}"));
            }
        }
        for (name, v) in [
            ("camera fov_deg", cam.fov_deg),
            ("camera range_m", cam.range_m),
            ("lidar fov_deg", lid.fov_deg),
            ("lidar range_m", lid.range_m),
        ] {
            if v.is_nan() || v <= 0.0 {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }
}

fn repeat(pattern: &[Segment], total_frames: usize) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut frames = 0;
    while frames < total_frames {
        for s in pattern {
            out.push(*s);
            frames += s.duration_frames;
        }
    }
    out
}

/// Piecewise-constant approximation of a linear speed change over
/// `frames`, one segment per `step` frames.
fn ramp(v0: f64, v1: f64, omega: f64, frames: usize, step: usize) -> Vec<Segment> {
    let pieces = frames.div_ceil(step);
    (0..pieces)
        .map(|i| {
            let len = step.min(frames - i * step);
            let mid = (i as f64 + 0.5) / pieces as f64;
            Segment::new(len, v0 + (v1 - v0) * mid, omega)
        })
        .collect()
}

/// Urban scene: the ego drives up to an intersection, waits, then turns
/// left. Three cars, two pedestrians and a cyclist share the scene. Speed
/// changes are spread over a few seconds.
pub fn default_urban_scenario() -> Scenario {
    let n_frames = 600;
    let ego_segments: Vec<Segment> = [
        vec![Segment::new(150, 5.0, 0.0)],
        ramp(5.0, 0.0, 0.0, 40, 5),
        vec![Segment::new(260, 0.0, 0.0)],
        ramp(0.0, 4.0, 0.15, 30, 5),
        vec![Segment::new(70, 4.0, 0.15), Segment::new(50, 5.0, 0.0)],
    ]
    .concat();
    let pose = |x: f64, y: f64, psi: f64| Pose { x, y, psi };
    let agents = vec![
        // Leads the ego in its lane.
        AgentSpec { id: 1, class: ObjectClass::Car, pose0: pose(22.0, 0.0, 0.0), segments: ego_segments.clone() },
        // Overtakes on the left, waits ahead of the ego, turns with it.
        AgentSpec {
            id: 2,
            class: ObjectClass::Car,
            pose0: pose(-10.0, 3.5, 0.0),
            segments: [
                vec![Segment::new(130, 7.0, 0.0)],
                ramp(7.0, 0.0, 0.0, 50, 5),
                vec![Segment::new(270, 0.0, 0.0)],
                ramp(0.0, 4.0, 0.15, 30, 5),
                vec![Segment::new(70, 4.0, 0.15), Segment::new(50, 5.0, 0.0)],
            ]
            .concat(),
        },
        // Oncoming: stops at the far side of the intersection, then passes.
        AgentSpec {
            id: 3,
            class: ObjectClass::Car,
            pose0: pose(160.0, -3.5, std::f64::consts::PI),
            segments: [
                vec![Segment::new(60, 6.0, 0.0)],
                ramp(6.0, 0.0, 0.0, 40, 5),
                vec![Segment::new(310, 0.0, 0.0)],
                ramp(0.0, 6.0, 0.0, 30, 5),
                vec![Segment::new(160, 6.0, 0.0)],
            ]
            .concat(),
        },
        // Paces a crosswalk ahead of the stop line.
        AgentSpec {
            id: 4,
            class: ObjectClass::Pedestrian,
            pose0: pose(102.0, -8.0, std::f64::consts::FRAC_PI_2),
            segments: repeat(
                &[
                    Segment::new(110, 1.4, 0.0),
                    Segment::new(40, 0.7, std::f64::consts::FRAC_PI_4),
                ],
                n_frames,
            ),
        },
        // Strolls along the sidewalk with a slight weave.
        AgentSpec {
            id: 5,
            class: ObjectClass::Pedestrian,
            pose0: pose(70.0, 7.0, 0.0),
            segments: repeat(&[Segment::new(60, 1.2, 0.12), Segment::new(60, 1.2, -0.12)], n_frames),
        },
        // Circles in the open square beyond the intersection.
        AgentSpec {
            id: 6,
            class: ObjectClass::Cyclist,
            pose0: pose(115.0, -1.0, 0.0),
            segments: vec![Segment::new(n_frames, 3.5, -0.25)],
        },
    ];
    Scenario {
        format_version: SCENARIO_FORMAT_VERSION,
        ts: 0.1,
        n_frames,
        seed: 1,
        ego: EgoSpec { pose0: pose(0.0, 0.0, 0.0), segments: ego_segments },
        agents,
        sensors: SensorModel::default(),
    }
}
