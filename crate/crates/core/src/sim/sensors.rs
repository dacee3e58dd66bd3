use nalgebra::Point3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{world_to_ego, LidarMode, SensorModel, WorldFrame};
use crate::lidar::{process_cloud, PointCloud};
use crate::types::{CameraMeasurement, LidarMeasurement, TrackState};

/// Measurements of one frame, in the ego frame at that time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RenderedFrame {
    pub camera: Vec<CameraMeasurement>,
    pub lidar: Vec<LidarMeasurement>,
    /// Raw cloud in cloud mode.
    pub cloud: Option<PointCloud>,
}

/// Deterministic RNG for one frame of a seeded run.
pub fn frame_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64);
    rng
}

/// Whether an ego-frame position lies inside a sensor's horizontal field of
/// view and range.
pub fn in_fov(x: f64, y: f64, fov_deg: f64, range_m: f64) -> bool {
    let bearing = y.atan2(x).abs();
    x.hypot(y) <= range_m && bearing <= 0.5 * fov_deg.to_radians()
}

fn gauss<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    Normal::new(0.0, sigma).expect("sigma validated as non-negative").sample(rng)
}

/// Draws the camera and LiDAR measurements for one frame. Every visible
/// agent is detected independently per sensor; measurement lists are
/// shuffled so their order carries no identity.
pub fn render_measurements<R: Rng>(frame: &WorldFrame, sensors: &SensorModel, rng: &mut R) -> RenderedFrame {
    let cam = &sensors.camera;
    let lid = &sensors.lidar;
    let sigma_yaw = cam.sigma_yaw_deg.to_radians();
    let mut out = RenderedFrame::default();
    let mut cloud_points = Vec::new();

    for agent in &frame.agents {
        let rel = world_to_ego(agent, &frame.ego.pose);
        if in_fov(rel.x, rel.y, cam.fov_deg, cam.range_m) && rng.random::<f64>() < cam.p_detect {
            let sigma = cam.sigma_pos_per_class.get(agent.class);
            out.camera.push(CameraMeasurement::new(
                rel.x + gauss(rng, sigma),
                rel.y + gauss(rng, sigma),
                rel.psi + gauss(rng, sigma_yaw),
                agent.class,
            ));
        }
        if in_fov(rel.x, rel.y, lid.fov_deg, lid.range_m) && rng.random::<f64>() < lid.p_detect {
            match lid.mode {
                LidarMode::Centroid => out
                    .lidar
                    .push(LidarMeasurement::new(rel.x + gauss(rng, lid.sigma_pos), rel.y + gauss(rng, lid.sigma_pos))),
                LidarMode::Cloud => {
                    sample_box(&rel, lid.box_dims.get(agent.class), lid.points_per_face, lid.sigma_pos, rng, &mut cloud_points)
                }
            }
        }
    }

    if lid.mode == LidarMode::Cloud {
        sample_ground(lid.ground_points, lid.fov_deg, lid.range_m, rng, &mut cloud_points);
        cloud_points.shuffle(rng);
        let cloud = PointCloud::new(cloud_points);
        out.lidar = process_cloud(&cloud, &lid.clustering);
        out.cloud = Some(cloud);
    }
    out.camera.shuffle(rng);
    out.lidar.shuffle(rng);
    out
}

/// Points on the four sides and the top of an oriented box resting on the
/// ground.
fn sample_box<R: Rng>(
    rel: &TrackState,
    [l, w, h]: [f64; 3],
    per_face: usize,
    sigma: f64,
    rng: &mut R,
    out: &mut Vec<Point3<f64>>,
) {
    let (s, c) = rel.psi.sin_cos();
    let mut push = |u: f64, v: f64, z: f64, rng: &mut R| {
        let x = rel.x + c * u - s * v + gauss(rng, sigma);
        let y = rel.y + s * u + c * v + gauss(rng, sigma);
        out.push(Point3::new(x, y, z + gauss(rng, sigma)));
    };
    for face in 0..5 {
        for _ in 0..per_face {
            let a: f64 = rng.random_range(-0.5..0.5);
            let b: f64 = rng.random_range(0.0..1.0);
            match face {
                0 => push(0.5 * l, a * w, 0.3 + b * (h - 0.3), rng),
                1 => push(-0.5 * l, a * w, 0.3 + b * (h - 0.3), rng),
                2 => push(a * l, 0.5 * w, 0.3 + b * (h - 0.3), rng),
                3 => push(a * l, -0.5 * w, 0.3 + b * (h - 0.3), rng),
                _ => push(a * l, (b - 0.5) * w, h, rng),
            }
        }
    }
}

fn sample_ground<R: Rng>(n: usize, fov_deg: f64, range_m: f64, rng: &mut R, out: &mut Vec<Point3<f64>>) {
    let half = 0.5 * fov_deg.to_radians();
    for _ in 0..n {
        // Uniform over the sector area.
        let r = range_m * rng.random::<f64>().sqrt();
        let theta = rng.random_range(-half..=half);
        out.push(Point3::new(r * theta.cos(), r * theta.sin(), gauss(rng, 0.02)));
    }
}
