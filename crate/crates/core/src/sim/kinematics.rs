use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::{Scenario, Segment};
use crate::types::{wrap_angle, ObjectClass, TrackState};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

/// Ego pose in the world plus the body-frame velocities in effect over the
/// interval ending at this frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoTruthState {
    pub pose: Pose,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentTruthState {
    pub id: u64,
    pub class: ObjectClass,
    pub pose: Pose,
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldFrame {
    pub frame: usize,
    pub t: f64,
    pub ego: EgoTruthState,
    pub agents: Vec<AgentTruthState>,
}

/// Exact pose after moving for `dt` with constant body velocity
/// `(vx, vy)` and yaw rate `omega`.
fn advance(p: Pose, vx: f64, vy: f64, omega: f64, dt: f64) -> Pose {
    let dpsi = omega * dt;
    // Body-frame displacement of a constant-twist motion.
    let (bx, by) = if omega.abs() < 1e-9 {
        (vx * dt, vy * dt)
    } else {
        let (s, c) = dpsi.sin_cos();
        let a = s / omega;
        let b = (1.0 - c) / omega;
        (a * vx - b * vy, b * vx + a * vy)
    };
    let (s, c) = p.psi.sin_cos();
    Pose { x: p.x + c * bx - s * by, y: p.y + s * bx + c * by, psi: wrap_angle(p.psi + dpsi) }
}

/// One pose per frame for a segment profile. The segment in effect over
/// `(k-1, k]` is reported with frame `k`; frame 0 reports the first one.
/// The last segment is held once the profile runs out.
fn trajectory(pose0: Pose, segments: &[Segment], n_frames: usize, ts: f64) -> Vec<(Pose, Segment)> {
    let mut out = Vec::with_capacity(n_frames);
    out.push((pose0, segments[0]));
    let mut seg_idx = 0;
    let mut seg_start_pose = pose0;
    let mut seg_start_frame = 0usize;
    for k in 1..n_frames {
        // Step k-1 -> k runs under the segment covering step index k-1.
        while seg_idx + 1 < segments.len() && k > seg_start_frame + segments[seg_idx].duration_frames {
            let seg = segments[seg_idx];
            seg_start_pose = advance(seg_start_pose, seg.v, seg.vy, seg.omega, seg.duration_frames as f64 * ts);
            seg_start_frame += seg.duration_frames;
            seg_idx += 1;
        }
        let seg = segments[seg_idx];
        // Closed form from the segment start keeps long segments free of drift.
        let pose = advance(seg_start_pose, seg.v, seg.vy, seg.omega, (k - seg_start_frame) as f64 * ts);
        out.push((pose, seg));
    }
    out
}

/// Ground-truth world states for every frame of a scenario.
pub fn propagate_truth(scenario: &Scenario) -> Vec<WorldFrame> {
    let n = scenario.n_frames;
    let ts = scenario.ts;
    let ego = trajectory(scenario.ego.pose0, &scenario.ego.segments, n, ts);
    let agents: Vec<_> =
        scenario.agents.iter().map(|a| trajectory(a.pose0, &a.segments, n, ts)).collect();
    (0..n)
        .map(|k| {
            let (pose, seg) = ego[k];
            WorldFrame {
                frame: k,
                t: k as f64 * ts,
                ego: EgoTruthState { pose, vx: seg.v, vy: seg.vy, omega: seg.omega },
                agents: scenario
                    .agents
                    .iter()
                    .zip(&agents)
                    .map(|(spec, traj)| {
                        let (pose, seg) = traj[k];
                        AgentTruthState { id: spec.id, class: spec.class, pose, v: seg.v, omega: seg.omega }
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Agent state expressed in the ego body frame.
pub fn world_to_ego(agent: &AgentTruthState, ego: &Pose) -> TrackState {
    let d = Vector2::new(agent.pose.x - ego.x, agent.pose.y - ego.y);
    let (s, c) = ego.psi.sin_cos();
    TrackState::new(c * d.x + s * d.y, -s * d.x + c * d.y, agent.pose.psi - ego.psi, agent.v, agent.omega)
}
