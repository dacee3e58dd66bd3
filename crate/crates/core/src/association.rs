//! Three-pass measurement association.
//!
//! 1. LiDAR centroids against tracks (squared Mahalanobis, one gate).
//! 2. Camera detections against all tracks (squared Mahalanobis, gate per
//!    camera class).
//! 3. Leftover LiDAR against leftover camera (squared Euclidean, gate per
//!    camera class).
//!
//! A track picked in both of the first two passes becomes a LiDAR–camera–track
//! group. Unmatched LiDAR centroids close to a track that already holds a
//! LiDAR match are treated as split clusters of that object and suppressed.

use std::collections::BTreeSet;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};
use crate::config::TrackerConfig;
use crate::ekf::{well_conditioned_inverse, EkfTrackFilter};
use crate::types::{CameraMeasurement, LidarMeasurement};

pub type TrackId = u64;

/// A track as seen by association.
#[derive(Debug, Clone, Copy)]
pub struct TrackRef<'a> {
    pub id: TrackId,
    pub filter: &'a EkfTrackFilter,
}

/// The pairing sets of one frame. Indices refer to the input lists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationOutcome {
    /// `(lidar_idx, track_id)`
    pub lidar_track_pairs: Vec<(usize, TrackId)>,
    /// `(camera_idx, track_id)`
    pub camera_track_pairs: Vec<(usize, TrackId)>,
    /// `(lidar_idx, camera_idx, track_id)`
    pub group_triples: Vec<(usize, usize, TrackId)>,
    /// `(lidar_idx, camera_idx)` with no track.
    pub lidar_camera_pairs: Vec<(usize, usize)>,
    pub unmatched_lidar: Vec<usize>,
    pub unmatched_camera: Vec<usize>,
    pub unmatched_tracks: Vec<TrackId>,
}

impl AssociationOutcome {
    /// Tracks that received any measurement.
    pub fn associated_tracks(&self) -> BTreeSet<TrackId> {
        self.lidar_track_pairs
            .iter()
            .map(|p| p.1)
            .chain(self.camera_track_pairs.iter().map(|p| p.1))
            .chain(self.group_triples.iter().map(|t| t.2))
            .collect()
    }
}

/// LiDAR indices dropped as duplicate clusters of an already matched object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuppressedClusters {
    pub lidar: Vec<usize>,
}

/// `Δᵀ S⁻¹ Δ`; `+inf` when `s` is singular or ill-conditioned.
pub fn mahalanobis_sq(delta: &Vector2<f64>, s: &Matrix2<f64>) -> f64 {
    match well_conditioned_inverse(s) {
        Some(inv) => {
            let d = (delta.transpose() * inv * delta)[(0, 0)];
            // Guard against tiny negative values from rounding.
            d.max(0.0)
        }
        None => f64::INFINITY,
    }
}

pub fn lidar_track_distance(z: &LidarMeasurement, track: &EkfTrackFilter, r_lidar: &Matrix2<f64>) -> f64 {
    let s = track.position_innovation_cov(r_lidar);
    mahalanobis_sq(&(z.position() - track.state.position()), &s)
}

/// Same quadratic form as the LiDAR case on the camera position only.
pub fn camera_track_distance(z: &CameraMeasurement, track: &EkfTrackFilter, r_lidar: &Matrix2<f64>) -> f64 {
    let s = track.position_innovation_cov(r_lidar);
    mahalanobis_sq(&(z.position() - track.state.position()), &s)
}

/// Squared planar distance, m².
pub fn lidar_camera_distance(zl: &LidarMeasurement, zc: &CameraMeasurement) -> f64 {
    (zl.position() - zc.position()).norm_squared()
}

/// Non-finite inputs give NaN distances; those pairs are simply infeasible.
fn or_inf(d: f64) -> f64 {
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

/// Runs all three passes. Tracks must already be predicted to this frame.
pub fn associate_frame(
    lidar: &[LidarMeasurement],
    camera: &[CameraMeasurement],
    tracks: &[TrackRef<'_>],
    config: &TrackerConfig,
) -> (AssociationOutcome, SuppressedClusters) {
    let r = &config.r_lidar;

    // Pass 1: rows = LiDAR, cols = tracks.
    let d_lidar = CostMatrix::from_fn(lidar.len(), tracks.len(), |i, j| {
        or_inf(lidar_track_distance(&lidar[i], tracks[j].filter, r))
    })
    .expect("costs are non-negative or infinite")
    .gate(config.tau_g_lidar);
    let lidar_pass = solve(&d_lidar);
    let mut lidar_of_track: Vec<Option<usize>> = vec![None; tracks.len()];
    for &(i, j) in &lidar_pass.pairs {
        lidar_of_track[j] = Some(i);
    }

    // Pass 2: rows = tracks, cols = camera, gate per camera class.
    let cam_taus: Vec<f64> = camera.iter().map(|c| config.tau_cam(c.class)).collect();
    let d_cam = CostMatrix::from_fn(tracks.len(), camera.len(), |j, w| {
        or_inf(camera_track_distance(&camera[w], tracks[j].filter, r))
    })
    .expect("costs are non-negative or infinite")
    .gate_columns(&cam_taus);
    let cam_pass = solve(&d_cam);
    let mut camera_of_track: Vec<Option<usize>> = vec![None; tracks.len()];
    for &(j, w) in &cam_pass.pairs {
        camera_of_track[j] = Some(w);
    }

    let mut out = AssociationOutcome::default();
    let mut lidar_used = vec![false; lidar.len()];
    let mut camera_used = vec![false; camera.len()];
    for (j, t) in tracks.iter().enumerate() {
        match (lidar_of_track[j], camera_of_track[j]) {
            (Some(i), Some(w)) => out.group_triples.push((i, w, t.id)),
            (Some(i), None) => out.lidar_track_pairs.push((i, t.id)),
            (None, Some(w)) => out.camera_track_pairs.push((w, t.id)),
            (None, None) => out.unmatched_tracks.push(t.id),
        }
        if let Some(i) = lidar_of_track[j] {
            lidar_used[i] = true;
        }
        if let Some(w) = camera_of_track[j] {
            camera_used[w] = true;
        }
    }

    // Pass 3: leftovers only, rows = LiDAR, cols = camera.
    let free_lidar: Vec<usize> = (0..lidar.len()).filter(|&i| !lidar_used[i]).collect();
    let free_camera: Vec<usize> = (0..camera.len()).filter(|&w| !camera_used[w]).collect();
    let fuse_taus: Vec<f64> = free_camera.iter().map(|&w| config.tau_fuse(camera[w].class)).collect();
    let d_fuse = CostMatrix::from_fn(free_lidar.len(), free_camera.len(), |a, b| {
        or_inf(lidar_camera_distance(&lidar[free_lidar[a]], &camera[free_camera[b]]))
    })
    .expect("costs are non-negative or infinite")
    .gate_columns(&fuse_taus);
    for (a, b) in solve(&d_fuse).pairs {
        let (i, w) = (free_lidar[a], free_camera[b]);
        out.lidar_camera_pairs.push((i, w));
        lidar_used[i] = true;
        camera_used[w] = true;
    }

    // Split clusters: keep only the nearest (already matched) one.
    let mut suppressed = SuppressedClusters::default();
    let lidar_holders: Vec<&EkfTrackFilter> = tracks
        .iter()
        .enumerate()
        .filter(|(j, _)| lidar_of_track[*j].is_some())
        .map(|(_, t)| t.filter)
        .collect();
    for i in 0..lidar.len() {
        if lidar_used[i] {
            continue;
        }
        let duplicate = lidar_holders
            .iter()
            .any(|f| lidar_track_distance(&lidar[i], f, r) < config.tau_g_lidar);
        if duplicate {
            suppressed.lidar.push(i);
        } else {
            out.unmatched_lidar.push(i);
        }
    }
    out.unmatched_camera = (0..camera.len()).filter(|&w| !camera_used[w]).collect();

    out.lidar_track_pairs.sort_unstable();
    out.camera_track_pairs.sort_unstable();
    out.group_triples.sort_unstable();
    out.lidar_camera_pairs.sort_unstable();
    (out, suppressed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ObjectClass, TrackState};
    use nalgebra::Matrix5;

    fn track_at(x: f64, y: f64, pos_var: f64) -> EkfTrackFilter {
        let mut p = Matrix5::identity() * 0.1;
        p[(0, 0)] = pos_var;
        p[(1, 1)] = pos_var;
        EkfTrackFilter::new(TrackState::new(x, y, 0.0, 0.0, 0.0), p)
    }

    #[test]
    fn distance_examples() {
        let zero = Matrix2::zeros();
        let t = track_at(1.0, 2.0, 0.5);
        assert_eq!(lidar_track_distance(&LidarMeasurement::new(1.0, 2.0), &t, &zero), 0.0);

        assert_eq!(mahalanobis_sq(&Vector2::new(3.0, 4.0), &Matrix2::identity()), 25.0);
        let s = Matrix2::new(2.0, 0.0, 0.0, 0.5);
        assert!((mahalanobis_sq(&Vector2::new(1.0, 1.0), &s) - 2.5).abs() < 1e-15);
        assert_eq!(mahalanobis_sq(&Vector2::new(1.0, 1.0), &Matrix2::zeros()), f64::INFINITY);

        let cam = CameraMeasurement::new(1.0, 2.0, 2.5, ObjectClass::Car);
        assert_eq!(camera_track_distance(&cam, &t, &zero), 0.0);
        let cam = CameraMeasurement::new(1.5, 2.5, -1.0, ObjectClass::Car);
        let lid = LidarMeasurement::new(1.5, 2.5);
        let r = Matrix2::identity() * 0.01;
        assert_eq!(camera_track_distance(&cam, &t, &r), lidar_track_distance(&lid, &t, &r));

        let zc = CameraMeasurement::new(3.0, 4.0, 0.0, ObjectClass::Pedestrian);
        assert_eq!(lidar_camera_distance(&LidarMeasurement::new(0.0, 0.0), &zc), 25.0);
        assert_eq!(lidar_camera_distance(&LidarMeasurement::new(3.0, 4.0), &zc), 0.0);
    }

    #[test]
    fn empty_frame() {
        let (out, sup) = associate_frame(&[], &[], &[], &TrackerConfig::default());
        assert_eq!(out, AssociationOutcome::default());
        assert!(sup.lidar.is_empty());
    }

    #[test]
    fn single_object_forms_a_group() {
        let cfg = TrackerConfig::default();
        let f = track_at(0.0, 0.0, 0.05);
        let tracks = [TrackRef { id: 7, filter: &f }];
        let lidar = [LidarMeasurement::new(0.1, 0.0)];
        let camera = [CameraMeasurement::new(0.2, 0.0, 0.0, ObjectClass::Car)];
        let (out, sup) = associate_frame(&lidar, &camera, &tracks, &cfg);
        assert_eq!(out.group_triples, vec![(0, 0, 7)]);
        assert!(out.lidar_track_pairs.is_empty() && out.camera_track_pairs.is_empty());
        assert!(out.unmatched_lidar.is_empty() && out.unmatched_camera.is_empty());
        assert!(out.unmatched_tracks.is_empty() && sup.lidar.is_empty());
    }

    #[test]
    fn close_sensors_without_tracks_pair_up() {
        let cfg = TrackerConfig { tau_g_fuse: crate::types::PerClass::uniform(1.0), ..TrackerConfig::default() };
        let lidar = [LidarMeasurement::new(5.0, 1.0)];
        let camera = [CameraMeasurement::new(5.3, 1.0, 0.0, ObjectClass::Cyclist)];
        let (out, _) = associate_frame(&lidar, &camera, &[], &cfg);
        assert_eq!(out.lidar_camera_pairs, vec![(0, 0)]);
        assert!(out.unmatched_lidar.is_empty() && out.unmatched_camera.is_empty());
    }

    #[test]
    fn split_cluster_is_suppressed() {
        let cfg = TrackerConfig::default();
        let f = track_at(10.0, 0.0, 0.05);
        let tracks = [TrackRef { id: 1, filter: &f }];
        let lidar = [LidarMeasurement::new(10.0, 0.05), LidarMeasurement::new(10.1, -0.1)];
        let (out, sup) = associate_frame(&lidar, &[], &tracks, &cfg);
        assert_eq!(out.lidar_track_pairs, vec![(0, 1)]);
        assert_eq!(sup.lidar, vec![1]);
        assert!(out.unmatched_lidar.is_empty());
    }

    #[test]
    fn far_measurements_stay_unmatched() {
        let cfg = TrackerConfig::default();
        let f = track_at(0.0, 0.0, 0.05);
        let tracks = [TrackRef { id: 3, filter: &f }];
        let lidar = [LidarMeasurement::new(30.0, 0.0)];
        let camera = [CameraMeasurement::new(-30.0, 5.0, 0.0, ObjectClass::Car)];
        let (out, _) = associate_frame(&lidar, &camera, &tracks, &cfg);
        assert_eq!(out.unmatched_lidar, vec![0]);
        assert_eq!(out.unmatched_camera, vec![0]);
        assert_eq!(out.unmatched_tracks, vec![3]);
    }
}
