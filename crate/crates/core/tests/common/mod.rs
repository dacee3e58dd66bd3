#![allow(dead_code)]

use egotrack::CostMatrix;

/// Best assignment by exhaustive search: most finite pairs first, then the
/// smallest cost summed in row order. Returns `(cardinality, cost, pairs)`.
pub fn brute_force_assignment(m: &CostMatrix) -> (usize, f64, Vec<(usize, usize)>) {
    fn go(
        m: &CostMatrix,
        row: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        best: &mut (usize, f64, Vec<(usize, usize)>),
    ) {
        if row == m.rows() {
            let card = current.len();
            let cost: f64 = current.iter().map(|&(i, j)| m.get(i, j)).sum();
            if card > best.0 || (card == best.0 && cost < best.1) {
                *best = (card, cost, current.clone());
            }
            return;
        }
        go(m, row + 1, used, current, best);
        for j in 0..m.cols() {
            if !used[j] && m.get(row, j).is_finite() {
                used[j] = true;
                current.push((row, j));
                go(m, row + 1, used, current, best);
                current.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0.0, Vec::new());
    go(m, 0, &mut vec![false; m.cols()], &mut Vec::new(), &mut best);
    best
}

/// Every optimal assignment, for tie-aware comparisons.
pub fn all_optimal_assignments(m: &CostMatrix) -> Vec<Vec<(usize, usize)>> {
    let (card, cost, _) = brute_force_assignment(m);
    let mut out = Vec::new();
    fn go(
        m: &CostMatrix,
        row: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        target: (usize, f64),
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if row == m.rows() {
            let c: f64 = current.iter().map(|&(i, j)| m.get(i, j)).sum();
            if current.len() == target.0 && c == target.1 {
                out.push(current.clone());
            }
            return;
        }
        go(m, row + 1, used, current, target, out);
        for j in 0..m.cols() {
            if !used[j] && m.get(row, j).is_finite() {
                used[j] = true;
                current.push((row, j));
                go(m, row + 1, used, current, target, out);
                current.pop();
                used[j] = false;
            }
        }
    }
    go(m, 0, &mut vec![false; m.cols()], &mut Vec::new(), (card, cost), &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleEvent {
    Nothing,
    Confirm,
    Delete,
}

/// Lifecycle decision per recorded frame, from window counts over the full
/// history. Stops at the first deletion.
pub fn lifecycle_oracle(history: &[bool], mc: usize, nc: usize, me: usize, ne: usize) -> Vec<OracleEvent> {
    let hits = |from: usize, to: usize| history[from..to].iter().filter(|h| **h).count();
    let mut out = Vec::new();
    let mut confirmed_at = None;
    for k in 1..=history.len() {
        let ev = match confirmed_at {
            None => {
                if hits(0, k) >= mc {
                    confirmed_at = Some(k);
                    OracleEvent::Confirm
                } else if k >= nc {
                    OracleEvent::Delete
                } else {
                    OracleEvent::Nothing
                }
            }
            Some(_) => {
                if k >= ne && hits(k - ne, k) < me {
                    OracleEvent::Delete
                } else {
                    OracleEvent::Nothing
                }
            }
        };
        out.push(ev);
        if ev == OracleEvent::Delete {
            break;
        }
    }
    out
}

/// Components of the all-pairs neighbor graph, as sorted member lists in
/// sorted order, after the size filter.
pub fn brute_force_partition(
    points: &[nalgebra::Point3<f64>],
    tolerance: f64,
    min_size: usize,
    max_size: usize,
) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = points[i] - points[j];
            if d.x * d.x + d.y * d.y + d.z * d.z <= tolerance * tolerance {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> =
        groups.into_values().filter(|g| g.len() >= min_size && g.len() <= max_size).collect();
    out.sort();
    out
}

/// Random clouds with a few dense blobs, background scatter and some points
/// on an exact lattice, so neighbor distances equal to the tolerance occur.
pub fn random_cloud(rng: &mut impl rand::Rng, max_points: usize, tolerance: f64) -> Vec<nalgebra::Point3<f64>> {
    use rand_distr::{Distribution, Normal};
    let n = rng.random_range(0..=max_points);
    let blobs: Vec<[f64; 3]> = (0..rng.random_range(1..8))
        .map(|_| [rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(0.0..2.0)])
        .collect();
    let spread = Normal::new(0.0, rng.random_range(0.2..1.5)).unwrap();
    (0..n)
        .map(|_| match rng.random_range(0..10) {
            0..=5 => {
                let c = blobs[rng.random_range(0..blobs.len())];
                nalgebra::Point3::new(
                    c[0] + spread.sample(rng),
                    c[1] + spread.sample(rng),
                    c[2] + spread.sample(rng),
                )
            }
            6..=7 => nalgebra::Point3::new(
                rng.random_range(-40.0..40.0),
                rng.random_range(-40.0..40.0),
                rng.random_range(-1.0..3.0),
            ),
            _ => nalgebra::Point3::new(
                rng.random_range(-8..8) as f64 * tolerance,
                rng.random_range(-8..8) as f64 * tolerance,
                0.0,
            ),
        })
        .collect()
}

/// Central finite-difference Jacobian of the motion model. The heading row
/// is differenced after wrapping.
pub fn fd_jacobian(state: &egotrack::TrackState, ego: &egotrack::EgoMotion, ts: f64) -> nalgebra::Matrix5<f64> {
    use egotrack::ekf::motion_f;
    let x0 = state.to_vector();
    let mut j = nalgebra::Matrix5::zeros();
    for c in 0..5 {
        let h = 1e-6 * x0[c].abs().max(1.0);
        let mut plus = x0;
        let mut minus = x0;
        plus[c] += h;
        minus[c] -= h;
        let fp = motion_f(&egotrack::TrackState::from_vector(&plus), ego, ts).to_vector();
        let fm = motion_f(&egotrack::TrackState::from_vector(&minus), ego, ts).to_vector();
        let mut d = fp - fm;
        d[2] = egotrack::wrap_angle(d[2]);
        j.set_column(c, &(d / (2.0 * h)));
    }
    j
}

/// Largest entry-wise `|a − b| / max(|a|, 1)`.
pub fn max_relative_error(a: &nalgebra::Matrix5<f64>, b: &nalgebra::Matrix5<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / x.abs().max(1.0)).fold(0.0, f64::max)
}

pub fn random_jacobian_case(rng: &mut impl rand::Rng) -> (egotrack::TrackState, egotrack::EgoMotion, f64) {
    use std::f64::consts::PI;
    let state = egotrack::TrackState::new(
        rng.random_range(-60.0..60.0),
        rng.random_range(-60.0..60.0),
        rng.random_range(-PI..PI),
        rng.random_range(-2.0..30.0),
        rng.random_range(-1.5..1.5),
    );
    let ego = egotrack::EgoMotion::new(rng.random_range(-2.0..30.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    (state, ego, rng.random_range(0.01..=0.2))
}

/// One randomized association problem.
pub struct FuzzFrame {
    pub tracks: Vec<(u64, egotrack::EkfTrackFilter)>,
    pub lidar: Vec<egotrack::LidarMeasurement>,
    pub camera: Vec<egotrack::CameraMeasurement>,
}

/// Tracks and measurements scattered so that some pairs fall inside the
/// gates and some do not.
pub fn random_frame(rng: &mut impl rand::Rng, max_tracks: usize, max_meas: usize) -> FuzzFrame {
    use egotrack::{CameraMeasurement, EkfTrackFilter, LidarMeasurement, ObjectClass, TrackState};
    let n_tracks = rng.random_range(0..=max_tracks);
    let mut id = 0;
    let tracks: Vec<(u64, EkfTrackFilter)> = (0..n_tracks)
        .map(|_| {
            id += rng.random_range(1..4);
            let state = TrackState::new(
                rng.random_range(-15.0..15.0),
                rng.random_range(-15.0..15.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(0.0..10.0),
                0.0,
            );
            let a = nalgebra::Matrix5::from_fn(|_, _| rng.random_range(-0.7..0.7));
            (id, EkfTrackFilter::new(state, a * a.transpose() + nalgebra::Matrix5::identity() * 1e-3))
        })
        .collect();
    let near = |rng: &mut dyn rand::RngCore| -> (f64, f64) {
        use rand::Rng as _;
        if !tracks.is_empty() && rng.random_bool(0.7) {
            let t = &tracks[rng.random_range(0..tracks.len())].1.state;
            (t.x + rng.random_range(-2.5..2.5), t.y + rng.random_range(-2.5..2.5))
        } else {
            (rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0))
        }
    };
    let lidar: Vec<LidarMeasurement> = (0..rng.random_range(0..=max_meas))
        .map(|_| {
            let (x, y) = near(rng);
            LidarMeasurement::new(x, y)
        })
        .collect();
    let camera: Vec<CameraMeasurement> = (0..rng.random_range(0..=max_meas))
        .map(|_| {
            let (x, y) = near(rng);
            let class = ObjectClass::ALL[rng.random_range(0..4)];
            CameraMeasurement::new(x, y, rng.random_range(-3.0..3.0), class)
        })
        .collect();
    FuzzFrame { tracks, lidar, camera }
}

/// Describes every broken partition or gate rule of one association
/// result; empty when the outcome is valid.
pub fn association_violations(
    frame: &FuzzFrame,
    out: &egotrack::AssociationOutcome,
    suppressed: &egotrack::SuppressedClusters,
    config: &egotrack::TrackerConfig,
) -> Vec<String> {
    use egotrack::association::{camera_track_distance, lidar_camera_distance, lidar_track_distance};
    let mut v = Vec::new();
    let r = &config.r_lidar;
    let filter = |id: u64| frame.tracks.iter().find(|t| t.0 == id).map(|t| &t.1);

    let mut lidar_seen = vec![0usize; frame.lidar.len()];
    let mut camera_seen = vec![0usize; frame.camera.len()];
    let mut track_seen: std::collections::BTreeMap<u64, usize> = frame.tracks.iter().map(|t| (t.0, 0)).collect();
    let mut bump_track = |id: u64, v: &mut Vec<String>| match track_seen.get_mut(&id) {
        Some(c) => *c += 1,
        None => v.push(format!("unknown track {id}")),
    };

    for &(i, id) in &out.lidar_track_pairs {
        lidar_seen[i] += 1;
        bump_track(id, &mut v);
        if let Some(f) = filter(id) {
            if lidar_track_distance(&frame.lidar[i], f, r) > config.tau_g_lidar {
                v.push(format!("lidar {i} / track {id} outside gate"));
            }
        }
    }
    for &(w, id) in &out.camera_track_pairs {
        camera_seen[w] += 1;
        bump_track(id, &mut v);
        if let Some(f) = filter(id) {
            if camera_track_distance(&frame.camera[w], f, r) > config.tau_cam(frame.camera[w].class) {
                v.push(format!("camera {w} / track {id} outside gate"));
            }
        }
    }
    for &(i, w, id) in &out.group_triples {
        lidar_seen[i] += 1;
        camera_seen[w] += 1;
        bump_track(id, &mut v);
        if let Some(f) = filter(id) {
            if lidar_track_distance(&frame.lidar[i], f, r) > config.tau_g_lidar
                || camera_track_distance(&frame.camera[w], f, r) > config.tau_cam(frame.camera[w].class)
            {
                v.push(format!("group ({i}, {w}, {id}) outside gate"));
            }
        }
    }
    for &(i, w) in &out.lidar_camera_pairs {
        lidar_seen[i] += 1;
        camera_seen[w] += 1;
        if lidar_camera_distance(&frame.lidar[i], &frame.camera[w]) > config.tau_fuse(frame.camera[w].class) {
            v.push(format!("pair ({i}, {w}) outside gate"));
        }
    }
    for &i in out.unmatched_lidar.iter().chain(&suppressed.lidar) {
        lidar_seen[i] += 1;
    }
    for &w in &out.unmatched_camera {
        camera_seen[w] += 1;
    }
    for &id in &out.unmatched_tracks {
        bump_track(id, &mut v);
    }
    for (i, &n) in lidar_seen.iter().enumerate() {
        if n != 1 {
            v.push(format!("lidar {i} appears {n} times"));
        }
    }
    for (w, &n) in camera_seen.iter().enumerate() {
        if n != 1 {
            v.push(format!("camera {w} appears {n} times"));
        }
    }
    for (id, n) in track_seen {
        if n != 1 {
            v.push(format!("track {id} appears {n} times"));
        }
    }
    v
}
