//! Point-cloud front end: ground removal and Euclidean clustering.
//!
//! Clustering links points whose 3D distance is at most `distance_tolerance`
//! and takes connected components. Neighbor queries go through a uniform
//! grid with cell size equal to the tolerance; the comparison itself is the
//! same squared-distance test a brute-force scan would do, so results match
//! it exactly.

use std::collections::HashMap;
use std::io::BufRead;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::LidarMeasurement;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Parses `x y z` per line, separated by whitespace and/or commas.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> =
                line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
            if fields.len() != 3 {
                return Err(Error::InvalidInput(format!("line {}: expected 3 coordinates", n + 1)));
            }
            let mut xyz = [0.0; 3];
            for (k, f) in fields.iter().enumerate() {
                xyz[k] = f
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::InvalidInput(format!("line {}: bad coordinate '{f}'", n + 1)))?;
            }
            points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
        }
        Ok(Self { points })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringParams {
    /// Neighbor radius, m.
    pub distance_tolerance: f64,
    pub min_cluster_size: usize,
    pub max_cluster_size: usize,
    /// Distance to the ground plane below which a point is ground, m.
    pub ground_inlier_threshold: f64,
    /// Height cut used when no near-horizontal plane is found, m.
    pub ground_fallback_height: f64,
    pub ransac_iterations: usize,
    pub ransac_seed: u64,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            distance_tolerance: 0.5,
            min_cluster_size: 5,
            max_cluster_size: 10_000,
            ground_inlier_threshold: 0.15,
            ground_fallback_height: 0.15,
            ransac_iterations: 100,
            ransac_seed: 7,
        }
    }
}

/// A connected component of the neighbor graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Ascending indices into the clustered cloud.
    pub member_indices: Vec<usize>,
    /// Mean (x, y) of the members.
    pub centroid: [f64; 2],
}

/// Largest angle between a ground-plane normal and vertical, degrees.
const MAX_GROUND_TILT_DEG: f64 = 30.0;

/// Drops ground points. Fits one plane by random consensus; if its normal is
/// within 30° of vertical its inliers are removed, otherwise every point
/// below `ground_fallback_height` is.
pub fn remove_ground(cloud: &PointCloud, params: &ClusteringParams) -> PointCloud {
    let n = cloud.len();
    if n < 3 {
        return cloud.clone();
    }
    let pts = &cloud.points;
    let mut rng = ChaCha8Rng::seed_from_u64(params.ransac_seed);
    let mut best: Option<(Vector3<f64>, f64, usize)> = None;
    for _ in 0..params.ransac_iterations.max(1) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let c = rng.random_range(0..n);
        if a == b || b == c || a == c {
            continue;
        }
        let normal = (pts[b] - pts[a]).cross(&(pts[c] - pts[a]));
        let norm = normal.norm();
        if norm < 1e-12 {
            continue;
        }
        let normal = normal / norm;
        let offset = -normal.dot(&pts[a].coords);
        let inliers =
            pts.iter().filter(|p| (normal.dot(&p.coords) + offset).abs() <= params.ground_inlier_threshold).count();
        if best.is_none_or(|(_, _, k)| inliers > k) {
            best = Some((normal, offset, inliers));
        }
    }

    let cos_limit = MAX_GROUND_TILT_DEG.to_radians().cos();
    let keep: Vec<Point3<f64>> = match best {
        Some((normal, offset, _)) if normal.z.abs() >= cos_limit => pts
            .iter()
            .filter(|p| (normal.dot(&p.coords) + offset).abs() > params.ground_inlier_threshold)
            .copied()
            .collect(),
        _ => pts.iter().filter(|p| p.z >= params.ground_fallback_height).copied().collect(),
    };
    PointCloud::new(keep)
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
    }
}

/// True when two points are neighbors under `tolerance`.
pub fn are_neighbors(a: &Point3<f64>, b: &Point3<f64>, tolerance: f64) -> bool {
    (a - b).norm_squared() <= tolerance * tolerance
}

/// Groups member indices into a sorted cluster list, applying the size
/// limits. Shared by [`euclidean_cluster`] and its tests.
pub fn clusters_from_components(cloud: &PointCloud, components: Vec<Vec<usize>>, params: &ClusteringParams) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = components
        .into_iter()
        .filter(|m| m.len() >= params.min_cluster_size && m.len() <= params.max_cluster_size)
        .map(|mut members| {
            members.sort_unstable();
            let centroid = planar_mean(cloud, &members);
            Cluster { member_indices: members, centroid }
        })
        .collect();
    clusters.sort_by(|a, b| {
        let ra = a.centroid[0].hypot(a.centroid[1]);
        let rb = b.centroid[0].hypot(b.centroid[1]);
        ra.total_cmp(&rb)
            .then(a.centroid[0].total_cmp(&b.centroid[0]))
            .then(a.centroid[1].total_cmp(&b.centroid[1]))
            .then(a.member_indices.len().cmp(&b.member_indices.len()))
    });
    clusters
}

/// Mean (x, y), summed in coordinate order so the result does not depend on
/// the order of the input points.
fn planar_mean(cloud: &PointCloud, members: &[usize]) -> [f64; 2] {
    let mut pts: Vec<&Point3<f64>> = members.iter().map(|&i| &cloud.points[i]).collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)));
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    [sx / n, sy / n]
}

/// Connected components under the distance tolerance, filtered by size and
/// sorted by centroid range.
pub fn euclidean_cluster(cloud: &PointCloud, params: &ClusteringParams) -> Vec<Cluster> {
    let n = cloud.len();
    if n == 0 {
        return Vec::new();
    }
    let tol = params.distance_tolerance;
    // Cells slightly wider than the tolerance so rounding in the division can
    // never push two neighbors more than one cell apart.
    let cell = tol.max(1e-12) * (1.0 + 1e-9);
    let cell_of = |p: &Point3<f64>| -> (i64, i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64)
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        grid.entry(cell_of(p)).or_default().push(i);
    }

    let mut uf = UnionFind::new(n);
    for (i, p) in cloud.points.iter().enumerate() {
        let (cx, cy, cz) = cell_of(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &j in bucket {
                            if j > i && are_neighbors(p, &cloud.points[j], tol) {
                                uf.union(i, j);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut by_root: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        let r = uf.find(i);
        by_root.entry(r).or_default().push(i);
    }
    clusters_from_components(cloud, by_root.into_values().collect(), params)
}

/// Ground removal, clustering and centroid projection.
pub fn process_cloud(cloud: &PointCloud, params: &ClusteringParams) -> Vec<LidarMeasurement> {
    let above = remove_ground(cloud, params);
    euclidean_cluster(&above, params)
        .into_iter()
        .map(|c| LidarMeasurement::new(c.centroid[0], c.centroid[1]))
        .collect()
}
