//! Tracker configuration and its JSON form.
//!
//! Matrices are written as row-major nested arrays. Every field has a
//! default, so a config file only needs the entries it overrides.

use nalgebra::{Matrix2, Matrix3, Matrix5, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ObjectClass, PerClass};

/// Everything the tracker needs besides its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Sampling time, s.
    pub ts: f64,
    /// LiDAR–track gate, squared Mahalanobis units.
    pub tau_g_lidar: f64,
    /// Camera–track gate per camera class, squared Mahalanobis units.
    pub tau_g_cam: PerClass<f64>,
    /// Camera–LiDAR gate per camera class, m².
    pub tau_g_fuse: PerClass<f64>,
    #[serde(with = "matrix_rows")]
    pub q: Matrix5<f64>,
    #[serde(with = "matrix_rows")]
    pub r_lidar: Matrix2<f64>,
    #[serde(with = "matrix_rows")]
    pub r_cam: Matrix3<f64>,
    #[serde(with = "matrix_rows")]
    pub r_group: Matrix3<f64>,
    /// Initial covariance of a new track.
    #[serde(with = "matrix_rows")]
    pub p0: Matrix5<f64>,
    /// Hits needed within the first `nc` frames to confirm a tentative track.
    pub mc: usize,
    pub nc: usize,
    /// Hits needed within the trailing `ne` frames to keep a confirmed track.
    pub me: usize,
    pub ne: usize,
}

/// Process noise for a sampling time: position terms absolute, heading and
/// velocity terms grow with `ts`.
pub fn default_process_noise(ts: f64) -> Matrix5<f64> {
    let pos = 0.05_f64;
    let heading_rate = 0.3_f64; // rad/s
    let accel = 2.0_f64; // m/s²
    let yaw_accel = 1.0_f64; // rad/s²
    Matrix5::from_diagonal(&nalgebra::Vector5::new(
        pos * pos,
        pos * pos,
        (heading_rate * ts).powi(2),
        (accel * ts).powi(2),
        (yaw_accel * ts).powi(2),
    ))
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let ts = 0.1;
        let sigma_lidar = 0.05_f64;
        let sigma_cam = 0.5_f64;
        let sigma_yaw = 8f64.to_radians();
        let r_lidar = Matrix2::from_diagonal_element(sigma_lidar * sigma_lidar);
        let r_cam = Matrix3::from_diagonal(&nalgebra::Vector3::new(
            sigma_cam * sigma_cam,
            sigma_cam * sigma_cam,
            sigma_yaw * sigma_yaw,
        ));
        let r_group = Matrix3::from_diagonal(&nalgebra::Vector3::new(
            sigma_lidar * sigma_lidar,
            sigma_lidar * sigma_lidar,
            sigma_yaw * sigma_yaw,
        ));
        let p0 = Matrix5::from_diagonal(&nalgebra::Vector5::new(
            sigma_lidar * sigma_lidar,
            sigma_lidar * sigma_lidar,
            sigma_yaw * sigma_yaw,
            5.0 * 5.0,
            0.5 * 0.5,
        ));
        Self {
            ts,
            tau_g_lidar: 13.8,
            tau_g_cam: PerClass { pedestrian: 400.0, cyclist: 400.0, car: 400.0, other: 200.0 },
            tau_g_fuse: PerClass { pedestrian: 4.0, cyclist: 5.0, car: 6.0, other: 3.0 },
            q: default_process_noise(ts),
            r_lidar,
            r_cam,
            r_group,
            p0,
            mc: 2,
            nc: 3,
            me: 1,
            ne: 5,
        }
    }
}

impl TrackerConfig {
    /// Sets the measurement noise from sensor standard deviations (m, m, rad),
    /// keeping the other fields. The initial position and heading variances
    /// follow the fused-initialization sensors.
    pub fn with_sensor_sigmas(mut self, sigma_lidar: f64, sigma_cam: f64, sigma_yaw: f64) -> Self {
        let l2 = sigma_lidar * sigma_lidar;
        let c2 = sigma_cam * sigma_cam;
        let y2 = sigma_yaw * sigma_yaw;
        self.r_lidar = Matrix2::from_diagonal_element(l2);
        self.r_cam = Matrix3::from_diagonal(&nalgebra::Vector3::new(c2, c2, y2));
        self.r_group = Matrix3::from_diagonal(&nalgebra::Vector3::new(l2, l2, y2));
        self.p0[(0, 0)] = l2;
        self.p0[(1, 1)] = l2;
        self.p0[(2, 2)] = y2;
        self
    }

    /// Replaces the sampling time and rescales the default process noise.
    pub fn with_ts(mut self, ts: f64) -> Self {
        self.ts = ts;
        self.q = default_process_noise(ts);
        self
    }

    pub fn tau_cam(&self, class: ObjectClass) -> f64 {
        self.tau_g_cam.get(class)
    }

    pub fn tau_fuse(&self, class: ObjectClass) -> f64 {
        self.tau_g_fuse.get(class)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return bad(format!("ts must be > 0, got {}", self.ts));
        }
        let mut gates = vec![("tau_g_lidar", self.tau_g_lidar)];
        gates.extend(self.tau_g_cam.values().map(|t| ("tau_g_cam", t)));
        gates.extend(self.tau_g_fuse.values().map(|t| ("tau_g_fuse", t)));
        for (name, t) in gates {
            if t.is_nan() || t <= 0.0 {
                return bad(format!("{name} thresholds must be > 0, got {t}"));
            }
        }
        if self.mc > self.nc {
            return bad(format!("mc ({}) must not exceed nc ({})", self.mc, self.nc));
        }
        if self.me > self.ne {
            return bad(format!("me ({}) must not exceed ne ({})", self.me, self.ne));
        }
        if self.nc == 0 || self.ne == 0 {
            return bad("nc and ne must be at least 1".into());
        }
        check_spd("q", &self.q)?;
        check_spd("r_lidar", &self.r_lidar)?;
        check_spd("r_cam", &self.r_cam)?;
        check_spd("r_group", &self.r_group)?;
        check_spd("p0", &self.p0)?;
        Ok(())
    }
}

fn check_spd<const N: usize>(name: &str, m: &SMatrix<f64, N, N>) -> Result<()> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} has non-finite entries")));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-9 * scale {
        return Err(Error::InvalidConfig(format!("{name} is not symmetric")));
    }
    if m.cholesky().is_none() {
        return Err(Error::InvalidConfig(format!("{name} is not positive definite")));
    }
    Ok(())
}

/// Serde adapter writing a fixed-size matrix as nested row arrays.
pub(crate) mod matrix_rows {
    use nalgebra::SMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S, const R: usize, const C: usize>(
        m: &SMatrix<f64, R, C>,
        s: S,
    ) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
    {
        let rows: Vec<Vec<f64>> =
            (0..R).map(|i| (0..C).map(|j| m[(i, j)]).collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D, const R: usize, const C: usize>(
        d: D,
    ) -> Result<SMatrix<f64, R, C>, D::Error>
    where
        D: Deserializer<'de>,
    {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        if rows.len() != R || rows.iter().any(|r| r.len() != C) {
            return Err(D::Error::custom(format!("expected a {R}x{C} matrix")));
        }
        Ok(SMatrix::from_fn(|i, j| rows[i][j]))
    }
}
