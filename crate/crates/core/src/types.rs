//! Shared vocabulary: angles, ego-frame conventions, states and measurements.
//!
//! Frame convention: x forward, y left, headings counter-clockwise positive.
//! Every angle stored in a state or measurement is wrapped to (-π, π].

use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::{Matrix5, Vector2, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle to (-π, π], closed at +π.
///
/// Non-finite input propagates as NaN; use [`try_wrap_angle`] to reject it.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Like [`wrap_angle`] but rejects non-finite input.
pub fn try_wrap_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::InvalidInput(format!("cannot wrap non-finite angle {theta}")));
    }
    Ok(wrap_angle(theta))
}

/// Re-expresses a planar point in the ego frame after the ego has yawed by
/// `omega_ego * ts`, i.e. rotates it by `-omega_ego * ts`.
pub fn rotate_into_new_ego_frame(p: Vector2<f64>, omega_ego: f64, ts: f64) -> Vector2<f64> {
    let (s, c) = (omega_ego * ts).sin_cos();
    Vector2::new(p.x * c + p.y * s, -p.x * s + p.y * c)
}

/// Ego vehicle velocities in its own body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EgoMotion {
    /// Longitudinal velocity, m/s.
    pub vx: f64,
    /// Lateral velocity, m/s.
    pub vy: f64,
    /// Yaw rate, rad/s.
    pub omega: f64,
}

impl EgoMotion {
    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }
}

/// Ego-relative track state: position and heading relative to the ego,
/// speed and yaw rate absolute.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
    pub omega: f64,
}

impl TrackState {
    pub const DIM: usize = 5;

    /// Builds a state, wrapping `psi`.
    pub fn new(x: f64, y: f64, psi: f64, v: f64, omega: f64) -> Self {
        Self { x, y, psi: wrap_angle(psi), v, omega }
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.x, self.y, self.psi, self.v, self.omega)
    }

    /// Inverse of [`TrackState::to_vector`]; the heading is re-wrapped.
    pub fn from_vector(v: &Vector5<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|c| c.is_finite())
    }
}

/// 5×5 state covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateCovariance(pub Matrix5<f64>);

impl StateCovariance {
    pub fn new(m: Matrix5<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix5<f64> {
        &self.0
    }

    pub fn diagonal(&self) -> [f64; 5] {
        let d = self.0.diagonal();
        [d[0], d[1], d[2], d[3], d[4]]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Symmetric within `rel_tol * max|P_ij|`.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.0.amax().max(f64::MIN_POSITIVE);
        (self.0 - self.0.transpose()).amax() <= rel_tol * scale
    }

    /// All eigenvalues at least `-rel_tol * trace`.
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        let sym = (self.0 + self.0.transpose()) * 0.5;
        let floor = -rel_tol * sym.trace().abs();
        sym.symmetric_eigenvalues().iter().all(|&l| l >= floor)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

/// Detector object classes. Unknown labels fall back to `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Pedestrian,
    Cyclist,
    Car,
    #[serde(other)]
    Other,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 4] =
        [ObjectClass::Pedestrian, ObjectClass::Cyclist, ObjectClass::Car, ObjectClass::Other];

    /// Maps a free-form detector label onto the closed class set.
    pub fn from_label(label: &str) -> Self {
        match label.trim().to_ascii_lowercase().as_str() {
            "pedestrian" | "person" | "person_sitting" => ObjectClass::Pedestrian,
            "cyclist" | "bicycle" | "bike" => ObjectClass::Cyclist,
            "car" | "van" | "vehicle" => ObjectClass::Car,
            _ => ObjectClass::Other,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectClass::Pedestrian => "pedestrian",
            ObjectClass::Cyclist => "cyclist",
            ObjectClass::Car => "car",
            ObjectClass::Other => "other",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One value per object class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerClass<T> {
    pub pedestrian: T,
    pub cyclist: T,
    pub car: T,
    pub other: T,
}

impl<T: Copy> PerClass<T> {
    pub fn uniform(value: T) -> Self {
        Self { pedestrian: value, cyclist: value, car: value, other: value }
    }

    pub fn get(&self, class: ObjectClass) -> T {
        match class {
            ObjectClass::Pedestrian => self.pedestrian,
            ObjectClass::Cyclist => self.cyclist,
            ObjectClass::Car => self.car,
            ObjectClass::Other => self.other,
        }
    }

    pub fn values(&self) -> [T; 4] {
        [self.pedestrian, self.cyclist, self.car, self.other]
    }
}

/// Camera detection: planar position, heading and class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraMeasurement {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub class: ObjectClass,
}

impl CameraMeasurement {
    pub fn new(x: f64, y: f64, psi: f64, class: ObjectClass) -> Self {
        Self { x, y, psi: wrap_angle(psi), class }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// LiDAR cluster centroid projected onto the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarMeasurement {
    pub x: f64,
    pub y: f64,
}

impl LidarMeasurement {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(PI), PI);
        assert!(try_wrap_angle(f64::NAN).is_err());
        assert!(try_wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn rotate_examples() {
        let p = rotate_into_new_ego_frame(Vector2::new(1.0, 0.0), 0.0, 0.1);
        assert_eq!(p, Vector2::new(1.0, 0.0));

        let q = rotate_into_new_ego_frame(Vector2::new(1.0, 0.0), PI / 2.0, 1.0);
        assert!((q.x).abs() < 1e-15 && (q.y + 1.0).abs() < 1e-15);

        // Hand evaluation of both formulas at angle 0.03 rad.
        let r = rotate_into_new_ego_frame(Vector2::new(2.0, 1.0), 0.3, 0.1);
        assert!((r.x - 2.029095567700471).abs() < 1e-14);
        assert!((r.y - 0.9395590333439963).abs() < 1e-14);
    }

    #[test]
    fn unknown_labels_map_to_other() {
        assert_eq!(ObjectClass::from_label("Truck"), ObjectClass::Other);
        assert_eq!(ObjectClass::from_label("Car"), ObjectClass::Car);
        let c: ObjectClass = serde_json::from_str("\"tram\"").unwrap();
        assert_eq!(c, ObjectClass::Other);
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent_and_in_range(theta in -1e4f64..1e4) {
            let w = wrap_angle(theta);
            prop_assert!(w > -PI && w <= PI);
            prop_assert_eq!(wrap_angle(w), w);
            let k = ((theta - w) / TAU).round();
            prop_assert!((theta - w - k * TAU).abs() < 1e-9);
        }

        #[test]
        fn rotation_preserves_norm(x in -100.0f64..100.0, y in -100.0f64..100.0,
                                   w in -2.0f64..2.0, ts in 0.0f64..0.5) {
            let p = Vector2::new(x, y);
            let q = rotate_into_new_ego_frame(p, w, ts);
            prop_assert!((q.norm() - p.norm()).abs() <= 1e-12 * p.norm().max(1.0));
        }

        #[test]
        fn rotations_compose(x in -50.0f64..50.0, y in -50.0f64..50.0,
                             a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let p = Vector2::new(x, y);
            let two = rotate_into_new_ego_frame(rotate_into_new_ego_frame(p, a, 1.0), b, 1.0);
            let one = rotate_into_new_ego_frame(p, a + b, 1.0);
            prop_assert!((two - one).norm() <= 1e-12 * p.norm().max(1.0));
        }
    }
}
