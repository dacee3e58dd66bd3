//! Per-track Extended Kalman Filter in the ego body frame.
//!
//! The motion model propagates the object with its own speed and heading,
//! subtracts the ego translation and then rotates the result into the ego
//! frame of the next sample:
//!
//! ```text
//! f1 = x + Ts·v·cos ψ − Ts·vx_ego
//! f2 = y + Ts·v·sin ψ − Ts·vy_ego
//! x' =  f1·cos(ω_ego·Ts) + f2·sin(ω_ego·Ts)
//! y' = −f1·sin(ω_ego·Ts) + f2·cos(ω_ego·Ts)
//! ψ' = ψ + Ts·(ω − ω_ego),   v' = v,   ω' = ω
//! ```
//!
//! Integration is first-order Euler. There is no `sin(ωTs)/ω` term, so the
//! model needs no special case as ω → 0.

use nalgebra::{Matrix2, Matrix5, SMatrix, SVector, Vector2, Vector3};

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::types::{rotate_into_new_ego_frame, wrap_angle, EgoMotion, StateCovariance, TrackState};

/// Largest accepted condition number of an innovation covariance.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Noise and timing shared by every filter of a tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterModel {
    pub ts: f64,
    pub q: Matrix5<f64>,
    pub r_lidar: Matrix2<f64>,
    pub r_cam: nalgebra::Matrix3<f64>,
    pub r_group: nalgebra::Matrix3<f64>,
}

impl From<&TrackerConfig> for FilterModel {
    fn from(c: &TrackerConfig) -> Self {
        Self { ts: c.ts, q: c.q, r_lidar: c.r_lidar, r_cam: c.r_cam, r_group: c.r_group }
    }
}

/// Body-frame CTRV transition.
pub fn motion_f(state: &TrackState, ego: &EgoMotion, ts: f64) -> TrackState {
    let (sin_psi, cos_psi) = state.psi.sin_cos();
    let f1 = state.x + ts * state.v * cos_psi - ts * ego.vx;
    let f2 = state.y + ts * state.v * sin_psi - ts * ego.vy;
    let p = rotate_into_new_ego_frame(Vector2::new(f1, f2), ego.omega, ts);
    TrackState {
        x: p.x,
        y: p.y,
        psi: wrap_angle(state.psi + ts * (state.omega - ego.omega)),
        v: state.v,
        omega: state.omega,
    }
}

/// Analytic ∂f/∂x of [`motion_f`].
#[rustfmt::skip]
pub fn motion_jacobian(state: &TrackState, ego: &EgoMotion, ts: f64) -> Matrix5<f64> {
    let (s, c) = (ego.omega * ts).sin_cos();
    let (sin_psi, cos_psi) = state.psi.sin_cos();
    // Partials of (f1, f2) w.r.t. psi and v; both are the identity in (x, y).
    let df1_dpsi = -ts * state.v * sin_psi;
    let df2_dpsi = ts * state.v * cos_psi;
    let df1_dv = ts * cos_psi;
    let df2_dv = ts * sin_psi;
    Matrix5::new(
         c,  s,  c * df1_dpsi + s * df2_dpsi,  c * df1_dv + s * df2_dv, 0.0,
        -s,  c, -s * df1_dpsi + c * df2_dpsi, -s * df1_dv + c * df2_dv, 0.0,
        0.0, 0.0, 1.0, 0.0, ts,
        0.0, 0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0,
    )
}

/// Observation available for one track in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementVariant {
    /// LiDAR position only.
    LidarOnly(Vector2<f64>),
    /// Camera position and heading.
    CameraOnly(Vector3<f64>),
    /// LiDAR position with the camera heading.
    Group(Vector3<f64>),
}

impl MeasurementVariant {
    pub fn dim(&self) -> usize {
        match self {
            MeasurementVariant::LidarOnly(_) => 2,
            _ => 3,
        }
    }
}

/// Selects (x, y).
pub fn h_lidar() -> SMatrix<f64, 2, 5> {
    SMatrix::<f64, 2, 5>::from_fn(|i, j| if i == j { 1.0 } else { 0.0 })
}

/// Selects (x, y, ψ); also used for fused groups.
pub fn h_cam() -> SMatrix<f64, 3, 5> {
    SMatrix::<f64, 3, 5>::from_fn(|i, j| if i == j { 1.0 } else { 0.0 })
}

/// Result of one correction.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationReport {
    /// `y − H·x`, heading component wrapped.
    pub innovation: Vec<f64>,
    /// Full innovation covariance, row-major `dim × dim`.
    pub s: Vec<f64>,
    /// The (x, y) block of `s`.
    pub position_s: Matrix2<f64>,
    /// False when the correction was rejected as ill-conditioned.
    pub kalman_gain_applied: bool,
}

/// State and covariance of one tracked object.
#[derive(Debug, Clone, PartialEq)]
pub struct EkfTrackFilter {
    pub state: TrackState,
    pub cov: StateCovariance,
}

impl EkfTrackFilter {
    pub fn new(state: TrackState, cov: Matrix5<f64>) -> Self {
        Self { state, cov: StateCovariance(cov) }
    }

    /// Time update. Errors if the result is not finite; the filter is then
    /// left in the non-finite state and should be discarded.
    pub fn predict(&mut self, ego: &EgoMotion, model: &FilterModel) -> Result<()> {
        let f = motion_jacobian(&self.state, ego, model.ts);
        self.state = motion_f(&self.state, ego, model.ts);
        let p = f * self.cov.0 * f.transpose() + model.q;
        self.cov = StateCovariance((p + p.transpose()) * 0.5);
        if !self.state.is_finite() || !self.cov.is_finite() {
            return Err(Error::Numeric("prediction produced non-finite values".into()));
        }
        Ok(())
    }

    /// Measurement update with the H and R matching the variant.
    pub fn correct(&mut self, meas: &MeasurementVariant, model: &FilterModel) -> InnovationReport {
        match *meas {
            MeasurementVariant::LidarOnly(y) => self.correct_with(&h_lidar(), &model.r_lidar, &y, None),
            MeasurementVariant::CameraOnly(y) => self.correct_with(&h_cam(), &model.r_cam, &y, Some(2)),
            MeasurementVariant::Group(y) => self.correct_with(&h_cam(), &model.r_group, &y, Some(2)),
        }
    }

    /// Generic selector-matrix update. `angle_row` names the measurement row
    /// holding a heading, whose innovation is wrapped.
    pub fn correct_with<const M: usize>(
        &mut self,
        h: &SMatrix<f64, M, 5>,
        r: &SMatrix<f64, M, M>,
        y: &SVector<f64, M>,
        angle_row: Option<usize>,
    ) -> InnovationReport {
        let x = self.state.to_vector();
        let p = self.cov.0;
        let mut nu = y - h * x;
        if let Some(k) = angle_row {
            nu[k] = wrap_angle(nu[k]);
        }
        let s = h * p * h.transpose() + r;
        let s = (s + s.transpose()) * 0.5;
        let report = |applied: bool| InnovationReport {
            innovation: nu.iter().copied().collect(),
            s: (0..M).flat_map(|i| (0..M).map(move |j| s[(i, j)])).collect(),
            position_s: s.fixed_view::<2, 2>(0, 0).into_owned(),
            kalman_gain_applied: applied,
        };

        let s_inv = match well_conditioned_inverse(&s) {
            Some(inv) => inv,
            None => return report(false),
        };
        let k = p * h.transpose() * s_inv;
        let x_new = x + k * nu;
        let i_kh = Matrix5::identity() - k * h;
        let p_new = i_kh * p * i_kh.transpose() + k * r * k.transpose();
        let p_new = (p_new + p_new.transpose()) * 0.5;
        if !x_new.iter().all(|c| c.is_finite()) || !p_new.iter().all(|c| c.is_finite()) {
            return report(false);
        }
        self.state = TrackState::from_vector(&x_new);
        self.cov = StateCovariance(p_new);
        report(true)
    }

    /// `H_pos·P·H_posᵀ + R_lidar`, the position innovation covariance used
    /// by association.
    pub fn position_innovation_cov(&self, r_lidar: &Matrix2<f64>) -> Matrix2<f64> {
        self.cov.0.fixed_view::<2, 2>(0, 0).into_owned() + r_lidar
    }
}

/// Inverse of a symmetric matrix whose condition number is at most
/// [`MAX_INNOVATION_CONDITION`].
pub(crate) fn well_conditioned_inverse<const M: usize>(s: &SMatrix<f64, M, M>) -> Option<SMatrix<f64, M, M>> {
    if !s.iter().all(|c| c.is_finite()) {
        return None;
    }
    let eig = nalgebra::DMatrix::from_iterator(M, M, s.iter().copied()).symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min.is_nan() || min <= 0.0 || max / min > MAX_INNOVATION_CONDITION {
        return None;
    }
    s.try_inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector5;
    use std::f64::consts::PI;

    fn model(q: Matrix5<f64>, ts: f64) -> FilterModel {
        let c = TrackerConfig::default();
        FilterModel { ts, q, ..FilterModel::from(&c) }
    }

    #[test]
    fn motion_examples() {
        let rest = motion_f(&TrackState::default(), &EgoMotion::default(), 0.1);
        assert_eq!(rest, TrackState::default());

        let s = TrackState::new(1.0, 0.0, 0.0, 0.0, 0.0);
        let out = motion_f(&s, &EgoMotion::new(1.0, 0.0, 0.0), 0.1);
        assert!((out.x - 0.9).abs() < 1e-15);
        assert_eq!((out.y, out.psi, out.v, out.omega), (0.0, 0.0, 0.0, 0.0));

        // Values evaluated by hand from the scalar transition formulas.
        let s = TrackState::new(2.0, 1.0, 0.2, 1.5, 0.1);
        let out = motion_f(&s, &EgoMotion::new(1.0, 0.0, 0.3), 0.1);
        assert!((out.x - 2.076978279362006).abs() < 1e-14);
        assert!((out.y - 0.9679359357242954).abs() < 1e-14);
        assert!((out.psi - 0.18).abs() < 1e-14);
        assert_eq!((out.v, out.omega), (1.5, 0.1));
    }

    #[test]
    fn jacobian_special_cases() {
        let s = TrackState::new(3.0, -2.0, 0.7, 4.0, 0.2);
        let ego = EgoMotion::new(5.0, 0.3, 0.4);
        assert_eq!(motion_jacobian(&s, &ego, 0.0), Matrix5::identity());

        let still = TrackState::new(3.0, -2.0, 0.7, 0.0, 0.2);
        let j = motion_jacobian(&still, &EgoMotion::default(), 0.1);
        assert_eq!(j.fixed_view::<2, 2>(0, 0).into_owned(), Matrix2::identity());
    }

    #[test]
    fn predict_identity_and_additive_noise() {
        let p = Matrix5::from_diagonal(&Vector5::new(1.0, 2.0, 0.1, 3.0, 0.5));
        let mut f = EkfTrackFilter::new(TrackState::new(1.0, 2.0, 0.3, 4.0, 0.1), p);
        f.predict(&EgoMotion::new(2.0, 0.0, 0.1), &model(Matrix5::zeros(), 0.0)).unwrap();
        assert_eq!(f.cov.0, p);

        let q = Matrix5::from_diagonal(&Vector5::new(0.1, 0.2, 0.3, 0.4, 0.5));
        f.predict(&EgoMotion::new(2.0, 0.0, 0.1), &model(q, 0.0)).unwrap();
        assert!((f.cov.0 - (p + q)).amax() < 1e-15);
    }

    #[test]
    fn predict_flags_blow_up() {
        let mut f = EkfTrackFilter::new(TrackState::new(1.0, 0.0, 0.0, f64::MAX, 0.0), Matrix5::identity());
        assert!(f.predict(&EgoMotion::default(), &model(Matrix5::zeros(), 1e10)).is_err());
    }

    #[test]
    fn zero_innovation_keeps_state() {
        let p = Matrix5::identity();
        let s = TrackState::new(1.0, 2.0, 0.5, 3.0, 0.1);
        let mut f = EkfTrackFilter::new(s, p);
        let rep = f.correct(&MeasurementVariant::CameraOnly(Vector3::new(1.0, 2.0, 0.5)), &model(Matrix5::zeros(), 0.1));
        assert!(rep.kalman_gain_applied);
        assert!(rep.innovation.iter().all(|v| *v == 0.0));
        assert_eq!(f.state, s);
    }

    #[test]
    fn scalar_gain_is_one_half() {
        // Unit prior variance and unit measurement noise on x only.
        let mut m = model(Matrix5::zeros(), 0.1);
        m.r_lidar = Matrix2::identity();
        let mut f = EkfTrackFilter::new(TrackState::default(), Matrix5::identity());
        f.correct(&MeasurementVariant::LidarOnly(Vector2::new(2.0, 0.0)), &m);
        assert!((f.state.x - 1.0).abs() < 1e-15);
        assert!((f.cov.0[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(f.cov.0[(3, 3)], 1.0);
    }

    #[test]
    fn heading_innovation_is_wrapped() {
        let s = TrackState::new(0.0, 0.0, 0.4, 1.0, 0.0);
        let mut f = EkfTrackFilter::new(s, Matrix5::identity());
        let rep = f.correct(
            &MeasurementVariant::CameraOnly(Vector3::new(0.0, 0.0, 0.4 + 2.0 * PI)),
            &model(Matrix5::zeros(), 0.1),
        );
        assert!(rep.innovation[2].abs() < 1e-12);

        // Across the ±π seam the correction takes the short way round.
        let mut g = EkfTrackFilter::new(TrackState::new(0.0, 0.0, PI - 0.05, 1.0, 0.0), Matrix5::identity());
        g.correct(&MeasurementVariant::CameraOnly(Vector3::new(0.0, 0.0, -PI + 0.05)), &model(Matrix5::zeros(), 0.1));
        assert!(g.state.psi.abs() > PI - 0.05);
    }

    #[test]
    fn ill_conditioned_correction_is_rejected() {
        let mut m = model(Matrix5::zeros(), 0.1);
        m.r_lidar = Matrix2::zeros();
        let mut p = Matrix5::identity();
        p[(1, 1)] = 1e-14;
        let mut f = EkfTrackFilter::new(TrackState::default(), p);
        let before = f.clone();
        let rep = f.correct(&MeasurementVariant::LidarOnly(Vector2::new(1.0, 1.0)), &m);
        assert!(!rep.kalman_gain_applied);
        assert_eq!(f, before);
    }

    #[test]
    fn position_innovation_examples() {
        let f = EkfTrackFilter::new(TrackState::default(), Matrix5::identity());
        assert_eq!(f.position_innovation_cov(&Matrix2::identity()), Matrix2::identity() * 2.0);

        let mut p = Matrix5::identity();
        p[(0, 0)] = 2.0;
        p[(0, 1)] = 0.5;
        p[(1, 0)] = 0.5;
        let f = EkfTrackFilter::new(TrackState::default(), p);
        let s = f.position_innovation_cov(&(Matrix2::identity() * 0.01));
        assert!((s - Matrix2::new(2.01, 0.5, 0.5, 1.01)).amax() < 1e-15);
    }

    #[test]
    fn selector_matrices() {
        assert_eq!(h_lidar().row(0).iter().sum::<f64>(), 1.0);
        assert_eq!(h_cam()[(2, 2)], 1.0);
        assert_eq!(h_cam().iter().filter(|v| **v != 0.0).count(), 3);
    }
}
