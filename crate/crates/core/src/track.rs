//! Track lifecycle.
//!
//! A new track is tentative. Its window starts on the frame after creation
//! (the initializing detection is not counted): it is confirmed on the first
//! frame where it has at least `mc` hits, and deleted once `nc` frames have
//! been recorded without that happening.
//!
//! A confirmed track is deleted on any later frame where the trailing `ne`
//! recorded frames hold fewer than `me` hits. The check only starts once `ne`
//! frames have been recorded since creation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::association::TrackId;
use crate::config::TrackerConfig;
use crate::ekf::EkfTrackFilter;
use crate::types::{CameraMeasurement, LidarMeasurement, ObjectClass, TrackState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
}

impl TrackStatus {
    pub fn is_confirmed(&self) -> bool {
        *self == TrackStatus::Confirmed
    }
}

/// What [`Track::record_frame`] decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifecycleEvent {
    None,
    Confirmed,
    Deleted,
}

/// Lifecycle window sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LifecycleParams {
    pub mc: usize,
    pub nc: usize,
    pub me: usize,
    pub ne: usize,
}

impl From<&TrackerConfig> for LifecycleParams {
    fn from(c: &TrackerConfig) -> Self {
        Self { mc: c.mc, nc: c.nc, me: c.me, ne: c.ne }
    }
}

impl LifecycleParams {
    pub fn history_len(&self) -> usize {
        self.nc.max(self.ne)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: TrackId,
    pub filter: EkfTrackFilter,
    pub class: ObjectClass,
    pub status: TrackStatus,
    /// Most recent frames last; bounded by `max(nc, ne)`.
    pub hit_history: VecDeque<bool>,
    /// Frames recorded since creation.
    pub age: usize,
    /// Hits among the first `nc` recorded frames.
    tentative_hits: usize,
}

impl Track {
    pub fn new(id: TrackId, filter: EkfTrackFilter, class: ObjectClass) -> Self {
        Self {
            id,
            filter,
            class,
            status: TrackStatus::Tentative,
            hit_history: VecDeque::new(),
            age: 0,
            tentative_hits: 0,
        }
    }

    /// New tentative track from a fused pair: position from the LiDAR,
    /// heading and class from the camera, zero speed and yaw rate.
    pub fn from_pair(
        id: TrackId,
        lidar: &LidarMeasurement,
        camera: &CameraMeasurement,
        config: &TrackerConfig,
    ) -> Self {
        let state = TrackState::new(lidar.x, lidar.y, camera.psi, 0.0, 0.0);
        Self::new(id, EkfTrackFilter::new(state, config.p0), camera.class)
    }

    pub fn state(&self) -> &TrackState {
        &self.filter.state
    }

    pub fn is_confirmed(&self) -> bool {
        self.status == TrackStatus::Confirmed
    }

    /// Appends one frame's association result and applies the lifecycle rules.
    pub fn record_frame(&mut self, associated: bool, params: &LifecycleParams) -> LifecycleEvent {
        self.age += 1;
        self.hit_history.push_back(associated);
        while self.hit_history.len() > params.history_len() {
            self.hit_history.pop_front();
        }
        match self.status {
            TrackStatus::Tentative => {
                if associated {
                    self.tentative_hits += 1;
                }
                if self.tentative_hits >= params.mc {
                    self.status = TrackStatus::Confirmed;
                    LifecycleEvent::Confirmed
                } else if self.age >= params.nc {
                    LifecycleEvent::Deleted
                } else {
                    LifecycleEvent::None
                }
            }
            TrackStatus::Confirmed => {
                if self.should_delete(params) {
                    LifecycleEvent::Deleted
                } else {
                    LifecycleEvent::None
                }
            }
        }
    }

    /// True when a confirmed track's trailing `ne` frames hold fewer than
    /// `me` hits. Never true for tentative tracks or before `ne` frames.
    pub fn should_delete(&self, params: &LifecycleParams) -> bool {
        if self.status != TrackStatus::Confirmed || self.age < params.ne {
            return false;
        }
        let hits = self.hit_history.iter().rev().take(params.ne).filter(|h| **h).count();
        hits < params.me
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix5;

    fn params(mc: usize, nc: usize, me: usize, ne: usize) -> LifecycleParams {
        LifecycleParams { mc, nc, me, ne }
    }

    fn fresh() -> Track {
        Track::new(1, EkfTrackFilter::new(TrackState::default(), Matrix5::identity()), ObjectClass::Car)
    }

    #[test]
    fn initialization_maps_fields() {
        let cfg = TrackerConfig::default();
        let t = Track::from_pair(
            4,
            &LidarMeasurement::new(5.0, 2.0),
            &CameraMeasurement::new(5.2, 2.1, 0.3, ObjectClass::Car),
            &cfg,
        );
        assert_eq!(*t.state(), TrackState::new(5.0, 2.0, 0.3, 0.0, 0.0));
        assert_eq!(t.class, ObjectClass::Car);
        assert_eq!(t.status, TrackStatus::Tentative);
        assert!(t.filter.cov.0[(3, 3)] >= cfg.p0[(3, 3)]);
    }

    #[test]
    fn earliest_confirmation() {
        let p = params(3, 5, 1, 4);
        let mut t = fresh();
        assert_eq!(t.record_frame(true, &p), LifecycleEvent::None);
        assert_eq!(t.record_frame(true, &p), LifecycleEvent::None);
        assert_eq!(t.record_frame(true, &p), LifecycleEvent::Confirmed);
    }

    #[test]
    fn tentative_window_expiry() {
        let p = params(3, 5, 1, 4);
        let mut t = fresh();
        let events: Vec<_> = [true, true, false, false, false].iter().map(|&h| t.record_frame(h, &p)).collect();
        assert_eq!(&events[..4], &[LifecycleEvent::None; 4]);
        assert_eq!(events[4], LifecycleEvent::Deleted);
    }

    #[test]
    fn confirmed_deletion_window() {
        let p = params(1, 1, 1, 4);
        let mut t = fresh();
        assert_eq!(t.record_frame(true, &p), LifecycleEvent::Confirmed);
        for _ in 0..3 {
            assert_eq!(t.record_frame(false, &p), LifecycleEvent::None);
        }
        // Hit two frames ago keeps it alive.
        let mut u = t.clone();
        assert!(!u.should_delete(&p));
        assert_eq!(t.record_frame(false, &p), LifecycleEvent::Deleted);
        u.hit_history.clear();
        u.hit_history.extend([false, false, true, false]);
        assert!(!u.should_delete(&p));
    }

    #[test]
    fn history_is_bounded() {
        let p = params(2, 3, 1, 5);
        let mut t = fresh();
        for k in 0..20 {
            t.record_frame(k % 3 != 0, &p);
            assert!(t.hit_history.len() <= 5);
        }
    }
}
