//! Ego-relative multi-object tracking from camera and LiDAR detections.
//!
//! Every track lives in the body frame of the moving vehicle. Each frame the
//! tracker predicts its tracks with a constant turn rate and velocity model
//! that also accounts for the ego's own motion, associates LiDAR centroids
//! and camera detections to tracks with gated optimal assignment, corrects
//! each track with whatever subset of measurements it received, and applies
//! M-of-N confirmation and deletion rules.
//!
//! ```
//! use egotrack::{CameraMeasurement, EgoMotion, LidarMeasurement, Modality, ObjectClass, Tracker, TrackerConfig};
//!
//! let mut tracker = Tracker::new(TrackerConfig::default(), Modality::Fusion).unwrap();
//! let lidar = [LidarMeasurement::new(12.0, 1.0)];
//! let camera = [CameraMeasurement::new(12.3, 0.9, 0.05, ObjectClass::Car)];
//! for _ in 0..4 {
//!     tracker.step(&lidar, &camera, &EgoMotion::default());
//! }
//! assert_eq!(tracker.tracks().len(), 1);
//! assert!(tracker.tracks()[0].is_confirmed());
//! ```
//!
//! The [`sim`] module generates synthetic scenes and sensor streams and
//! [`eval`] scores tracker output against their ground truth.

pub mod assignment;
pub mod association;
pub mod config;
pub mod ekf;
pub mod error;
pub mod eval;
pub mod lidar;
pub mod sim;
pub mod track;
pub mod tracker;
pub mod types;

pub use assignment::{solve, Assignment, CostMatrix};
pub use association::{associate_frame, AssociationOutcome, SuppressedClusters, TrackId, TrackRef};
pub use config::TrackerConfig;
pub use ekf::{EkfTrackFilter, FilterModel, InnovationReport, MeasurementVariant};
pub use error::{Error, Result};
pub use lidar::{ClusteringParams, PointCloud};
pub use track::{LifecycleEvent, LifecycleParams, Track, TrackStatus};
pub use tracker::{FrameLog, Modality, TrackSnapshot, Tracker};
pub use types::{
    wrap_angle, CameraMeasurement, EgoMotion, LidarMeasurement, ObjectClass, PerClass, StateCovariance, TrackState,
};
