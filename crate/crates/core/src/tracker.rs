//! Frame-step orchestration: predict, associate, correct, manage.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use log::debug;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::association::{associate_frame, AssociationOutcome, SuppressedClusters, TrackId, TrackRef};
use crate::config::TrackerConfig;
use crate::ekf::{EkfTrackFilter, FilterModel, MeasurementVariant};
use crate::error::{Error, Result};
use crate::track::{LifecycleEvent, LifecycleParams, Track, TrackStatus};
use crate::types::{CameraMeasurement, EgoMotion, LidarMeasurement, ObjectClass, TrackState};

/// Which sensor streams the tracker consumes.
///
/// In the single-sensor modes tracks are initialized from that sensor's
/// unmatched measurements, since no fused pair can ever form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Camera,
    Lidar,
    Fusion,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Camera, Modality::Lidar, Modality::Fusion];

    pub fn uses_camera(&self) -> bool {
        matches!(self, Modality::Camera | Modality::Fusion)
    }

    pub fn uses_lidar(&self) -> bool {
        matches!(self, Modality::Lidar | Modality::Fusion)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Camera => "camera",
            Modality::Lidar => "lidar",
            Modality::Fusion => "fusion",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "camera" => Ok(Modality::Camera),
            "lidar" => Ok(Modality::Lidar),
            "fusion" => Ok(Modality::Fusion),
            other => Err(Error::InvalidInput(format!("unknown modality '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSnapshot {
    pub id: TrackId,
    pub status: TrackStatus,
    pub class: ObjectClass,
    pub state: TrackState,
    pub cov_diag: [f64; 5],
}

impl From<&Track> for TrackSnapshot {
    fn from(t: &Track) -> Self {
        Self {
            id: t.id,
            status: t.status,
            class: t.class,
            state: t.filter.state,
            cov_diag: t.filter.cov.diagonal(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameDecisions {
    pub created: Vec<TrackId>,
    pub confirmed: Vec<TrackId>,
    pub deleted: Vec<TrackId>,
    /// Deleted after a non-finite prediction; also listed in `deleted`.
    pub numeric_failures: Vec<TrackId>,
}

/// Tracker output for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    pub frame: u64,
    pub t: f64,
    pub modality: Modality,
    /// Every live track after the step, tentative included.
    pub tracks: Vec<TrackSnapshot>,
    pub association: AssociationOutcome,
    pub suppressed: SuppressedClusters,
    pub decisions: FrameDecisions,
    /// `(track_id, camera class)` where a camera detection disagreed with the
    /// track's fixed class.
    pub class_disagreements: Vec<(TrackId, ObjectClass)>,
}

impl FrameLog {
    /// Confirmed tracks only: what the tracker publishes.
    pub fn confirmed(&self) -> impl Iterator<Item = &TrackSnapshot> {
        self.tracks.iter().filter(|t| t.status == TrackStatus::Confirmed)
    }
}

/// Multi-object tracker state across frames.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    model: FilterModel,
    lifecycle: LifecycleParams,
    modality: Modality,
    tracks: Vec<Track>,
    next_id: TrackId,
    frame: u64,
    /// Set once the first frame has been processed; prediction starts after it.
    started: bool,
}

impl Tracker {
    pub fn new(config: TrackerConfig, modality: Modality) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            model: FilterModel::from(&config),
            lifecycle: LifecycleParams::from(&config),
            config,
            modality,
            tracks: Vec::new(),
            next_id: 1,
            frame: 0,
            started: false,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Processes one frame. `ego` is the ego motion over the interval since
    /// the previous frame; it is ignored on the first call. Measurements of a
    /// stream the modality does not use are dropped.
    pub fn step(&mut self, lidar: &[LidarMeasurement], camera: &[CameraMeasurement], ego: &EgoMotion) -> FrameLog {
        let lidar: &[LidarMeasurement] = if self.modality.uses_lidar() { lidar } else { &[] };
        let camera: &[CameraMeasurement] = if self.modality.uses_camera() { camera } else { &[] };
        let frame = self.frame;
        let mut decisions = FrameDecisions::default();

        if self.started {
            let model = &self.model;
            let mut failed = Vec::new();
            for track in &mut self.tracks {
                if let Err(e) = track.filter.predict(ego, model) {
                    debug!("track {} dropped at frame {frame}: {e}", track.id);
                    failed.push(track.id);
                }
            }
            if !failed.is_empty() {
                self.tracks.retain(|t| !failed.contains(&t.id));
                decisions.deleted.extend(&failed);
                decisions.numeric_failures = failed;
            }
        }

        let refs: Vec<TrackRef<'_>> =
            self.tracks.iter().map(|t| TrackRef { id: t.id, filter: &t.filter }).collect();
        let (outcome, suppressed) = associate_frame(lidar, camera, &refs, &self.config);

        let mut class_disagreements = Vec::new();
        let mut corrections: Vec<(TrackId, MeasurementVariant, Option<ObjectClass>)> = Vec::new();
        for &(i, id) in &outcome.lidar_track_pairs {
            corrections.push((id, MeasurementVariant::LidarOnly(lidar[i].position()), None));
        }
        for &(w, id) in &outcome.camera_track_pairs {
            let c = &camera[w];
            corrections.push((id, MeasurementVariant::CameraOnly(Vector3::new(c.x, c.y, c.psi)), Some(c.class)));
        }
        for &(i, w, id) in &outcome.group_triples {
            let (l, c) = (&lidar[i], &camera[w]);
            corrections.push((id, MeasurementVariant::Group(Vector3::new(l.x, l.y, c.psi)), Some(c.class)));
        }
        corrections.sort_by_key(|c| c.0);
        for (id, meas, cam_class) in corrections {
            let track = self.tracks.iter_mut().find(|t| t.id == id).expect("associated track exists");
            let report = track.filter.correct(&meas, &self.model);
            if !report.kalman_gain_applied {
                debug!("track {id}: correction rejected at frame {frame}");
            }
            if let Some(c) = cam_class {
                if c != track.class {
                    class_disagreements.push((id, c));
                }
            }
        }

        let associated = outcome.associated_tracks();
        let mut keep = Vec::with_capacity(self.tracks.len());
        for mut track in self.tracks.drain(..) {
            match track.record_frame(associated.contains(&track.id), &self.lifecycle) {
                LifecycleEvent::Deleted => decisions.deleted.push(track.id),
                LifecycleEvent::Confirmed => {
                    decisions.confirmed.push(track.id);
                    keep.push(track);
                }
                LifecycleEvent::None => keep.push(track),
            }
        }
        self.tracks = keep;

        for track in self.new_tracks(lidar, camera, &outcome) {
            decisions.created.push(track.id);
            self.tracks.push(track);
        }

        self.started = true;
        self.frame += 1;
        FrameLog {
            frame,
            t: frame as f64 * self.config.ts,
            modality: self.modality,
            tracks: self.tracks.iter().map(TrackSnapshot::from).collect(),
            association: outcome,
            suppressed,
            decisions,
            class_disagreements,
        }
    }

    fn new_tracks(
        &mut self,
        lidar: &[LidarMeasurement],
        camera: &[CameraMeasurement],
        outcome: &AssociationOutcome,
    ) -> Vec<Track> {
        let cfg = &self.config;
        let mut born = Vec::new();
        match self.modality {
            Modality::Fusion => {
                for &(i, w) in &outcome.lidar_camera_pairs {
                    born.push(Track::from_pair(0, &lidar[i], &camera[w], cfg));
                }
            }
            Modality::Camera => {
                for &w in &outcome.unmatched_camera {
                    let c = &camera[w];
                    let mut p0 = cfg.p0;
                    p0.fixed_view_mut::<3, 3>(0, 0).copy_from(&cfg.r_cam);
                    let state = TrackState::new(c.x, c.y, c.psi, 0.0, 0.0);
                    born.push(Track::new(0, EkfTrackFilter::new(state, p0), c.class));
                }
            }
            Modality::Lidar => {
                for &i in &outcome.unmatched_lidar {
                    let l = &lidar[i];
                    let mut p0 = cfg.p0;
                    p0.fixed_view_mut::<2, 2>(0, 0).copy_from(&cfg.r_lidar);
                    // No heading observation: variance of a uniform angle.
                    p0.row_mut(2).fill(0.0);
                    p0.column_mut(2).fill(0.0);
                    p0[(2, 2)] = PI * PI / 3.0;
                    let state = TrackState::new(l.x, l.y, 0.0, 0.0, 0.0);
                    born.push(Track::new(0, EkfTrackFilter::new(state, p0), ObjectClass::Other));
                }
            }
        }
        for t in &mut born {
            t.id = self.next_id;
            self.next_id += 1;
        }
        born
    }
}
