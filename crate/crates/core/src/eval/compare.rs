use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_errors, ErrorReport, MATCH_GATE_M};
use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::sim::{simulate, Scenario, SimFrameRecord};
use crate::tracker::{FrameLog, Modality, Tracker};
use crate::types::ObjectClass;

/// Runs a fresh tracker over a simulation log.
pub fn run_tracker(records: &[SimFrameRecord], config: &TrackerConfig, modality: Modality) -> Result<Vec<FrameLog>> {
    let mut tracker = Tracker::new(config.clone(), modality)?;
    Ok(records.iter().map(|r| tracker.step(&r.lidar_meas, &r.camera_meas, &r.ego.motion())).collect())
}

/// The three modality runs of one scenario and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityComparison {
    pub seed: u64,
    pub camera: ErrorReport,
    pub lidar: ErrorReport,
    pub fusion: ErrorReport,
}

impl ModalityComparison {
    pub fn get(&self, modality: Modality) -> &ErrorReport {
        match modality {
            Modality::Camera => &self.camera,
            Modality::Lidar => &self.lidar,
            Modality::Fusion => &self.fusion,
        }
    }
}

/// Simulates the scenario once and tracks it with camera only, LiDAR only
/// and both. Single-sensor runs start tracks from that sensor's unmatched
/// detections.
pub fn run_modality_comparison(scenario: &Scenario, config: &TrackerConfig) -> Result<ModalityComparison> {
    scenario.validate()?;
    check_sample_time(scenario, config)?;
    let records = simulate(scenario);
    let report = |m: Modality| -> Result<ErrorReport> { compute_errors(&run_tracker(&records, config, m)?, &records) };
    Ok(ModalityComparison {
        seed: scenario.seed,
        camera: report(Modality::Camera)?,
        lidar: report(Modality::Lidar)?,
        fusion: report(Modality::Fusion)?,
    })
}

/// The tracker must run at the scenario's sample time.
pub(crate) fn check_sample_time(scenario: &Scenario, config: &TrackerConfig) -> Result<()> {
    if (scenario.ts - config.ts).abs() > 1e-12 * scenario.ts.abs().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "tracker Ts {} differs from scenario Ts {}",
            config.ts, scenario.ts
        )));
    }
    Ok(())
}

/// Seed-averaged errors of one class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassSummary {
    pub position_rmse_m: f64,
    pub psi_rmse_deg: f64,
    pub v_rmse_mps: f64,
    pub omega_rmse_degps: f64,
    /// Seeds in which the class had matched samples.
    pub seeds: usize,
}

/// Seed-averaged errors of one modality.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModalitySummary {
    pub position_rmse_m: f64,
    pub position_maae_m: f64,
    pub psi_rmse_deg: f64,
    pub psi_maae_deg: f64,
    pub v_rmse_mps: f64,
    pub omega_rmse_degps: f64,
    pub match_ratio: f64,
    pub id_switches: f64,
    pub per_class: BTreeMap<String, ClassSummary>,
}

impl ModalitySummary {
    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a ErrorReport>) -> Self {
        let reports: Vec<&ErrorReport> = reports.into_iter().collect();
        let n = reports.len().max(1) as f64;
        let mean = |f: &dyn Fn(&ErrorReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
        let mut per_class = BTreeMap::new();
        for class in ObjectClass::ALL {
            let present: Vec<_> = reports.iter().filter_map(|r| r.class(class)).collect();
            if present.is_empty() {
                continue;
            }
            let k = present.len() as f64;
            per_class.insert(
                class.as_str().to_string(),
                ClassSummary {
                    position_rmse_m: present.iter().map(|c| c.position_m.rmse).sum::<f64>() / k,
                    psi_rmse_deg: present.iter().map(|c| c.psi_deg.rmse).sum::<f64>() / k,
                    v_rmse_mps: present.iter().map(|c| c.v_mps.rmse).sum::<f64>() / k,
                    omega_rmse_degps: present.iter().map(|c| c.omega_degps.rmse).sum::<f64>() / k,
                    seeds: present.len(),
                },
            );
        }
        Self {
            position_rmse_m: mean(&|r| r.overall.position_m.rmse),
            position_maae_m: mean(&|r| r.overall.position_m.maae),
            psi_rmse_deg: mean(&|r| r.overall.psi_deg.rmse),
            psi_maae_deg: mean(&|r| r.overall.psi_deg.maae),
            v_rmse_mps: mean(&|r| r.overall.v_mps.rmse),
            omega_rmse_degps: mean(&|r| r.overall.omega_degps.rmse),
            match_ratio: mean(&|r| r.match_ratio),
            id_switches: mean(&|r| r.id_switches as f64),
            per_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub camera: ModalitySummary,
    pub lidar: ModalitySummary,
    pub fusion: ModalitySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareMetadata {
    pub seeds: Vec<u64>,
    pub n_frames: usize,
    pub ts: f64,
    pub match_gate_m: f64,
    /// How tracks start in the single-sensor runs.
    pub initialization_fallback: BTreeMap<String, String>,
}

/// Multi-seed modality comparison, as written by `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub metadata: CompareMetadata,
    pub summary: ComparisonSummary,
    /// One entry per seed, without per-frame series.
    pub runs: Vec<ModalityComparison>,
}

impl CompareReport {
    /// Runs the comparison for `n_seeds` consecutive seeds starting at the
    /// scenario's own. Seeds run in parallel; the result is independent of
    /// scheduling.
    pub fn run(scenario: &Scenario, config: &TrackerConfig, n_seeds: u64) -> Result<Self> {
        scenario.validate()?;
        config.validate()?;
        check_sample_time(scenario, config)?;
        let seeds: Vec<u64> = (0..n_seeds).map(|i| scenario.seed.wrapping_add(i)).collect();
        let runs = seeds
            .par_iter()
            .map(|&s| {
                run_modality_comparison(&scenario.with_seed(s), config).map(|c| ModalityComparison {
                    seed: c.seed,
                    camera: c.camera.without_series(),
                    lidar: c.lidar.without_series(),
                    fusion: c.fusion.without_series(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let summary = ComparisonSummary {
            camera: ModalitySummary::from_reports(runs.iter().map(|r| &r.camera)),
            lidar: ModalitySummary::from_reports(runs.iter().map(|r| &r.lidar)),
            fusion: ModalitySummary::from_reports(runs.iter().map(|r| &r.fusion)),
        };
        let initialization_fallback = BTreeMap::from([
            ("camera".to_string(), "unmatched camera detections; position and heading covariance from R_cam".to_string()),
            (
                "lidar".to_string(),
                "unmatched LiDAR centroids; heading 0 with variance pi^2/3, class other".to_string(),
            ),
            ("fusion".to_string(), "gated LiDAR-camera pairs".to_string()),
        ]);
        Ok(Self {
            metadata: CompareMetadata {
                seeds,
                n_frames: scenario.n_frames,
                ts: scenario.ts,
                match_gate_m: MATCH_GATE_M,
                initialization_fallback,
            },
            summary,
            runs,
        })
    }
}
