use std::collections::{BTreeMap, HashMap};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};
use crate::association::TrackId;
use crate::error::{Error, Result};
use crate::sim::{SimFrameRecord, TruthRecord};
use crate::tracker::{FrameLog, Modality, TrackSnapshot};
use crate::types::{wrap_angle, ObjectClass};

/// Largest planar distance at which a track may be matched to an agent, m.
pub const MATCH_GATE_M: f64 = 2.0;

/// Pairs confirmed tracks with agents, minimizing total planar distance in
/// the ego frame. Pairs further apart than [`MATCH_GATE_M`] are never made.
pub fn match_tracks_to_truth(tracks: &[TrackSnapshot], truth: &[TruthRecord]) -> Vec<(TrackId, u64)> {
    let confirmed: Vec<&TrackSnapshot> = tracks.iter().filter(|t| t.status.is_confirmed()).collect();
    if confirmed.is_empty() || truth.is_empty() {
        return Vec::new();
    }
    let costs = CostMatrix::from_fn(confirmed.len(), truth.len(), |i, j| {
        (confirmed[i].state.x - truth[j].rel.x).hypot(confirmed[i].state.y - truth[j].rel.y)
    });
    let costs = match costs {
        Ok(c) => c.gate(MATCH_GATE_M),
        // Non-finite track states cannot be matched.
        Err(_) => return Vec::new(),
    };
    let mut pairs: Vec<(TrackId, u64)> =
        solve(&costs).pairs.into_iter().map(|(i, j)| (confirmed[i].id, truth[j].id)).collect();
    pairs.sort_unstable();
    pairs
}

/// RMSE, MAE and MaAE of one error series.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorStats {
    pub rmse: f64,
    pub mae: f64,
    pub maae: f64,
    pub n: usize,
}

impl ErrorStats {
    pub fn from_errors(errors: &[f64]) -> Self {
        if errors.is_empty() {
            return Self::default();
        }
        let n = errors.len() as f64;
        let mut sq = 0.0;
        let mut abs = 0.0;
        let mut max: f64 = 0.0;
        for e in errors {
            let a = e.abs();
            sq += a * a;
            abs += a;
            max = max.max(a);
        }
        // Rounding can push the means a hair past the maximum.
        let rmse = (sq / n).sqrt().min(max);
        let mae = (abs / n).min(rmse);
        Self { rmse, mae, maae: max, n: errors.len() }
    }
}

/// Raw per-frame errors of one agent, in reporting units.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub frame: Vec<u64>,
    pub t: Vec<f64>,
    pub track_id: Vec<TrackId>,
    pub position_m: Vec<f64>,
    /// Signed, wrapped.
    pub psi_deg: Vec<f64>,
    pub v_mps: Vec<f64>,
    pub omega_degps: Vec<f64>,
}

impl ErrorSeries {
    fn push(&mut self, frame: u64, t: f64, track: &TrackSnapshot, truth: &TruthRecord) {
        self.frame.push(frame);
        self.t.push(t);
        self.track_id.push(track.id);
        self.position_m.push((track.state.x - truth.rel.x).hypot(track.state.y - truth.rel.y));
        self.psi_deg.push(wrap_angle(track.state.psi - truth.rel.psi).to_degrees());
        self.v_mps.push(track.state.v - truth.v);
        self.omega_degps.push((track.state.omega - truth.omega).to_degrees());
    }

    fn extend(&mut self, other: &ErrorSeries) {
        self.frame.extend(&other.frame);
        self.t.extend(&other.t);
        self.track_id.extend(&other.track_id);
        self.position_m.extend(&other.position_m);
        self.psi_deg.extend(&other.psi_deg);
        self.v_mps.extend(&other.v_mps);
        self.omega_degps.extend(&other.omega_degps);
    }

    fn stats(&self) -> [ErrorStats; 4] {
        [
            ErrorStats::from_errors(&self.position_m),
            ErrorStats::from_errors(&self.psi_deg),
            ErrorStats::from_errors(&self.v_mps),
            ErrorStats::from_errors(&self.omega_degps),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentErrors {
    pub agent_id: u64,
    pub class: ObjectClass,
    pub position_m: ErrorStats,
    pub psi_deg: ErrorStats,
    pub v_mps: ErrorStats,
    pub omega_degps: ErrorStats,
    pub matched_frames: usize,
    /// Frames with the agent inside at least one sensor's field of view.
    pub visible_frames: usize,
    /// Share of the visible frames in which the agent was matched.
    pub match_ratio: f64,
    /// Times the matched track id changed between consecutive matches.
    pub id_switches: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<ErrorSeries>,
}

/// Errors pooled over every matched sample of a class (or of all agents).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassErrors {
    pub position_m: ErrorStats,
    pub psi_deg: ErrorStats,
    pub v_mps: ErrorStats,
    pub omega_degps: ErrorStats,
    pub agents: usize,
}

impl ClassErrors {
    fn from_series(series: &ErrorSeries, agents: usize) -> Self {
        let [position_m, psi_deg, v_mps, omega_degps] = series.stats();
        Self { position_m, psi_deg, v_mps, omega_degps, agents }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    pub frames: usize,
    /// Ascending agent id. Agents never matched are left out.
    pub agents: Vec<AgentErrors>,
    /// Keyed by class name.
    pub per_class: BTreeMap<String, ClassErrors>,
    pub overall: ClassErrors,
    pub id_switches: usize,
    /// Matched agent-frames over visible agent-frames.
    pub match_ratio: f64,
}

impl ErrorReport {
    pub fn class(&self, class: ObjectClass) -> Option<&ClassErrors> {
        self.per_class.get(class.as_str())
    }

    /// Copy without the per-frame series.
    pub fn without_series(&self) -> Self {
        let mut r = self.clone();
        for a in &mut r.agents {
            a.series = None;
        }
        r
    }
}

/// Scores tracker output against the simulator truth. Frames are paired by
/// frame number; both logs must cover the same frames.
pub fn compute_errors(logs: &[FrameLog], truth: &[SimFrameRecord]) -> Result<ErrorReport> {
    if logs.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "track log has {} frames but truth has {}",
            logs.len(),
            truth.len()
        )));
    }
    let mut series: BTreeMap<u64, ErrorSeries> = BTreeMap::new();
    let mut classes: BTreeMap<u64, ObjectClass> = BTreeMap::new();
    let mut visible: HashMap<u64, usize> = HashMap::new();
    let mut matched_visible: HashMap<u64, usize> = HashMap::new();
    for (log, rec) in logs.iter().zip(truth) {
        if log.frame != rec.frame as u64 {
            return Err(Error::InvalidInput(format!(
                "frame mismatch: track log frame {} against truth frame {}",
                log.frame, rec.frame
            )));
        }
        for a in &rec.truth {
            classes.entry(a.id).or_insert(a.class);
            if a.in_view {
                *visible.entry(a.id).or_default() += 1;
            }
        }
        for (track_id, agent_id) in match_tracks_to_truth(&log.tracks, &rec.truth) {
            let track = log.tracks.iter().find(|t| t.id == track_id).expect("matched track exists");
            let agent = rec.truth.iter().find(|a| a.id == agent_id).expect("matched agent exists");
            series.entry(agent_id).or_default().push(log.frame, rec.t, track, agent);
            if agent.in_view {
                *matched_visible.entry(agent_id).or_default() += 1;
            }
        }
    }

    for id in classes.keys() {
        if !series.contains_key(id) {
            warn!("agent {id} was never matched and is left out of the report");
        }
    }

    let mut agents = Vec::new();
    let mut pooled: BTreeMap<ObjectClass, (ErrorSeries, usize)> = BTreeMap::new();
    let mut all = ErrorSeries::default();
    let mut total_switches = 0;
    let mut total_visible = 0;
    let mut total_matched = 0;
    for (id, s) in series {
        let class = classes[&id];
        let [position_m, psi_deg, v_mps, omega_degps] = s.stats();
        let id_switches = s.track_id.windows(2).filter(|w| w[0] != w[1]).count();
        let matched_frames = s.frame.len();
        let visible_frames = visible.get(&id).copied().unwrap_or(0);
        total_switches += id_switches;
        let matched_in_view = matched_visible.get(&id).copied().unwrap_or(0);
        total_matched += matched_in_view;
        let entry = pooled.entry(class).or_default();
        entry.0.extend(&s);
        entry.1 += 1;
        all.extend(&s);
        agents.push(AgentErrors {
            agent_id: id,
            class,
            position_m,
            psi_deg,
            v_mps,
            omega_degps,
            matched_frames,
            visible_frames,
            match_ratio: ratio(matched_in_view, visible_frames),
            id_switches,
            series: Some(s),
        });
    }
    for id in classes.keys() {
        total_visible += visible.get(id).copied().unwrap_or(0);
    }

    Ok(ErrorReport {
        modality: logs.first().map(|l| l.modality),
        frames: logs.len(),
        overall: ClassErrors::from_series(&all, agents.len()),
        per_class: pooled
            .into_iter()
            .map(|(c, (s, n))| (c.as_str().to_string(), ClassErrors::from_series(&s, n)))
            .collect(),
        agents,
        id_switches: total_switches,
        match_ratio: ratio(total_matched, total_visible),
    })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
