use nalgebra::{Matrix3, Matrix5, SVector, Vector3, Vector5};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{frame_rng, propagate_truth, world_to_ego, Scenario};
use crate::config::TrackerConfig;
use crate::ekf::{motion_f, EkfTrackFilter, FilterModel, MeasurementVariant};
use crate::error::{Error, Result};
use crate::types::{wrap_angle, EgoMotion, TrackState};

/// Transition-model error for one agent over one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiscrepancy {
    /// Frame the step ends at.
    pub frame: usize,
    pub agent_id: u64,
    /// Distance between the model prediction and the true relative position.
    pub position_error: f64,
    /// Wrapped heading difference, rad.
    pub heading_error: f64,
    /// Upper bound on the first-order integration error for this step.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub steps: Vec<StepDiscrepancy>,
    pub max_position_error: f64,
    pub max_heading_error: f64,
    /// `max position error / Ts²`.
    pub second_order_constant: f64,
    /// Steps whose error exceeds their bound.
    pub violations: Vec<StepDiscrepancy>,
}

/// Compares the filter transition model against the simulator's exact
/// kinematics, step by step.
///
/// With constant speeds over a step, Euler integration of each body errs by
/// at most `v·|ω|·Ts²/2`, so a step is flagged when the position error
/// exceeds `(v·|ω| + s_ego·|ω_ego|)·Ts²/2` plus rounding slack.
pub fn consistency_check(scenario: &Scenario) -> ConsistencyReport {
    let world = propagate_truth(scenario);
    let ts = scenario.ts;
    let mut steps = Vec::new();
    for pair in world.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let ego = EgoMotion::new(next.ego.vx, next.ego.vy, next.ego.omega);
        let ego_speed = next.ego.vx.hypot(next.ego.vy);
        for (a0, a1) in prev.agents.iter().zip(&next.agents) {
            let mut rel0 = world_to_ego(a0, &prev.ego.pose);
            // The model needs the velocities that act over this step.
            rel0.v = a1.v;
            rel0.omega = a1.omega;
            let pred = motion_f(&rel0, &ego, ts);
            let truth = world_to_ego(a1, &next.ego.pose);
            let position_error = (pred.x - truth.x).hypot(pred.y - truth.y);
            let scale = 1.0 + truth.x.abs() + truth.y.abs();
            let bound = 0.5 * ts * ts * (a1.v.abs() * a1.omega.abs() + ego_speed * next.ego.omega.abs())
                + 1e-9 * scale;
            steps.push(StepDiscrepancy {
                frame: next.frame,
                agent_id: a1.id,
                position_error,
                heading_error: wrap_angle(pred.psi - truth.psi).abs(),
                bound,
            });
        }
    }
    let max_position_error = steps.iter().map(|s| s.position_error).fold(0.0, f64::max);
    let max_heading_error = steps.iter().map(|s| s.heading_error).fold(0.0, f64::max);
    let violations = steps.iter().filter(|s| s.position_error > s.bound || s.heading_error > 1e-9).copied().collect();
    ConsistencyReport {
        steps,
        max_position_error,
        max_heading_error,
        second_order_constant: max_position_error / (ts * ts),
        violations,
    }
}

/// Average normalized estimation error squared of Monte Carlo runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeesReport {
    pub runs: usize,
    pub steps: usize,
    /// Mean NEES over runs, per step.
    pub anees_per_step: Vec<f64>,
    /// Mean of `anees_per_step`.
    pub average: f64,
    /// Two-sided 95 % interval for the per-step ANEES of a consistent filter.
    pub lower: f64,
    pub upper: f64,
}

impl NeesReport {
    pub fn within_bounds(&self) -> bool {
        self.lower <= self.average && self.average <= self.upper
    }
}

fn cholesky_factor<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> Result<nalgebra::SMatrix<f64, N, N>> {
    m.cholesky().map(|c| c.l()).ok_or_else(|| Error::InvalidConfig("noise covariance is not positive definite".into()))
}

fn normal_vector<const N: usize, R: Rng>(rng: &mut R) -> SVector<f64, N> {
    SVector::<f64, N>::from_fn(|_, _| rng.sample(StandardNormal))
}

/// Runs the filter against truth generated from its own process and
/// measurement models and reports the average NEES.
///
/// Truth follows the transition model plus process noise drawn from `Q`;
/// every step receives a fused measurement with noise drawn from
/// `R_group`. The filter starts from a draw of the initial covariance
/// around the truth.
pub fn monte_carlo_nees(
    config: &TrackerConfig,
    initial: &TrackState,
    ego: &EgoMotion,
    runs: usize,
    steps: usize,
    seed: u64,
) -> Result<NeesReport> {
    if runs == 0 || steps == 0 {
        return Err(Error::InvalidInput("runs and steps must be positive".into()));
    }
    config.validate()?;
    let model = FilterModel::from(config);
    let lq: Matrix5<f64> = cholesky_factor(&config.q)?;
    let lr: Matrix3<f64> = cholesky_factor(&config.r_group)?;
    let lp: Matrix5<f64> = cholesky_factor(&config.p0)?;

    let mut sums = vec![0.0; steps];
    for run in 0..runs {
        let mut rng = frame_rng(seed, run);
        let mut truth = *initial;
        let x0 = truth.to_vector() + lp * normal_vector::<5, _>(&mut rng);
        let mut filter = EkfTrackFilter::new(TrackState::from_vector(&x0), config.p0);
        for sum in sums.iter_mut() {
            let next = motion_f(&truth, ego, config.ts).to_vector() + lq * normal_vector::<5, _>(&mut rng);
            truth = TrackState::from_vector(&next);
            filter.predict(ego, &model)?;
            let noise: Vector3<f64> = lr * normal_vector::<3, _>(&mut rng);
            let y = Vector3::new(truth.x + noise.x, truth.y + noise.y, wrap_angle(truth.psi + noise.z));
            filter.correct(&MeasurementVariant::Group(y), &model);

            let mut e: Vector5<f64> = truth.to_vector() - filter.state.to_vector();
            e[2] = wrap_angle(e[2]);
            let p_inv = filter
                .cov
                .0
                .try_inverse()
                .ok_or_else(|| Error::Numeric("singular covariance during NEES run".into()))?;
            *sum += (e.transpose() * p_inv * e)[(0, 0)];
        }
    }
    let anees_per_step: Vec<f64> = sums.iter().map(|s| s / runs as f64).collect();
    let average = anees_per_step.iter().sum::<f64>() / steps as f64;
    let dof = (TrackState::DIM * runs) as f64;
    let chi = ChiSquared::new(dof).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(NeesReport {
        runs,
        steps,
        anees_per_step,
        average,
        lower: chi.inverse_cdf(0.025) / runs as f64,
        upper: chi.inverse_cdf(0.975) / runs as f64,
    })
}
