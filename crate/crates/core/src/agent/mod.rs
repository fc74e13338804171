//! DQN training: replay buffer, epsilon-greedy behaviour, target network,
//! regularized TD loss, and the frames/steps/updates cadence.

mod loss;
mod policy;
mod replay;
mod train;

pub use loss::{loss_and_grads, sync_target, td_targets};
pub use policy::{epsilon_at, select_action};
pub use replay::ReplayBuffer;
pub use train::{train, FrameStacker, ParamSnapshot, TrainOutcome, TrainSettings};

use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::TrainError;
use crate::nn::RegularizationConfig;

/// One replay element: stacked observations before and after the action.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    pub terminal: bool,
}

/// Linear exploration schedule measured in frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub eps_initial: f64,
    pub eps_final: f64,
    pub decay_span_frames: u64,
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.eps_initial >= self.eps_final && self.eps_final >= 0.0 && self.eps_initial <= 1.0)
        {
            return Err(TrainError::InvalidConfig(format!(
                "epsilon schedule requires 1 >= eps_initial >= eps_final >= 0, got {} -> {}",
                self.eps_initial, self.eps_final
            )));
        }
        if self.decay_span_frames == 0 {
            return Err(TrainError::InvalidConfig(
                "epsilon decay span must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Agent hyperparameters, independent of any particular environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub step_size: f64,
    pub batch_size: usize,
    /// One gradient update every this many agent steps.
    pub learn_frequency: u32,
    /// Target network refresh cadence, in scheduled updates.
    pub target_sync_interval: u64,
    pub frame_stack: u32,
    pub buffer_capacity: usize,
    pub schedule: EpsilonSchedule,
    pub reg: RegularizationConfig,
    /// No gradient work until the buffer holds `batch_size * learn_start_factor`.
    pub learn_start_factor: usize,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(TrainError::InvalidConfig(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(TrainError::InvalidConfig(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.learn_frequency == 0 {
            return Err(TrainError::InvalidConfig(
                "learn_frequency must be >= 1".into(),
            ));
        }
        if self.target_sync_interval == 0 {
            return Err(TrainError::InvalidConfig(
                "target_sync_interval must be >= 1".into(),
            ));
        }
        if self.frame_stack == 0 {
            return Err(TrainError::InvalidConfig("frame_stack must be >= 1".into()));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(TrainError::InvalidConfig(
                "buffer capacity must hold at least one batch".into(),
            ));
        }
        self.schedule.validate()?;
        self.reg.validate().map_err(TrainError::Nn)?;
        Ok(())
    }

    pub fn learn_start(&self) -> usize {
        self.batch_size * self.learn_start_factor.max(1)
    }
}

/// One row of the training time series. `updates` counts scheduled update
/// slots (`steps / learn_frequency`); during buffer warm-up a slot performs
/// no gradient work, which `loss_mean` reflects by staying empty.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub frame: u64,
    pub steps: u64,
    pub updates: u64,
    pub epsilon: f64,
    pub loss_mean: Option<f64>,
    pub episode_return_mean: Option<f64>,
    pub episodes_completed: u64,
}

/// Training time series; one row per log interval.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str =
        "frame,steps,updates,epsilon,loss_mean,episode_return_mean,episodes_completed";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.frame,
                row.steps,
                row.updates,
                row.epsilon,
                row.loss_mean.map(|v| v.to_string()).unwrap_or_default(),
                row.episode_return_mean
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
                row.episodes_completed,
            ));
        }
        out
    }
}

#[cfg(test)]
pub(crate) fn desk_agent_config() -> AgentConfig {
    AgentConfig {
        gamma: 0.99,
        step_size: 0.00025,
        batch_size: 32,
        learn_frequency: 4,
        target_sync_interval: 1000,
        frame_stack: 2,
        buffer_capacity: 50_000,
        schedule: EpsilonSchedule {
            eps_initial: 1.0,
            eps_final: 0.01,
            decay_span_frames: 50_000,
        },
        reg: RegularizationConfig::OFF,
        learn_start_factor: 10,
    }
}
