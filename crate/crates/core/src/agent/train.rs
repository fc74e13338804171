//! The training loop.
//!
//! Cadence: one agent decision consumes `frame_skip` frames of budget
//! through the protocol wrapper; one update slot opens every
//! `learn_frequency` steps; the target network refreshes every
//! `target_sync_interval` slots. The accounting identities
//! `steps * frame_skip == frames` and `updates == steps / learn_frequency`
//! hold exactly at every log row. A run is strictly single-threaded and
//! fully determined by `(settings, arch, initial parameters, master seed)`.

use std::collections::VecDeque;

use crate::agent::{
    epsilon_at, loss_and_grads, select_action, sync_target, AgentConfig, ReplayBuffer, TrainLog,
    TrainLogRow, Transition,
};
use crate::env::{Environment, Observation, ProtocolWrapper};
use crate::error::TrainError;
use crate::nn::{forward, optimizer_step, NetworkArchitecture, OptimizerState, Parameters, RmsPropConfig};
use crate::rng::{Rng, Stream};
use crate::tensor::Scalar;

/// Everything a run needs besides the network and the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub agent: AgentConfig,
    pub frame_skip: u32,
    pub sticky_prob: f64,
    pub total_frames: u64,
    pub checkpoint_interval: u64,
    pub log_interval: u64,
}

impl TrainSettings {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.agent.validate()?;
        if self.frame_skip == 0 {
            return Err(TrainError::InvalidConfig("frame_skip must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sticky_prob) {
            return Err(TrainError::InvalidConfig(format!(
                "sticky_prob must lie in [0, 1], got {}",
                self.sticky_prob
            )));
        }
        for (name, v) in [
            ("checkpoint_interval", self.checkpoint_interval),
            ("log_interval", self.log_interval),
        ] {
            if v == 0 {
                return Err(TrainError::InvalidConfig(format!("{name} must be positive")));
            }
            if v % self.frame_skip as u64 != 0 {
                return Err(TrainError::InvalidConfig(format!(
                    "{name} {v} must be a multiple of frame_skip {}",
                    self.frame_skip
                )));
            }
        }
        if self.total_frames % self.checkpoint_interval != 0 {
            return Err(TrainError::InvalidConfig(format!(
                "checkpoint_interval {} must divide total_frames {}",
                self.checkpoint_interval, self.total_frames
            )));
        }
        Ok(())
    }
}

/// Rolling window of the last `depth` observations, stacked channel-wise.
pub struct FrameStacker {
    depth: usize,
    frames: VecDeque<Observation>,
}

impl FrameStacker {
    pub fn new(depth: usize, initial: Observation) -> Self {
        assert!(depth >= 1);
        let mut frames = VecDeque::with_capacity(depth);
        for _ in 0..depth {
            frames.push_back(initial.clone());
        }
        FrameStacker { depth, frames }
    }

    pub fn reset(&mut self, initial: Observation) {
        self.frames.clear();
        for _ in 0..self.depth {
            self.frames.push_back(initial.clone());
        }
    }

    pub fn push(&mut self, obs: Observation) {
        self.frames.pop_front();
        self.frames.push_back(obs);
    }

    /// Oldest-to-newest channel concatenation.
    pub fn stacked(&self) -> Observation {
        let refs: Vec<&Observation> = self.frames.iter().collect();
        Observation::stack(&refs)
    }
}

/// Parameter snapshot emitted on the checkpoint cadence, always in f64 for
/// cross-precision portability.
#[derive(Debug, Clone)]
pub struct ParamSnapshot {
    pub frame: u64,
    pub params: Parameters<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome<F = f64> {
    pub log: TrainLog,
    pub snapshots: Vec<ParamSnapshot>,
    pub final_params: Parameters<F>,
    pub frames: u64,
    pub steps: u64,
    /// Scheduled update slots (`steps / learn_frequency`).
    pub updates: u64,
    /// Slots that performed a gradient step (excludes buffer warm-up).
    pub updates_performed: u64,
    pub episodes_completed: u64,
}

/// The expected network input shape for an environment under a stack depth.
pub fn stacked_input_shape(env: &dyn Environment, frame_stack: u32) -> (usize, usize, usize) {
    let (c, h, w) = env.observation_shape();
    (c * frame_stack as usize, h, w)
}

/// Runs DQN for `settings.total_frames` budget frames on `env`.
pub fn train<F: Scalar>(
    settings: &TrainSettings,
    arch: &NetworkArchitecture,
    initial_params: Parameters<F>,
    env: Box<dyn Environment>,
    master_seed: u64,
) -> Result<TrainOutcome<F>, TrainError> {
    settings.validate()?;
    arch.validate()?;
    let expected_input = stacked_input_shape(env.as_ref(), settings.agent.frame_stack);
    if arch.input_shape != expected_input {
        return Err(TrainError::InvalidConfig(format!(
            "network input shape {:?} does not match stacked observations {:?}",
            arch.input_shape, expected_input
        )));
    }
    if arch.action_count != env.action_count() {
        return Err(TrainError::InvalidConfig(format!(
            "network action count {} does not match environment's {}",
            arch.action_count,
            env.action_count()
        )));
    }

    let cfg = &settings.agent;
    let mut params = initial_params;
    let mut target = sync_target(&params);
    let mut optimizer = OptimizerState::new(&params, RmsPropConfig::with_step_size(cfg.step_size));
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut agent_rng = Rng::derive(master_seed, Stream::Agent);
    let mut wrapper = ProtocolWrapper::new(
        env,
        settings.frame_skip,
        settings.sticky_prob,
        Rng::derive(master_seed, Stream::Sticky),
    );

    let mut outcome = TrainOutcome {
        log: TrainLog::default(),
        snapshots: Vec::new(),
        final_params: Parameters::zeros_like(&params),
        frames: 0,
        steps: 0,
        updates: 0,
        updates_performed: 0,
        episodes_completed: 0,
    };

    if settings.total_frames == 0 {
        outcome.snapshots.push(ParamSnapshot {
            frame: 0,
            params: params.cast::<f64>(),
        });
        outcome.final_params = params;
        return Ok(outcome);
    }

    let first = wrapper.reset();
    let mut stacker = FrameStacker::new(cfg.frame_stack as usize, first);
    let mut current_stack = stacker.stacked();

    let mut frame = 0u64;
    let mut steps = 0u64;
    let mut scheduled_updates = 0u64;
    let mut performed_updates = 0u64;
    let learn_start = cfg.learn_start();

    // Per-interval log accumulators.
    let mut interval_loss_sum = 0.0;
    let mut interval_loss_n = 0u64;
    let mut interval_returns: Vec<f64> = Vec::new();
    let mut episode_return = 0.0;

    while frame < settings.total_frames {
        let epsilon = epsilon_at(&cfg.schedule, frame);
        let (q, _) = forward(arch, &params, &current_stack.to_tensor::<F>(), None)?;
        let action = select_action(&q, epsilon, &mut agent_rng)?;
        let result = wrapper.step(action)?;
        let prev_stack = current_stack.clone();
        stacker.push(result.observation.clone());
        let next_stack = stacker.stacked();
        buffer.push(Transition {
            state: prev_stack,
            action,
            reward: result.reward,
            next_state: next_stack.clone(),
            terminal: result.terminal,
        });
        current_stack = next_stack;
        episode_return += result.reward;
        let prev_frame = frame;
        frame += settings.frame_skip as u64;
        steps += 1;

        if result.terminal {
            interval_returns.push(episode_return);
            episode_return = 0.0;
            outcome.episodes_completed += 1;
            let first = wrapper.reset();
            stacker.reset(first);
            current_stack = stacker.stacked();
        }

        if steps % cfg.learn_frequency as u64 == 0 {
            scheduled_updates += 1;
            if buffer.len() >= learn_start {
                let batch = buffer
                    .sample_minibatch(cfg.batch_size, &mut agent_rng)
                    .expect("buffer past warm-up is nonempty");
                let (loss, grads) = loss_and_grads(
                    &batch, &params, &target, arch, cfg.gamma, &cfg.reg, &mut agent_rng,
                )
                .map_err(|e| match e {
                    TrainError::NonFiniteLoss { .. } => TrainError::NonFiniteLoss {
                        update: scheduled_updates,
                    },
                    other => other,
                })?;
                optimizer_step(&mut params, &grads, &mut optimizer)?;
                performed_updates += 1;
                interval_loss_sum += loss;
                interval_loss_n += 1;
            }
            if scheduled_updates % cfg.target_sync_interval == 0 {
                target = sync_target(&params);
            }
        }

        let crossed = |interval: u64| prev_frame / interval < frame / interval;
        if crossed(settings.log_interval) || frame >= settings.total_frames {
            outcome.log.rows.push(TrainLogRow {
                frame,
                steps,
                updates: scheduled_updates,
                epsilon: epsilon_at(&cfg.schedule, frame),
                loss_mean: (interval_loss_n > 0)
                    .then(|| interval_loss_sum / interval_loss_n as f64),
                episode_return_mean: (!interval_returns.is_empty()).then(|| {
                    interval_returns.iter().sum::<f64>() / interval_returns.len() as f64
                }),
                episodes_completed: interval_returns.len() as u64,
            });
            interval_loss_sum = 0.0;
            interval_loss_n = 0;
            interval_returns.clear();
        }
        if crossed(settings.checkpoint_interval) {
            outcome.snapshots.push(ParamSnapshot {
                frame,
                params: params.cast::<f64>(),
            });
        }
    }

    outcome.frames = frame;
    outcome.steps = steps;
    outcome.updates = scheduled_updates;
    outcome.updates_performed = performed_updates;
    outcome.final_params = params;
    Ok(outcome)
}
