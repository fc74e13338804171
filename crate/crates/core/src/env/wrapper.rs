//! Sticky-action / frame-skip protocol wrapper.
//!
//! Per agent decision: with probability `sticky_prob` the previously
//! executed action replaces the requested one, and the executed action is
//! repeated for `frame_skip` consecutive frames with rewards summed. A
//! terminal frame short-circuits the repeat; the decision still accounts
//! for a full frame-skip worth of budget so the frames/steps identity stays
//! exact.

use crate::env::{EnvError, Environment, Observation, StepResult};
use crate::rng::Rng;

pub struct ProtocolWrapper {
    env: Box<dyn Environment>,
    frame_skip: u32,
    sticky_prob: f64,
    previous_action: usize,
    last_executed: usize,
    rng: Rng,
}

impl ProtocolWrapper {
    pub fn new(env: Box<dyn Environment>, frame_skip: u32, sticky_prob: f64, rng: Rng) -> Self {
        assert!(frame_skip >= 1, "frame_skip must be at least 1");
        assert!((0.0..=1.0).contains(&sticky_prob));
        ProtocolWrapper {
            env,
            frame_skip,
            sticky_prob,
            previous_action: 0,
            last_executed: 0,
            rng,
        }
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    pub fn action_count(&self) -> usize {
        self.env.action_count()
    }

    pub fn frame_skip(&self) -> u32 {
        self.frame_skip
    }

    /// The action the wrapper actually executed on the last decision.
    pub fn last_executed(&self) -> usize {
        self.last_executed
    }

    pub fn is_terminal(&self) -> bool {
        self.env.is_terminal()
    }

    /// Starts a new episode; the sticky memory resets to noop.
    pub fn reset(&mut self) -> Observation {
        self.previous_action = 0;
        self.last_executed = 0;
        self.env.reset()
    }

    /// One agent decision: resolve stickiness, repeat for the frame-skip
    /// window, sum rewards, and return the final frame's observation.
    pub fn step(&mut self, requested: usize) -> Result<StepResult, EnvError> {
        if requested >= self.env.action_count() {
            return Err(EnvError::InvalidAction {
                action: requested,
                count: self.env.action_count(),
            });
        }
        let executed = if self.sticky_prob > 0.0 && self.rng.bernoulli(self.sticky_prob) {
            self.previous_action
        } else {
            requested
        };
        self.previous_action = executed;
        self.last_executed = executed;

        let mut total_reward = 0.0;
        let mut last = None;
        for _ in 0..self.frame_skip {
            let result = self.env.step(executed)?;
            total_reward += result.reward;
            let terminal = result.terminal;
            last = Some(result);
            if terminal {
                break;
            }
        }
        let mut result = last.expect("frame_skip >= 1 guarantees at least one frame");
        result.reward = total_reward;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_env, Flavour, Game};
    use crate::rng::Stream;

    fn crossing_env(seed: u64) -> Box<dyn Environment> {
        make_env(Flavour::new(Game::MiniCrossing, 0, 0), seed).unwrap()
    }

    #[test]
    fn identity_when_skip_one_and_no_sticky() {
        let mut raw = crossing_env(0);
        let mut wrapped = ProtocolWrapper::new(crossing_env(0), 1, 0.0, Rng::derive(0, Stream::Environment));
        raw.reset();
        wrapped.reset();
        for k in 0..100 {
            let action = k % 3;
            let a = raw.step(action).unwrap();
            let b = wrapped.step(action).unwrap();
            assert_eq!(a.observation, b.observation);
            assert_eq!(a.reward, b.reward);
            assert_eq!(wrapped.last_executed(), action);
        }
    }

    #[test]
    fn empirical_sticky_rate_matches_probability() {
        // Alternate between two requested actions so a repeat of the
        // previous executed action is observable whenever stickiness fires.
        let mut wrapped =
            ProtocolWrapper::new(crossing_env(0), 1, 0.25, Rng::derive(123, Stream::Environment));
        wrapped.reset();
        let decisions = 100_000;
        let mut sticky = 0u64;
        let mut prev_executed = 0usize;
        for k in 0..decisions {
            if wrapped.is_terminal() {
                wrapped.reset();
                prev_executed = 0;
            }
            // Request the action that differs from the last executed one.
            let request = if prev_executed == 1 { 2 } else { 1 };
            wrapped.step(request).unwrap();
            let executed = wrapped.last_executed();
            if executed != request {
                assert_eq!(executed, prev_executed, "decision {k}");
                sticky += 1;
            }
            prev_executed = executed;
        }
        let rate = sticky as f64 / decisions as f64;
        assert!((rate - 0.25).abs() < 0.01, "sticky rate {rate}");
    }

    #[test]
    fn rewards_sum_over_the_skip_window() {
        // Drive the agent straight up with skip 5: each wrapped step covers
        // five climbs, so the +1 crossings appear as summed rewards.
        let mut wrapped = ProtocolWrapper::new(crossing_env(0), 5, 0.0, Rng::derive(7, Stream::Environment));
        wrapped.reset();
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let r = wrapped.step(1).unwrap();
            total += r.reward;
            steps += 1;
            if r.terminal {
                break;
            }
        }
        // 500-frame episode at skip 5 is exactly 100 decisions.
        assert_eq!(steps, 100);
        assert!(total > 0.0, "constant-up should cross at least once");
    }

    #[test]
    fn zero_sticky_never_substitutes() {
        let mut wrapped = ProtocolWrapper::new(crossing_env(0), 2, 0.0, Rng::derive(5, Stream::Environment));
        wrapped.reset();
        for k in 0..200 {
            if wrapped.is_terminal() {
                wrapped.reset();
            }
            let action = (k * 7) % 3;
            wrapped.step(action).unwrap();
            assert_eq!(wrapped.last_executed(), action);
        }
    }
}
