//! `mini_crossing`: reach the top row through moving traffic.
//!
//! A 9x7 grid. Row 0 is the goal bank, rows 1..=5 carry vehicles, row 6 is
//! the start bank. The agent walks a fixed column with actions
//! {noop, up, down}; reaching row 0 pays +1 and teleports the agent back to
//! the start. Collisions are penalized by position, never by reward. The
//! episode ends at the frame limit only.
//!
//! Frame order: vehicles advance, agent moves, collision resolves, goal pays.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::env::{EnvError, EnvSpec, Environment, Flavour, Game, Observation, StepResult};

/// What a collision does to the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollisionRule {
    /// Difficulty 0: bumped one row toward the start bank.
    BumpDown,
    /// Difficulty 1: teleported back to the start position.
    TeleportToStart,
}

/// One traffic lane: row, motion, and its vehicles' starting offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneSpec {
    pub row: usize,
    pub speed: u32,
    /// +1 rightward, -1 leftward.
    pub direction: i32,
    pub vehicle_length: usize,
    pub initial_offsets: Vec<u32>,
}

/// Dynamics parameters of one crossing flavour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSpec {
    pub flavour: Flavour,
    pub width: usize,
    pub height: usize,
    pub frame_limit: u64,
    pub lanes: Vec<LaneSpec>,
    pub collision: CollisionRule,
    /// Mode 4: lane speeds toggle between `v` and `max(1, v-1)` with this
    /// half-period in frames.
    pub speed_toggle_frames: Option<u64>,
    pub player_col: usize,
}

/// Lane base speeds of the default mode, rows 1..=5.
const BASE_SPEEDS: [u32; 5] = [1, 2, 1, 2, 1];
/// Vehicle lengths in the bus modes (1 and 4).
const BUS_LENGTHS: [usize; 5] = [1, 2, 1, 2, 1];
/// Starting offset per lane in the default mode. The straight-up climb from
/// the reset phase is collision-free, so the optimal_return_oracle value
/// coincides with the blind climb.
const MODE0_OFFSETS: [u32; 5] = [0, 2, 4, 6, 8];
/// Starting offsets for the bus modes. Chosen so the blind climb's phase
/// orbit stays blocked under the teleport rule (constant-up scores zero on
/// m1d1) while a one-dodge resynchronization opens a clean climbing orbit,
/// keeping the optimal return near the frame-limit ceiling.
const MODE1_OFFSETS: [u32; 5] = [0, 2, 4, 4, 5];

impl CrossingSpec {
    /// The flavour table. Mode 0: one length-1 vehicle per lane at speeds
    /// (1,2,1,2,1), alternating directions. Mode 1: a second vehicle per
    /// lane half a grid away, bus lengths (1,2,1,2,1), all speeds +1.
    /// Mode 4: as mode 1 with speeds toggling every 8 frames. Difficulty
    /// selects the collision rule.
    pub fn for_flavour(flavour: Flavour) -> CrossingSpec {
        debug_assert_eq!(flavour.game, Game::MiniCrossing);
        let width = 9usize;
        let two_vehicles = flavour.mode == 1 || flavour.mode == 4;
        let lanes = (0..5)
            .map(|i| {
                let base = if two_vehicles { MODE1_OFFSETS[i] } else { MODE0_OFFSETS[i] };
                let mut offsets = vec![base];
                if two_vehicles {
                    offsets.push((base + width as u32 / 2) % width as u32);
                }
                LaneSpec {
                    row: i + 1,
                    speed: BASE_SPEEDS[i] + if two_vehicles { 1 } else { 0 },
                    direction: if i % 2 == 0 { 1 } else { -1 },
                    vehicle_length: if two_vehicles { BUS_LENGTHS[i] } else { 1 },
                    initial_offsets: offsets,
                }
            })
            .collect();
        CrossingSpec {
            flavour,
            width,
            height: 7,
            frame_limit: 500,
            lanes,
            collision: if flavour.difficulty == 1 {
                CollisionRule::TeleportToStart
            } else {
                CollisionRule::BumpDown
            },
            speed_toggle_frames: (flavour.mode == 4).then_some(8),
            player_col: 4,
        }
    }

    /// Effective speed of a lane at frame `t`.
    pub fn speed_at(&self, lane: &LaneSpec, t: u64) -> u32 {
        match self.speed_toggle_frames {
            Some(half) if (t / half) % 2 == 1 => lane.speed.saturating_sub(1).max(1),
            _ => lane.speed,
        }
    }

    pub fn vehicle_count(&self) -> usize {
        self.lanes.iter().map(|l| l.initial_offsets.len()).sum()
    }

    pub fn start_row(&self) -> usize {
        self.height - 1
    }
}

/// Live state of a crossing episode. Fully deterministic: the seed plays no
/// role in this game.
#[derive(Debug, Clone)]
pub struct MiniCrossing {
    spec: CrossingSpec,
    agent_row: usize,
    /// Current offset of each vehicle, lane-major.
    offsets: Vec<Vec<u32>>,
    t: u64,
    terminal: bool,
}

impl MiniCrossing {
    pub fn new(spec: CrossingSpec) -> Self {
        let offsets = spec.lanes.iter().map(|l| l.initial_offsets.clone()).collect();
        MiniCrossing {
            agent_row: spec.start_row(),
            offsets,
            t: 0,
            terminal: false,
            spec,
        }
    }

    pub fn crossing_spec(&self) -> &CrossingSpec {
        &self.spec
    }

    fn lane_occupies(&self, lane_idx: usize, col: usize) -> bool {
        let lane = &self.spec.lanes[lane_idx];
        let w = self.spec.width as u32;
        self.offsets[lane_idx].iter().any(|off| {
            let rel = (col as i64 - *off as i64).rem_euclid(w as i64) as usize;
            rel < lane.vehicle_length
        })
    }

    fn lane_at_row(&self, row: usize) -> Option<usize> {
        self.spec.lanes.iter().position(|l| l.row == row)
    }

    fn observation(&self) -> Observation {
        let mut obs = Observation::zeros(2, self.spec.height, self.spec.width);
        obs.set(0, self.agent_row, self.spec.player_col);
        for (li, lane) in self.spec.lanes.iter().enumerate() {
            for col in 0..self.spec.width {
                if self.lane_occupies(li, col) {
                    obs.set(1, lane.row, col);
                }
            }
        }
        obs
    }

    fn advance_vehicles(&mut self) {
        let w = self.spec.width as i64;
        for (li, lane) in self.spec.lanes.iter().enumerate() {
            let v = self.spec.speed_at(lane, self.t) as i64 * lane.direction as i64;
            for off in &mut self.offsets[li] {
                *off = ((*off as i64 + v).rem_euclid(w)) as u32;
            }
        }
    }

    /// Current vehicle offsets, lane-major. Used by the tabular exporter.
    pub(crate) fn offsets_snapshot(&self) -> Vec<Vec<u32>> {
        self.offsets.clone()
    }

    /// Advances traffic one frame without running the agent/goal machinery.
    /// Used by the tabular exporter to trace the dynamics period.
    pub(crate) fn advance_for_period_probe(&mut self) {
        self.advance_vehicles();
        self.t += 1;
    }
}

impl Environment for MiniCrossing {
    fn spec(&self) -> EnvSpec {
        EnvSpec::Crossing(self.spec.clone())
    }

    fn observation_shape(&self) -> (usize, usize, usize) {
        (2, self.spec.height, self.spec.width)
    }

    fn action_count(&self) -> usize {
        3
    }

    fn reset(&mut self) -> Observation {
        self.agent_row = self.spec.start_row();
        self.offsets = self.spec.lanes.iter().map(|l| l.initial_offsets.clone()).collect();
        self.t = 0;
        self.terminal = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.terminal {
            return Err(EnvError::Terminal);
        }
        if action >= 3 {
            return Err(EnvError::InvalidAction { action, count: 3 });
        }
        self.advance_vehicles();
        match action {
            1 => self.agent_row = self.agent_row.saturating_sub(1),
            2 => self.agent_row = (self.agent_row + 1).min(self.spec.height - 1),
            _ => {}
        }
        if let Some(li) = self.lane_at_row(self.agent_row) {
            if self.lane_occupies(li, self.spec.player_col) {
                self.agent_row = match self.spec.collision {
                    CollisionRule::BumpDown => (self.agent_row + 1).min(self.spec.height - 1),
                    CollisionRule::TeleportToStart => self.spec.start_row(),
                };
            }
        }
        let mut reward = 0.0;
        if self.agent_row == 0 {
            reward = 1.0;
            self.agent_row = self.spec.start_row();
        }
        self.t += 1;
        self.terminal = self.t >= self.spec.frame_limit;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal: self.terminal,
        })
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn state_fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.agent_row.hash(&mut h);
        self.offsets.hash(&mut h);
        self.t.hash(&mut h);
        self.terminal.hash(&mut h);
        h.finish()
    }
}
