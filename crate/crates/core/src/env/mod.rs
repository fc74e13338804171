//! Flavoured mini-environments.
//!
//! Two grid games mirror the mode/difficulty structure of a larger suite:
//! `mini_crossing` (cross lanes of traffic for +1 per crossing) and
//! `mini_invaders` (clear a descending alien grid at +1 per kill). Flavours
//! of one game share the grid, action set, and reward scale; only a few
//! latent dynamics parameters differ. All constants live in the env spec
//! types, not in code paths.

mod crossing;
mod invaders;
mod tabular;
mod wrapper;

pub use crossing::{CollisionRule, CrossingSpec, LaneSpec, MiniCrossing};
pub use invaders::{InvadersSpec, MiniInvaders};
pub use tabular::{
    best_action_baseline, export_tabular_mdp, optimal_return_oracle, oracle_policy_rollout,
    BestActionReport, TabularMdp,
};
pub use wrapper::ProtocolWrapper;

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::rng::{Rng, Stream};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Game {
    MiniCrossing,
    MiniInvaders,
}

impl fmt::Display for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Game::MiniCrossing => write!(f, "mini_crossing"),
            Game::MiniInvaders => write!(f, "mini_invaders"),
        }
    }
}

impl FromStr for Game {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, EnvError> {
        match s {
            "mini_crossing" => Ok(Game::MiniCrossing),
            "mini_invaders" => Ok(Game::MiniInvaders),
            other => Err(EnvError::UnknownGame(other.to_string())),
        }
    }
}

/// A `(game, mode, difficulty)` triple selecting an environment variant.
/// `m0d0` is always the default flavour of a game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flavour {
    pub game: Game,
    pub mode: u32,
    pub difficulty: u32,
}

impl Flavour {
    pub fn new(game: Game, mode: u32, difficulty: u32) -> Self {
        Flavour { game, mode, difficulty }
    }

    pub fn default_of(game: Game) -> Self {
        Flavour::new(game, 0, 0)
    }

    /// Short form without the game, e.g. `m1d0`.
    pub fn short(&self) -> String {
        format!("m{}d{}", self.mode, self.difficulty)
    }

    pub fn is_known(&self) -> bool {
        enumerate_flavours(self.game)
            .map(|list| list.contains(self))
            .unwrap_or(false)
    }
}

impl fmt::Display for Flavour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:m{}d{}", self.game, self.mode, self.difficulty)
    }
}

impl FromStr for Flavour {
    type Err = EnvError;

    /// Parses `game:mXdY`, e.g. `mini_crossing:m1d0`.
    fn from_str(s: &str) -> Result<Self, EnvError> {
        let bad = || EnvError::BadFlavourString(s.to_string());
        let (game, rest) = s.split_once(':').ok_or_else(bad)?;
        let game: Game = game.parse()?;
        let rest = rest.strip_prefix('m').ok_or_else(bad)?;
        let (mode, difficulty) = rest.split_once('d').ok_or_else(bad)?;
        let mode = mode.parse().map_err(|_| bad())?;
        let difficulty = difficulty.parse().map_err(|_| bad())?;
        Ok(Flavour { game, mode, difficulty })
    }
}

/// The flavour table of each game.
///
/// `mini_crossing` exposes `{m0d0, m1d0, m1d1, m4d0}`; `mini_invaders`
/// exposes `{m0d0, m1d0, m1d1, m9d0}`.
pub fn enumerate_flavours(game: Game) -> Result<Vec<Flavour>, EnvError> {
    let pairs: &[(u32, u32)] = match game {
        Game::MiniCrossing => &[(0, 0), (1, 0), (1, 1), (4, 0)],
        Game::MiniInvaders => &[(0, 0), (1, 0), (1, 1), (9, 0)],
    };
    Ok(pairs
        .iter()
        .map(|&(m, d)| Flavour::new(game, m, d))
        .collect())
}

/// Binary observation: `(channels, height, width)` cells valued 0/1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Observation {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Observation {
            channels,
            height,
            width,
            data: vec![0; channels * height * width],
        }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn set(&mut self, channel: usize, y: usize, x: usize) {
        self.data[(channel * self.height + y) * self.width + x] = 1;
    }

    #[inline]
    pub fn get(&self, channel: usize, y: usize, x: usize) -> u8 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    pub fn channel(&self, channel: usize) -> &[u8] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn active_cells(&self, channel: usize) -> usize {
        self.channel(channel).iter().map(|v| *v as usize).sum()
    }

    /// Concatenates observations along the channel axis (oldest first), the
    /// frame-stacking layout the network consumes.
    pub fn stack(frames: &[&Observation]) -> Observation {
        assert!(!frames.is_empty());
        let (c, h, w) = frames[0].shape();
        debug_assert!(frames.iter().all(|f| f.shape() == (c, h, w)));
        let mut data = Vec::with_capacity(frames.len() * c * h * w);
        for f in frames {
            data.extend_from_slice(&f.data);
        }
        Observation {
            channels: frames.len() * c,
            height: h,
            width: w,
            data,
        }
    }

    pub fn to_tensor<F: Scalar>(&self) -> Tensor<F> {
        Tensor::from_vec(
            &[self.channels, self.height, self.width],
            self.data
                .iter()
                .map(|v| if *v == 0 { F::zero() } else { F::one() })
                .collect(),
        )
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.data.hash(&mut h);
        h.finish()
    }
}

/// One frame of interaction: observation after the step, the reward earned
/// during it, and whether the episode ended.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
}

/// Per-flavour dynamics parameters, serializable for run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvSpec {
    Crossing(CrossingSpec),
    Invaders(InvadersSpec),
}

impl EnvSpec {
    pub fn flavour(&self) -> Flavour {
        match self {
            EnvSpec::Crossing(s) => s.flavour,
            EnvSpec::Invaders(s) => s.flavour,
        }
    }

    pub fn action_count(&self) -> usize {
        match self {
            EnvSpec::Crossing(_) => 3,
            EnvSpec::Invaders(_) => 4,
        }
    }

    pub fn observation_channels(&self) -> usize {
        match self {
            EnvSpec::Crossing(_) => 2,
            EnvSpec::Invaders(_) => 3,
        }
    }

    pub fn frame_limit(&self) -> u64 {
        match self {
            EnvSpec::Crossing(s) => s.frame_limit,
            EnvSpec::Invaders(s) => s.frame_limit,
        }
    }

    /// Grid dimensions (height, width).
    pub fn grid(&self) -> (usize, usize) {
        match self {
            EnvSpec::Crossing(s) => (s.height, s.width),
            EnvSpec::Invaders(s) => (s.height, s.width),
        }
    }

    pub fn for_flavour(flavour: Flavour) -> Result<EnvSpec, EnvError> {
        if !flavour.is_known() {
            return Err(EnvError::UnknownFlavour {
                game: flavour.game.to_string(),
                mode: flavour.mode,
                difficulty: flavour.difficulty,
            });
        }
        Ok(match flavour.game {
            Game::MiniCrossing => EnvSpec::Crossing(CrossingSpec::for_flavour(flavour)),
            Game::MiniInvaders => EnvSpec::Invaders(InvadersSpec::for_flavour(flavour)),
        })
    }
}

/// A playable environment instance.
///
/// Instances are independent: no shared state, safe to run many concurrently
/// in separate runs.
pub trait Environment: Send {
    fn spec(&self) -> EnvSpec;
    fn observation_shape(&self) -> (usize, usize, usize);
    fn action_count(&self) -> usize;
    /// Starts a fresh episode and returns its first observation. Stochastic
    /// environments keep consuming their seeded stream across resets.
    fn reset(&mut self) -> Observation;
    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;
    fn is_terminal(&self) -> bool;
    /// Hash of the dynamics-relevant state (observation-only fields such as
    /// visibility timers excluded), for trace-equivalence tests.
    fn state_fingerprint(&self) -> u64;
}

/// Builds the environment for `flavour`. The seed feeds only stochastic
/// dynamics (alien fire); deterministic flavours ignore it.
pub fn make_env(flavour: Flavour, seed: u64) -> Result<Box<dyn Environment>, EnvError> {
    let spec = EnvSpec::for_flavour(flavour)?;
    Ok(match spec {
        EnvSpec::Crossing(s) => Box::new(MiniCrossing::new(s)),
        EnvSpec::Invaders(s) => Box::new(MiniInvaders::new(s, Rng::derive(seed, Stream::Environment))),
    })
}
