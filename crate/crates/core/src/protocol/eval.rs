//! Policy evaluation across flavours.
//!
//! Evaluation runs the epsilon-greedy policy (dropout inactive) through the
//! protocol wrapper — sticky actions stay on, recorded on each result — and
//! reports the undiscounted return per episode.

use crate::agent::{select_action, FrameStacker};
use crate::env::{make_env, Flavour, ProtocolWrapper};
use crate::error::TrainError;
use crate::nn::{forward, NetworkArchitecture, Parameters};
use crate::protocol::aggregate_runs;
use crate::rng::{Rng, Stream};
use crate::tensor::Scalar;

/// Evaluation protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub episodes: usize,
    pub epsilon: f64,
    pub frame_skip: u32,
    pub sticky_prob: f64,
    pub frame_stack: u32,
}

/// Mean/std of per-episode returns for one (checkpoint, flavour, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mean_return: f64,
    /// Population standard deviation over episodes.
    pub std_return: f64,
    pub episodes: usize,
    pub eval_epsilon: f64,
    pub flavour: Flavour,
    pub checkpoint_frame: u64,
    pub seed: u64,
    /// Sticky-action probability active during evaluation episodes.
    pub sticky_prob: f64,
}

/// Runs `settings.episodes` episodes of the epsilon-greedy policy on
/// `flavour`. Parameters are read-only; each episode draws its own derived
/// seed so results are reproducible per `(params, flavour, seed)`.
pub fn evaluate_policy<F: Scalar>(
    params: &Parameters<F>,
    arch: &NetworkArchitecture,
    flavour: Flavour,
    settings: &EvalSettings,
    checkpoint_frame: u64,
    seed: u64,
) -> Result<EvalResult, TrainError> {
    assert!(settings.episodes >= 1);
    let mut returns = Vec::with_capacity(settings.episodes);
    for episode in 0..settings.episodes {
        let episode_seed = Rng::derive(seed, Stream::Eval(episode as u64)).next_u64();
        let env = make_env(flavour, episode_seed)?;
        let mut wrapper = ProtocolWrapper::new(
            env,
            settings.frame_skip,
            settings.sticky_prob,
            Rng::derive(episode_seed, Stream::Sticky),
        );
        let mut policy_rng = Rng::derive(episode_seed, Stream::Agent);
        let first = wrapper.reset();
        let mut stacker = FrameStacker::new(settings.frame_stack as usize, first);
        let mut episode_return = 0.0;
        loop {
            let input = stacker.stacked().to_tensor::<F>();
            let (q, _) = forward(arch, params, &input, None)?;
            let action = select_action(&q, settings.epsilon, &mut policy_rng)?;
            let result = wrapper.step(action)?;
            episode_return += result.reward;
            stacker.push(result.observation);
            if result.terminal {
                break;
            }
        }
        returns.push(episode_return);
    }
    let (mean, std) = aggregate_runs(&returns).expect("episodes >= 1");
    Ok(EvalResult {
        mean_return: mean,
        std_return: std,
        episodes: settings.episodes,
        eval_epsilon: settings.epsilon,
        flavour,
        checkpoint_frame,
        seed,
        sticky_prob: settings.sticky_prob,
    })
}

/// One aggregated table cell: across-seed mean of per-seed means with the
/// across-seed population standard deviation.
#[derive(Debug, Clone)]
pub struct EvalCell {
    pub target: Flavour,
    pub mean: f64,
    pub std: f64,
    pub per_seed: Vec<(u64, f64)>,
    /// Set when some seed could not be evaluated; the cell still appears.
    pub error: Option<String>,
}

/// Direct policy evaluation of final checkpoints across target flavours.
#[derive(Debug, Clone)]
pub struct EvalTable {
    pub source: Flavour,
    pub cells: Vec<EvalCell>,
}

pub fn direct_policy_evaluation<F: Scalar>(
    final_params_per_seed: &[(u64, Parameters<F>)],
    arch: &NetworkArchitecture,
    source: Flavour,
    targets: &[Flavour],
    settings: &EvalSettings,
) -> EvalTable {
    let mut cells = Vec::with_capacity(targets.len());
    for target in targets {
        let mut per_seed = Vec::new();
        let mut error = None;
        for (seed, params) in final_params_per_seed {
            match evaluate_policy(params, arch, *target, settings, u64::MAX, *seed) {
                Ok(result) => per_seed.push((*seed, result.mean_return)),
                Err(e) => error = Some(e.to_string()),
            }
        }
        let (mean, std) = aggregate_runs(
            &per_seed.iter().map(|(_, m)| *m).collect::<Vec<_>>(),
        )
        .unwrap_or((f64::NAN, f64::NAN));
        cells.push(EvalCell {
            target: *target,
            mean,
            std,
            per_seed,
            error,
        });
    }
    EvalTable { source, cells }
}

/// Per-checkpoint evaluation of one run on one target flavour.
#[derive(Debug, Clone)]
pub struct EvalCurve {
    pub source: Flavour,
    pub target: Flavour,
    pub seed: u64,
    pub points: Vec<EvalResult>,
}

impl EvalCurve {
    pub const CSV_HEADER: &'static str = "checkpoint_frame,source_game,source_flavour,target_game,target_flavour,seed,episodes,eval_epsilon,return_mean,return_std";

    /// Evaluation CSV, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                p.checkpoint_frame,
                self.source.game,
                self.source.short(),
                self.target.game,
                self.target.short(),
                p.seed,
                p.episodes,
                p.eval_epsilon,
                p.mean_return,
                p.std_return,
            ));
        }
        out
    }

    pub fn mean_returns(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_return).collect()
    }
}

/// Evaluates every checkpoint of one run on a target flavour. Checkpoints
/// must be evenly spaced.
pub fn cross_flavour_curve<F: Scalar>(
    snapshots: &[(u64, Parameters<F>)],
    arch: &NetworkArchitecture,
    source: Flavour,
    target: Flavour,
    settings: &EvalSettings,
    seed: u64,
) -> Result<EvalCurve, TrainError> {
    if snapshots.is_empty() {
        return Err(TrainError::InvalidConfig("no checkpoints to evaluate".into()));
    }
    if snapshots.len() >= 2 {
        let spacing = snapshots[1].0.saturating_sub(snapshots[0].0);
        for pair in snapshots.windows(2) {
            if pair[1].0 <= pair[0].0 || pair[1].0 - pair[0].0 != spacing {
                return Err(TrainError::InvalidConfig(
                    "checkpoints must be strictly increasing with constant spacing".into(),
                ));
            }
        }
    }
    let mut points = Vec::with_capacity(snapshots.len());
    for (frame, params) in snapshots {
        points.push(evaluate_policy(params, arch, target, settings, *frame, seed)?);
    }
    Ok(EvalCurve {
        source,
        target,
        seed,
        points,
    })
}
