//! Frame/step/update arithmetic and experience budgets.

use serde::{Deserialize, Serialize};

use crate::env::Flavour;

/// Exact integer accounting: `steps = frames / frame_skip`,
/// `updates = steps / learn_frequency` (floor division).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAccounting {
    pub frames: u64,
    pub steps: u64,
    pub updates: u64,
    pub frame_skip: u32,
    pub learn_frequency: u32,
}

pub fn frame_accounting(frames: u64, frame_skip: u32, learn_frequency: u32) -> FrameAccounting {
    assert!(frame_skip >= 1 && learn_frequency >= 1);
    let steps = frames / frame_skip as u64;
    FrameAccounting {
        frames,
        steps,
        updates: steps / learn_frequency as u64,
        frame_skip,
        learn_frequency,
    }
}

/// Frame totals of the scratch-everywhere protocol versus the
/// train-once-then-fine-tune protocol over a set of target flavours.
///
/// The comparison holds per-flavour experience equal: a fine-tuned run on a
/// target sees `source + target` frames, so its scratch counterpart trains
/// for that same total from zero. The source run is paid once across all
/// targets, which is where the saving comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub source_frames: u64,
    pub per_target: Vec<(Flavour, u64)>,
    /// Sum over targets of (source + target) frames.
    pub scratch_total: u64,
    /// Source frames once, plus each target's fine-tuning frames.
    pub finetune_total: u64,
}

pub fn experience_budget(source_frames: u64, targets: &[(Flavour, u64)]) -> BudgetReport {
    let scratch_total = targets
        .iter()
        .map(|(_, frames)| source_frames + frames)
        .sum();
    let finetune_total = if targets.is_empty() {
        source_frames
    } else {
        source_frames + targets.iter().map(|(_, f)| f).sum::<u64>()
    };
    BudgetReport {
        source_frames,
        per_target: targets.to_vec(),
        scratch_total,
        finetune_total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Game;

    #[test]
    fn paper_scale_accounting() {
        let acc = frame_accounting(50_000_000, 5, 4);
        assert_eq!(acc.steps, 10_000_000);
        assert_eq!(acc.updates, 2_500_000);
    }

    #[test]
    fn zero_frames() {
        let acc = frame_accounting(0, 5, 4);
        assert_eq!((acc.steps, acc.updates), (0, 0));
    }

    #[test]
    fn floor_division() {
        let acc = frame_accounting(23, 5, 4);
        assert_eq!(acc.steps, 4);
        assert_eq!(acc.updates, 1);
    }

    #[test]
    fn budget_two_targets_matches_protocol_comparison() {
        let t = |m: u32| (Flavour::new(Game::MiniCrossing, m, 0), 50_000_000u64);
        let report = experience_budget(50_000_000, &[t(1), t(4)]);
        assert_eq!(report.scratch_total, 200_000_000);
        assert_eq!(report.finetune_total, 150_000_000);
    }

    #[test]
    fn budget_single_target_breaks_even() {
        let report = experience_budget(
            50_000_000,
            &[(Flavour::new(Game::MiniCrossing, 1, 0), 50_000_000)],
        );
        assert_eq!(report.scratch_total, report.finetune_total);
    }

    #[test]
    fn budget_zero_targets_source_only() {
        let report = experience_budget(50_000_000, &[]);
        assert_eq!(report.finetune_total, 50_000_000);
        assert_eq!(report.scratch_total, 0);
    }
}
