//! Evaluation machinery: cross-flavour policy evaluation, checkpoint
//! curves, multi-seed aggregation, smoothing, the ablation sweep generator,
//! and frame accounting.

mod accounting;
mod eval;
mod sweep;

pub use accounting::{experience_budget, frame_accounting, BudgetReport, FrameAccounting};
pub use eval::{
    cross_flavour_curve, direct_policy_evaluation, evaluate_policy, EvalCell, EvalCurve,
    EvalResult, EvalSettings, EvalTable,
};
pub use sweep::{generate_sweep, SweepConfig, SweepMode, SweepSpec};

/// Trailing moving average: element `i` of the output is the mean of input
/// elements `max(0, i - window + 1) ..= i`. Window 1 is the identity; the
/// head uses however many elements exist.
pub fn smooth(curve: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "smoothing window must be at least 1");
    curve
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let lo = i + 1 - window.min(i + 1);
            let slice = &curve[lo..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Across-seed aggregation: mean of per-seed values and their population
/// standard deviation.
pub fn aggregate_runs(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}
