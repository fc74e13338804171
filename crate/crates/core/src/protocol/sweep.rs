//! Regularization ablation sweep generator.

use serde::{Deserialize, Serialize};

use crate::nn::RegularizationConfig;

/// The swept sets. The stock values are five L2 strengths
/// `{1e-2 .. 1e-6}` and five `(p_conv, p_fc)` pairs
/// `{(0.05,0.1) .. (0.25,0.5)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub lambda_set: Vec<f64>,
    pub dropout_set: Vec<(f64, f64)>,
    pub mode: SweepMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    LambdaOnly,
    DropoutOnly,
    Cartesian,
    /// Union of both individual sweeps and the cartesian product,
    /// deduplicated.
    All,
}

impl SweepSpec {
    /// The grid used by the ablation study.
    pub fn stock(mode: SweepMode) -> SweepSpec {
        SweepSpec {
            lambda_set: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            dropout_set: vec![
                (0.05, 0.1),
                (0.1, 0.2),
                (0.15, 0.3),
                (0.2, 0.4),
                (0.25, 0.5),
            ],
            mode,
        }
    }
}

/// One generated configuration with a stable, filesystem-safe label.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub label: String,
    pub reg: RegularizationConfig,
}

fn label_of(reg: &RegularizationConfig) -> String {
    format!(
        "lambda{:e}_p{}-{}",
        reg.lambda_l2, reg.p_conv, reg.p_fc
    )
    .replace('.', "_")
}

/// Expands the sweep: lambda-only configs carry `p = (0, 0)`, dropout-only
/// configs carry `lambda = 0`, the cartesian mode carries both. `All` is
/// the deduplicated union. Output order is deterministic: lambda ascending,
/// then `(p_conv, p_fc)` ascending.
pub fn generate_sweep(spec: &SweepSpec) -> Vec<SweepConfig> {
    assert!(
        !spec.lambda_set.is_empty() && !spec.dropout_set.is_empty(),
        "sweep sets must be nonempty"
    );
    let mut configs: Vec<RegularizationConfig> = Vec::new();
    let lambda_only = spec.lambda_set.iter().map(|l| RegularizationConfig {
        lambda_l2: *l,
        p_conv: 0.0,
        p_fc: 0.0,
    });
    let dropout_only = spec.dropout_set.iter().map(|(pc, pf)| RegularizationConfig {
        lambda_l2: 0.0,
        p_conv: *pc,
        p_fc: *pf,
    });
    let cartesian = spec.lambda_set.iter().flat_map(|l| {
        spec.dropout_set.iter().map(move |(pc, pf)| RegularizationConfig {
            lambda_l2: *l,
            p_conv: *pc,
            p_fc: *pf,
        })
    });
    match spec.mode {
        SweepMode::LambdaOnly => configs.extend(lambda_only),
        SweepMode::DropoutOnly => configs.extend(dropout_only),
        SweepMode::Cartesian => configs.extend(cartesian),
        SweepMode::All => {
            configs.extend(lambda_only);
            configs.extend(dropout_only);
            configs.extend(cartesian);
        }
    }
    configs.sort_by(|a, b| {
        (a.lambda_l2, a.p_conv, a.p_fc)
            .partial_cmp(&(b.lambda_l2, b.p_conv, b.p_fc))
            .expect("sweep values are finite")
    });
    configs.dedup();
    configs
        .into_iter()
        .map(|reg| SweepConfig {
            label: label_of(&reg),
            reg,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stock_all_mode_yields_thirty_five() {
        let configs = generate_sweep(&SweepSpec::stock(SweepMode::All));
        assert_eq!(configs.len(), 35);
        // All labels unique.
        let mut labels: Vec<&str> = configs.iter().map(|c| c.label.as_str()).collect();
        labels.dedup();
        assert_eq!(labels.len(), 35);
    }

    #[test]
    fn stock_cartesian_is_twenty_five() {
        assert_eq!(generate_sweep(&SweepSpec::stock(SweepMode::Cartesian)).len(), 25);
        assert_eq!(generate_sweep(&SweepSpec::stock(SweepMode::LambdaOnly)).len(), 5);
        assert_eq!(generate_sweep(&SweepSpec::stock(SweepMode::DropoutOnly)).len(), 5);
    }

    #[test]
    fn singleton_sets_all_mode_gives_three() {
        let spec = SweepSpec {
            lambda_set: vec![1e-4],
            dropout_set: vec![(0.05, 0.1)],
            mode: SweepMode::All,
        };
        let configs = generate_sweep(&spec);
        assert_eq!(configs.len(), 3);
        // Ordered by lambda then dropout rates.
        assert_eq!(configs[0].reg.lambda_l2, 0.0);
        assert!(configs[0].reg.p_conv > 0.0);
        assert_eq!(configs[1].reg, RegularizationConfig {
            lambda_l2: 1e-4,
            p_conv: 0.0,
            p_fc: 0.0,
        });
        assert_eq!(configs[2].reg, RegularizationConfig::CHOSEN);
    }

    #[test]
    fn duplicate_grid_points_are_merged() {
        // A zero lambda in the set collides with the dropout-only arm.
        let spec = SweepSpec {
            lambda_set: vec![0.0, 1e-4],
            dropout_set: vec![(0.05, 0.1)],
            mode: SweepMode::All,
        };
        let configs = generate_sweep(&spec);
        // lambda-only: {0, 1e-4}; dropout-only: {(0,p)}; cartesian:
        // {(0,p), (1e-4,p)} -> the (0,p) pair appears twice, merged once.
        assert_eq!(configs.len(), 4);
    }

    #[test]
    fn count_formula_holds_for_arbitrary_sets() {
        for nl in 1..=4usize {
            for np in 1..=4usize {
                let spec = SweepSpec {
                    lambda_set: (1..=nl).map(|i| 10f64.powi(-(i as i32))).collect(),
                    dropout_set: (1..=np).map(|i| (0.01 * i as f64, 0.02 * i as f64)).collect(),
                    mode: SweepMode::All,
                };
                assert_eq!(generate_sweep(&spec).len(), nl + np + nl * np);
            }
        }
    }
}
