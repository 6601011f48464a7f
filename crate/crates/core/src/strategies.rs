//! Detector-element selection strategies: adaptive Best-K, trained global
//! threshold, and the non-adaptive baselines, plus the QBER-minimisation
//! cardinality analysis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{ArrayGeometry, ProtocolConfig};
use crate::metrics::{compute_metrics, FormulaMode, MetricsError, MetricsRecord, SelectionSummary};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("threshold training needs at least one realization")]
    NoTrainingData,
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    BestK,
    GlobalThreshold,
    CentralFour,
    AllElements,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::BestK => "best_k",
            StrategyKind::GlobalThreshold => "global_threshold",
            StrategyKind::CentralFour => "central4",
            StrategyKind::AllElements => "all_n",
        }
    }
}

/// Outcome of applying one strategy to one channel realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub strategy: StrategyKind,
    /// Activated element indices, ascending.
    pub selected: Vec<usize>,
    pub k: usize,
    pub metrics: MetricsRecord,
    pub realization_seed: u64,
    /// True when a threshold produced an empty set and the argmax-P
    /// element was activated instead.
    pub fallback_used: bool,
}

/// A trained constant-threshold policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    /// Probability threshold τ in [0, 1]; elements with P_i >= τ activate.
    pub tau: f64,
    /// Seeds of the realizations the threshold was trained on.
    pub trained_on: Vec<u64>,
}

/// One training realization: spatial distribution and effective
/// transmittance (η' already folds in any off-array capture loss).
#[derive(Debug, Clone, Copy)]
pub struct TrainingSample<'a> {
    pub p: &'a [f64],
    pub eta: f64,
    pub seed: u64,
}

fn sorted_desc_indices(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap().then(a.cmp(&b)));
    idx
}

fn outcome_for_set(
    strategy: StrategyKind,
    mut selected: Vec<usize>,
    p: &[f64],
    eta: f64,
    protocol: &ProtocolConfig,
    mode: FormulaMode,
    seed: u64,
    fallback_used: bool,
) -> Result<StrategyOutcome, StrategyError> {
    selected.sort_unstable();
    let p_sum: f64 = selected.iter().map(|&i| p[i]).sum();
    let summary = SelectionSummary::new(selected.len(), p_sum.min(1.0), eta, *protocol)?;
    let metrics = compute_metrics(&summary, mode)?;
    Ok(StrategyOutcome {
        strategy,
        k: selected.len(),
        selected,
        metrics,
        realization_seed: seed,
        fallback_used,
    })
}

/// Best-K: sort elements by P descending and return the prefix set whose
/// SKR is maximal (ties toward smaller K). Restricting the search to
/// prefixes is exact here: at fixed cardinality the SKR is nondecreasing in
/// the selected probability mass for every noise level of interest.
pub fn best_k_select(
    p: &[f64],
    eta: f64,
    protocol: &ProtocolConfig,
    mode: FormulaMode,
    seed: u64,
) -> Result<StrategyOutcome, StrategyError> {
    let order = sorted_desc_indices(p);
    let mut best_k = 1;
    let mut best_skr = f64::NEG_INFINITY;
    let mut p_sum = 0.0;
    for (i, &idx) in order.iter().enumerate() {
        p_sum += p[idx];
        let summary = SelectionSummary::new(i + 1, p_sum.min(1.0), eta, *protocol)?;
        let skr = compute_metrics(&summary, mode)?.skr;
        if skr > best_skr {
            best_skr = skr;
            best_k = i + 1;
        }
    }
    outcome_for_set(
        StrategyKind::BestK,
        order[..best_k].to_vec(),
        p,
        eta,
        protocol,
        mode,
        seed,
        false,
    )
}

/// Uniform candidate grid over [0, max P] at the requested resolution,
/// augmented with every observed P value so each prefix set is reachable.
pub fn threshold_grid(samples: &[TrainingSample<'_>], resolution: f64) -> Vec<f64> {
    assert!(resolution > 0.0);
    let max_p = samples
        .iter()
        .flat_map(|s| s.p.iter().copied())
        .fold(0.0f64, f64::max);
    let steps = (max_p / resolution).ceil() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|i| i as f64 * resolution).collect();
    grid.extend(samples.iter().flat_map(|s| s.p.iter().copied()));
    grid.retain(|t| t.is_finite() && *t >= 0.0);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    grid
}

/// Train τ̂ = argmax over the grid of the mean SKR across the training
/// realizations of S(τ) = {i : P_i >= τ}. Ties resolve toward the largest
/// τ (fewest activated elements). Deterministic.
pub fn train_global_threshold(
    samples: &[TrainingSample<'_>],
    protocol: &ProtocolConfig,
    tau_grid: &[f64],
    mode: FormulaMode,
) -> Result<ThresholdPolicy, StrategyError> {
    if samples.is_empty() {
        return Err(StrategyError::NoTrainingData);
    }
    if tau_grid.is_empty() {
        return Err(StrategyError::EmptyGrid);
    }
    // per-sample descending P and prefix sums: S(τ) is always a prefix
    struct Prepared {
        sorted: Vec<f64>,
        prefix: Vec<f64>,
        eta: f64,
    }
    let prepared: Vec<Prepared> = samples
        .iter()
        .map(|s| {
            let mut sorted = s.p.to_vec();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let mut prefix = Vec::with_capacity(sorted.len());
            let mut acc = 0.0;
            for v in &sorted {
                acc += v;
                prefix.push(acc);
            }
            Prepared {
                sorted,
                prefix,
                eta: s.eta,
            }
        })
        .collect();

    let mut best_tau = tau_grid[0];
    let mut best_mean = f64::NEG_INFINITY;
    for &tau in tau_grid {
        let mut total = 0.0;
        for prep in &prepared {
            // count of elements with P_i >= tau in the descending order
            let k = prep.sorted.partition_point(|&v| v >= tau);
            let (k, p_sum) = if k == 0 {
                (1, prep.sorted[0]) // fallback: single argmax element
            } else {
                (k, prep.prefix[k - 1])
            };
            let summary = SelectionSummary::new(k, p_sum.min(1.0), prep.eta, *protocol)?;
            total += compute_metrics(&summary, mode)?.skr;
        }
        let mean = total / prepared.len() as f64;
        if mean >= best_mean {
            best_mean = mean;
            best_tau = tau;
        }
    }
    Ok(ThresholdPolicy {
        tau: best_tau,
        trained_on: samples.iter().map(|s| s.seed).collect(),
    })
}

/// Apply a trained threshold: S = {i : P_i >= τ}; an empty set falls back
/// to the single highest-probability element (flagged in the outcome).
pub fn apply_threshold(
    p: &[f64],
    policy: &ThresholdPolicy,
    eta: f64,
    protocol: &ProtocolConfig,
    mode: FormulaMode,
    seed: u64,
) -> Result<StrategyOutcome, StrategyError> {
    let selected: Vec<usize> = (0..p.len()).filter(|&i| p[i] >= policy.tau).collect();
    if selected.is_empty() {
        let argmax = sorted_desc_indices(p)[0];
        log::debug!(
            "threshold {} exceeds max P; falling back to element {argmax}",
            policy.tau
        );
        return outcome_for_set(
            StrategyKind::GlobalThreshold,
            vec![argmax],
            p,
            eta,
            protocol,
            mode,
            seed,
            true,
        );
    }
    outcome_for_set(
        StrategyKind::GlobalThreshold,
        selected,
        p,
        eta,
        protocol,
        mode,
        seed,
        false,
    )
}

/// Non-adaptive baselines: the four central elements or the whole array.
pub fn baseline_select(
    p: &[f64],
    which: StrategyKind,
    geometry: &ArrayGeometry,
    eta: f64,
    protocol: &ProtocolConfig,
    mode: FormulaMode,
    seed: u64,
) -> Result<StrategyOutcome, StrategyError> {
    let selected = match which {
        StrategyKind::CentralFour => geometry.central_four(),
        StrategyKind::AllElements => (0..p.len()).collect(),
        other => panic!("baseline_select called with non-baseline strategy {other:?}"),
    };
    outcome_for_set(which, selected, p, eta, protocol, mode, seed, false)
}

/// Smallest cardinality k at which QBER stops decreasing for every later
/// step, from the closed-form step condition on descending P:
///
///   (e^(−k·n_B) − e^(−(k+1)·n_B)) / (1 − e^(−k·n_B)) · Σ_{i<=k} P_i >= P_{k+1}
///
/// For n_B << 1 this degenerates to mean dominance, so the minimum-QBER
/// selection collapses to a single element.
pub fn min_qber_cardinality(p_sorted: &[f64], n_b: f64) -> usize {
    assert!(n_b > 0.0, "n_b must be positive");
    assert!(
        p_sorted.windows(2).all(|w| w[0] >= w[1]),
        "P must be sorted descending"
    );
    let n = p_sorted.len();
    let prefix: Vec<f64> = p_sorted
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let cond = |k: usize| -> bool {
        // k is 1-based cardinality; compares QBER_{k+1} vs QBER_k
        let ek = (-(k as f64) * n_b).exp();
        let ek1 = (-((k + 1) as f64) * n_b).exp();
        (ek - ek1) / (1.0 - ek) * prefix[k - 1] >= p_sorted[k]
    };
    for k in (1..n).rev() {
        if !cond(k) {
            return k + 1;
        }
    }
    1
}

/// Exhaustive subset search (small N only): the SKR-argmax over every
/// nonempty subset. Validation oracle for the prefix restriction.
pub fn exhaustive_best_subset(
    p: &[f64],
    eta: f64,
    protocol: &ProtocolConfig,
    mode: FormulaMode,
) -> Result<(Vec<usize>, f64), StrategyError> {
    let n = p.len();
    assert!(n <= 20, "exhaustive search is exponential; use N <= 20");
    let mut best: Option<(Vec<usize>, f64)> = None;
    for mask in 1u32..(1 << n) {
        let selected: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let p_sum: f64 = selected.iter().map(|&i| p[i]).sum();
        let summary = SelectionSummary::new(selected.len(), p_sum.min(1.0), eta, *protocol)?;
        let skr = compute_metrics(&summary, mode)?.skr;
        let better = match &best {
            None => true,
            Some((cur, cur_skr)) => {
                skr > *cur_skr + 0.0
                    || (skr == *cur_skr && selected.len() < cur.len())
            }
        };
        if better {
            best = Some((selected, skr));
        }
    }
    Ok(best.expect("at least one subset"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn protocol(n_b: f64) -> ProtocolConfig {
        ProtocolConfig::new(1e8, n_b).unwrap()
    }

    #[test]
    fn noiseless_best_k_selects_everything() {
        let p = vec![0.4, 0.3, 0.2, 0.1];
        let out = best_k_select(&p, 0.05, &protocol(0.0), FormulaMode::Corrected, 0).unwrap();
        assert_eq!(out.k, 4);
        assert_eq!(out.selected, vec![0, 1, 2, 3]);
    }

    #[test]
    fn concentrated_p_selects_single_element() {
        let mut p = vec![0.0; 16];
        p[5] = 1.0;
        for nb in [1e-6, 1e-4, 1e-3] {
            let out = best_k_select(&p, 0.05, &protocol(nb), FormulaMode::Corrected, 0).unwrap();
            assert_eq!(out.selected, vec![5], "n_b = {nb}");
        }
    }

    #[test]
    fn best_k_matches_exhaustive_search_at_n4() {
        let p = vec![0.7, 0.15, 0.1, 0.05];
        let proto = protocol(1e-3);
        let out = best_k_select(&p, 0.05, &proto, FormulaMode::Corrected, 0).unwrap();
        let (subset, skr) = exhaustive_best_subset(&p, 0.05, &proto, FormulaMode::Corrected).unwrap();
        assert_eq!(out.selected, subset);
        assert_relative_eq!(out.metrics.skr, skr, max_relative = 1e-12);
    }

    #[test]
    fn threshold_application_and_fallback() {
        let p = vec![0.4, 0.3, 0.2, 0.1];
        let proto = protocol(1e-4);
        let policy = ThresholdPolicy {
            tau: 0.25,
            trained_on: vec![],
        };
        let out = apply_threshold(&p, &policy, 0.05, &proto, FormulaMode::Corrected, 0).unwrap();
        assert_eq!(out.selected, vec![0, 1]);
        assert!(!out.fallback_used);

        let all = ThresholdPolicy {
            tau: 0.0,
            trained_on: vec![],
        };
        let out = apply_threshold(&p, &all, 0.05, &proto, FormulaMode::Corrected, 0).unwrap();
        assert_eq!(out.k, 4);

        let high = ThresholdPolicy {
            tau: 0.9,
            trained_on: vec![],
        };
        let out = apply_threshold(&p, &high, 0.05, &proto, FormulaMode::Corrected, 0).unwrap();
        assert_eq!(out.selected, vec![0]);
        assert!(out.fallback_used);
    }

    #[test]
    fn single_sample_training_recovers_best_k() {
        // with one training realization the τ sweep reaches every prefix,
        // so the trained threshold matches the Best-K optimum
        let p = vec![0.35, 0.25, 0.2, 0.1, 0.06, 0.04];
        let proto = protocol(2e-3);
        let sample = TrainingSample {
            p: &p,
            eta: 0.05,
            seed: 3,
        };
        let grid = threshold_grid(&[sample], 1e-4);
        let policy = train_global_threshold(&[sample], &proto, &grid, FormulaMode::Corrected).unwrap();
        let applied =
            apply_threshold(&p, &policy, 0.05, &proto, FormulaMode::Corrected, 3).unwrap();
        let best = best_k_select(&p, 0.05, &proto, FormulaMode::Corrected, 3).unwrap();
        assert_relative_eq!(applied.metrics.skr, best.metrics.skr, max_relative = 1e-12);
    }

    #[test]
    fn training_is_the_grid_argmax() {
        let p1 = vec![0.5, 0.3, 0.15, 0.05];
        let p2 = vec![0.4, 0.4, 0.1, 0.1];
        let proto = protocol(1e-3);
        let samples = [
            TrainingSample {
                p: &p1,
                eta: 0.04,
                seed: 0,
            },
            TrainingSample {
                p: &p2,
                eta: 0.06,
                seed: 1,
            },
        ];
        let grid = threshold_grid(&samples, 1e-3);
        let policy = train_global_threshold(&samples, &proto, &grid, FormulaMode::Corrected).unwrap();
        let mean_at = |tau: f64| -> f64 {
            samples
                .iter()
                .map(|s| {
                    let pol = ThresholdPolicy {
                        tau,
                        trained_on: vec![],
                    };
                    apply_threshold(s.p, &pol, s.eta, &proto, FormulaMode::Corrected, s.seed)
                        .unwrap()
                        .metrics
                        .skr
                })
                .sum::<f64>()
                / samples.len() as f64
        };
        let trained = mean_at(policy.tau);
        for &tau in &grid {
            assert!(trained >= mean_at(tau) - 1e-9, "beaten at tau {tau}");
        }
    }

    #[test]
    fn baselines_have_fixed_shapes() {
        let p = vec![1.0 / 64.0; 64];
        let geom = ArrayGeometry::new(8, 8, 1.0);
        let proto = protocol(1e-4);
        let all = baseline_select(
            &p,
            StrategyKind::AllElements,
            &geom,
            0.05,
            &proto,
            FormulaMode::Corrected,
            0,
        )
        .unwrap();
        assert_eq!(all.k, 64);
        assert_relative_eq!(
            all.selected.iter().map(|&i| p[i]).sum::<f64>(),
            1.0,
            max_relative = 1e-12
        );
        let central = baseline_select(
            &p,
            StrategyKind::CentralFour,
            &geom,
            0.05,
            &proto,
            FormulaMode::Corrected,
            0,
        )
        .unwrap();
        assert_eq!(central.k, 4);
    }

    #[test]
    fn min_qber_cardinality_is_one_for_small_noise() {
        let p = vec![0.3, 0.25, 0.2, 0.15, 0.07, 0.03];
        assert_eq!(min_qber_cardinality(&p, 1e-8), 1);
        let uniform = vec![0.125; 8];
        assert_eq!(min_qber_cardinality(&uniform, 1e-7), 1);
    }

    #[test]
    fn min_qber_matches_exhaustive_qber_scan() {
        let p = vec![0.4, 0.2, 0.15, 0.1, 0.08, 0.04, 0.02, 0.01];
        let n_b = 1e-7;
        let eta = 1e-6; // vanishing η isolates the step condition itself
        let proto = protocol(n_b);
        let mut qbers = Vec::new();
        let mut acc = 0.0;
        for (k, &v) in p.iter().enumerate() {
            acc += v;
            let s = SelectionSummary::new(k + 1, acc, eta, proto).unwrap();
            qbers.push(compute_metrics(&s, FormulaMode::Corrected).unwrap().qber);
        }
        let argmin = qbers
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
            + 1;
        assert_eq!(min_qber_cardinality(&p, n_b), argmin);
    }
}
