//! Closed-form BB84 performance metrics over a selected detector subset.
//!
//! With a = η·Σ_{i∈S} P_i the per-period signal detection probability and
//! q = 1 − e^(−K·n_B) the probability that one array registers noise,
//!
//!   SBR  = ½ P_tx e^(−3K·n_B) [ a + 4(1 − a)·q ]
//!   EBR  = ½ P_tx e^(−3K·n_B) · 2(1 − a)·q
//!   QBER = EBR / SBR
//!   SKR  = max(0, SBR·(1 − 2H₂(QBER)))
//!
//! The noise term carries the click factor q; [`FormulaMode::AsPrinted`]
//! drops it, reproducing a variant that counts a silent array as a noise
//! click (kept for traceability against that form).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::ProtocolConfig;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("QBER undefined: SBR is zero for this selection")]
    UndefinedQber,
    #[error("invalid selection summary: {0}")]
    BadSummary(String),
}

/// Evaluation mode for the sifted/error-rate formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FormulaMode {
    /// Noise term includes the array click factor (1 − e^(−K·n_B)).
    #[default]
    Corrected,
    /// Noise term without the click factor.
    AsPrinted,
}

/// Everything the closed-form metrics need to know about a selection:
/// its cardinality K, the selected probability mass, and the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionSummary {
    /// Number of active elements per array.
    pub k: usize,
    /// Σ_{i∈S} P_i over the selected elements.
    pub p_sum: f64,
    /// Channel transmittance applied to the spatial distribution (for an
    /// array that captures only part of the focal power this is the
    /// effective η' = η · captured fraction).
    pub eta: f64,
    pub protocol: ProtocolConfig,
}

impl SelectionSummary {
    pub fn new(
        k: usize,
        p_sum: f64,
        eta: f64,
        protocol: ProtocolConfig,
    ) -> Result<Self, MetricsError> {
        if k == 0 {
            return Err(MetricsError::BadSummary("selection is empty".into()));
        }
        if !(0.0..=1.0 + 1e-9).contains(&p_sum) {
            return Err(MetricsError::BadSummary(format!(
                "p_sum out of [0, 1]: {p_sum}"
            )));
        }
        if !(0.0..=1.0 + 1e-9).contains(&eta) {
            return Err(MetricsError::BadSummary(format!("eta out of [0, 1]: {eta}")));
        }
        Ok(Self {
            k,
            p_sum,
            eta,
            protocol,
        })
    }

    fn a(&self) -> f64 {
        (self.eta * self.p_sum).min(1.0)
    }

    fn exp3(&self) -> f64 {
        (-3.0 * self.k as f64 * self.protocol.n_b).exp()
    }

    fn q(&self, mode: FormulaMode) -> f64 {
        match mode {
            FormulaMode::Corrected => 1.0 - (-(self.k as f64) * self.protocol.n_b).exp(),
            FormulaMode::AsPrinted => 1.0,
        }
    }
}

/// Sifted bit rate, Hz.
pub fn compute_sbr(s: &SelectionSummary, mode: FormulaMode) -> f64 {
    let a = s.a();
    0.5 * s.protocol.p_tx * s.exp3() * (a + 4.0 * (1.0 - a) * s.q(mode))
}

/// Error bit rate, Hz. Only noise-caused sifted events err, half of them.
pub fn compute_ebr(s: &SelectionSummary, mode: FormulaMode) -> f64 {
    let a = s.a();
    0.25 * s.protocol.p_tx * s.exp3() * 4.0 * (1.0 - a) * s.q(mode)
}

/// Quantum bit error rate EBR/SBR, in [0, 1/2].
pub fn compute_qber(s: &SelectionSummary, mode: FormulaMode) -> Result<f64, MetricsError> {
    let sbr = compute_sbr(s, mode);
    if sbr <= 0.0 {
        return Err(MetricsError::UndefinedQber);
    }
    Ok(compute_ebr(s, mode) / sbr)
}

/// Binary entropy H₂(q) in bits, with H₂(0) = H₂(1) = 0 by continuity.
pub fn binary_entropy(q: f64) -> f64 {
    assert!((0.0..=1.0).contains(&q), "entropy argument out of [0,1]");
    if q == 0.0 || q == 1.0 {
        return 0.0;
    }
    -q * q.log2() - (1.0 - q) * (1.0 - q).log2()
}

/// Secret key rate SBR·(1 − 2H₂(QBER)), clamped at zero.
pub fn compute_skr(s: &SelectionSummary, mode: FormulaMode) -> Result<f64, MetricsError> {
    Ok(raw_skr(s, mode)?.max(0.0))
}

/// Unclamped secret key rate; negative values indicate the selection is
/// past the positive-key QBER threshold.
pub fn raw_skr(s: &SelectionSummary, mode: FormulaMode) -> Result<f64, MetricsError> {
    let sbr = compute_sbr(s, mode);
    if sbr <= 0.0 {
        return Err(MetricsError::UndefinedQber);
    }
    let qber = compute_ebr(s, mode) / sbr;
    Ok(sbr * (1.0 - 2.0 * binary_entropy(qber)))
}

/// Full metrics record for one selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub sbr: f64,
    pub ebr: f64,
    pub qber: f64,
    pub skr: f64,
}

pub fn compute_metrics(s: &SelectionSummary, mode: FormulaMode) -> Result<MetricsRecord, MetricsError> {
    let sbr = compute_sbr(s, mode);
    let ebr = compute_ebr(s, mode);
    if sbr <= 0.0 {
        return Err(MetricsError::UndefinedQber);
    }
    let qber = ebr / sbr;
    let skr = (sbr * (1.0 - 2.0 * binary_entropy(qber))).max(0.0);
    Ok(MetricsRecord {
        sbr,
        ebr,
        qber,
        skr,
    })
}
