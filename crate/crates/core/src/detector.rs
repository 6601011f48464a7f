//! Focal-plane SPD array: intensity binning, spatial detection
//! probabilities, and the event-level BB84 click simulator.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ComplexField;
use crate::seeds::{rng_for, SeedDomain};

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("array footprint ({footprint:.3e} m) exceeds focal-plane grid extent ({extent:.3e} m)")]
    FootprintExceedsGrid { footprint: f64, extent: f64 },
    #[error("all element intensities are zero: degenerate channel realization")]
    DegenerateChannel,
    #[error("invalid protocol: {0}")]
    BadProtocol(String),
}

/// Geometry of the SPD array in the focal plane. Elements are square cells
/// of side `element_pitch` tiling a rows x cols footprint centred on
/// `array_center` (metres in focal-plane coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    pub element_pitch: f64,
    pub array_center: (f64, f64),
}

impl ArrayGeometry {
    pub fn new(rows: usize, cols: usize, element_pitch: f64) -> Self {
        assert!(rows >= 1 && cols >= 1 && element_pitch > 0.0);
        Self {
            rows,
            cols,
            element_pitch,
            array_center: (0.0, 0.0),
        }
    }

    pub fn element_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Indices of the central 2x2 block (rows/2-1..rows/2 x cols/2-1..cols/2),
    /// i.e. the four cells meeting at the array centre for even dimensions.
    pub fn central_four(&self) -> Vec<usize> {
        let r0 = (self.rows - 1) / 2;
        let c0 = (self.cols - 1) / 2;
        let mut out = Vec::new();
        for r in [r0, (r0 + 1).min(self.rows - 1)] {
            for c in [c0, (c0 + 1).min(self.cols - 1)] {
                let idx = r * self.cols + c;
                if !out.contains(&idx) {
                    out.push(idx);
                }
            }
        }
        out
    }

    fn half_extent(&self) -> (f64, f64) {
        (
            0.5 * self.cols as f64 * self.element_pitch,
            0.5 * self.rows as f64 * self.element_pitch,
        )
    }

    /// Element index for a focal-plane point, or None when off the array.
    pub fn element_at(&self, x: f64, y: f64) -> Option<usize> {
        let (hx, hy) = self.half_extent();
        let u = x - self.array_center.0 + hx;
        let v = y - self.array_center.1 + hy;
        if u < 0.0 || v < 0.0 {
            return None;
        }
        let c = (u / self.element_pitch) as usize;
        let r = (v / self.element_pitch) as usize;
        if r < self.rows && c < self.cols {
            Some(r * self.cols + c)
        } else {
            None
        }
    }
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self::new(8, 8, 3.4e-6)
    }
}

/// Transmitter clock rate and per-element noise for the BB84 receiver
/// (four SPD arrays, two measurement bases).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Transmitter clock rate P_tx, Hz.
    pub p_tx: f64,
    /// Mean noise photons per active element per clock period
    /// (background + dark counts folded together).
    pub n_b: f64,
}

impl ProtocolConfig {
    pub const ARRAY_COUNT: usize = 4;

    pub fn new(p_tx: f64, n_b: f64) -> Result<Self, DetectorError> {
        if !(p_tx > 0.0) {
            return Err(DetectorError::BadProtocol(format!(
                "p_tx must be > 0, got {p_tx}"
            )));
        }
        if !(n_b >= 0.0) {
            return Err(DetectorError::BadProtocol(format!(
                "n_b must be >= 0, got {n_b}"
            )));
        }
        if n_b > 1e-2 {
            log::warn!("noise level n_b = {n_b} is outside the n_b << 1 regime");
        }
        Ok(Self { p_tx, n_b })
    }
}

/// Integrate |a|²·Δu² over the pixels whose centres fall inside each
/// element. Light outside the footprint is counted by the caller via the
/// binned-power fraction, not here.
pub fn bin_focal_intensity(
    focal_field: &ComplexField,
    geometry: &ArrayGeometry,
) -> Result<Vec<f64>, DetectorError> {
    let grid = focal_field.grid();
    let (hx, hy) = {
        let (a, b) = geometry.half_extent();
        (
            a + geometry.array_center.0.abs(),
            b + geometry.array_center.1.abs(),
        )
    };
    if 2.0 * hx > grid.extent() || 2.0 * hy > grid.extent() {
        return Err(DetectorError::FootprintExceedsGrid {
            footprint: 2.0 * hx.max(hy),
            extent: grid.extent(),
        });
    }
    let n = grid.n_points();
    let cell = grid.spacing() * grid.spacing();
    let mut intensities = vec![0.0; geometry.element_count()];
    for row in 0..n {
        let y = grid.coord(row);
        for col in 0..n {
            let x = grid.coord(col);
            if let Some(idx) = geometry.element_at(x, y) {
                intensities[idx] += focal_field.intensity(row, col) * cell;
            }
        }
    }
    Ok(intensities)
}

/// Spatial detection probabilities P_i = I_i / ΣI_j.
pub fn spatial_probabilities(intensities: &[f64]) -> Result<Vec<f64>, DetectorError> {
    assert!(
        intensities.iter().all(|&i| i >= 0.0 && i.is_finite()),
        "intensities must be finite and nonnegative"
    );
    let total: f64 = intensities.iter().sum();
    if total <= 0.0 {
        return Err(DetectorError::DegenerateChannel);
    }
    Ok(intensities.iter().map(|&i| i / total).collect())
}

/// Empirical sifted/error counts from the event-level simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickCounts {
    pub periods: u64,
    pub sifted: u64,
    pub errors: u64,
}

impl ClickCounts {
    pub fn sifted_rate(&self, p_tx: f64) -> f64 {
        p_tx * self.sifted as f64 / self.periods as f64
    }
    pub fn error_rate(&self, p_tx: f64) -> f64 {
        p_tx * self.errors as f64 / self.periods as f64
    }
    pub fn qber(&self) -> f64 {
        self.errors as f64 / self.sifted as f64
    }
}

const CLICK_BLOCK: u64 = 1 << 16;

/// Event-level BB84 click simulation over `n_periods` clock periods.
///
/// Per period: bases match with probability 1/2; on a match the signal
/// photon lands on element i of the correct array with probability η·P_i
/// and is detected iff i is active; each of the four arrays independently
/// registers at least one noise count with probability 1 − e^(−K·n_B);
/// multiple detections inside one array collapse to a single click. A
/// sifted bit requires a basis match and exactly one clicked array; a
/// sifted bit whose only cause is noise is an error with probability 1/2.
///
/// Deterministic per seed, parallel over fixed-size period blocks, and
/// prefix-consistent: counts are monotone nondecreasing in `n_periods`.
pub fn simulate_clicks(
    p: &[f64],
    eta: f64,
    active: &[usize],
    protocol: &ProtocolConfig,
    n_periods: u64,
    seed: u64,
) -> ClickCounts {
    assert!(!active.is_empty(), "active set must be nonempty");
    assert!(n_periods >= 1);
    assert!((0.0..=1.0 + 1e-12).contains(&eta), "eta out of range: {eta}");
    let mut is_active = vec![false; p.len()];
    for &i in active {
        is_active[i] = true;
    }
    // cumulative distribution over landing elements; "lands nowhere" weight
    // 1 − η·ΣP absorbs capture loss
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &pi in p {
        acc += eta * pi;
        cdf.push(acc);
    }
    let k = active.len() as f64;
    let p_noise = 1.0 - (-k * protocol.n_b).exp();

    let n_blocks = n_periods.div_ceil(CLICK_BLOCK);
    let (sifted, errors) = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = rng_for(seed, SeedDomain::ClickBlock, block);
            let periods_here = CLICK_BLOCK.min(n_periods - block * CLICK_BLOCK);
            let mut sifted = 0u64;
            let mut errors = 0u64;
            for _ in 0..periods_here {
                let basis_match = rng.gen::<f64>() < 0.5;
                if !basis_match {
                    // mismatched rounds are discarded in sifting regardless
                    // of clicks; skip the detail draws
                    continue;
                }
                // signal photon: pick the landing element from the spatial
                // distribution, detected iff that element is active
                let u: f64 = rng.gen();
                let idx = cdf.partition_point(|&c| c < u);
                let signal_detected = idx < p.len() && is_active[idx];
                // independent noise clicks on each of the four arrays
                let mut noise_arrays = 0u32;
                let mut correct_array_noise = false;
                for array in 0..ProtocolConfig::ARRAY_COUNT {
                    if rng.gen::<f64>() < p_noise {
                        noise_arrays += 1;
                        if array == 0 {
                            correct_array_noise = true;
                        }
                    }
                }
                // array 0 is the correct array for the sent state
                let clicked_arrays = if signal_detected {
                    // signal click merges with any noise in the same array
                    noise_arrays + u32::from(!correct_array_noise)
                } else {
                    noise_arrays
                };
                if clicked_arrays == 1 {
                    sifted += 1;
                    if !signal_detected {
                        // noise-only sifted event: wrong bit half the time
                        if rng.gen::<f64>() < 0.5 {
                            errors += 1;
                        }
                    }
                }
            }
            (sifted, errors)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    ClickCounts {
        periods: n_periods,
        sifted,
        errors,
    }
}
