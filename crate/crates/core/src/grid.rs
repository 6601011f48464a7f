//! Square sampling grids for the discretised optical fields.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("n_points must be a power of two >= 64, got {0}")]
    BadPointCount(usize),
    #[error("grid extent must be positive, got {0}")]
    BadExtent(f64),
}

/// A square n x n sampling grid over a physical window of side `extent`
/// metres, centred on the optical axis.
///
/// Sample i along an axis sits at `(i - n/2) * spacing` so that index n/2 is
/// exactly on axis; spatial frequencies follow the usual FFT layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n_points: usize,
    extent: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, extent: f64) -> Result<Self, GridError> {
        if !n_points.is_power_of_two() || n_points < 64 {
            return Err(GridError::BadPointCount(n_points));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(GridError::BadExtent(extent));
        }
        Ok(Self { n_points, extent })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Sample spacing Δx = extent / n_points, metres.
    pub fn spacing(&self) -> f64 {
        self.extent / self.n_points as f64
    }

    /// Physical coordinate of sample index i (0..n), metres from axis.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n_points / 2) as f64) * self.spacing()
    }

    /// Angular spatial frequency of FFT bin i, rad/m (standard FFT order:
    /// non-negative frequencies first, then negative).
    pub fn angular_freq(&self, i: usize) -> f64 {
        let n = self.n_points as isize;
        let i = i as isize;
        let k = if i <= n / 2 { i } else { i - n };
        2.0 * std::f64::consts::PI * k as f64 / self.extent
    }

    /// Frequency-bin spacing Δκ = 2π / extent, rad/m.
    pub fn freq_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.extent
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(GridSpec::new(63, 1.0).is_err());
        assert!(GridSpec::new(100, 1.0).is_err());
        assert!(GridSpec::new(32, 1.0).is_err());
        assert!(GridSpec::new(64, 0.0).is_err());
        assert!(GridSpec::new(64, -1.0).is_err());
        assert!(GridSpec::new(64, 1.0).is_ok());
    }

    #[test]
    fn coords_are_centred() {
        let g = GridSpec::new(128, 2.0).unwrap();
        assert_eq!(g.spacing(), 2.0 / 128.0);
        assert_eq!(g.coord(64), 0.0);
        assert_eq!(g.coord(0), -1.0);
        assert!(g.coord(127) < 1.0);
    }

    #[test]
    fn fft_frequencies_wrap() {
        let g = GridSpec::new(64, 2.0).unwrap();
        assert_eq!(g.angular_freq(0), 0.0);
        let dk = g.freq_spacing();
        assert!((g.angular_freq(1) - dk).abs() < 1e-12);
        assert!((g.angular_freq(63) + dk).abs() < 1e-12);
    }
}
