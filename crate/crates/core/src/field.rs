//! Sampled two-dimensional complex optical fields.

use num_complex::Complex64;

use crate::grid::GridSpec;

/// A sampled scalar optical field on a [`GridSpec`], row-major, with
/// amplitudes in √(W/m²) per sample, and the optical wavelength it is
/// defined for.
///
/// Fields are immutable values in the public API: every propagation or
/// pupil operation returns a new field, so realizations can be shared
/// freely across threads.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: GridSpec,
    wavelength: f64,
    amplitudes: Vec<Complex64>,
}

impl ComplexField {
    /// Build a field from raw row-major samples. Panics if the buffer does
    /// not match the grid (programming error, not input error).
    pub fn from_samples(grid: GridSpec, wavelength: f64, amplitudes: Vec<Complex64>) -> Self {
        assert_eq!(
            amplitudes.len(),
            grid.n_points() * grid.n_points(),
            "sample buffer does not match grid"
        );
        assert!(wavelength > 0.0, "wavelength must be positive");
        Self {
            grid,
            wavelength,
            amplitudes,
        }
    }

    pub fn zeros(grid: GridSpec, wavelength: f64) -> Self {
        let n = grid.n_points();
        Self::from_samples(grid, wavelength, vec![Complex64::new(0.0, 0.0); n * n])
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub(crate) fn into_samples(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Replace the grid descriptor (used when a transform changes the
    /// physical sample spacing, e.g. pupil plane -> focal plane).
    pub(crate) fn with_grid(mut self, grid: GridSpec) -> Self {
        assert_eq!(grid.n_points() * grid.n_points(), self.amplitudes.len());
        self.grid = grid;
        self
    }

    pub fn sample(&self, row: usize, col: usize) -> Complex64 {
        self.amplitudes[row * self.grid.n_points() + col]
    }

    /// Intensity |a|² at a sample, W/m².
    pub fn intensity(&self, row: usize, col: usize) -> f64 {
        self.sample(row, col).norm_sqr()
    }

    /// Total power Σ|a|²·Δx², watts.
    pub fn total_power(&self) -> f64 {
        let cell = self.grid.spacing() * self.grid.spacing();
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * cell
    }

    /// Scale every sample by a complex factor.
    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for a in out.amplitudes.iter_mut() {
            *a *= factor;
        }
        out
    }

    /// Effective beam radius from intensity second moments about the
    /// centroid: w = 2·σ_x for a Gaussian with 1/e² intensity radius w.
    /// Averages the two transverse axes.
    pub fn second_moment_radius(&self) -> f64 {
        let n = self.grid.n_points();
        let mut p = 0.0;
        let mut mx = 0.0;
        let mut my = 0.0;
        for row in 0..n {
            let y = self.grid.coord(row);
            for col in 0..n {
                let x = self.grid.coord(col);
                let i = self.intensity(row, col);
                p += i;
                mx += i * x;
                my += i * y;
            }
        }
        if p <= 0.0 {
            return 0.0;
        }
        let (cx, cy) = (mx / p, my / p);
        let mut vx = 0.0;
        let mut vy = 0.0;
        for row in 0..n {
            let y = self.grid.coord(row) - cy;
            for col in 0..n {
                let x = self.grid.coord(col) - cx;
                let i = self.intensity(row, col);
                vx += i * x * x;
                vy += i * y * y;
            }
        }
        (2.0 * ((vx + vy) / (2.0 * p)).sqrt()).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_uses_cell_area() {
        let grid = GridSpec::new(64, 2.0).unwrap();
        let mut f = ComplexField::zeros(grid, 850e-9);
        f.samples_mut()[0] = Complex64::new(2.0, 0.0);
        let cell = grid.spacing() * grid.spacing();
        assert!((f.total_power() - 4.0 * cell).abs() < 1e-15);
    }

    #[test]
    fn scaling_scales_power_quadratically() {
        let grid = GridSpec::new(64, 1.0).unwrap();
        let mut f = ComplexField::zeros(grid, 850e-9);
        for (i, a) in f.samples_mut().iter_mut().enumerate() {
            *a = Complex64::new((i % 7) as f64, (i % 3) as f64);
        }
        let p0 = f.total_power();
        let g = f.scaled(Complex64::new(0.0, 3.0));
        assert!((g.total_power() - 9.0 * p0).abs() < 1e-9 * p0);
    }
}
