//! Two-dimensional FFT helper built on rustfft, with cached plans.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse 2-D FFT plans for an n x n grid.
///
/// The forward transform is the plain unnormalised DFT; the inverse is
/// normalised by 1/n² so that `inverse(forward(x)) == x`.
pub struct Fft2d {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Scratch buffer sized for one batched row pass.
    pub fn make_scratch(&self) -> Vec<Complex64> {
        let len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        vec![Complex64::new(0.0, 0.0); len]
    }

    fn pass(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        debug_assert_eq!(data.len(), self.n * self.n);
        // rows
        plan.process_with_scratch(data, scratch);
        transpose_square(data, self.n);
        // columns (as rows of the transpose)
        plan.process_with_scratch(data, scratch);
        transpose_square(data, self.n);
    }

    pub fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.pass(&self.forward, data, scratch);
    }

    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.pass(&self.inverse, data, scratch);
        let norm = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= norm;
        }
    }
}

/// In-place transpose of a square row-major matrix, blocked for locality.
pub fn transpose_square(data: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}
