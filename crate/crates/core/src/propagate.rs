//! Free-space propagation of sampled fields by the angular-spectrum
//! (transfer-function) method.

use num_complex::Complex64;
use thiserror::Error;

use crate::fft::Fft2d;
use crate::field::ComplexField;

#[derive(Debug, Error, PartialEq)]
pub enum PropagationError {
    #[error(
        "angular-spectrum sampling criterion violated for distance {distance} m: \
         Δx² = {dx2:.3e} < λ·z/n = {required:.3e}; increase n_points to >= {n_required} \
         or shorten the hop to <= {z_max:.1} m"
    )]
    Undersampled {
        distance: f64,
        dx2: f64,
        required: f64,
        n_required: usize,
        z_max: f64,
    },
    #[error("propagation distance must be >= 0, got {0}")]
    NegativeDistance(f64),
}

/// Check Δx² >= λ·z/n for a hop of `distance` on the field's grid.
pub fn check_sampling(field: &ComplexField, distance: f64) -> Result<(), PropagationError> {
    if distance < 0.0 {
        return Err(PropagationError::NegativeDistance(distance));
    }
    let grid = field.grid();
    let dx = grid.spacing();
    let dx2 = dx * dx;
    let required = field.wavelength() * distance / grid.n_points() as f64;
    if dx2 < required {
        let n_required = (field.wavelength() * distance / dx2).ceil() as usize;
        let z_max = dx2 * grid.n_points() as f64 / field.wavelength();
        return Err(PropagationError::Undersampled {
            distance,
            dx2,
            required,
            n_required: n_required.next_power_of_two(),
            z_max,
        });
    }
    Ok(())
}

/// Propagate over `distance` metres of vacuum with the exact angular-spectrum
/// transfer function H(κ) = exp(i·z·√(k² − κ²)). Power-conserving for all
/// propagating components (evanescent components decay, but the grids used
/// here never reach them).
pub fn propagate_numeric(
    field: &ComplexField,
    distance: f64,
    fft: &Fft2d,
) -> Result<ComplexField, PropagationError> {
    check_sampling(field, distance)?;
    if distance == 0.0 {
        return Ok(field.clone());
    }
    let grid = field.grid();
    let n = grid.n_points();
    assert_eq!(fft.size(), n, "FFT plan does not match grid");
    let k = 2.0 * std::f64::consts::PI / field.wavelength();
    let k2 = k * k;

    let mut data = field.clone().into_samples();
    let mut scratch = fft.make_scratch();
    fft.forward(&mut data, &mut scratch);

    // radially symmetric kernel: precompute per-axis κ, combine per bin
    let freqs: Vec<f64> = (0..n).map(|i| grid.angular_freq(i)).collect();
    for (row, &ky) in freqs.iter().enumerate() {
        let ky2 = ky * ky;
        for (col, &kx) in freqs.iter().enumerate() {
            let kt2 = kx * kx + ky2;
            let h = if kt2 <= k2 {
                Complex64::from_polar(1.0, distance * (k2 - kt2).sqrt())
            } else {
                // evanescent: pure decay
                Complex64::new((-distance * (kt2 - k2).sqrt()).exp(), 0.0)
            };
            data[row * n + col] *= h;
        }
    }

    fft.inverse(&mut data, &mut scratch);
    Ok(ComplexField::from_samples(grid, field.wavelength(), data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::optics::{fitted_beam_radius, make_gaussian_beam, propagate_vacuum_analytic};
    use approx::assert_relative_eq;

    #[test]
    fn zero_distance_is_identity() {
        let g = GridSpec::new(128, 0.2).unwrap();
        let f = make_gaussian_beam(g, 0.02, 850e-9, 1.0).unwrap();
        let fft = Fft2d::new(128);
        let out = propagate_numeric(&f, 0.0, &fft).unwrap();
        assert_eq!(out.samples(), f.samples());
    }

    #[test]
    fn power_is_conserved() {
        let g = GridSpec::new(256, 0.2).unwrap();
        let f = make_gaussian_beam(g, 0.01, 850e-9, 1.0).unwrap();
        let fft = Fft2d::new(256);
        let out = propagate_numeric(&f, 20.0, &fft).unwrap();
        assert_relative_eq!(out.total_power(), f.total_power(), max_relative = 1e-9);
    }

    #[test]
    fn matches_analytic_gaussian_expansion() {
        // w0 = 10 mm, z_R ≈ 370 m; 1000 m in 50 m hops grows the beam 2.9x
        let n = 512;
        let g = GridSpec::new(n, 0.2).unwrap();
        let w0 = 0.010;
        let mut f = make_gaussian_beam(g, w0, 850e-9, 1.0).unwrap();
        let fft = Fft2d::new(n);
        let hops = 20;
        let hop = 50.0;
        for _ in 0..hops {
            f = propagate_numeric(&f, hop, &fft).unwrap();
        }
        let expected = propagate_vacuum_analytic(w0, 850e-9, hops as f64 * hop)
            .unwrap()
            .waist_at_z;
        let measured = fitted_beam_radius(&f);
        assert_relative_eq!(measured, expected, max_relative = 1e-2);
    }

    #[test]
    fn propagation_is_linear_in_the_field() {
        let g = GridSpec::new(128, 0.2).unwrap();
        let f = make_gaussian_beam(g, 0.02, 850e-9, 1.0).unwrap();
        let alpha = Complex64::new(0.3, -1.7);
        let fft = Fft2d::new(128);
        let a = propagate_numeric(&f.scaled(alpha), 10.0, &fft).unwrap();
        let b = propagate_numeric(&f, 10.0, &fft).unwrap().scaled(alpha);
        let peak = b.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let worst = a
            .samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12 * peak, "linearity violated: {worst}");
    }

    #[test]
    fn undersampled_hop_is_rejected_with_guidance() {
        let g = GridSpec::new(128, 0.1).unwrap();
        let f = make_gaussian_beam(g, 0.005, 850e-9, 1.0).unwrap();
        let fft = Fft2d::new(128);
        let err = propagate_numeric(&f, 5000.0, &fft).unwrap_err();
        match err {
            PropagationError::Undersampled {
                n_required, z_max, ..
            } => {
                assert!(n_required > 128);
                assert!(z_max < 5000.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
