//! Gaussian-beam source, receiver pupil and thin-lens focal-plane imaging.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::Fft2d;
use crate::field::ComplexField;
use crate::grid::GridSpec;

#[derive(Debug, Error, PartialEq)]
pub enum OpticsError {
    #[error("waist {waist} m unresolvable on grid (needs >= 4 samples, spacing {spacing} m)")]
    WaistUnresolvable { waist: f64, spacing: f64 },
    #[error("aperture diameter {aperture} m does not fit inside grid extent {extent} m")]
    ApertureTooLarge { aperture: f64, extent: f64 },
    #[error("{0}")]
    BadParameter(String),
}

/// Receiver front end: circular collecting aperture and thin imaging lens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverOptics {
    /// Collecting aperture diameter, metres.
    pub aperture_diameter: f64,
    /// Imaging lens focal length, metres.
    pub focal_length: f64,
}

impl Default for ReceiverOptics {
    fn default() -> Self {
        Self {
            aperture_diameter: 0.5,
            focal_length: 0.5,
        }
    }
}

impl ReceiverOptics {
    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.aperture_diameter > 0.0) {
            return Err(OpticsError::BadParameter(format!(
                "aperture diameter must be positive, got {}",
                self.aperture_diameter
            )));
        }
        if !(self.focal_length > 0.0) {
            return Err(OpticsError::BadParameter(format!(
                "focal length must be positive, got {}",
                self.focal_length
            )));
        }
        Ok(())
    }

    /// Focal-plane sample spacing Δu = λf / (n·Δx) for a pupil grid.
    pub fn focal_spacing(&self, grid: GridSpec, wavelength: f64) -> f64 {
        wavelength * self.focal_length / grid.extent()
    }
}

/// Analytic fundamental-mode Gaussian beam parameters at a distance z from
/// the waist: w(z) = w₀√(1+(z/z_R)²), R(z) = z(1+(z_R/z)²), ζ(z) = atan(z/z_R),
/// with Rayleigh range z_R = πw₀²/λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeamState {
    /// 1/e² intensity radius at z, metres.
    pub waist_at_z: f64,
    /// Wavefront radius of curvature at z, metres (infinite at the waist).
    pub radius_of_curvature: f64,
    /// Gouy phase at z, radians.
    pub gouy_phase: f64,
}

/// Carry a Gaussian beam analytically over `distance` of vacuum.
pub fn propagate_vacuum_analytic(
    waist: f64,
    wavelength: f64,
    distance: f64,
) -> Result<GaussianBeamState, OpticsError> {
    if !(waist > 0.0) || !(wavelength > 0.0) {
        return Err(OpticsError::BadParameter(
            "waist and wavelength must be positive".into(),
        ));
    }
    if distance < 0.0 {
        return Err(OpticsError::BadParameter(format!(
            "distance must be >= 0, got {distance}"
        )));
    }
    let z_r = std::f64::consts::PI * waist * waist / wavelength;
    let ratio = distance / z_r;
    Ok(GaussianBeamState {
        waist_at_z: waist * (1.0 + ratio * ratio).sqrt(),
        radius_of_curvature: if distance == 0.0 {
            f64::INFINITY
        } else {
            distance * (1.0 + 1.0 / (ratio * ratio))
        },
        gouy_phase: ratio.atan(),
    })
}

/// Sample a fundamental-mode Gaussian at its waist, centred on the grid,
/// carrying total power `power` watts.
pub fn make_gaussian_beam(
    grid: GridSpec,
    waist: f64,
    wavelength: f64,
    power: f64,
) -> Result<ComplexField, OpticsError> {
    sample_gaussian(grid, waist, f64::INFINITY, 0.0, wavelength, power)
}

/// Sample a Gaussian beam at distance `z` from a waist `w0`, i.e. with the
/// analytic w(z), R(z) and Gouy phase of that plane. Used to enter the
/// numerical grid after a long vacuum segment.
pub fn gaussian_beam_at_distance(
    grid: GridSpec,
    waist: f64,
    wavelength: f64,
    power: f64,
    distance: f64,
) -> Result<ComplexField, OpticsError> {
    let state = propagate_vacuum_analytic(waist, wavelength, distance)?;
    sample_gaussian(
        grid,
        state.waist_at_z,
        state.radius_of_curvature,
        -state.gouy_phase,
        wavelength,
        power,
    )
}

fn sample_gaussian(
    grid: GridSpec,
    w: f64,
    curvature_radius: f64,
    extra_phase: f64,
    wavelength: f64,
    power: f64,
) -> Result<ComplexField, OpticsError> {
    if !(power > 0.0) {
        return Err(OpticsError::BadParameter(format!(
            "power must be positive, got {power}"
        )));
    }
    if w < 4.0 * grid.spacing() {
        return Err(OpticsError::WaistUnresolvable {
            waist: w,
            spacing: grid.spacing(),
        });
    }
    let n = grid.n_points();
    let peak = (2.0 * power / (std::f64::consts::PI * w * w)).sqrt();
    let k = 2.0 * std::f64::consts::PI / wavelength;
    let curv = if curvature_radius.is_finite() {
        k / (2.0 * curvature_radius)
    } else {
        0.0
    };
    let mut amps = Vec::with_capacity(n * n);
    for row in 0..n {
        let y = grid.coord(row);
        for col in 0..n {
            let x = grid.coord(col);
            let r2 = x * x + y * y;
            let mag = peak * (-r2 / (w * w)).exp();
            let phase = curv * r2 + extra_phase;
            amps.push(Complex64::from_polar(mag, phase));
        }
    }
    Ok(ComplexField::from_samples(grid, wavelength, amps))
}

/// Zero every sample outside the circular pupil of diameter D (hard edge:
/// a sample survives iff its centre lies within radius D/2).
pub fn apply_aperture(
    field: &ComplexField,
    optics: &ReceiverOptics,
) -> Result<ComplexField, OpticsError> {
    optics.validate()?;
    let grid = field.grid();
    if optics.aperture_diameter > grid.extent() {
        return Err(OpticsError::ApertureTooLarge {
            aperture: optics.aperture_diameter,
            extent: grid.extent(),
        });
    }
    let r2_max = (optics.aperture_diameter / 2.0) * (optics.aperture_diameter / 2.0);
    let n = grid.n_points();
    let mut out = field.clone();
    let samples = out.samples_mut();
    for row in 0..n {
        let y = grid.coord(row);
        for col in 0..n {
            let x = grid.coord(col);
            if x * x + y * y > r2_max {
                samples[row * n + col] = Complex64::new(0.0, 0.0);
            }
        }
    }
    Ok(out)
}

/// Fraction of the transmitted power collected by the pupil:
/// η = P(aperture field) / P(transmitted).
pub fn transmittance(aperture_field: &ComplexField, transmitted_power: f64) -> f64 {
    assert!(transmitted_power > 0.0, "transmitted power must be positive");
    aperture_field.total_power() / transmitted_power
}

/// Image the pupil field onto the lens focal plane.
///
/// Thin-lens Fraunhofer mapping: the focal-plane field is the scaled 2-D
/// Fourier transform of the pupil field, sampled at Δu = λf/(n·Δx), with
/// u = 0 at the grid centre. The quadratic lens phase only shifts the
/// overall phase at focus and is dropped; the scaling keeps Σ|a|²Δu² equal
/// to the pupil power (discrete Parseval).
pub fn focal_plane_field(
    aperture_field: &ComplexField,
    optics: &ReceiverOptics,
    fft: &Fft2d,
) -> ComplexField {
    let grid = aperture_field.grid();
    let n = grid.n_points();
    assert_eq!(fft.size(), n, "FFT plan does not match grid");
    let wavelength = aperture_field.wavelength();
    let du = optics.focal_spacing(grid, wavelength);

    // centre the transform: pre/post phase flips implement fftshift exactly
    // for even n, so u = 0 lands on index n/2.
    let mut data = aperture_field.clone().into_samples();
    apply_checkerboard(&mut data, n);
    let mut scratch = fft.make_scratch();
    fft.forward(&mut data, &mut scratch);
    apply_checkerboard(&mut data, n);

    // amplitude scale Δx²/(λf) = Δx/(n·Δu) keeps the power integral exact
    let scale = grid.spacing() * grid.spacing() / (wavelength * optics.focal_length);
    for v in data.iter_mut() {
        *v *= scale;
    }

    let focal_grid = GridSpec::new(n, du * n as f64).expect("focal grid");
    ComplexField::from_samples(grid, wavelength, data).with_grid(focal_grid)
}

fn apply_checkerboard(data: &mut [Complex64], n: usize) {
    for row in 0..n {
        for col in 0..n {
            if (row + col) % 2 == 1 {
                data[row * n + col] = -data[row * n + col];
            }
        }
    }
}

/// Least-squares 1/e² radius of a centred Gaussian intensity profile;
/// falls back to the second-moment estimate for non-Gaussian fields.
pub fn fitted_beam_radius(field: &ComplexField) -> f64 {
    field.second_moment_radius()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize, extent: f64) -> GridSpec {
        GridSpec::new(n, extent).unwrap()
    }

    #[test]
    fn gaussian_power_is_normalised() {
        let g = grid(1024, 1.0);
        let f = make_gaussian_beam(g, 0.15, 850e-9, 1.0).unwrap();
        // truncation at the 1 m window loses a little of the far tail
        assert_relative_eq!(f.total_power(), 1.0, max_relative = 5e-3);
        let n = g.n_points();
        let peak = f.sample(n / 2, n / 2).norm();
        // amplitude at r = w0 is peak / e
        let col = n / 2 + (0.15 / g.spacing()).round() as usize;
        let at_waist = f.sample(n / 2, col).norm();
        let r = g.coord(col);
        let expected = peak * (-(r * r) / (0.15 * 0.15)).exp();
        assert_relative_eq!(at_waist, expected, max_relative = 1e-12);
        assert_relative_eq!(at_waist, peak * (-1.0_f64).exp(), max_relative = 2e-2);
    }

    #[test]
    fn gaussian_is_mirror_symmetric() {
        let g = grid(128, 1.0);
        let f = make_gaussian_beam(g, 0.1, 850e-9, 1.0).unwrap();
        let n = g.n_points();
        for row in 1..n {
            for col in 1..n {
                let a = f.sample(row, col);
                let b = f.sample(row, n - col);
                assert!((a - b).norm() < 1e-14 * (a.norm() + 1e-300));
            }
        }
    }

    #[test]
    fn unresolvable_waist_is_rejected() {
        let g = grid(64, 1.0);
        let err = make_gaussian_beam(g, 0.01, 850e-9, 1.0).unwrap_err();
        assert!(matches!(err, OpticsError::WaistUnresolvable { .. }));
    }

    #[test]
    fn vacuum_analytic_at_zero_distance() {
        let s = propagate_vacuum_analytic(0.15, 850e-9, 0.0).unwrap();
        assert_eq!(s.waist_at_z, 0.15);
        assert!(s.radius_of_curvature.is_infinite());
        assert_eq!(s.gouy_phase, 0.0);
    }

    #[test]
    fn vacuum_analytic_long_haul() {
        // w0 = 0.15 m, λ = 850 nm: z_R ≈ 83.16 km, w(1192 km) ≈ 2.155 m
        let s = propagate_vacuum_analytic(0.15, 850e-9, 1.192e6).unwrap();
        assert_relative_eq!(s.waist_at_z, 2.1553, max_relative = 1e-3);
    }

    #[test]
    fn vacuum_radius_is_monotone() {
        let mut last = 0.0;
        for step in 0..50 {
            let z = step as f64 * 30_000.0;
            let w = propagate_vacuum_analytic(0.15, 850e-9, z).unwrap().waist_at_z;
            assert!(w >= last);
            last = w;
        }
    }

    #[test]
    fn aperture_retains_area_fraction_of_uniform_field() {
        let g = grid(512, 1.0);
        let uniform =
            ComplexField::from_samples(g, 850e-9, vec![Complex64::new(1.0, 0.0); 512 * 512]);
        let optics = ReceiverOptics {
            aperture_diameter: 0.5,
            focal_length: 0.5,
        };
        let cut = apply_aperture(&uniform, &optics).unwrap();
        let ratio = cut.total_power() / uniform.total_power();
        let expected = std::f64::consts::PI * 0.25 * 0.25 / 1.0;
        // one-pixel rim tolerance
        let rim = 2.0 * std::f64::consts::PI * 0.25 * g.spacing() / 1.0;
        assert!(
            (ratio - expected).abs() < rim,
            "ratio {ratio}, expected {expected} ± {rim}"
        );
    }

    #[test]
    fn aperture_leaves_interior_field_unchanged_and_is_idempotent() {
        let g = grid(256, 2.0);
        let f = make_gaussian_beam(g, 0.05, 850e-9, 1.0).unwrap();
        let optics = ReceiverOptics {
            aperture_diameter: 1.0,
            focal_length: 0.5,
        };
        let once = apply_aperture(&f, &optics).unwrap();
        // beam of w = 5 cm is entirely inside a 1 m pupil
        assert_relative_eq!(once.total_power(), f.total_power(), max_relative = 1e-9);
        let twice = apply_aperture(&once, &optics).unwrap();
        assert_eq!(once.samples(), twice.samples());
    }

    #[test]
    fn aperture_larger_than_grid_is_rejected() {
        let g = grid(64, 1.0);
        let f = ComplexField::zeros(g, 850e-9);
        let optics = ReceiverOptics {
            aperture_diameter: 1.5,
            focal_length: 0.5,
        };
        assert!(matches!(
            apply_aperture(&f, &optics),
            Err(OpticsError::ApertureTooLarge { .. })
        ));
    }

    #[test]
    fn transmittance_bounds() {
        let g = grid(256, 2.0);
        let zero = ComplexField::zeros(g, 850e-9);
        assert_eq!(transmittance(&zero, 1.0), 0.0);
        let f = make_gaussian_beam(g, 0.05, 850e-9, 1.0).unwrap();
        let optics = ReceiverOptics {
            aperture_diameter: 1.0,
            focal_length: 0.5,
        };
        let cut = apply_aperture(&f, &optics).unwrap();
        let eta = transmittance(&cut, 1.0);
        assert!((eta - 1.0).abs() < 1e-3, "beam fully inside: eta = {eta}");
    }

    #[test]
    fn focal_plane_conserves_power_and_scales_with_f() {
        let g = grid(256, 2.0);
        let f = make_gaussian_beam(g, 0.2, 850e-9, 1.0).unwrap();
        let optics = ReceiverOptics {
            aperture_diameter: 1.0,
            focal_length: 0.5,
        };
        let cut = apply_aperture(&f, &optics).unwrap();
        let fft = Fft2d::new(256);
        let focal = focal_plane_field(&cut, &optics, &fft);
        assert_relative_eq!(
            focal.total_power(),
            cut.total_power(),
            max_relative = 1e-9
        );
        let du1 = focal.grid().spacing();
        let doubled = ReceiverOptics {
            focal_length: 1.0,
            ..optics
        };
        let focal2 = focal_plane_field(&cut, &doubled, &fft);
        assert_relative_eq!(focal2.grid().spacing(), 2.0 * du1, max_relative = 1e-12);
    }

    #[test]
    fn airy_first_zero_within_one_pixel() {
        // uniform circular pupil: first intensity null at 1.22 λf/D
        let g = grid(512, 2.0);
        let uniform =
            ComplexField::from_samples(g, 850e-9, vec![Complex64::new(1.0, 0.0); 512 * 512]);
        let optics = ReceiverOptics::default();
        let pupil = apply_aperture(&uniform, &optics).unwrap();
        let fft = Fft2d::new(512);
        let focal = focal_plane_field(&pupil, &optics, &fft);
        let n = 512;
        let centre = n / 2;
        // walk outward along +x to the first local minimum
        let mut first_zero_px = 0;
        for col in centre + 1..n - 1 {
            let here = focal.intensity(centre, col);
            let next = focal.intensity(centre, col + 1);
            if next > here {
                first_zero_px = col - centre;
                break;
            }
        }
        let du = focal.grid().spacing();
        let measured = first_zero_px as f64 * du;
        let expected = 1.22 * 850e-9 * 0.5 / 0.5;
        assert!(
            (measured - expected).abs() <= du,
            "airy first zero {measured} vs {expected} (Δu = {du})"
        );
        // and the peak is on axis
        let peak = focal.intensity(centre, centre);
        for col in 0..n {
            assert!(focal.intensity(centre, col) <= peak + 1e-12);
        }
    }
}
