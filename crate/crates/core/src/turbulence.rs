//! Turbulent-layer model: Hufnagel-Valley C_n² profile, von Kármán phase
//! screens synthesised by FFT with subharmonic low-frequency augmentation,
//! and split-step propagation through the layer.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::Fft2d;
use crate::field::ComplexField;
use crate::grid::GridSpec;
use crate::propagate::{propagate_numeric, PropagationError};
use crate::seeds::{derive_seed, SeedDomain};

#[derive(Debug, Error)]
pub enum TurbulenceError {
    #[error("invalid turbulence profile: {0}")]
    Profile(String),
    #[error("sampling violation at hop {hop} (slab top {altitude} m): {source}")]
    Sampling {
        hop: usize,
        altitude: f64,
        #[source]
        source: PropagationError,
    },
}

/// Altitude profile and screen placement for the turbulent layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceProfile {
    /// Ground-level turbulence strength A, m^(-2/3).
    pub ground_strength: f64,
    /// High-altitude wind speed v, m/s.
    pub wind_speed: f64,
    /// Inner scale l0, metres.
    pub inner_scale: f64,
    /// Outer scale L0, metres.
    pub outer_scale: f64,
    /// Height of the turbulent layer above the receiver, metres.
    pub turbulent_layer_height: f64,
    /// Phase-screen spacing within the layer, metres.
    pub screen_spacing: f64,
    /// Total satellite-to-ground link distance, metres.
    pub total_link_distance: f64,
    /// Zenith angle of the (otherwise vertical) path, degrees; scales the
    /// per-slab C_n² path integrals by sec(ζ).
    pub zenith_angle_deg: f64,
    /// Consolidate the layer into this many r0-equivalent screens instead of
    /// one per `screen_spacing` (cheaper runs; `None` keeps full placement).
    pub screen_count_override: Option<usize>,
}

impl Default for TurbulenceProfile {
    fn default() -> Self {
        Self {
            ground_strength: 1.7e-14,
            wind_speed: 21.0,
            inner_scale: 0.005,
            outer_scale: 20.0,
            turbulent_layer_height: 8_000.0,
            screen_spacing: 50.0,
            total_link_distance: 1.2e6,
            zenith_angle_deg: 0.0,
            screen_count_override: None,
        }
    }
}

impl TurbulenceProfile {
    pub fn validate(&self) -> Result<(), TurbulenceError> {
        let fail = |m: String| Err(TurbulenceError::Profile(m));
        if !(self.ground_strength > 0.0) {
            return fail(format!("A must be > 0, got {}", self.ground_strength));
        }
        if !(self.wind_speed > 0.0) {
            return fail(format!("wind speed must be > 0, got {}", self.wind_speed));
        }
        if !(self.inner_scale > 0.0 && self.inner_scale < self.outer_scale) {
            return fail(format!(
                "need 0 < l0 < L0, got l0 = {}, L0 = {}",
                self.inner_scale, self.outer_scale
            ));
        }
        if !(self.screen_spacing > 0.0) {
            return fail("screen spacing must be > 0".into());
        }
        let ratio = self.turbulent_layer_height / self.screen_spacing;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return fail(format!(
                "screen spacing {} m must divide layer height {} m",
                self.screen_spacing, self.turbulent_layer_height
            ));
        }
        if let Some(c) = self.screen_count_override {
            if c == 0 {
                return fail("screen count override must be >= 1".into());
            }
        }
        if !(self.turbulent_layer_height < self.total_link_distance) {
            return fail(format!(
                "layer height {} m must be below link distance {} m",
                self.turbulent_layer_height, self.total_link_distance
            ));
        }
        if !(0.0..90.0).contains(&self.zenith_angle_deg) {
            return fail(format!(
                "zenith angle must be in [0, 90), got {}",
                self.zenith_angle_deg
            ));
        }
        Ok(())
    }

    /// Number of phase screens with the current placement plan.
    pub fn screen_count(&self) -> usize {
        self.screen_count_override
            .unwrap_or_else(|| (self.turbulent_layer_height / self.screen_spacing).round() as usize)
    }

    /// Effective spacing between screens, metres.
    pub fn effective_spacing(&self) -> f64 {
        self.turbulent_layer_height / self.screen_count() as f64
    }

    fn secant_zenith(&self) -> f64 {
        1.0 / self.zenith_angle_deg.to_radians().cos()
    }
}

/// Hufnagel-Valley refractive-index structure constant at altitude h:
///
///   C_n²(h) = 0.00594 (v/27)² (10⁻⁵h)¹⁰ e^(−h/1000)
///           + 2.7×10⁻¹⁶ e^(−h/1500) + A e^(−h/100)
pub fn cn2_at_altitude(profile: &TurbulenceProfile, h: f64) -> f64 {
    assert!(h >= 0.0, "altitude must be >= 0");
    let wind_term = 0.00594 * (profile.wind_speed / 27.0).powi(2) * (1e-5 * h).powi(10)
        * (-h / 1000.0).exp();
    let high_term = 2.7e-16 * (-h / 1500.0).exp();
    let ground_term = profile.ground_strength * (-h / 100.0).exp();
    wind_term + high_term + ground_term
}

/// ∫ C_n²(h) dh over [h_low, h_high] by adaptive Simpson quadrature,
/// relative tolerance well below 1e-6.
pub fn slab_cn2_integral(profile: &TurbulenceProfile, h_low: f64, h_high: f64) -> f64 {
    assert!(h_low <= h_high && h_low >= 0.0);
    let f = |h: f64| cn2_at_altitude(profile, h);
    adaptive_simpson(&f, h_low, h_high, 1e-10, 30)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(f, a, fa, m, fm, flm);
        let right = simpson(f, m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * eps, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * eps, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(f, a, fa, b, fb, fm);
    let scale = whole.abs().max(1e-300);
    recurse(f, a, fa, b, fb, fm, whole, rel_tol * scale, depth)
}

/// Fried parameter of one turbulence slab:
/// r0 = [0.423 k² sec(ζ) ∫C_n² dh]^(−3/5). A zero-thickness (or zero-C_n²)
/// slab returns +∞, the "no turbulence" sentinel that yields a zero screen.
pub fn slab_r0(profile: &TurbulenceProfile, h_low: f64, h_high: f64, wavelength: f64) -> f64 {
    let integral = slab_cn2_integral(profile, h_low, h_high) * profile.secant_zenith();
    if integral <= 0.0 {
        return f64::INFINITY;
    }
    let k = 2.0 * std::f64::consts::PI / wavelength;
    (0.423 * k * k * integral).powf(-3.0 / 5.0)
}

/// Modified von Kármán spectrum constants:
///
///   Φ_n(κ) = β₁ C_n² [1 + β₂(κ/κ_l) − β₃(κ/κ_l)^(7/6)] exp(−κ²/κ_l²) / (κ₀²+κ²)^(11/6)
///
/// with β₁ = 0.033, β₂ = 1.802, β₃ = 0.254, κ_l = 3.3/l0, κ₀ = 2π/L0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// Inner-scale frequency κ_l = 3.3/l0, rad/m.
    pub kappa_l: f64,
    /// Outer-scale frequency κ₀ = 2π/L0, rad/m.
    pub kappa_0: f64,
}

impl SpectrumParams {
    pub fn from_scales(inner_scale: f64, outer_scale: f64) -> Self {
        assert!(inner_scale > 0.0 && inner_scale < outer_scale);
        Self {
            beta1: 0.033,
            beta2: 1.802,
            beta3: 0.254,
            kappa_l: 3.3 / inner_scale,
            kappa_0: 2.0 * std::f64::consts::PI / outer_scale,
        }
    }

    pub fn from_profile(profile: &TurbulenceProfile) -> Self {
        Self::from_scales(profile.inner_scale, profile.outer_scale)
    }

    /// Phase power spectral density (rad²·m²) of a slab with Fried parameter
    /// r0, as a function of radial angular frequency κ (rad/m):
    ///
    ///   Φ_φ(κ) = (2π β₁ / 0.423) r0^(−5/3) · bracket(κ) · e^(−κ²/κ_l²) / (κ₀²+κ²)^(11/6)
    ///
    /// normalised so the pure-Kolmogorov limit reproduces
    /// D_φ(r) = 6.88 (r/r0)^(5/3).
    pub fn phase_psd(&self, kappa: f64, r0: f64) -> f64 {
        let u = kappa / self.kappa_l;
        let bracket = (1.0 + self.beta2 * u - self.beta3 * u.powf(7.0 / 6.0)).max(0.0);
        let prefactor = 2.0 * std::f64::consts::PI * self.beta1 / 0.423;
        prefactor * r0.powf(-5.0 / 3.0) * bracket * (-u * u).exp()
            / (self.kappa_0 * self.kappa_0 + kappa * kappa).powf(11.0 / 6.0)
    }
}

/// One random phase screen.
#[derive(Debug, Clone)]
pub struct PhaseScreen {
    pub grid: GridSpec,
    /// Phase in radians, row-major, zero mean.
    pub phase: Vec<f64>,
    /// Altitude of the slab this screen represents, metres.
    pub altitude: f64,
    /// Fried parameter of the slab, metres.
    pub r0: f64,
}

/// FFT + subharmonic phase-screen synthesiser with the spectral amplitude
/// table precomputed for r0 = 1 m; per-screen work is then one batch of
/// Gaussian draws, one FFT and a handful of rank-1 low-frequency updates.
pub struct PhaseScreenSynth {
    grid: GridSpec,
    /// sqrt(Φ_φ(κ)·Δκ²) at r0 = 1 m for every FFT bin (DC zeroed).
    unit_amp: Vec<f64>,
    /// Subharmonic modes: (κx index m, κy index j, level, amplitude at r0 = 1).
    sub_modes: Vec<SubMode>,
    levels: usize,
    fft: Fft2d,
}

#[derive(Debug, Clone, Copy)]
struct SubMode {
    kx: f64,
    ky: f64,
    amp: f64,
}

impl PhaseScreenSynth {
    pub fn new(spectrum: SpectrumParams, grid: GridSpec, subharmonic_levels: usize) -> Self {
        let n = grid.n_points();
        let dk = grid.freq_spacing();
        let mut unit_amp = vec![0.0; n * n];
        for row in 0..n {
            let ky = grid.angular_freq(row);
            for col in 0..n {
                let kx = grid.angular_freq(col);
                if row == 0 && col == 0 {
                    continue; // piston handled by subharmonics / removal
                }
                let kappa = (kx * kx + ky * ky).sqrt();
                unit_amp[row * n + col] = (spectrum.phase_psd(kappa, 1.0) * dk * dk).sqrt();
            }
        }
        // subharmonic grid: level p tiles the DC cell with 3^-p Δκ spacing
        let mut sub_modes = Vec::new();
        for level in 1..=subharmonic_levels {
            let dkp = dk / 3f64.powi(level as i32);
            for mj in -1i32..=1 {
                for mi in -1i32..=1 {
                    if mi == 0 && mj == 0 {
                        continue;
                    }
                    let kx = mi as f64 * dkp;
                    let ky = mj as f64 * dkp;
                    let kappa = (kx * kx + ky * ky).sqrt();
                    let amp = (spectrum.phase_psd(kappa, 1.0) * dkp * dkp).sqrt();
                    sub_modes.push(SubMode { kx, ky, amp });
                }
            }
        }
        Self {
            grid,
            unit_amp,
            sub_modes,
            levels: subharmonic_levels,
            fft: Fft2d::new(n),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn subharmonic_levels(&self) -> usize {
        self.levels
    }

    /// Generate the screen for a slab with Fried parameter `r0`; bit-identical
    /// for identical (r0, seed). `r0 = +∞` yields the all-zero screen.
    pub fn generate(&self, r0: f64, altitude: f64, seed: u64) -> PhaseScreen {
        let n = self.grid.n_points();
        if !r0.is_finite() {
            return PhaseScreen {
                grid: self.grid,
                phase: vec![0.0; n * n],
                altitude,
                r0,
            };
        }
        assert!(r0 > 0.0, "r0 must be positive");
        let scale = r0.powf(-5.0 / 6.0); // sqrt of the r0^{-5/3} PSD factor
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        // FFT part: circular-Gaussian spectral samples
        let mut spec: Vec<Complex64> = self
            .unit_amp
            .iter()
            .map(|&a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * (a * scale)
            })
            .collect();
        let mut scratch = self.fft.make_scratch();
        self.fft.forward(&mut spec, &mut scratch);
        let mut phase: Vec<f64> = spec.iter().map(|c| c.re).collect();

        // subharmonic part: rank-1 accumulation of the low-frequency modes,
        // grouped by κy so each group costs one pass over the grid
        if !self.sub_modes.is_empty() {
            let coeffs: Vec<Complex64> = self
                .sub_modes
                .iter()
                .map(|m| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * (m.amp * scale)
                })
                .collect();
            let xs: Vec<f64> = (0..n).map(|i| self.grid.coord(i)).collect();
            let mut groups: Vec<(f64, Vec<(f64, Complex64)>)> = Vec::new();
            for (mode, &c) in self.sub_modes.iter().zip(&coeffs) {
                match groups.iter_mut().find(|(ky, _)| *ky == mode.ky) {
                    Some((_, v)) => v.push((mode.kx, c)),
                    None => groups.push((mode.ky, vec![(mode.kx, c)])),
                }
            }
            let mut row_vec = vec![Complex64::new(0.0, 0.0); n];
            for (ky, modes) in &groups {
                for (x, rv) in xs.iter().zip(row_vec.iter_mut()) {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &(kx, c) in modes {
                        acc += c * Complex64::from_polar(1.0, kx * x);
                    }
                    *rv = acc;
                }
                for (row, &y) in xs.iter().enumerate() {
                    let cy = Complex64::from_polar(1.0, ky * y);
                    let out = &mut phase[row * n..(row + 1) * n];
                    for (p, g) in out.iter_mut().zip(&row_vec) {
                        *p += cy.re * g.re - cy.im * g.im;
                    }
                }
            }
        }

        // remove piston
        let mean = phase.iter().sum::<f64>() / (n * n) as f64;
        for p in phase.iter_mut() {
            *p -= mean;
        }
        PhaseScreen {
            grid: self.grid,
            phase,
            altitude,
            r0,
        }
    }
}

/// Convenience wrapper around [`PhaseScreenSynth`] for one-off screens.
pub fn generate_phase_screen(
    spectrum: SpectrumParams,
    r0: f64,
    grid: GridSpec,
    rng_seed: u64,
    subharmonic_levels: usize,
) -> PhaseScreen {
    PhaseScreenSynth::new(spectrum, grid, subharmonic_levels).generate(r0, 0.0, rng_seed)
}

/// Precomputed split-step plan for the turbulent layer: per-slab Fried
/// parameters plus a shared screen synthesiser.
pub struct TurbulentLayerPlan {
    /// (slab top altitude, slab centre altitude, r0) from layer top downward.
    slabs: Vec<(f64, f64, f64)>,
    spacing: f64,
    synth: PhaseScreenSynth,
}

impl TurbulentLayerPlan {
    pub fn new(
        profile: &TurbulenceProfile,
        spectrum: SpectrumParams,
        grid: GridSpec,
        wavelength: f64,
        subharmonic_levels: usize,
    ) -> Result<Self, TurbulenceError> {
        profile.validate()?;
        let count = profile.screen_count();
        let spacing = profile.effective_spacing();
        let mut slabs = Vec::with_capacity(count);
        for i in 0..count {
            let top = profile.turbulent_layer_height - i as f64 * spacing;
            let bottom = top - spacing;
            let r0 = slab_r0(profile, bottom.max(0.0), top, wavelength);
            slabs.push((top, 0.5 * (top + bottom), r0));
        }
        Ok(Self {
            slabs,
            spacing,
            synth: PhaseScreenSynth::new(spectrum, grid, subharmonic_levels),
        })
    }

    /// Build a plan directly from per-slab Fried parameters (layer top
    /// first), e.g. for consolidated or degenerate-turbulence layers.
    pub fn from_slab_r0s(
        r0s: &[f64],
        layer_height: f64,
        spectrum: SpectrumParams,
        grid: GridSpec,
        subharmonic_levels: usize,
    ) -> Self {
        assert!(!r0s.is_empty() && layer_height > 0.0);
        let spacing = layer_height / r0s.len() as f64;
        let slabs = r0s
            .iter()
            .enumerate()
            .map(|(i, &r0)| {
                let top = layer_height - i as f64 * spacing;
                (top, top - 0.5 * spacing, r0)
            })
            .collect();
        Self {
            slabs,
            spacing,
            synth: PhaseScreenSynth::new(spectrum, grid, subharmonic_levels),
        }
    }

    pub fn slab_r0s(&self) -> Vec<f64> {
        self.slabs.iter().map(|s| s.2).collect()
    }

    pub fn screen_count(&self) -> usize {
        self.slabs.len()
    }

    /// Run the split-step chain: for each slab from the layer top downward,
    /// multiply by the slab's random screen and diffract over one spacing.
    /// Per-screen seeds derive from `realization_seed` and the slab index.
    pub fn propagate(
        &self,
        field_at_layer_top: &ComplexField,
        realization_seed: u64,
        fft: &Fft2d,
    ) -> Result<ComplexField, TurbulenceError> {
        let mut field = field_at_layer_top.clone();
        for (hop, &(top, centre, r0)) in self.slabs.iter().enumerate() {
            let seed = derive_seed(realization_seed, SeedDomain::PhaseScreen, hop as u64);
            let screen = self.synth.generate(r0, centre, seed);
            apply_phase_screen(&mut field, &screen);
            field = propagate_numeric(&field, self.spacing, fft).map_err(|source| {
                TurbulenceError::Sampling {
                    hop,
                    altitude: top,
                    source,
                }
            })?;
        }
        Ok(field)
    }
}

/// Pointwise multiply by e^(iφ); exactly power-preserving.
pub fn apply_phase_screen(field: &mut ComplexField, screen: &PhaseScreen) {
    assert_eq!(field.grid(), screen.grid, "screen grid mismatch");
    for (a, &p) in field.samples_mut().iter_mut().zip(&screen.phase) {
        *a *= Complex64::from_polar(1.0, p);
    }
}

/// One split-step pass through the whole layer with a throwaway plan.
pub fn propagate_turbulent_layer(
    field_at_layer_top: &ComplexField,
    profile: &TurbulenceProfile,
    spectrum: SpectrumParams,
    rng_seed: u64,
    subharmonic_levels: usize,
) -> Result<ComplexField, TurbulenceError> {
    let fft = Fft2d::new(field_at_layer_top.grid().n_points());
    let plan = TurbulentLayerPlan::new(
        profile,
        spectrum,
        field_at_layer_top.grid(),
        field_at_layer_top.wavelength(),
        subharmonic_levels,
    )?;
    plan.propagate(field_at_layer_top, rng_seed, &fft)
}

/// Ensemble-averaged phase structure function D(r) = <[φ(x+r) − φ(x)]²>
/// along both grid axes (no wrap-around pairs), for the given pixel
/// separations. Returns (r, D) pairs.
pub fn phase_structure_function(
    screens: &[PhaseScreen],
    separations_px: &[usize],
) -> Vec<(f64, f64)> {
    assert!(!screens.is_empty());
    let grid = screens[0].grid;
    let n = grid.n_points();
    separations_px
        .iter()
        .map(|&s| {
            assert!(s > 0 && s < n);
            let mut acc = 0.0;
            let mut count = 0u64;
            for screen in screens {
                let ph = &screen.phase;
                for row in 0..n {
                    let base = row * n;
                    for col in 0..n - s {
                        let d = ph[base + col + s] - ph[base + col];
                        acc += d * d;
                    }
                }
                for row in 0..n - s {
                    let base = row * n;
                    let shifted = (row + s) * n;
                    for col in 0..n {
                        let d = ph[shifted + col] - ph[base + col];
                        acc += d * d;
                    }
                }
                count += 2 * (n * (n - s)) as u64;
            }
            (s as f64 * grid.spacing(), acc / count as f64)
        })
        .collect()
}
