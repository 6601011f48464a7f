//! Simulation configuration: structured TOML input, validation, presets
//! and the config hash embedded in every output.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detector::ArrayGeometry;
use crate::grid::GridSpec;
use crate::metrics::FormulaMode;
use crate::optics::ReceiverOptics;
use crate::strategies::StrategyKind;
use crate::turbulence::TurbulenceProfile;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Ground-level turbulence strength presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurbulencePreset {
    Weak,
    Moderate,
    Strong,
}

impl TurbulencePreset {
    /// Hufnagel-Valley ground strength A, m^(-2/3).
    pub fn ground_strength(&self) -> f64 {
        match self {
            TurbulencePreset::Weak => 1.7e-14,
            TurbulencePreset::Moderate => 1.7e-13,
            TurbulencePreset::Strong => 1.7e-11,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TurbulencePreset::Weak => "weak",
            TurbulencePreset::Moderate => "moderate",
            TurbulencePreset::Strong => "strong",
        }
    }

    pub const ALL: [TurbulencePreset; 3] = [
        TurbulencePreset::Weak,
        TurbulencePreset::Moderate,
        TurbulencePreset::Strong,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsSection {
    /// Optical wavelength, metres.
    pub wavelength_m: f64,
    /// Transmitter beam waist w0, metres.
    pub transmitter_waist_m: f64,
    /// Receiver aperture diameter, metres.
    pub aperture_diameter_m: f64,
    /// Receiver lens focal length, metres.
    pub focal_length_m: f64,
    /// Transmitted optical power, watts (sets the intensity scale only).
    pub transmitted_power_w: f64,
}

impl Default for OpticsSection {
    fn default() -> Self {
        Self {
            wavelength_m: 850e-9,
            transmitter_waist_m: 0.15,
            aperture_diameter_m: 0.5,
            focal_length_m: 0.5,
            transmitted_power_w: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_points: usize,
    /// Physical side length of the ground-level grid window, metres.
    pub extent_m: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_points: 1024,
            extent_m: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbulenceSection {
    pub presets: Vec<TurbulencePreset>,
    pub wind_speed_mps: f64,
    pub inner_scale_m: f64,
    pub outer_scale_m: f64,
    pub layer_height_m: f64,
    pub screen_spacing_m: f64,
    pub link_distance_m: f64,
    pub zenith_angle_deg: f64,
    /// Subharmonic augmentation depth for the phase screens.
    pub subharmonic_levels: usize,
    /// Consolidate the layer into this many r0-equivalent screens
    /// (cheap runs); absent = one screen per spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen_count_override: Option<usize>,
}

impl Default for TurbulenceSection {
    fn default() -> Self {
        Self {
            presets: TurbulencePreset::ALL.to_vec(),
            wind_speed_mps: 21.0,
            inner_scale_m: 0.005,
            outer_scale_m: 20.0,
            layer_height_m: 8_000.0,
            screen_spacing_m: 50.0,
            link_distance_m: 1.2e6,
            zenith_angle_deg: 0.0,
            subharmonic_levels: 3,
            screen_count_override: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub rows: usize,
    pub cols: usize,
    /// Element pitch in the focal plane, metres. Absent = the default
    /// heuristic 16·λf/extent, which puts the 8x8 footprint a few
    /// diffraction-limited speckles across.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_pitch_m: Option<f64>,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            element_pitch_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    /// Transmitter clock rate P_tx, Hz.
    pub p_tx_hz: f64,
    /// Mean noise photons per element per clock period, one sweep point each.
    pub noise_levels: Vec<f64>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            p_tx_hz: 1e8,
            noise_levels: vec![1e-8, 5e-8, 1e-7, 5e-7, 1e-6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Monte-Carlo realizations per preset (paired seeds across presets
    /// and strategies).
    pub realizations: usize,
    /// Held-out realizations per preset for threshold training.
    pub training_realizations: usize,
    pub master_seed: u64,
    pub strategies: Vec<StrategyKind>,
    pub formula_mode: FormulaMode,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            realizations: 200,
            training_realizations: 100,
            master_seed: 1,
            strategies: vec![
                StrategyKind::BestK,
                StrategyKind::GlobalThreshold,
                StrategyKind::CentralFour,
                StrategyKind::AllElements,
            ],
            formula_mode: FormulaMode::Corrected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub optics: OpticsSection,
    pub grid: GridSection,
    pub turbulence: TurbulenceSection,
    pub array: ArraySection,
    pub protocol: ProtocolSection,
    pub run: RunSection,
}

impl SimulationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimulationConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let grid = self.grid_spec()?;
        let o = &self.optics;
        for (name, v) in [
            ("wavelength_m", o.wavelength_m),
            ("transmitter_waist_m", o.transmitter_waist_m),
            ("aperture_diameter_m", o.aperture_diameter_m),
            ("focal_length_m", o.focal_length_m),
            ("transmitted_power_w", o.transmitted_power_w),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("optics.{name} must be positive, got {v}"));
            }
        }
        if o.aperture_diameter_m > self.grid.extent_m {
            return bad(format!(
                "aperture ({} m) exceeds grid extent ({} m)",
                o.aperture_diameter_m, self.grid.extent_m
            ));
        }
        let samples_across = o.aperture_diameter_m / grid.spacing();
        if samples_across < 32.0 {
            return bad(format!(
                "aperture resolved by only {samples_across:.1} samples (need >= 32); \
                 increase grid.n_points or shrink grid.extent_m"
            ));
        }
        if o.transmitter_waist_m < 4.0 * grid.spacing() {
            return bad("transmitter waist unresolvable on the grid".into());
        }
        self.profile_for(TurbulencePreset::Weak)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.turbulence.presets.is_empty() {
            return bad("turbulence.presets must not be empty".into());
        }
        if self.turbulence.subharmonic_levels < 3 {
            return bad("turbulence.subharmonic_levels must be >= 3".into());
        }
        if self.protocol.noise_levels.is_empty() {
            return bad("protocol.noise_levels must not be empty".into());
        }
        for &nb in &self.protocol.noise_levels {
            if !(nb > 0.0 && nb <= 0.1) {
                return bad(format!("noise level {nb} outside the accepted (0, 0.1]"));
            }
            if nb > 1e-2 {
                log::warn!("noise level {nb} is outside the n_b << 1 regime");
            }
        }
        if !(self.protocol.p_tx_hz > 0.0) {
            return bad("protocol.p_tx_hz must be positive".into());
        }
        if self.array.rows < 1 || self.array.cols < 1 {
            return bad("array must have at least one element".into());
        }
        // array footprint must fit inside the computed focal-plane window
        let geom = self.array_geometry();
        let focal_window =
            self.receiver_optics().focal_spacing(grid, o.wavelength_m) * grid.n_points() as f64;
        let footprint = geom.element_pitch * self.array.rows.max(self.array.cols) as f64;
        if footprint > focal_window {
            return bad(format!(
                "array footprint {footprint:.3e} m exceeds the focal-plane window {focal_window:.3e} m"
            ));
        }
        if self.run.realizations == 0 {
            return bad("run.realizations must be >= 1".into());
        }
        if self.run.strategies.is_empty() {
            return bad("run.strategies must not be empty".into());
        }
        if self
            .run
            .strategies
            .contains(&StrategyKind::GlobalThreshold)
            && self.run.training_realizations == 0
        {
            return bad("global_threshold strategy needs training_realizations >= 1".into());
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        GridSpec::new(self.grid.n_points, self.grid.extent_m)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn receiver_optics(&self) -> ReceiverOptics {
        ReceiverOptics {
            aperture_diameter: self.optics.aperture_diameter_m,
            focal_length: self.optics.focal_length_m,
        }
    }

    pub fn profile_for(&self, preset: TurbulencePreset) -> TurbulenceProfile {
        let t = &self.turbulence;
        TurbulenceProfile {
            ground_strength: preset.ground_strength(),
            wind_speed: t.wind_speed_mps,
            inner_scale: t.inner_scale_m,
            outer_scale: t.outer_scale_m,
            turbulent_layer_height: t.layer_height_m,
            screen_spacing: t.screen_spacing_m,
            total_link_distance: t.link_distance_m,
            zenith_angle_deg: t.zenith_angle_deg,
            screen_count_override: t.screen_count_override,
        }
    }

    /// Element pitch: configured value, or 16·λf/extent so the 8x8 footprint
    /// spans a few weak-turbulence speckle envelopes.
    pub fn element_pitch(&self) -> f64 {
        self.array.element_pitch_m.unwrap_or_else(|| {
            16.0 * self.optics.wavelength_m * self.optics.focal_length_m / self.grid.extent_m
        })
    }

    pub fn array_geometry(&self) -> ArrayGeometry {
        ArrayGeometry::new(self.array.rows, self.array.cols, self.element_pitch())
    }

    /// Evaluation seed for realization index i (shared across presets and
    /// strategies for paired comparisons).
    pub fn eval_seed(&self, index: usize) -> u64 {
        self.run.master_seed.wrapping_add(index as u64)
    }

    /// Training seeds occupy a disjoint range far above the evaluation
    /// seeds.
    pub fn training_seed(&self, index: usize) -> u64 {
        self.run
            .master_seed
            .wrapping_add(1_000_000)
            .wrapping_add(index as u64)
    }

    /// Hex digest pinning every physics- and run-relevant field; embedded
    /// in caches, tables and plot data.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex::encode(&hasher.finalize()[..8])
    }
}
