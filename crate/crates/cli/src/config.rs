use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nanonmr::dipolar::frequency_grid;
use nanonmr::sigproc::{ChainParams, SpectrumMode, Window, DEFAULT_SAMPLE_RATE_KHZ};
use nanonmr::{CrystalOrientation, DipolarParams, PhysicalConstants, SpectrumParams};

pub const FIELD_RANGE_GAUSS: (f64, f64) = (0.0, 2000.0);
pub const BOND_LENGTH_RANGE: (f64, f64) = (0.5, 5.0);
pub const HDO_RANGE: (f64, f64) = (0.0, 0.8);

/// Invalid configuration value. Maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsConfig {
    pub gamma_h_khz_per_gauss: Option<f64>,
    pub gamma_d_khz_per_gauss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub start_khz: f64,
    pub stop_khz: f64,
    pub step_khz: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { start_khz: -100.0, stop_khz: 100.0, step_khz: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelateConfig {
    pub dt_ns: f64,
    pub samples: usize,
    /// XY8 repetitions per block.
    pub k: usize,
    /// Transverse hyperfine coupling of the sensed proton (kHz).
    pub a_zx_khz: f64,
    /// Adds a second, dipolar-coupled proton at this angle to B₀.
    pub dimer_theta_deg: Option<f64>,
    pub t1_us: Option<f64>,
}

impl Default for CorrelateConfig {
    fn default() -> Self {
        CorrelateConfig { dt_ns: 20.0, samples: 1000, k: 8, a_zx_khz: 20.0, dimer_theta_deg: None, t1_us: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub field_gauss: f64,
    pub bond_length_angstrom: f64,
    pub alpha_deg: f64,
    pub beta_deg: f64,
    /// Synthesise a single dimer at this angle instead of a whole crystal.
    pub theta_deg: Option<f64>,
    pub p: f64,
    pub line_broadening_khz: f64,
    pub envelope_fwhm_khz: f64,
    pub f_shift_khz: f64,
    pub fs_khz: f64,
    /// White Gaussian noise added to simulated spectra, relative to the peak.
    pub noise: f64,
    pub samples: usize,
    pub band_half_width_khz: f64,
    pub peaks: usize,
    pub window: Window,
    pub spectrum_mode: SpectrumMode,
    pub grid: GridConfig,
    pub constants: ConstantsConfig,
    pub correlate: CorrelateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let chain = ChainParams::default();
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            field_gauss: 434.4,
            bond_length_angstrom: 1.58,
            alpha_deg: 65.0,
            beta_deg: 79.0,
            theta_deg: None,
            p: 1.0 / 3.0,
            line_broadening_khz: 4.0,
            envelope_fwhm_khz: 36.0,
            f_shift_khz: 0.0,
            fs_khz: DEFAULT_SAMPLE_RATE_KHZ,
            noise: 0.0,
            samples: chain.n_samples,
            band_half_width_khz: chain.half_width,
            peaks: chain.n_peaks,
            window: chain.window,
            spectrum_mode: chain.mode,
            grid: GridConfig::default(),
            constants: ConstantsConfig::default(),
            correlate: CorrelateConfig::default(),
        }
    }
}

fn err(msg: String) -> ConfigError {
    ConfigError(msg)
}

fn positive(name: &str, v: f64, unit: &str) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(err(format!("{name} = {v} must be positive{unit}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (lo, hi) = FIELD_RANGE_GAUSS;
        if !(self.field_gauss > lo && self.field_gauss <= hi) {
            return Err(err(format!("field_gauss = {} is outside the valid range ({lo}, {hi}] G", self.field_gauss)));
        }
        let (lo, hi) = BOND_LENGTH_RANGE;
        if !(self.bond_length_angstrom >= lo && self.bond_length_angstrom <= hi) {
            return Err(err(format!(
                "bond_length_angstrom = {} is outside the valid range [{lo}, {hi}] Å",
                self.bond_length_angstrom
            )));
        }
        let (lo, hi) = HDO_RANGE;
        if !(self.p >= lo && self.p <= hi) {
            return Err(err(format!("p = {} is outside the valid range [{lo}, {hi}]", self.p)));
        }
        if !(0.0..180.0).contains(&self.alpha_deg) {
            return Err(err(format!("alpha_deg = {} is outside the valid range [0, 180)°", self.alpha_deg)));
        }
        if !(0.0..360.0).contains(&self.beta_deg) {
            return Err(err(format!("beta_deg = {} is outside the valid range [0, 360)°", self.beta_deg)));
        }
        if let Some(t) = self.theta_deg {
            if !(0.0..=180.0).contains(&t) {
                return Err(err(format!("theta_deg = {t} is outside the valid range [0, 180]°")));
            }
        }
        positive("line_broadening_khz", self.line_broadening_khz, " (kHz)")?;
        positive("envelope_fwhm_khz", self.envelope_fwhm_khz, " (kHz)")?;
        positive("fs_khz", self.fs_khz, " (kHz)")?;
        positive("grid.step_khz", self.grid.step_khz, " (kHz)")?;
        if !self.f_shift_khz.is_finite() {
            return Err(err(format!("f_shift_khz = {} must be finite", self.f_shift_khz)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(err(format!("noise = {} must be non-negative", self.noise)));
        }
        if !(self.grid.start_khz < self.grid.stop_khz) {
            return Err(err(format!(
                "grid.start_khz = {} must be below grid.stop_khz = {}",
                self.grid.start_khz, self.grid.stop_khz
            )));
        }
        if self.samples < 4 {
            return Err(err(format!("samples = {} must be at least 4", self.samples)));
        }
        if !(self.band_half_width_khz > 0.0 && self.band_half_width_khz < self.fs_khz / 2.0) {
            return Err(err(format!(
                "band_half_width_khz = {} is outside the valid range (0, fs_khz/2 = {})",
                self.band_half_width_khz,
                self.fs_khz / 2.0
            )));
        }
        if self.peaks == 0 {
            return Err(err("peaks must be at least 1".into()));
        }
        for (name, v) in [
            ("constants.gamma_h_khz_per_gauss", self.constants.gamma_h_khz_per_gauss),
            ("constants.gamma_d_khz_per_gauss", self.constants.gamma_d_khz_per_gauss),
        ] {
            if let Some(v) = v {
                positive(name, v, " (kHz/G)")?;
            }
        }
        let c = &self.correlate;
        positive("correlate.dt_ns", c.dt_ns, " (ns)")?;
        if c.samples < 2 {
            return Err(err(format!("correlate.samples = {} must be at least 2", c.samples)));
        }
        if c.k == 0 {
            return Err(err("correlate.k must be at least 1".into()));
        }
        if let Some(t1) = c.t1_us {
            positive("correlate.t1_us", t1, " (µs)")?;
        }
        Ok(())
    }

    pub fn constants(&self) -> PhysicalConstants {
        let mut c = PhysicalConstants::default();
        if let Some(g) = self.constants.gamma_h_khz_per_gauss {
            c.gamma_h = g;
        }
        if let Some(g) = self.constants.gamma_d_khz_per_gauss {
            c.gamma_d = g;
        }
        c
    }

    pub fn orientation(&self) -> CrystalOrientation {
        CrystalOrientation { alpha: self.alpha_deg, beta: self.beta_deg }
    }

    pub fn dipolar(&self) -> nanonmr::Result<DipolarParams> {
        DipolarParams::from_bond_length(self.bond_length_angstrom, &self.constants())
    }

    pub fn spectrum_params(&self) -> SpectrumParams {
        SpectrumParams {
            p: self.p,
            line_broadening: self.line_broadening_khz,
            filter_sigma: SpectrumParams::sigma_for_envelope_fwhm(self.envelope_fwhm_khz),
            f_shift: self.f_shift_khz,
        }
    }

    pub fn frequency_grid(&self) -> nanonmr::Result<Vec<f64>> {
        frequency_grid(self.grid.start_khz, self.grid.stop_khz, self.grid.step_khz)
    }

    pub fn larmor_khz(&self) -> f64 {
        self.constants().larmor_h(self.field_gauss)
    }

    pub fn chain(&self) -> ChainParams {
        ChainParams {
            larmor: self.larmor_khz(),
            f_s: self.fs_khz,
            n_samples: self.samples,
            half_width: self.band_half_width_khz,
            n_peaks: self.peaks,
            window: self.window,
            mode: self.spectrum_mode,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn messages_name_field_and_range() {
        let c = RunConfig { field_gauss: 2500.0, ..Default::default() };
        let m = c.validate().unwrap_err().to_string();
        assert!(m.contains("field_gauss") && m.contains("(0, 2000]"), "{m}");
        let c = RunConfig { bond_length_angstrom: 0.2, ..Default::default() };
        let m = c.validate().unwrap_err().to_string();
        assert!(m.contains("bond_length_angstrom") && m.contains("[0.5, 5]"), "{m}");
        let c = RunConfig { p: 0.9, ..Default::default() };
        let m = c.validate().unwrap_err().to_string();
        assert!(m.contains("p = 0.9") && m.contains("[0, 0.8]"), "{m}");
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig { p: 0.0, theta_deg: Some(22.0), ..Default::default() };
        let text = toml::to_string(&c).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let c: RunConfig = toml::from_str("p = 0.1\n[grid]\nstep_khz = 0.25\n").unwrap();
        assert_eq!(c.p, 0.1);
        assert_eq!(c.grid.step_khz, 0.25);
        assert_eq!(c.grid.start_khz, -100.0);
        assert!(toml::from_str::<RunConfig>("bogus = 1\n").is_err());
    }
}
