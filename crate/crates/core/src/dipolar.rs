//! Dipolar couplings, splittings and the ice model spectrum.
//!
//! Each of the twelve H₂O dimers contributes a Gaussian doublet at
//! ±Δf_i = ±(3/4)·δ·(1 − 3cos²θ_i). Each HDO molecule contributes a proton
//! line split by the spin-1 deuteron into an equal-weight triplet at
//! {−Δf^D_i, 0, +Δf^D_i}, weighted 2p/(1−p) relative to the doublets. The sum
//! is multiplied by the filter envelope exp(−2(f − f_shift)²/σ²).
//!
//! The H–D vector shares the H–H geometry, so Δf^D_i uses the same θ_i.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dimer_angles, CrystalOrientation};

/// Magic angle arccos(1/√3) in degrees.
pub const MAGIC_ANGLE_DEG: f64 = 54.735_610_317_245_35;

/// Secular prefactor of the heteronuclear splitting, Δf^D = κ·δ_HD·(1 − 3cos²θ).
///
/// Fixed by the two-spin (½, 1) exact simulation in
/// `spinsim::tests::hetero_prefactor_from_exact_simulation`.
pub const HETERO_PREFACTOR: f64 = 1.0;

// Lines are truncated beyond this many widths; exp(-64) is below f64 resolution
// relative to the line peak.
const LINE_CUTOFF_WIDTHS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Proton gyromagnetic ratio (kHz/G).
    pub gamma_h: f64,
    /// Deuteron gyromagnetic ratio (kHz/G).
    pub gamma_d: f64,
    /// (μ₀/4π)·h in SI units.
    pub mu0_h_factor: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            gamma_h: 4.2577,
            gamma_d: 0.6536,
            mu0_h_factor: 1e-7 * 6.626_070_15e-34,
        }
    }
}

impl PhysicalConstants {
    /// δ·d³/(γ_a·γ_b) with δ in kHz, d in Å and γ in kHz/G.
    fn coupling_scale(&self) -> f64 {
        // kHz/G -> Hz/T is 1e7, Å³ -> m³ is 1e-30, Hz -> kHz is 1e-3.
        self.mu0_h_factor * 1e14 / 1e-30 * 1e-3
    }

    pub fn larmor_h(&self, field_gauss: f64) -> f64 {
        self.gamma_h * field_gauss
    }
}

/// Dipolar coupling parameter δ = (μ₀/4π)·γ_a·γ_b·h/d³ in kHz, with γ in
/// kHz/G (cyclic) and d in Å.
pub fn coupling_parameter(d: f64, gamma_a: f64, gamma_b: f64) -> Result<f64> {
    coupling_parameter_with(&PhysicalConstants::default(), d, gamma_a, gamma_b)
}

pub fn coupling_parameter_with(
    consts: &PhysicalConstants,
    d: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::domain(format!("bond length must be positive, got {d} Å")));
    }
    Ok(consts.coupling_scale() * gamma_a * gamma_b / (d * d * d))
}

/// Homonuclear offset of each doublet line from the Larmor frequency,
/// (3/4)·δ·(1 − 3cos²θ). Negative values put the upper line below Larmor.
pub fn splitting(delta: f64, theta_deg: f64) -> f64 {
    0.75 * delta * orientation_factor(theta_deg)
}

/// Heteronuclear (H–D) offset of the outer triplet lines, κ·δ_HD·(1 − 3cos²θ).
pub fn hetero_splitting(delta_hd: f64, theta_deg: f64) -> f64 {
    HETERO_PREFACTOR * delta_hd * orientation_factor(theta_deg)
}

fn orientation_factor(theta_deg: f64) -> f64 {
    let c = theta_deg.to_radians().cos();
    1.0 - 3.0 * c * c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipolarParams {
    /// H–H (and H–D) distance in Å.
    pub bond_length: f64,
    /// Homonuclear coupling parameter δ (kHz).
    pub delta: f64,
    /// Heteronuclear H–D coupling parameter (kHz).
    pub delta_hd: f64,
}

impl DipolarParams {
    pub fn from_bond_length(d: f64, consts: &PhysicalConstants) -> Result<Self> {
        Ok(DipolarParams {
            bond_length: d,
            delta: coupling_parameter_with(consts, d, consts.gamma_h, consts.gamma_h)?,
            delta_hd: coupling_parameter_with(consts, d, consts.gamma_h, consts.gamma_d)?,
        })
    }

    /// Inverts δ = K·γ_H²/d³ for the bond length.
    pub fn from_delta(delta: f64, consts: &PhysicalConstants) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::domain(format!("coupling must be positive, got {delta} kHz")));
        }
        let d = (consts.coupling_scale() * consts.gamma_h * consts.gamma_h / delta).cbrt();
        Self::from_bond_length(d, consts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    /// HDO molecule fraction p ∈ [0, 1).
    pub p: f64,
    /// Gaussian line width Δ (kHz) in exp(−x²/Δ²).
    pub line_broadening: f64,
    /// Filter envelope width σ (kHz) in exp(−2(f − f_shift)²/σ²).
    pub filter_sigma: f64,
    /// Envelope centre (kHz).
    pub f_shift: f64,
}

impl SpectrumParams {
    /// σ giving an envelope FWHM of `fwhm` kHz.
    pub fn sigma_for_envelope_fwhm(fwhm: f64) -> f64 {
        fwhm / (2.0 * std::f64::consts::LN_2).sqrt()
    }

    /// Δ giving a line FWHM of `fwhm` kHz.
    pub fn broadening_for_line_fwhm(fwhm: f64) -> f64 {
        fwhm / (2.0 * std::f64::consts::LN_2.sqrt())
    }

    pub fn line_fwhm(&self) -> f64 {
        2.0 * self.line_broadening * std::f64::consts::LN_2.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::domain(format!("HDO fraction p must lie in [0, 1), got {}", self.p)));
        }
        if !(self.line_broadening > 0.0 && self.line_broadening.is_finite()) {
            return Err(Error::domain("line broadening must be positive"));
        }
        if !(self.filter_sigma > 0.0 && self.filter_sigma.is_finite()) {
            return Err(Error::domain("filter sigma must be positive"));
        }
        if !self.f_shift.is_finite() {
            return Err(Error::domain("f_shift must be finite"));
        }
        Ok(())
    }

    /// HDO triplet weight 2p/(1 − p).
    pub fn hdo_weight(&self) -> f64 {
        2.0 * self.p / (1.0 - self.p)
    }
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams {
            p: 1.0 / 3.0,
            line_broadening: 4.0,
            filter_sigma: Self::sigma_for_envelope_fwhm(36.0),
            f_shift: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Line {
    #[inline]
    pub fn eval(&self, f: f64) -> f64 {
        let x = (f - self.center) / self.width;
        self.amplitude * (-x * x).exp()
    }
}

/// Gaussian line list times the filter envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    pub lines: Vec<Line>,
    pub f_shift: f64,
    pub sigma: f64,
}

impl SpectrumModel {
    /// Builds the H₂O doublets and HDO triplets for the given dimer angles.
    pub fn from_angles(angles_deg: &[f64], dp: &DipolarParams, sp: &SpectrumParams) -> Result<Self> {
        sp.validate()?;
        let w = sp.line_broadening;
        let hdo = sp.hdo_weight() / 3.0;
        let mut lines = Vec::with_capacity(angles_deg.len() * if hdo > 0.0 { 5 } else { 2 });
        for &theta in angles_deg {
            let df = splitting(dp.delta, theta);
            lines.push(Line { center: df, width: w, amplitude: 1.0 });
            lines.push(Line { center: -df, width: w, amplitude: 1.0 });
            if hdo > 0.0 {
                let dfd = hetero_splitting(dp.delta_hd, theta);
                for c in [-dfd, 0.0, dfd] {
                    lines.push(Line { center: c, width: w, amplitude: hdo });
                }
            }
        }
        Ok(SpectrumModel {
            lines,
            f_shift: sp.f_shift,
            sigma: sp.filter_sigma,
        })
    }

    #[inline]
    pub fn envelope(&self, f: f64) -> f64 {
        let x = f - self.f_shift;
        (-2.0 * x * x / (self.sigma * self.sigma)).exp()
    }

    pub fn eval(&self, f: f64) -> f64 {
        self.lines.iter().map(|l| l.eval(f)).sum::<f64>() * self.envelope(f)
    }

    /// Unnormalised intensities on an increasing grid.
    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; grid.len()];
        for line in &self.lines {
            let reach = LINE_CUTOFF_WIDTHS * line.width;
            let lo = grid.partition_point(|&f| f < line.center - reach);
            let hi = grid.partition_point(|&f| f <= line.center + reach);
            for (o, &f) in out[lo..hi].iter_mut().zip(&grid[lo..hi]) {
                *o += line.eval(f);
            }
        }
        for (o, &f) in out.iter_mut().zip(grid) {
            *o *= self.envelope(f);
        }
        out
    }

    /// Intensities scaled to unit maximum.
    pub fn sample_normalized(&self, grid: &[f64]) -> Vec<f64> {
        let mut s = self.sample(grid);
        let max = s.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            s.iter_mut().for_each(|v| *v /= max);
        }
        s
    }
}

/// A spectrum sampled on a frequency grid (kHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub frequencies: Vec<f64>,
    pub intensities: Vec<f64>,
}

impl SampledCurve {
    pub fn new(frequencies: Vec<f64>, intensities: Vec<f64>) -> Result<Self> {
        if frequencies.len() != intensities.len() {
            return Err(Error::precondition("frequency and intensity columns differ in length"));
        }
        check_increasing(&frequencies)?;
        Ok(SampledCurve { frequencies, intensities })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Local maxima as (frequency, intensity), strongest first.
    pub fn local_maxima(&self) -> Vec<(f64, f64)> {
        let y = &self.intensities;
        let mut out: Vec<(f64, f64)> = (1..y.len().saturating_sub(1))
            .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
            .map(|i| (self.frequencies[i], y[i]))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        out
    }
}

/// Uniform grid from `start` to `stop` inclusive.
pub fn frequency_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop > start) {
        return Err(Error::domain("grid needs start < stop and a positive step"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

pub(crate) fn check_increasing(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::precondition("frequency grid is empty"));
    }
    if grid.iter().any(|f| !f.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::precondition("frequency grid must be strictly increasing"));
    }
    Ok(())
}

/// Model spectrum for explicit dimer angles, normalised to unit maximum.
pub fn synthesize_from_angles(
    angles_deg: &[f64],
    dp: &DipolarParams,
    sp: &SpectrumParams,
    grid: &[f64],
) -> Result<SampledCurve> {
    check_increasing(grid)?;
    let model = SpectrumModel::from_angles(angles_deg, dp, sp)?;
    Ok(SampledCurve {
        frequencies: grid.to_vec(),
        intensities: model.sample_normalized(grid),
    })
}

/// Model spectrum of an ice single crystal at orientation `o`.
pub fn synthesize_spectrum(
    o: &CrystalOrientation,
    dp: &DipolarParams,
    sp: &SpectrumParams,
    grid: &[f64],
) -> Result<SampledCurve> {
    synthesize_from_angles(&dimer_angles(o), dp, sp, grid)
}
