use serde::{Deserialize, Serialize};

use crate::dipolar::SpectrumModel;
use crate::error::{Error, Result};
use crate::spinsim::TimeSeries;

use super::alias::{alias, unfold};
use super::peaks::{find_peaks, PeakList};
use super::{dft_windowed, Window};

/// Default sampling rate (kHz). Puts the proton carrier at 434.4 G
/// (1849.5 kHz) at 80.4 kHz in the second Nyquist zone, where the band is
/// not mirrored. This is an instrument setting, not a physical constant.
pub const DEFAULT_SAMPLE_RATE_KHZ: f64 = 1769.1;

/// Which part of the transform the peak search runs on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMode {
    /// Re X with the first sample halved. Needs a signal in cosine phase at
    /// t = 0; free of the dispersive tails that hide weak lines in |X|.
    #[default]
    Absorption,
    Magnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Carrier (kHz), also used as the unfolding hint.
    pub larmor: f64,
    /// Sampling rate (kHz).
    pub f_s: f64,
    pub n_samples: usize,
    /// Half-width of the band around the carrier that unfolding may assign
    /// peaks to (kHz); must be below f_s/2.
    pub half_width: f64,
    pub n_peaks: usize,
    pub window: Window,
    pub mode: SpectrumMode,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams {
            larmor: 4.2577 * 434.4,
            f_s: DEFAULT_SAMPLE_RATE_KHZ,
            n_samples: 1024,
            half_width: 120.0,
            n_peaks: 5,
            window: Window::None,
            mode: SpectrumMode::Absorption,
        }
    }
}

/// Position of the aliased carrier in [0, f_s/2].
pub fn aliased_center(larmor: f64, f_s: f64) -> f64 {
    alias(larmor, f_s)
}

/// Real time-domain signal whose spectrum is the model: each line becomes a
/// cosine at `larmor + center` weighted by its amplitude and the filter
/// envelope at its center, with the Gaussian decay exp(−(π·w·t)²) that
/// produces the line shape exp(−(f − c)²/w²).
pub fn model_signal(model: &SpectrumModel, larmor: f64) -> impl Fn(f64) -> f64 {
    let terms: Vec<(f64, f64, f64)> = model
        .lines
        .iter()
        .map(|l| {
            (
                2.0 * std::f64::consts::PI * (larmor + l.center) * 1e3,
                l.amplitude * model.envelope(l.center),
                std::f64::consts::PI * l.width * 1e3,
            )
        })
        .collect();
    move |t: f64| {
        terms
            .iter()
            .map(|(w, a, g)| a * (w * t).cos() * (-(g * t) * (g * t)).exp())
            .sum()
    }
}

/// DFT → strongest peaks → unfolding around the carrier. Peak centers are
/// returned as offsets from `params.larmor`.
pub fn reconstruct(ts: &TimeSeries, params: &ChainParams) -> Result<PeakList> {
    if (ts.sample_rate_khz() - params.f_s).abs() > 1e-9 * params.f_s {
        return Err(Error::precondition(format!(
            "time series sampled at {} kHz, chain configured for {} kHz",
            ts.sample_rate_khz(),
            params.f_s
        )));
    }
    let curve = match params.mode {
        SpectrumMode::Magnitude => dft_windowed(ts, params.window)?.to_curve(),
        SpectrumMode::Absorption => {
            let mut half = ts.clone();
            half.values[0] *= 0.5;
            dft_windowed(&half, params.window)?.to_absorption_curve()
        }
    };
    let aliased = find_peaks(&curve, params.n_peaks)?;
    let unfolded = unfold(&aliased, params.f_s, params.larmor, params.half_width)?;
    Ok(unfolded.offsets_from(params.larmor))
}
