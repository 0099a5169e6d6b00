//! Measurement chain: sampling, DFT, Nyquist-zone unfolding and peak fits.

mod alias;
mod chain;
mod fft;
mod peaks;
mod sinusoid;

use serde::{Deserialize, Serialize};

use crate::dipolar::SampledCurve;
use crate::error::{Error, Result};
use crate::spinsim::{TimeSeries, C64};

pub use alias::{alias, undersample, unfold, unfold_peak};
pub use chain::{aliased_center, model_signal, reconstruct, ChainParams, SpectrumMode, DEFAULT_SAMPLE_RATE_KHZ};
pub use fft::{fft_in_place, next_pow2};
pub use peaks::{find_peaks, fit_peaks, Peak, PeakList};
pub use sinusoid::{fit_sinusoids, Sinusoid, SinusoidFit};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

/// One-sided transform of a real signal on bins k·df, k = 0..=N/2.
///
/// X_k = dt·Σ x_n·e^{−2πikn/N}, so |X_k| carries signal·seconds and
/// Σ|x|²·dt = Σ_{all k}|X_k|²·df.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Bin spacing (kHz).
    pub df: f64,
    pub values: Vec<C64>,
    /// Transform length after zero-padding.
    pub n_fft: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn resolution(&self) -> f64 {
        self.df
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| k as f64 * self.df).collect()
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Σ|X_k|²·df over the full two-sided band (df in Hz), reconstructed
    /// from the half band by conjugate symmetry.
    pub fn energy(&self) -> f64 {
        let last = self.values.len() - 1;
        let nyquist_present = self.n_fft % 2 == 0;
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let w = if k == 0 || (k == last && nyquist_present) { 1.0 } else { 2.0 };
                w * v.norm_sqr()
            })
            .sum();
        sum * self.df * 1e3
    }

    /// Real part as a curve (kHz, Re X). For a signal that starts in
    /// cosine phase this is the absorption spectrum.
    pub fn to_absorption_curve(&self) -> SampledCurve {
        SampledCurve {
            frequencies: self.frequencies(),
            intensities: self.values.iter().map(|v| v.re).collect(),
        }
    }

    /// Magnitude spectrum as a curve (kHz, |X|).
    pub fn to_curve(&self) -> SampledCurve {
        SampledCurve {
            frequencies: self.frequencies(),
            intensities: self.magnitude(),
        }
    }
}

/// DFT without windowing; see [`dft_windowed`].
pub fn dft(ts: &TimeSeries) -> Result<Spectrum> {
    dft_windowed(ts, Window::None)
}

/// Zero-pads to the next power of two and returns bins on [0, f_s/2].
pub fn dft_windowed(ts: &TimeSeries, window: Window) -> Result<Spectrum> {
    let n = ts.values.len();
    if n < 2 {
        return Err(Error::precondition("DFT needs at least two samples"));
    }
    let n_fft = next_pow2(n);
    let mut buf = vec![C64::new(0.0, 0.0); n_fft];
    for (i, (b, &x)) in buf.iter_mut().zip(&ts.values).enumerate() {
        let w = match window {
            Window::None => 1.0,
            Window::Hann => {
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()
            }
        };
        *b = C64::new(x * w * ts.dt, 0.0);
    }
    fft_in_place(&mut buf);
    buf.truncate(n_fft / 2 + 1);
    Ok(Spectrum {
        df: 1e-3 / (n_fft as f64 * ts.dt),
        values: buf,
        n_fft,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_centered_sinusoid_is_one_bin() {
        let n = 256;
        let dt = 1e-6;
        let k0 = 37;
        let f = k0 as f64 / (n as f64 * dt);
        let ts = TimeSeries::new(
            dt,
            (0..n).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 * dt).cos()).collect(),
        )
        .unwrap();
        let sp = dft(&ts).unwrap();
        let mag = sp.magnitude();
        let peak = mag[k0];
        for (k, m) in mag.iter().enumerate() {
            if k != k0 {
                assert!(*m < 1e-12 * peak, "bin {k}: {m}");
            }
        }
        assert!((sp.frequencies()[k0] - f * 1e-3).abs() < 1e-9);
    }

    #[test]
    fn parseval_holds_with_padding() {
        let dt = 2e-7;
        let values: Vec<f64> = (0..300).map(|i| ((i * i) % 17) as f64 - 8.0).collect();
        let time_energy: f64 = values.iter().map(|v| v * v * dt).sum();
        let ts = TimeSeries::new(dt, values).unwrap();
        let sp = dft(&ts).unwrap();
        assert_eq!(sp.n_fft, 512);
        assert!((sp.energy() - time_energy).abs() < 1e-9 * time_energy);
    }

    #[test]
    fn hann_suppresses_leakage() {
        let dt = 1e-6;
        let f = 40.3e3;
        let ts = TimeSeries::new(
            dt,
            (0..512).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 * dt).sin()).collect(),
        )
        .unwrap();
        let plain = dft(&ts).unwrap().magnitude();
        let hann = dft_windowed(&ts, Window::Hann).unwrap().magnitude();
        let far = |m: &[f64]| m[150..].iter().cloned().fold(0.0, f64::max) / m.iter().cloned().fold(0.0, f64::max);
        assert!(far(&hann) < 0.1 * far(&plain));
    }

    #[test]
    fn too_short_rejected() {
        assert!(TimeSeries::new(1e-6, vec![1.0]).is_err());
    }
}
