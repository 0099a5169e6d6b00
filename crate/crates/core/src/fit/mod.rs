//! Least-squares inversion of model spectra.
//!
//! Every spectral fit compares the measurement y with a·M(θ) where M is the
//! unnormalised model and the scale a = ⟨y, M⟩/⟨M, M⟩ is solved in closed
//! form, so only the shape parameters are searched.

pub mod nelder_mead;
mod bond;
mod orientation;
mod ratio;
mod slope;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dipolar::{DipolarParams, SampledCurve, SpectrumModel, SpectrumParams};
use crate::error::{Error, Result};

pub use bond::{estimate_bond_length, BondLengthFit, BondSpectrum, KnownAngles};
pub use orientation::{fit_orientation, FitResult, OrientationFitOptions};
pub use ratio::{fit_ratio, RatioFit, RATIO_RANGE};
pub use slope::{larmor_slope, SlopeFit};

/// Bond-length search range (Å).
pub const BOND_LENGTH_RANGE: (f64, f64) = (0.5, 5.0);

/// Adds white Gaussian noise of standard deviation `rel`·max|y|.
pub fn add_gaussian_noise(curve: &SampledCurve, rel: f64, seed: u64) -> Result<SampledCurve> {
    if !(rel >= 0.0 && rel.is_finite()) {
        return Err(Error::domain("noise amplitude must be non-negative"));
    }
    let peak = curve.intensities.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, rel * peak).map_err(|e| Error::domain(e.to_string()))?;
    Ok(SampledCurve {
        frequencies: curve.frequencies.clone(),
        intensities: curve
            .intensities
            .iter()
            .map(|v| v + normal.sample(&mut rng))
            .collect(),
    })
}

/// Residual sum of squares between a fixed measurement and scaled models.
pub(crate) struct Objective<'a> {
    pub grid: &'a [f64],
    pub y: &'a [f64],
}

impl<'a> Objective<'a> {
    pub fn new(curve: &'a SampledCurve) -> Result<Self> {
        if curve.len() < 3 {
            return Err(Error::precondition("measured curve needs at least three points"));
        }
        if curve.intensities.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("measured intensities must be finite"));
        }
        Ok(Objective { grid: &curve.frequencies, y: &curve.intensities })
    }

    /// (rss, scale) for a model already sampled on the grid.
    pub fn compare(&self, m: &[f64]) -> (f64, f64) {
        let ym: f64 = self.y.iter().zip(m).map(|(a, b)| a * b).sum();
        let mm: f64 = m.iter().map(|v| v * v).sum();
        let scale = if mm > 0.0 { ym / mm } else { 0.0 };
        let rss = self
            .y
            .iter()
            .zip(m)
            .map(|(a, b)| {
                let r = a - scale * b;
                r * r
            })
            .sum();
        (rss, scale)
    }

    pub fn evaluate(&self, angles: &[f64], dp: &DipolarParams, sp: &SpectrumParams) -> Result<(f64, f64)> {
        let model = SpectrumModel::from_angles(angles, dp, sp)?;
        Ok(self.compare(&model.sample(self.grid)))
    }

    pub fn dof(&self, n_params: usize) -> usize {
        self.y.len().saturating_sub(n_params + 1)
    }
}

/// Second derivative by central differences, one-sided inside `bounds`.
pub(crate) fn second_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64, bounds: (f64, f64)) -> f64 {
    let (lo, hi) = bounds;
    let c = if x - h < lo {
        lo + h
    } else if x + h > hi {
        hi - h
    } else {
        x
    };
    (f(c + h) - 2.0 * f(c) + f(c - h)) / (h * h)
}

/// Golden-section minimisation of a unimodal `f` on [a, b].
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Scan on `n` evenly spaced points then golden-section refinement in the
/// bracket around the best point. Ties resolve to the lowest index.
pub(crate) fn scan_then_refine<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, f64) {
    let step = (hi - lo) / (n - 1) as f64;
    let values: Vec<f64> = (0..n).map(|i| f(lo + i as f64 * step)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v < values[b] { i } else { b });
    let a = lo + best.saturating_sub(1) as f64 * step;
    let b = lo + (best + 1).min(n - 1) as f64 * step;
    let (x, fx) = golden_section(&f, a, b, tol);
    if fx <= values[best] {
        (x, fx)
    } else {
        (lo + best as f64 * step, values[best])
    }
}
