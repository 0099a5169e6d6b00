use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LmOptions};
use crate::spinsim::{TimeSeries, C64};

use super::fft::{fft_in_place, next_pow2};

/// A·cos(2π·f·t + φ) with f in kHz and t in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    /// Sorted by ascending frequency.
    pub components: Vec<Sinusoid>,
    pub offset: f64,
    /// √Σr² at the solution.
    pub residual_norm: f64,
    /// √Σr² at the DFT-based starting point.
    pub initial_residual_norm: f64,
    pub iterations: usize,
}

const TWO_PI_KHZ: f64 = 2.0 * std::f64::consts::PI * 1e3;

/// Starting frequencies: strongest maxima of a 4× zero-padded transform of
/// the mean-removed signal, parabolically refined.
fn initial_frequencies(ts: &TimeSeries, n: usize) -> Vec<f64> {
    let mean = ts.values.iter().sum::<f64>() / ts.len() as f64;
    let n_fft = 4 * next_pow2(ts.len());
    let mut buf = vec![C64::new(0.0, 0.0); n_fft];
    for (b, v) in buf.iter_mut().zip(&ts.values) {
        *b = C64::new(v - mean, 0.0);
    }
    fft_in_place(&mut buf);
    let mag: Vec<f64> = buf[..n_fft / 2 + 1].iter().map(|v| v.norm()).collect();
    let df = ts.sample_rate_khz() / n_fft as f64;
    let mut idx: Vec<usize> = (1..mag.len() - 1)
        .filter(|&i| mag[i] > mag[i - 1] && mag[i] >= mag[i + 1])
        .collect();
    idx.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    idx.into_iter()
        .take(n)
        .map(|i| {
            let (l, c, r) = (mag[i - 1], mag[i], mag[i + 1]);
            let denom = l - 2.0 * c + r;
            let shift = if denom < 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
            (i as f64 + shift) * df
        })
        .collect()
}

fn design(ts: &TimeSeries, freqs: &[f64]) -> DMatrix<f64> {
    let m = ts.len();
    DMatrix::from_fn(m, 1 + 2 * freqs.len(), |i, j| {
        if j == 0 {
            return 1.0;
        }
        let t = i as f64 * ts.dt;
        let ph = TWO_PI_KHZ * freqs[(j - 1) / 2] * t;
        if (j - 1) % 2 == 0 {
            ph.cos()
        } else {
            ph.sin()
        }
    })
}

/// Fits offset + Σ (a_i cos + b_i sin)(2π f_i t) by Levenberg–Marquardt,
/// starting from DFT peak picks with linear amplitudes.
pub fn fit_sinusoids(ts: &TimeSeries, n_components: usize) -> Result<SinusoidFit> {
    if n_components == 0 {
        return Err(Error::precondition("at least one component must be requested"));
    }
    if ts.len() < 4 * n_components {
        return Err(Error::precondition(format!(
            "{} samples are fewer than 4 per component ({} components)",
            ts.len(),
            n_components
        )));
    }
    let freqs = initial_frequencies(ts, n_components);
    if freqs.len() < n_components {
        return Err(Error::NonConvergence {
            iterations: 0,
            best_residual: ts.values.iter().map(|v| v * v).sum::<f64>().sqrt(),
            best_params: freqs,
        });
    }
    let a = design(ts, &freqs);
    let y = DVector::from_column_slice(&ts.values);
    let lin = a
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::precondition(e.to_string()))?;

    // parameter layout: [offset, (a, b, f) per component]
    let mut x0 = vec![lin[0]];
    for (k, f) in freqs.iter().enumerate() {
        x0.extend([lin[1 + 2 * k], lin[2 + 2 * k], *f]);
    }
    let values = &ts.values;
    let dt = ts.dt;
    let report = levenberg_marquardt(
        |p, r| {
            for (i, (ri, yi)) in r.iter_mut().zip(values).enumerate() {
                let t = i as f64 * dt;
                let mut s = p[0];
                for g in p[1..].chunks(3) {
                    let ph = TWO_PI_KHZ * g[2] * t;
                    s += g[0] * ph.cos() + g[1] * ph.sin();
                }
                *ri = s - yi;
            }
        },
        &x0,
        ts.len(),
        LmOptions { max_iterations: 400, ..Default::default() },
    );
    if !report.converged {
        return Err(Error::NonConvergence {
            iterations: report.iterations,
            best_residual: report.cost.sqrt(),
            best_params: report.params,
        });
    }
    let mut components: Vec<Sinusoid> = report.params[1..]
        .chunks(3)
        .map(|g| Sinusoid {
            amplitude: g[0].hypot(g[1]),
            frequency: g[2],
            phase: (-g[1]).atan2(g[0]),
        })
        .collect();
    components.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    Ok(SinusoidFit {
        components,
        offset: report.params[0],
        residual_norm: report.cost.sqrt(),
        initial_residual_norm: report.initial_cost.sqrt(),
        iterations: report.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(comps: &[(f64, f64, f64)], dt: f64, n: usize) -> TimeSeries {
        TimeSeries::new(
            dt,
            (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    comps
                        .iter()
                        .map(|(a, f, ph)| a * (TWO_PI_KHZ * f * t + ph).cos())
                        .sum()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_tone_exact() {
        let ts = synth(&[(0.8, 41.7, 0.3)], 1e-6, 300);
        let fit = fit_sinusoids(&ts, 1).unwrap();
        assert!(fit.residual_norm < 1e-9, "{}", fit.residual_norm);
        let c = fit.components[0];
        assert!((c.frequency - 41.7).abs() < 1e-9);
        assert!((c.amplitude - 0.8).abs() < 1e-9);
        assert!((c.phase - 0.3).abs() < 1e-9);
        assert!(fit.offset.abs() < 1e-9);
    }

    #[test]
    fn five_tones_recovered() {
        let truth = [51.1, 67.1, 79.0, 97.1, 114.8];
        let comps: Vec<(f64, f64, f64)> = truth
            .iter()
            .enumerate()
            .map(|(i, f)| (1.0 - 0.1 * i as f64, *f, 0.4 * i as f64))
            .collect();
        let ts = synth(&comps, 2e-6, 200);
        let fit = fit_sinusoids(&ts, 5).unwrap();
        for (c, f) in fit.components.iter().zip(truth) {
            assert!((c.frequency - f).abs() < 0.5, "{} vs {f}", c.frequency);
        }
        assert!(fit.residual_norm <= fit.initial_residual_norm);
    }

    #[test]
    fn preconditions() {
        let ts = synth(&[(1.0, 10.0, 0.0)], 1e-6, 7);
        assert!(fit_sinusoids(&ts, 0).is_err());
        assert!(fit_sinusoids(&ts, 2).is_err());
    }
}
