use crate::error::{Error, Result};
use crate::spinsim::TimeSeries;

use super::peaks::{Peak, PeakList};

/// Samples `signal(t)` (t in s) at t_i = i/f_s for i = 0..n.
pub fn undersample<F>(signal: F, f_s: f64, n: usize) -> Result<TimeSeries>
where
    F: Fn(f64) -> f64,
{
    if !(f_s > 0.0 && f_s.is_finite()) {
        return Err(Error::domain("sampling rate must be positive"));
    }
    let dt = 1e-3 / f_s;
    TimeSeries::new(dt, (0..n).map(|i| signal(i as f64 * dt)).collect())
}

/// Apparent frequency in [0, f_s/2] of a real tone at `f` when sampled at
/// `f_s` (both kHz).
pub fn alias(f: f64, f_s: f64) -> f64 {
    let r = f.abs().rem_euclid(f_s);
    if r > f_s / 2.0 {
        f_s - r
    } else {
        r
    }
}

/// The unique non-negative f ∈ {k·f_s ± f_a} within `half_width` of `hint`.
pub fn unfold_peak(f_a: f64, f_s: f64, hint: f64, half_width: f64) -> Result<f64> {
    if !(f_s > 0.0 && f_s.is_finite()) {
        return Err(Error::domain("sampling rate must be positive"));
    }
    if !(half_width > 0.0 && half_width < f_s / 2.0) {
        return Err(Error::precondition(format!(
            "band half-width {half_width} kHz must lie in (0, f_s/2 = {} kHz)",
            f_s / 2.0
        )));
    }
    let slack = 1e-9 * f_s;
    if !(f_a >= -slack && f_a <= f_s / 2.0 + slack) {
        return Err(Error::domain(format!(
            "aliased frequency {f_a} kHz outside [0, {}] kHz",
            f_s / 2.0
        )));
    }
    let k_lo = ((hint - half_width) / f_s).floor() as i64 - 1;
    let k_hi = ((hint + half_width) / f_s).ceil() as i64 + 1;
    let mut candidates: Vec<f64> = Vec::new();
    for k in k_lo..=k_hi {
        let base = k as f64 * f_s;
        for c in [base + f_a, base - f_a] {
            if c >= -slack
                && (c - hint).abs() <= half_width
                && !candidates.iter().any(|x| (x - c).abs() <= slack)
            {
                candidates.push(c.max(0.0));
            }
        }
    }
    match candidates.len() {
        1 => Ok(candidates[0]),
        0 => Err(Error::OutOfBand { aliased_khz: f_a, half_width_khz: half_width }),
        _ => {
            candidates.sort_by(f64::total_cmp);
            Err(Error::AmbiguousUnfold {
                aliased_khz: f_a,
                candidates,
                half_width_khz: half_width,
            })
        }
    }
}

/// Maps every aliased peak back to its true frequency. Any ambiguous or
/// out-of-band peak fails the whole call.
pub fn unfold(aliased: &PeakList, f_s: f64, hint: f64, half_width: f64) -> Result<PeakList> {
    let peaks = aliased
        .peaks()
        .iter()
        .map(|p| {
            Ok(Peak {
                center: unfold_peak(p.center, f_s, hint, half_width)?,
                ..*p
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PeakList::new(peaks)
}
