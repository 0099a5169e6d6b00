use serde::{Deserialize, Serialize};

use crate::dipolar::SampledCurve;
use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LmOptions};

const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// kHz
    pub center: f64,
    /// kHz, > 0
    pub fwhm: f64,
    pub amplitude: f64,
    /// 1σ on `center` (kHz).
    pub uncertainty: f64,
}

/// Peaks sorted by ascending center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Peak>", into = "Vec<Peak>")]
pub struct PeakList {
    peaks: Vec<Peak>,
}

impl PeakList {
    pub fn new(mut peaks: Vec<Peak>) -> Result<Self> {
        for p in &peaks {
            if !p.center.is_finite() || !p.amplitude.is_finite() {
                return Err(Error::domain("peak center and amplitude must be finite"));
            }
            if !(p.fwhm > 0.0 && p.fwhm.is_finite()) {
                return Err(Error::domain(format!("peak at {} kHz has non-positive FWHM", p.center)));
            }
        }
        peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
        Ok(PeakList { peaks })
    }

    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.center).collect()
    }

    /// The same peaks with centers measured from `f_center`.
    pub fn offsets_from(&self, f_center: f64) -> PeakList {
        PeakList {
            peaks: self
                .peaks
                .iter()
                .map(|p| Peak { center: p.center - f_center, ..*p })
                .collect(),
        }
    }
}

impl TryFrom<Vec<Peak>> for PeakList {
    type Error = Error;
    fn try_from(v: Vec<Peak>) -> Result<Self> {
        PeakList::new(v)
    }
}

impl From<PeakList> for Vec<Peak> {
    fn from(p: PeakList) -> Self {
        p.peaks
    }
}

fn maxima_indices(y: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .collect();
    idx.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
    idx
}

/// Vertex of the parabola through three points.
fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if a >= 0.0 {
        return (x[1], y[1]);
    }
    let b = d1 - a * (x[0] + x[1]);
    let xv = (-b / (2.0 * a)).clamp(x[0], x[2]);
    let yn = y[0] + d1 * (xv - x[0]) + a * (xv - x[0]) * (xv - x[1]);
    (xv, yn)
}

fn half_max_width(x: &[f64], y: &[f64], i: usize, height: f64) -> f64 {
    let half = height / 2.0;
    let cross = |j: usize, k: usize| x[j] + (half - y[j]) * (x[k] - x[j]) / (y[k] - y[j]);
    let mut left = None;
    let mut j = i;
    while j > 0 {
        if y[j - 1] <= half {
            left = Some(cross(j - 1, j));
            break;
        }
        j -= 1;
    }
    let mut right = None;
    let mut k = i;
    while k + 1 < y.len() {
        if y[k + 1] <= half {
            right = Some(cross(k + 1, k));
            break;
        }
        k += 1;
    }
    match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (x[i] - l),
        (None, Some(r)) => 2.0 * (r - x[i]),
        (None, None) => x[x.len() - 1] - x[0],
    }
}

/// The `n` strongest interior local maxima, refined by a three-point
/// parabola, with half-maximum widths. Returns fewer than `n` if the curve
/// has fewer maxima.
pub fn find_peaks(curve: &SampledCurve, n: usize) -> Result<PeakList> {
    if n == 0 {
        return Err(Error::precondition("at least one peak must be requested"));
    }
    let (x, y) = (&curve.frequencies, &curve.intensities);
    let peaks = maxima_indices(y)
        .into_iter()
        .take(n)
        .map(|i| {
            let (c, h) = parabolic_vertex([x[i - 1], x[i], x[i + 1]], [y[i - 1], y[i], y[i + 1]]);
            let spacing = 0.5 * (x[i + 1] - x[i - 1]);
            Peak {
                center: c,
                fwhm: half_max_width(x, y, i, h).max(spacing),
                amplitude: h,
                uncertainty: spacing,
            }
        })
        .collect();
    PeakList::new(peaks)
}

fn gaussian(f: f64, amp: f64, center: f64, fwhm: f64) -> f64 {
    let x = (f - center) / fwhm;
    amp * (-FOUR_LN2 * x * x).exp()
}

/// Least-squares sum of `n` Gaussians, started from [`find_peaks`].
/// Uncertainties are 1σ from the fit covariance.
pub fn fit_peaks(curve: &SampledCurve, n: usize) -> Result<PeakList> {
    if n == 0 {
        return Err(Error::precondition("at least one peak must be requested"));
    }
    let m = curve.len();
    if m < 3 * n + 1 {
        return Err(Error::precondition(format!(
            "{m} points cannot constrain {n} Gaussian peaks"
        )));
    }
    let init = find_peaks(curve, n)?;
    let data_ss: f64 = curve.intensities.iter().map(|v| v * v).sum();
    if init.len() < n {
        return Err(Error::NonConvergence {
            iterations: 0,
            best_residual: data_ss,
            best_params: Vec::new(),
        });
    }
    let x0: Vec<f64> = init
        .peaks()
        .iter()
        .flat_map(|p| [p.amplitude, p.center, p.fwhm])
        .collect();
    let (x, y) = (&curve.frequencies, &curve.intensities);
    let report = levenberg_marquardt(
        |p, r| {
            for (i, (&f, &yi)) in x.iter().zip(y).enumerate() {
                let model: f64 = p.chunks(3).map(|g| gaussian(f, g[0], g[1], g[2])).sum();
                r[i] = model - yi;
            }
        },
        &x0,
        m,
        LmOptions { max_iterations: 500, ..Default::default() },
    );
    let (lo, hi) = (x[0], x[m - 1]);
    let sane = report
        .params
        .chunks(3)
        .all(|g| g[2].abs() > 0.0 && g[1] >= lo && g[1] <= hi);
    if !report.converged || !sane {
        return Err(Error::NonConvergence {
            iterations: report.iterations,
            best_residual: report.cost,
            best_params: report.params,
        });
    }
    let errs = report.std_errors();
    let spacing = (hi - lo) / (m - 1) as f64;
    let peaks = report
        .params
        .chunks(3)
        .enumerate()
        .map(|(k, g)| Peak {
            amplitude: g[0],
            center: g[1],
            fwhm: g[2].abs(),
            uncertainty: errs.as_ref().map_or(spacing, |e| e[3 * k + 1]),
        })
        .collect();
    PeakList::new(peaks)
}
