use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nelder_mead::{minimize, SimplexOptions};
use super::{Objective, RATIO_RANGE};
use crate::dipolar::{DipolarParams, SampledCurve, SpectrumParams};
use crate::error::{Error, Result};
use crate::geometry::{dimer_angles, CrystalOrientation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationFitOptions {
    /// Refine the HDO fraction together with the angles.
    pub fit_p: bool,
    pub grid_step_deg: f64,
    /// Minima whose residual is within this relative tolerance of the best
    /// are reported as equivalent.
    pub equivalence_rtol: f64,
    /// A peak must exceed this multiple of the noise estimate.
    pub noise_factor: f64,
    /// Required half-coverage of the measured curve around 0 kHz.
    pub min_half_span_khz: f64,
    /// Number of distinct grid minima refined by the simplex.
    pub refine_candidates: usize,
}

impl Default for OrientationFitOptions {
    fn default() -> Self {
        OrientationFitOptions {
            fit_p: false,
            grid_step_deg: 1.0,
            equivalence_rtol: 1e-3,
            noise_factor: 3.0,
            min_half_span_khz: 45.0,
            refine_candidates: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Degrees, in the canonical domain α ∈ [61°, 91°].
    pub alpha: f64,
    /// Degrees, in the canonical domain β ∈ [30°, 120°].
    pub beta: f64,
    pub alpha_sigma: Option<f64>,
    pub beta_sigma: Option<f64>,
    /// kHz
    pub f_shift: f64,
    pub f_shift_sigma: Option<f64>,
    pub p: f64,
    pub p_sigma: Option<f64>,
    pub p_fitted: bool,
    /// Closed-form amplitude scale of the model.
    pub scale: f64,
    /// Residual sum of squares.
    pub residual: f64,
    pub dof: usize,
    /// Every orientation (α ∈ [0°, 120°), β ∈ [0°, 180°)) whose residual is
    /// within tolerance of the optimum, including all lattice-symmetry images
    /// of the optimum itself.
    pub equivalent_minima: Vec<CrystalOrientation>,
    pub grid_points: usize,
}

impl FitResult {
    pub fn orientation(&self) -> CrystalOrientation {
        CrystalOrientation { alpha: self.alpha, beta: self.beta }
    }
}

// Searched region: the canonical fundamental domain plus one grid step of
// margin on each side, so boundary minima are bracketed.
const ALPHA_SPAN: (f64, f64) = (60.0, 92.0);
const BETA_SPAN: (f64, f64) = (29.0, 121.0);

/// Robust noise level from the median absolute first difference.
fn noise_sigma(y: &[f64]) -> f64 {
    let mut d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    d.sort_by(f64::total_cmp);
    let med = d[d.len() / 2];
    med / (0.674_489_75 * std::f64::consts::SQRT_2)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

/// Rejects curves with no feature rising above `factor`× the noise. The
/// curve is first smoothed over one line width so isolated noise spikes do
/// not count as peaks.
pub(crate) fn check_identifiable(curve: &SampledCurve, line_fwhm: f64, factor: f64) -> Result<()> {
    let y = &curve.intensities;
    let spacing = (curve.frequencies[curve.len() - 1] - curve.frequencies[0]) / (curve.len() - 1) as f64;
    let half = ((line_fwhm / spacing / 2.0).round() as usize).min(y.len() / 4);
    let smooth: Vec<f64> = (0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(y.len());
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let baseline = median(y);
    let height = smooth.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) - baseline;
    let noise = noise_sigma(y);
    if !(height > factor * noise) || height <= 0.0 {
        return Err(Error::Unidentifiable(format!(
            "no feature exceeds {factor}x the noise level ({noise:.3e})"
        )));
    }
    Ok(())
}

fn grid_axis(span: (f64, f64), step: f64) -> Vec<f64> {
    let n = ((span.1 - span.0) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| span.0 + i as f64 * step).collect()
}

/// Indices of grid local minima (≤ all 8 neighbours), best first.
fn grid_minima(values: &[f64], n_alpha: usize, n_beta: usize) -> Vec<usize> {
    let at = |i: isize, j: isize| -> Option<f64> {
        if i < 0 || j < 0 || i as usize >= n_alpha || j as usize >= n_beta {
            None
        } else {
            Some(values[i as usize * n_beta + j as usize])
        }
    };
    let mut out: Vec<usize> = (0..values.len())
        .filter(|&k| {
            let (i, j) = ((k / n_beta) as isize, (k % n_beta) as isize);
            let v = values[k];
            v.is_finite()
                && (-1..=1).all(|di| {
                    (-1..=1).all(|dj| (di == 0 && dj == 0) || at(i + di, j + dj).is_none_or(|w| v <= w))
                })
        })
        .collect();
    out.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    out
}

struct Refined {
    params: Vec<f64>,
    rss: f64,
}

/// Fits crystal orientation, envelope shift and optionally the HDO fraction.
///
/// A 1° grid over the canonical fundamental domain (parallel, reduced by
/// index) seeds simplex refinements of the best few local minima.
pub fn fit_orientation(
    measured: &SampledCurve,
    dp: &DipolarParams,
    sp: &SpectrumParams,
    opts: &OrientationFitOptions,
) -> Result<FitResult> {
    sp.validate()?;
    if !(opts.grid_step_deg > 0.0) {
        return Err(Error::domain("grid step must be positive"));
    }
    let obj = Objective::new(measured)?;
    let (lo, hi) = (measured.frequencies[0], measured.frequencies[measured.len() - 1]);
    if lo > -opts.min_half_span_khz || hi < opts.min_half_span_khz {
        return Err(Error::precondition(format!(
            "measured curve spans [{lo}, {hi}] kHz; it must cover ±{} kHz",
            opts.min_half_span_khz
        )));
    }
    check_identifiable(measured, sp.line_fwhm(), opts.noise_factor)?;

    let alphas = grid_axis(ALPHA_SPAN, opts.grid_step_deg);
    let betas = grid_axis(BETA_SPAN, opts.grid_step_deg);
    let (na, nb) = (alphas.len(), betas.len());
    // With p free each cell keeps its best p from a coarse profile, so the
    // seeds are not biased towards the starting fraction.
    let p_levels: Vec<f64> = if opts.fit_p {
        (0..=8).map(|i| RATIO_RANGE.0 + (RATIO_RANGE.1 - RATIO_RANGE.0) * i as f64 / 8.0).collect()
    } else {
        vec![sp.p]
    };
    let cells: Vec<(f64, f64)> = (0..na * nb)
        .into_par_iter()
        .map(|k| {
            let angles = dimer_angles(&CrystalOrientation { alpha: alphas[k / nb], beta: betas[k % nb] });
            p_levels
                .iter()
                .map(|&p| {
                    let trial = SpectrumParams { p, ..*sp };
                    (obj.evaluate(&angles, dp, &trial).map_or(f64::INFINITY, |r| r.0), p)
                })
                .fold((f64::INFINITY, sp.p), |best, c| if c.0 < best.0 { c } else { best })
        })
        .collect();
    let grid: Vec<f64> = cells.iter().map(|c| c.0).collect();

    let objective = |q: &[f64]| -> f64 {
        let p = if opts.fit_p { q[3] } else { sp.p };
        if !(RATIO_RANGE.0..=RATIO_RANGE.1).contains(&p) {
            return f64::INFINITY;
        }
        let o = CrystalOrientation { alpha: q[0], beta: q[1] };
        let trial = SpectrumParams { p, f_shift: q[2], ..*sp };
        obj.evaluate(&dimer_angles(&o), dp, &trial).map_or(f64::INFINITY, |r| r.0)
    };

    let seeds = grid_minima(&grid, na, nb);
    let mut refined: Vec<Refined> = seeds
        .iter()
        .take(opts.refine_candidates.max(1))
        .map(|&k| {
            let mut x0 = vec![alphas[k / nb], betas[k % nb], sp.f_shift];
            let mut steps = vec![0.5, 0.5, 0.5];
            if opts.fit_p {
                x0.push(cells[k].1.clamp(RATIO_RANGE.0 + 0.01, RATIO_RANGE.1 - 0.01));
                steps.push(0.05);
            }
            let r = minimize(objective, &x0, &steps, SimplexOptions::default());
            // restart once from the result to escape a collapsed simplex
            let r = minimize(objective, &r.x, &steps.iter().map(|s| s * 0.2).collect::<Vec<_>>(), SimplexOptions::default());
            Refined { params: r.x, rss: r.value }
        })
        .collect();
    refined.sort_by(|a, b| a.rss.total_cmp(&b.rss));
    let best = &refined[0];
    if !best.rss.is_finite() {
        return Err(Error::NonConvergence {
            iterations: 0,
            best_residual: best.rss,
            best_params: best.params.clone(),
        });
    }

    let best_o = CrystalOrientation { alpha: best.params[0], beta: best.params[1] }.canonical();
    let p = if opts.fit_p { best.params[3] } else { sp.p };
    let final_sp = SpectrumParams { p, f_shift: best.params[2], ..*sp };
    let (rss, scale) = obj.evaluate(&dimer_angles(&best_o), dp, &final_sp)?;

    let tol = best.rss * opts.equivalence_rtol + 1e-12 * obj.y.iter().map(|v| v * v).sum::<f64>();
    let mut equivalent: Vec<CrystalOrientation> = Vec::new();
    for r in refined.iter().filter(|r| r.rss <= best.rss + tol) {
        let o = CrystalOrientation { alpha: r.params[0], beta: r.params[1] };
        for e in o.equivalents() {
            if !equivalent.iter().any(|x| (x.alpha - e.alpha).abs() < 1e-3 && (x.beta - e.beta).abs() < 1e-3) {
                equivalent.push(e);
            }
        }
    }
    equivalent.sort_by(|x, y| x.alpha.total_cmp(&y.alpha).then(x.beta.total_cmp(&y.beta)));

    let mut q = vec![best_o.alpha, best_o.beta, final_sp.f_shift];
    if opts.fit_p {
        q.push(p);
    }
    let dof = obj.dof(q.len());
    let sigmas = hessian_sigmas(&objective, &q, rss, dof);
    let sig = |i: usize| sigmas.as_ref().map(|s| s[i]);

    Ok(FitResult {
        alpha: best_o.alpha,
        beta: best_o.beta,
        alpha_sigma: sig(0),
        beta_sigma: sig(1),
        f_shift: final_sp.f_shift,
        f_shift_sigma: sig(2),
        p,
        p_sigma: if opts.fit_p { sig(3) } else { None },
        p_fitted: opts.fit_p,
        scale,
        residual: rss,
        dof,
        equivalent_minima: equivalent,
        grid_points: grid.len(),
    })
}

/// 1σ from the quadratic expansion of the residual: cov = 2s²·H⁻¹ with
/// s² = rss/dof. `None` when the Hessian is not positive definite.
fn hessian_sigmas<F: Fn(&[f64]) -> f64>(f: &F, q: &[f64], rss: f64, dof: usize) -> Option<Vec<f64>> {
    if dof == 0 {
        return None;
    }
    let n = q.len();
    let h: Vec<f64> = (0..n).map(|i| if i == 3 { 2e-3 } else { 2e-2 }).collect();
    let f0 = f(q);
    let shifted = |i: usize, si: f64, j: usize, sj: f64| {
        let mut x = q.to_vec();
        x[i] += si * h[i];
        x[j] += sj * h[j];
        f(&x)
    };
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut x = q.to_vec();
        x[i] += h[i];
        let fp = f(&x);
        x[i] -= 2.0 * h[i];
        let fm = f(&x);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let v = (shifted(i, 1.0, j, 1.0) - shifted(i, 1.0, j, -1.0) - shifted(i, -1.0, j, 1.0)
                + shifted(i, -1.0, j, -1.0))
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    if hess.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = hess.cholesky()?;
    let inv = chol.inverse();
    let s2 = rss / dof as f64;
    Some((0..n).map(|i| (2.0 * s2 * inv[(i, i)]).max(0.0).sqrt()).collect())
}
