use serde::{Deserialize, Serialize};

use super::{scan_then_refine, second_derivative, Objective};
use crate::dipolar::{DipolarParams, SampledCurve, SpectrumParams};
use crate::error::Result;
use crate::geometry::{dimer_angles, CrystalOrientation};

/// Search range for the HDO fraction p.
pub const RATIO_RANGE: (f64, f64) = (0.0, 0.8);

// Residual curvature below this fraction of the data energy (per unit p²,
// over the whole range) counts as a flat landscape.
const FLAT_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioFit {
    pub p: f64,
    /// 1σ from the residual curvature; the full range width when flat.
    pub sigma: f64,
    pub residual: f64,
    /// ∂²residual/∂p² at the optimum.
    pub curvature: f64,
    pub flat: bool,
    pub warning: Option<String>,
}

/// One-dimensional least squares over p ∈ [0, 0.8] at a fixed orientation
/// and envelope shift.
pub fn fit_ratio(
    measured: &SampledCurve,
    o: &CrystalOrientation,
    dp: &DipolarParams,
    sp: &SpectrumParams,
) -> Result<RatioFit> {
    sp.validate()?;
    let obj = Objective::new(measured)?;
    let angles = dimer_angles(o);
    let rss = |p: f64| -> f64 {
        let trial = SpectrumParams { p, ..*sp };
        obj.evaluate(&angles, dp, &trial).map_or(f64::INFINITY, |r| r.0)
    };
    let (p, residual) = scan_then_refine(rss, RATIO_RANGE.0, RATIO_RANGE.1, 81, 1e-10);
    let curvature = second_derivative(rss, p, 1e-3, RATIO_RANGE);
    let energy: f64 = obj.y.iter().map(|v| v * v).sum();
    let span = RATIO_RANGE.1 - RATIO_RANGE.0;
    let flat = !(curvature * span * span > FLAT_THRESHOLD * energy);
    let dof = obj.dof(1).max(1);
    let (sigma, warning) = if flat {
        (
            span,
            Some(format!(
                "residual is flat in p (curvature {curvature:.3e}); the ratio is essentially unconstrained"
            )),
        )
    } else {
        ((2.0 * residual / dof as f64 / curvature).sqrt(), None)
    };
    Ok(RatioFit { p, sigma, residual, curvature, flat, warning })
}
