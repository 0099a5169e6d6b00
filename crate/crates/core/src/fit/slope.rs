use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// kHz/G
    pub slope: f64,
    /// Standard error; `None` with zero degrees of freedom.
    pub slope_se: Option<f64>,
    /// kHz; `None` for a fit through the origin.
    pub intercept: Option<f64>,
    pub intercept_se: Option<f64>,
    /// Weighted residual sum of squares.
    pub residual: f64,
    pub dof: usize,
}

/// Weighted linear regression of resonance frequency on field.
///
/// `sigmas` (kHz) give weights 1/σ²; omitted means equal weights.
pub fn larmor_slope(
    fields: &[f64],
    freqs: &[f64],
    sigmas: Option<&[f64]>,
    through_origin: bool,
) -> Result<SlopeFit> {
    if fields.len() != freqs.len() {
        return Err(Error::precondition("field and frequency lists differ in length"));
    }
    if fields.len() < 2 {
        return Err(Error::precondition("slope fit needs at least two points"));
    }
    if fields.iter().chain(freqs).any(|v| !v.is_finite()) {
        return Err(Error::domain("fields and frequencies must be finite"));
    }
    if fields.iter().all(|b| *b == fields[0]) {
        return Err(Error::precondition("all field values are identical"));
    }
    let w: Vec<f64> = match sigmas {
        Some(s) => {
            if s.len() != fields.len() || s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::domain("uncertainties must be positive, one per point"));
            }
            s.iter().map(|v| 1.0 / (v * v)).collect()
        }
        None => vec![1.0; fields.len()],
    };
    let n = fields.len();
    let sw: f64 = w.iter().sum();
    let k = if through_origin { 1 } else { 2 };
    let dof = n - k;

    let (slope, intercept, sxx) = if through_origin {
        let sxx: f64 = fields.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let sxy: f64 = fields.iter().zip(freqs).zip(&w).map(|((x, y), w)| w * x * y).sum();
        (sxy / sxx, 0.0, sxx)
    } else {
        let xm = fields.iter().zip(&w).map(|(x, w)| w * x).sum::<f64>() / sw;
        let ym = freqs.iter().zip(&w).map(|(y, w)| w * y).sum::<f64>() / sw;
        let sxx: f64 = fields.iter().zip(&w).map(|(x, w)| w * (x - xm) * (x - xm)).sum();
        let sxy: f64 = fields
            .iter()
            .zip(freqs)
            .zip(&w)
            .map(|((x, y), w)| w * (x - xm) * (y - ym))
            .sum();
        let slope = sxy / sxx;
        (slope, ym - slope * xm, sxx)
    };
    let residual: f64 = fields
        .iter()
        .zip(freqs)
        .zip(&w)
        .map(|((x, y), w)| {
            let r = y - (intercept + slope * x);
            w * r * r
        })
        .sum();

    // With explicit σ the weights are absolute; otherwise the scatter sets
    // the error scale.
    let s2 = if dof == 0 {
        None
    } else if sigmas.is_some() {
        Some(1.0)
    } else {
        Some(residual / dof as f64)
    };
    let slope_se = s2.map(|s2| (s2 / sxx).sqrt());
    let intercept_se = if through_origin {
        None
    } else {
        let xm = fields.iter().zip(&w).map(|(x, w)| w * x).sum::<f64>() / sw;
        s2.map(|s2| (s2 * (1.0 / sw + xm * xm / sxx)).sqrt())
    };
    Ok(SlopeFit {
        slope,
        slope_se,
        intercept: (!through_origin).then_some(intercept),
        intercept_se,
        residual,
        dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_exact_points() {
        let r = larmor_slope(&[100.0, 200.0], &[425.77, 851.54], None, false).unwrap();
        assert!((r.slope - 4.2577).abs() < 1e-12);
        assert!(r.residual < 1e-18);
        assert_eq!(r.dof, 0);
        assert!(r.slope_se.is_none());
    }

    #[test]
    fn through_origin_recovers_gamma() {
        let b = [312.2, 364.8, 419.8, 434.4];
        let f: Vec<f64> = b.iter().map(|x| 4.2577 * x).collect();
        let r = larmor_slope(&b, &f, None, true).unwrap();
        assert!((r.slope - 4.2577).abs() < 1e-12);
        assert!(r.intercept.is_none());
        assert_eq!(r.dof, 3);
    }

    #[test]
    fn matches_textbook_ols() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.1, 3.9, 6.2, 7.8, 10.1];
        let r = larmor_slope(&x, &y, None, false).unwrap();
        // slope = Sxy/Sxx = 19.9/10, intercept = ȳ − b·x̄
        assert!((r.slope - 1.99).abs() < 1e-12);
        assert!((r.intercept.unwrap() - (6.02 - 1.99 * 3.0)).abs() < 1e-12);
        let s2 = r.residual / 3.0;
        assert!((r.slope_se.unwrap() - (s2 / 10.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(larmor_slope(&[300.0, 300.0], &[1.0, 2.0], None, false).is_err());
        assert!(larmor_slope(&[300.0], &[1.0], None, true).is_err());
        assert!(larmor_slope(&[1.0, 2.0], &[1.0], None, true).is_err());
    }
}
