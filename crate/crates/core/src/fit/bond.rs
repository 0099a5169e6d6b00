use serde::{Deserialize, Serialize};

use super::{scan_then_refine, second_derivative, Objective, BOND_LENGTH_RANGE};
use crate::dipolar::{DipolarParams, PhysicalConstants, SampledCurve, SpectrumParams};
use crate::error::{Error, Result};
use crate::geometry::{dimer_angles, CrystalOrientation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnownAngles {
    /// A single dimer at this angle to B₀ (degrees).
    Theta(f64),
    /// A whole crystal at a known orientation.
    Orientation(CrystalOrientation),
}

impl KnownAngles {
    pub fn angles(&self) -> Vec<f64> {
        match self {
            KnownAngles::Theta(t) => vec![*t],
            KnownAngles::Orientation(o) => dimer_angles(o),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondSpectrum {
    pub curve: SampledCurve,
    pub angles: KnownAngles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondLengthFit {
    /// Å
    pub d: f64,
    /// Total 1σ (Å): statistical and line-width terms in quadrature.
    pub sigma: f64,
    pub sigma_statistical: f64,
    pub sigma_linewidth: f64,
    /// δ at the estimate (kHz).
    pub delta: f64,
    pub residual: f64,
    /// Number of resolved splittings entering the line-width term.
    pub resolved_splittings: usize,
}

fn orientation_factor(theta: f64) -> f64 {
    let c = theta.to_radians().cos();
    0.75 * (1.0 - 3.0 * c * c)
}

/// Distinct splittings |c|·δ per spectrum, merging those closer than one
/// line FWHM (they are not separately resolvable). Returns the mean |c| of
/// each cluster.
fn resolved_factors(angles: &[f64], delta: f64, fwhm: f64) -> Vec<f64> {
    let mut c: Vec<f64> = angles.iter().map(|t| orientation_factor(*t).abs()).collect();
    c.sort_by(f64::total_cmp);
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for v in c {
        match clusters.last_mut() {
            Some(cl) if (v - cl[0]) * delta < fwhm => cl.push(v),
            _ => clusters.push(vec![v]),
        }
    }
    clusters
        .into_iter()
        .map(|cl| cl.iter().sum::<f64>() / cl.len() as f64)
        .collect()
}

/// Joint least squares for the H–H distance across spectra with known
/// geometry. Each spectrum gets its own amplitude scale; `sp` supplies the
/// shared line shape, envelope and HDO fraction.
///
/// The line-width term treats each resolved splitting c·δ as measured to
/// one line FWHM, giving σ_δ = FWHM/√Σc² and σ_d = d·σ_δ/(3δ).
pub fn estimate_bond_length(
    spectra: &[BondSpectrum],
    sp: &SpectrumParams,
    consts: &PhysicalConstants,
) -> Result<BondLengthFit> {
    sp.validate()?;
    if spectra.len() < 2 {
        return Err(Error::precondition("bond-length estimation needs at least two spectra"));
    }
    let angle_sets: Vec<Vec<f64>> = spectra
        .iter()
        .map(|s| {
            let mut a: Vec<f64> = s.angles.angles().iter().map(|t| fold_theta(*t)).collect();
            a.sort_by(f64::total_cmp);
            a
        })
        .collect();
    let distinct = angle_sets.iter().any(|a| {
        a.len() != angle_sets[0].len() || a.iter().zip(&angle_sets[0]).any(|(x, y)| (x - y).abs() > 1e-6)
    });
    if !distinct {
        return Err(Error::precondition("spectra must be taken at distinct effective angles"));
    }
    if angle_sets.iter().flatten().all(|t| orientation_factor(*t).abs() < 1e-3) {
        return Err(Error::Unidentifiable(
            "every dimer sits at the magic angle, so no splitting depends on d".into(),
        ));
    }
    let objectives: Vec<Objective> = spectra
        .iter()
        .map(|s| Objective::new(&s.curve))
        .collect::<Result<_>>()?;

    let rss = |d: f64| -> f64 {
        let Ok(dp) = DipolarParams::from_bond_length(d, consts) else {
            return f64::INFINITY;
        };
        objectives
            .iter()
            .zip(&angle_sets)
            .map(|(o, a)| o.evaluate(a, &dp, sp).map_or(f64::INFINITY, |r| r.0))
            .sum()
    };
    let n_scan = ((BOND_LENGTH_RANGE.1 - BOND_LENGTH_RANGE.0) / 0.005).round() as usize + 1;
    let (d, residual) = scan_then_refine(rss, BOND_LENGTH_RANGE.0, BOND_LENGTH_RANGE.1, n_scan, 1e-10);
    let dp = DipolarParams::from_bond_length(d, consts)?;

    let n_points: usize = objectives.iter().map(|o| o.y.len()).sum();
    let dof = n_points.saturating_sub(1 + spectra.len()).max(1);
    let curvature = second_derivative(rss, d, 1e-4, BOND_LENGTH_RANGE);
    let sigma_statistical = if curvature > 0.0 {
        (2.0 * residual / dof as f64 / curvature).sqrt()
    } else {
        f64::INFINITY
    };

    let fwhm = sp.line_fwhm();
    let factors: Vec<f64> = angle_sets
        .iter()
        .flat_map(|a| resolved_factors(a, dp.delta, fwhm))
        .filter(|c| *c > 0.0)
        .collect();
    let sum_c2: f64 = factors.iter().map(|c| c * c).sum();
    let sigma_delta = fwhm / sum_c2.sqrt();
    let sigma_linewidth = d * sigma_delta / (3.0 * dp.delta);

    Ok(BondLengthFit {
        d,
        sigma: sigma_statistical.hypot(sigma_linewidth),
        sigma_statistical,
        sigma_linewidth,
        delta: dp.delta,
        residual,
        resolved_splittings: factors.len(),
    })
}

fn fold_theta(t: f64) -> f64 {
    let r = t.rem_euclid(180.0);
    if r > 90.0 {
        180.0 - r
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dipolar::{frequency_grid, synthesize_from_angles, MAGIC_ANGLE_DEG};

    fn spectrum(theta: f64, d: f64, sp: &SpectrumParams) -> BondSpectrum {
        let dp = DipolarParams::from_bond_length(d, &PhysicalConstants::default()).unwrap();
        let grid = frequency_grid(-100.0, 100.0, 0.25).unwrap();
        BondSpectrum {
            curve: synthesize_from_angles(&[theta], &dp, sp, &grid).unwrap(),
            angles: KnownAngles::Theta(theta),
        }
    }

    fn sp6() -> SpectrumParams {
        SpectrumParams {
            p: 0.0,
            line_broadening: SpectrumParams::broadening_for_line_fwhm(6.0),
            ..Default::default()
        }
    }

    #[test]
    fn recovers_reference_length() {
        let sp = sp6();
        let set = [spectrum(22.0, 1.58, &sp), spectrum(90.0, 1.58, &sp)];
        let r = estimate_bond_length(&set, &sp, &PhysicalConstants::default()).unwrap();
        assert!((r.d - 1.58).abs() < 1e-4, "{}", r.d);
        assert!(r.sigma > 0.05 && r.sigma <= 0.12, "{}", r.sigma);
        assert_eq!(r.resolved_splittings, 2);
    }

    #[test]
    fn needs_distinct_angles_and_off_magic() {
        let sp = sp6();
        let c = PhysicalConstants::default();
        let same = [spectrum(40.0, 1.58, &sp), spectrum(40.0, 1.58, &sp)];
        assert!(matches!(estimate_bond_length(&same, &sp, &c), Err(Error::Precondition(_))));
        let magic = [spectrum(MAGIC_ANGLE_DEG, 1.58, &sp), spectrum(MAGIC_ANGLE_DEG + 1e-4, 1.58, &sp)];
        assert!(matches!(estimate_bond_length(&magic, &sp, &c), Err(Error::Unidentifiable(_))));
        assert!(matches!(estimate_bond_length(&same[..1], &sp, &c), Err(Error::Precondition(_))));
    }

    #[test]
    fn resolution_clusters_merge_close_splittings() {
        let f = resolved_factors(&[30.0, 30.5, 90.0], 60.0, 6.0);
        assert_eq!(f.len(), 2);
    }
}
