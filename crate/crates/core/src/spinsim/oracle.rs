//! Cross-check of the closed-form splittings against exact diagonalisation.

use serde::{Deserialize, Serialize};

use super::{fid_lines, Coupling, DipolarForm, FidLine, Nucleus, Species, SpinSystem};
use crate::dipolar::{coupling_parameter, hetero_splitting, splitting, PhysicalConstants, MAGIC_ANGLE_DEG};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub thetas_deg: Vec<f64>,
    pub bond_lengths: Vec<f64>,
    /// Proton Larmor frequency in units of δ for each cell.
    pub larmor_over_delta: f64,
    pub rtol: f64,
    /// Splittings below this (kHz) are unresolved.
    pub resolution_khz: f64,
    /// Multiplies δ on the analytic side only. Anything but 1 should fail.
    pub delta_scale: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            thetas_deg: vec![0.0, 15.0, 30.0, 45.0, MAGIC_ANGLE_DEG, 65.0, 75.0, 90.0],
            bond_lengths: vec![1.4, 1.58, 2.0],
            larmor_over_delta: 50.0,
            rtol: 0.01,
            resolution_khz: 0.1,
            delta_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCell {
    pub theta_deg: f64,
    pub bond_length: f64,
    pub field_gauss: f64,
    /// |(3/4)δ(1 − 3cos²θ)| (kHz)
    pub analytic: f64,
    /// Half the separation of the two strongest proton lines (kHz).
    pub numeric: f64,
    pub pass: bool,
}

impl OracleCell {
    pub fn relative_error(&self) -> f64 {
        (self.numeric - self.analytic).abs() / self.analytic
    }
}

/// Strongest lines within `window` of `center`, sorted by frequency.
fn strongest(lines: &[FidLine], center: f64, window: f64, n: usize) -> Vec<f64> {
    let mut near: Vec<FidLine> = lines
        .iter()
        .filter(|l| (l.frequency - center).abs() < window)
        .copied()
        .collect();
    near.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    let mut f: Vec<f64> = near.iter().take(n).map(|l| l.frequency).collect();
    f.sort_by(f64::total_cmp);
    f
}

/// Two protons under the full dipolar tensor at ω_L = `larmor_over_delta`·δ,
/// compared with the secular formula.
pub fn oracle_grid(consts: &PhysicalConstants, opts: &OracleOptions) -> Result<Vec<OracleCell>> {
    if !(opts.larmor_over_delta > 0.0 && opts.rtol > 0.0 && opts.resolution_khz > 0.0) {
        return Err(Error::domain("oracle field ratio, tolerance and resolution must be positive"));
    }
    let mut cells = Vec::new();
    for &d in &opts.bond_lengths {
        let delta = coupling_parameter(d, consts.gamma_h, consts.gamma_h)?;
        let field = opts.larmor_over_delta * delta / consts.gamma_h;
        for &theta in &opts.thetas_deg {
            let mut sys = SpinSystem::new(field)
                .with_nucleus(Nucleus::new(Species::H))
                .with_nucleus(Nucleus::new(Species::H))
                .with_coupling(0, 1, Coupling::Dipolar { delta, theta_deg: theta, form: DipolarForm::Full });
            sys.constants = *consts;
            let nu = sys.larmor(Species::H);
            let f = strongest(&fid_lines(&sys)?, nu, 3.0 * delta, 2);
            let numeric = if f.len() == 2 { (f[1] - f[0]) / 2.0 } else { 0.0 };
            let analytic = splitting(opts.delta_scale * delta, theta).abs();
            let pass = if analytic < opts.resolution_khz {
                numeric < opts.resolution_khz
            } else {
                (numeric - analytic).abs() <= opts.rtol * analytic
            };
            cells.push(OracleCell { theta_deg: theta, bond_length: d, field_gauss: field, analytic, numeric, pass });
        }
    }
    Ok(cells)
}

/// κ in the proton–deuteron triplet ±κ·δ_HD(1 − 3cos²θ), read off an exact
/// simulation at high field.
pub fn measure_hetero_prefactor(consts: &PhysicalConstants, d: f64, theta_deg: f64) -> Result<f64> {
    let delta_hd = coupling_parameter(d, consts.gamma_h, consts.gamma_d)?;
    let reference = hetero_splitting(delta_hd, theta_deg);
    if reference.abs() < 1e-6 {
        return Err(Error::precondition("κ is undefined at the magic angle"));
    }
    let field = 1e4 * delta_hd / consts.gamma_h;
    let mut sys = SpinSystem::new(field)
        .with_nucleus(Nucleus::new(Species::H))
        .with_nucleus(Nucleus::new(Species::D))
        .with_coupling(0, 1, Coupling::Dipolar { delta: delta_hd, theta_deg, form: DipolarForm::Full });
    sys.constants = *consts;
    let nu = sys.larmor(Species::H);
    let f = strongest(&fid_lines(&sys)?, nu, 3.0 * delta_hd, 3);
    if f.len() != 3 {
        return Err(Error::precondition("proton line did not split into a triplet"));
    }
    let kappa = (f[2] - f[0]) / 2.0 / reference.abs() * crate::dipolar::HETERO_PREFACTOR;
    Ok(kappa)
}
