use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use nanonmr::fit::{
    add_gaussian_noise, estimate_bond_length, fit_orientation, fit_ratio, larmor_slope, BondSpectrum, KnownAngles,
};
use nanonmr::geometry::dimer_angles;
use nanonmr::io;
use nanonmr::sigproc::{
    alias, dft_windowed, find_peaks, fit_sinusoids, model_signal, reconstruct, undersample, unfold_peak, PeakList,
    SpectrumMode,
};
use nanonmr::spinsim::{
    correlation_response, measure_hetero_prefactor, oracle_grid, Coupling, DipolarForm, Nucleus, OracleOptions,
    SequenceOptions, Species,
};
use nanonmr::{CrystalOrientation, OrientationFitOptions, SpectrumModel, SpectrumParams, SpinSystem};

use crate::config::{ConfigError, RunConfig};
use crate::svg::{Plot, Series};

/// Fields at which the synthetic slope data are generated (G).
const SLOPE_FIELDS: [f64; 4] = [312.2, 364.8, 419.8, 434.4];

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

fn write_svg(path: &Path, plot: Plot) -> Result<()> {
    std::fs::write(path, plot.render()).with_context(|| format!("writing {}", path.display()))
}

fn angles(cfg: &RunConfig) -> Vec<f64> {
    match cfg.theta_deg {
        Some(t) => vec![t],
        None => dimer_angles(&cfg.orientation()),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let dp = cfg.dipolar()?;
    let sp = cfg.spectrum_params();
    let grid = cfg.frequency_grid()?;
    let clean = nanonmr::synthesize_from_angles(&angles(cfg), &dp, &sp, &grid)?;
    let curve = if cfg.noise > 0.0 { add_gaussian_noise(&clean, cfg.noise, cfg.seed)? } else { clean };
    let peaks = find_peaks(&curve, cfg.peaks)?;

    let model = SpectrumModel::from_angles(&angles(cfg), &dp, &sp)?;
    let ts = undersample(model_signal(&model, cfg.larmor_khz()), cfg.fs_khz, cfg.samples)?;

    io::save_spectrum(&dir.join("spectrum.csv"), &curve)?;
    io::save_timeseries(&dir.join("timeseries.csv"), &ts)?;
    io::save_json(&dir.join("peaks.json"), &peaks)?;
    std::fs::write(dir.join("config.toml"), toml::to_string(cfg)?)?;
    write_svg(
        &dir.join("spectrum.svg"),
        Plot {
            title: "Model spectrum",
            x_label: "offset from Larmor frequency (kHz)",
            y_label: "intensity (normalised)",
            series: vec![Series { label: "spectrum", x: &curve.frequencies, y: &curve.intensities }],
            markers: peaks.centers(),
        },
    )?;
    println!("δ = {:.3} kHz, ν_L = {:.2} kHz", dp.delta, cfg.larmor_khz());
    println!("peaks (kHz): {}", fmt_list(&peaks.centers()));
    println!("wrote spectrum.csv, timeseries.csv, peaks.json, spectrum.svg to {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct CorrelationSummary {
    larmor_khz: f64,
    tau_ns: f64,
    frequency_khz: Option<f64>,
    period_ns: Option<f64>,
}

pub fn correlate(cfg: &RunConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let c = &cfg.correlate;
    let sensed = Nucleus { species: Species::H, a_zz: 0.0, a_zx: c.a_zx_khz };
    let mut sys = SpinSystem::new(cfg.field_gauss).with_nv().with_nucleus(sensed);
    if let Some(theta) = c.dimer_theta_deg {
        let delta = cfg.dipolar()?.delta;
        sys = sys
            .with_nucleus(sensed)
            .with_coupling(0, 1, Coupling::Dipolar { delta, theta_deg: theta, form: DipolarForm::Full });
    }
    sys.constants = cfg.constants();
    let larmor = sys.larmor(Species::H);
    let tau = 1.0 / (2.0 * larmor * 1e3);
    let opts = SequenceOptions { t1: c.t1_us.map(|t| t * 1e-6) };
    let series = correlation_response(&sys, c.dt_ns * 1e-9, c.samples, tau, c.k, opts)?;
    let frequency = fit_sinusoids(&series, 1).ok().map(|f| f.components[0].frequency);
    let summary = CorrelationSummary {
        larmor_khz: larmor,
        tau_ns: tau * 1e9,
        frequency_khz: frequency,
        period_ns: frequency.map(|f| 1e6 / f),
    };

    io::save_timeseries(&dir.join("correlation.csv"), &series)?;
    io::save_json(&dir.join("correlation.json"), &summary)?;
    let t_us: Vec<f64> = series.times().map(|t| t * 1e6).collect();
    write_svg(
        &dir.join("correlation.svg"),
        Plot {
            title: "Correlation signal",
            x_label: "storage time T (µs)",
            y_label: "P(0) − P(−1)",
            series: vec![Series { label: "signal", x: &t_us, y: &series.values }],
            markers: vec![],
        },
    )?;
    println!("ν_L = {larmor:.2} kHz, τ = {:.2} ns", tau * 1e9);
    match summary.period_ns {
        Some(p) => println!("oscillation period {p:.2} ns"),
        None => println!("oscillation period: sinusoid fit did not converge"),
    }
    Ok(())
}

#[derive(Serialize)]
struct Reconstruction {
    sample_rate_khz: f64,
    larmor_khz: f64,
    aliased_carrier_khz: f64,
    /// Offsets from the Larmor frequency found in the spectrum (kHz).
    frequency_domain: PeakList,
    /// Offsets from a direct sinusoid fit to the samples, when it converges.
    time_domain: Option<Vec<f64>>,
}

pub fn reconstruct_cmd(cfg: &RunConfig, input: &Path) -> Result<()> {
    let dir = out_dir(cfg)?;
    let ts = io::load_timeseries(input).with_context(|| format!("reading {}", input.display()))?;
    let chain = cfg.chain();
    let offsets = reconstruct(&ts, &chain)?;

    let time_domain = fit_sinusoids(&ts, chain.n_peaks).ok().and_then(|fit| {
        let mut v: Vec<f64> = fit
            .components
            .iter()
            .map(|c| unfold_peak(c.frequency, chain.f_s, chain.larmor, chain.half_width).map(|f| f - chain.larmor))
            .collect::<nanonmr::Result<_>>()
            .ok()?;
        v.sort_by(f64::total_cmp);
        Some(v)
    });

    let curve = match chain.mode {
        SpectrumMode::Magnitude => dft_windowed(&ts, chain.window)?.to_curve(),
        SpectrumMode::Absorption => {
            let mut half = ts.clone();
            half.values[0] *= 0.5;
            dft_windowed(&half, chain.window)?.to_absorption_curve()
        }
    };
    let markers: Vec<f64> = offsets.centers().iter().map(|o| alias(chain.larmor + o, chain.f_s)).collect();
    let result = Reconstruction {
        sample_rate_khz: chain.f_s,
        larmor_khz: chain.larmor,
        aliased_carrier_khz: alias(chain.larmor, chain.f_s),
        frequency_domain: offsets,
        time_domain,
    };
    io::save_spectrum(&dir.join("aliased_spectrum.csv"), &curve)?;
    io::save_json(&dir.join("reconstruct.json"), &result)?;
    write_svg(
        &dir.join("aliased_spectrum.svg"),
        Plot {
            title: "Spectrum of the undersampled signal",
            x_label: "aliased frequency (kHz)",
            y_label: "amplitude",
            series: vec![Series { label: "DFT", x: &curve.frequencies, y: &curve.intensities }],
            markers,
        },
    )?;
    println!("carrier aliases to {:.2} kHz", result.aliased_carrier_khz);
    println!("offsets from DFT (kHz): {}", fmt_list(&result.frequency_domain.centers()));
    if let Some(t) = &result.time_domain {
        println!("offsets from sinusoid fit (kHz): {}", fmt_list(t));
    }
    Ok(())
}

pub fn fit(cfg: &RunConfig, input: &Path, fit_p: bool) -> Result<()> {
    let dir = out_dir(cfg)?;
    let measured = io::load_spectrum(input).with_context(|| format!("reading {}", input.display()))?;
    let dp = cfg.dipolar()?;
    let sp = cfg.spectrum_params();
    let opts = OrientationFitOptions { fit_p, ..Default::default() };
    let r = fit_orientation(&measured, &dp, &sp, &opts)?;

    let best = SpectrumParams { p: r.p, f_shift: r.f_shift, ..sp };
    let model: Vec<f64> = SpectrumModel::from_angles(&dimer_angles(&r.orientation()), &dp, &best)?
        .sample(&measured.frequencies)
        .iter()
        .map(|v| v * r.scale)
        .collect();
    io::save_json(&dir.join("fit.json"), &r)?;
    write_svg(
        &dir.join("fit_overlay.svg"),
        Plot {
            title: "Orientation fit",
            x_label: "offset from Larmor frequency (kHz)",
            y_label: "intensity",
            series: vec![
                Series { label: "data", x: &measured.frequencies, y: &measured.intensities },
                Series { label: "best model", x: &measured.frequencies, y: &model },
            ],
            markers: vec![],
        },
    )?;
    let pm = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.2}"));
    println!("α = {:.2} ± {}°, β = {:.2} ± {}°", r.alpha, pm(r.alpha_sigma), r.beta, pm(r.beta_sigma));
    println!("f_shift = {:.3} kHz, p = {:.3}{}", r.f_shift, r.p, if r.p_fitted { " (fitted)" } else { "" });
    println!("residual = {:.4e} over {} points", r.residual, measured.len());
    println!("{} equivalent minima", r.equivalent_minima.len());
    Ok(())
}

pub fn ratio(cfg: &RunConfig, input: &Path) -> Result<()> {
    let dir = out_dir(cfg)?;
    let measured = io::load_spectrum(input).with_context(|| format!("reading {}", input.display()))?;
    let r = fit_ratio(&measured, &cfg.orientation(), &cfg.dipolar()?, &cfg.spectrum_params())?;
    io::save_json(&dir.join("ratio.json"), &r)?;
    println!("p = {:.4} ± {:.4} (HDO:H2O = {:.3})", r.p, r.sigma, r.p / (1.0 - r.p));
    if let Some(w) = &r.warning {
        eprintln!("warning: {w}");
    }
    Ok(())
}

/// `PATH:theta=DEG` or `PATH:alpha=DEG,beta=DEG`.
fn parse_bond_input(arg: &str) -> Result<(PathBuf, KnownAngles)> {
    let (path, spec) = arg
        .rsplit_once(':')
        .ok_or_else(|| ConfigError(format!("'{arg}' should be PATH:theta=DEG or PATH:alpha=DEG,beta=DEG")))?;
    let mut theta = None;
    let (mut alpha, mut beta) = (None, None);
    for part in spec.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("'{part}' in '{arg}' is not key=value")))?;
        let v: f64 = v.trim().parse().map_err(|_| ConfigError(format!("'{v}' in '{arg}' is not a number")))?;
        match k.trim() {
            "theta" => theta = Some(v),
            "alpha" => alpha = Some(v),
            "beta" => beta = Some(v),
            other => return Err(ConfigError(format!("unknown key '{other}' in '{arg}'")).into()),
        }
    }
    let angles = match (theta, alpha, beta) {
        (Some(t), None, None) => KnownAngles::Theta(t),
        (None, Some(a), Some(b)) => KnownAngles::Orientation(
            CrystalOrientation::new(a, b).map_err(|e| ConfigError(format!("'{arg}': {e}")))?,
        ),
        _ => return Err(ConfigError(format!("'{arg}' needs either theta or both alpha and beta")).into()),
    };
    Ok((PathBuf::from(path), angles))
}

pub fn bond_length(cfg: &RunConfig, inputs: &[String]) -> Result<()> {
    let dir = out_dir(cfg)?;
    let mut spectra = Vec::new();
    for arg in inputs {
        let (path, angles) = parse_bond_input(arg)?;
        let curve = io::load_spectrum(&path).with_context(|| format!("reading {}", path.display()))?;
        spectra.push(BondSpectrum { curve, angles });
    }
    let r = estimate_bond_length(&spectra, &cfg.spectrum_params(), &cfg.constants())?;
    io::save_json(&dir.join("bond_length.json"), &r)?;
    println!(
        "d = {:.4} ± {:.4} Å (statistical {:.4}, line width {:.4}), δ = {:.3} kHz",
        r.d, r.sigma, r.sigma_statistical, r.sigma_linewidth, r.delta
    );
    Ok(())
}

fn read_resonances(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Option<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.len() < 2 || header[0] != "field_gauss" || header[1] != "frequency_khz" {
        bail!("line 1: expected header 'field_gauss,frequency_khz[,sigma_khz]'");
    }
    let with_sigma = header.len() >= 3;
    let (mut b, mut f, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            let v = rec.get(i).ok_or_else(|| anyhow!("line {line}: missing column {}", i + 1))?.trim();
            v.parse().map_err(|_| anyhow!("line {line}: '{v}' is not a number"))
        };
        b.push(num(0)?);
        f.push(num(1)?);
        if with_sigma {
            s.push(num(2)?);
        }
    }
    Ok((b, f, with_sigma.then_some(s)))
}

pub fn slope(cfg: &RunConfig, input: Option<&Path>, through_origin: bool, noise_khz: f64) -> Result<()> {
    let dir = out_dir(cfg)?;
    let (fields, freqs, sigmas) = match input {
        Some(p) => read_resonances(p)?,
        None => {
            if !(noise_khz >= 0.0 && noise_khz.is_finite()) {
                return Err(ConfigError(format!("noise-khz = {noise_khz} must be non-negative")).into());
            }
            let gamma = cfg.constants().gamma_h;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let noise = Normal::new(0.0, noise_khz).map_err(|e| anyhow!("{e}"))?;
            let f: Vec<f64> = SLOPE_FIELDS.iter().map(|b| gamma * b + noise.sample(&mut rng)).collect();
            let s = (noise_khz > 0.0).then(|| vec![noise_khz; SLOPE_FIELDS.len()]);
            (SLOPE_FIELDS.to_vec(), f, s)
        }
    };
    let r = larmor_slope(&fields, &freqs, sigmas.as_deref(), through_origin)?;
    io::save_json(&dir.join("slope.json"), &r)?;
    match r.slope_se {
        Some(se) => println!("slope = {:.5} ± {:.5} kHz/G", r.slope, se),
        None => println!("slope = {:.5} kHz/G (no degrees of freedom for an error)", r.slope),
    }
    if let Some(i) = r.intercept {
        println!("intercept = {i:.3} kHz");
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    cells: Vec<nanonmr::spinsim::OracleCell>,
    hetero_prefactor: f64,
    pass: bool,
}

/// Returns whether every cell passed.
pub fn oracle(cfg: &RunConfig, corrupt_delta: Option<f64>) -> Result<bool> {
    let dir = out_dir(cfg)?;
    let consts = cfg.constants();
    let opts = OracleOptions { delta_scale: corrupt_delta.unwrap_or(1.0), ..Default::default() };
    let cells = oracle_grid(&consts, &opts)?;
    let kappa = measure_hetero_prefactor(&consts, cfg.bond_length_angstrom, 30.0)?;
    let kappa_ok = (kappa - nanonmr::dipolar::HETERO_PREFACTOR).abs() < opts.rtol;

    println!("{:>8} {:>6} {:>9} {:>11} {:>11} {:>9}  result", "θ (°)", "d (Å)", "B₀ (G)", "analytic", "numeric", "rel.err");
    for c in &cells {
        let rel = if c.analytic >= opts.resolution_khz { format!("{:.2e}", c.relative_error()) } else { "-".into() };
        println!(
            "{:>8.3} {:>6.2} {:>9.1} {:>11.4} {:>11.4} {:>9}  {}",
            c.theta_deg,
            c.bond_length,
            c.field_gauss,
            c.analytic,
            c.numeric,
            rel,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    println!("hetero prefactor κ = {kappa:.6} ({})", if kappa_ok { "pass" } else { "FAIL" });
    let pass = kappa_ok && cells.iter().all(|c| c.pass);
    let failed = cells.iter().filter(|c| !c.pass).count();
    println!("{} of {} cells pass", cells.len() - failed, cells.len());
    io::save_json(&dir.join("oracle.json"), &OracleReport { cells, hetero_prefactor: kappa, pass })?;
    Ok(pass)
}
