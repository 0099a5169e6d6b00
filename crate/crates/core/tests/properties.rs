use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use nanonmr::dipolar::frequency_grid;
use nanonmr::fit::{
    add_gaussian_noise, estimate_bond_length, fit_orientation, fit_ratio, larmor_slope, BondSpectrum, KnownAngles,
};
use nanonmr::geometry::{dimer_angles, dimer_orientations, orient};
use nanonmr::sigproc::{alias, dft, find_peaks, fit_sinusoids, unfold_peak};
use nanonmr::spinsim::{build_hamiltonian, Coupling, DipolarForm, Nucleus, Propagator, Species};
use nanonmr::{
    synthesize_from_angles, synthesize_spectrum, CrystalOrientation, DipolarParams, OrientationFitOptions,
    PhysicalConstants, SampledCurve, SpectrumModel, SpectrumParams, SpinSystem, TimeSeries,
};

fn reference() -> DipolarParams {
    DipolarParams::from_bond_length(1.58, &PhysicalConstants::default()).unwrap()
}

fn fit_grid() -> Vec<f64> {
    frequency_grid(-100.0, 100.0, 0.5).unwrap()
}

fn orientation() -> impl Strategy<Value = CrystalOrientation> {
    (0.0..180.0f64, 0.0..360.0f64).prop_map(|(a, b)| CrystalOrientation::new(a, b).unwrap())
}

fn rss_at(y: &[f64], grid: &[f64], o: &CrystalOrientation, sp: &SpectrumParams) -> f64 {
    let m = SpectrumModel::from_angles(&dimer_angles(o), &reference(), sp).unwrap().sample(grid);
    let a = y.iter().zip(&m).map(|(p, q)| p * q).sum::<f64>() / m.iter().map(|v| v * v).sum::<f64>();
    y.iter().zip(&m).map(|(p, q)| (p - a * q).powi(2)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn parseval(values in prop::collection::vec(-1.0..1.0f64, 2..700), dt in 1e-8..1e-4f64) {
        let e: f64 = values.iter().map(|v| v * v * dt).sum();
        prop_assume!(e > 0.0);
        let sp = dft(&TimeSeries::new(dt, values).unwrap()).unwrap();
        prop_assert!((sp.energy() - e).abs() <= 1e-9 * e);
    }

    #[test]
    fn rotation_preserves_dot_products(o in orientation()) {
        let crystal = dimer_orientations();
        let lab = orient(&crystal, &o).unwrap();
        for (a, la) in crystal.directions().iter().zip(lab.directions()) {
            prop_assert!((la.norm() - 1.0).abs() < 1e-12);
            for (b, lb) in crystal.directions().iter().zip(lab.directions()) {
                prop_assert!((a.dot(b) - la.dot(lb)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectrum_even_without_envelope_shift(o in orientation(), p in 0.0..0.8f64) {
        let grid = frequency_grid(-120.0, 120.0, 0.5).unwrap();
        let sp = SpectrumParams { p, ..Default::default() };
        let y = synthesize_spectrum(&o, &reference(), &sp, &grid).unwrap().intensities;
        for (a, b) in y.iter().zip(y.iter().rev()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn peak_centers_ignore_amplitude_scale(o in orientation(), scale in 1e-3..1e3f64) {
        let grid = fit_grid();
        let curve = synthesize_spectrum(&o, &reference(), &SpectrumParams::default(), &grid).unwrap();
        let scaled = SampledCurve::new(grid, curve.intensities.iter().map(|v| v * scale).collect()).unwrap();
        let a = find_peaks(&curve, 5).unwrap().centers();
        let b = find_peaks(&scaled, 5).unwrap().centers();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn spin_evolution_is_unitary(
        field in 1.0..2000.0f64,
        hf in prop::array::uniform4(-50.0..50.0f64),
        delta in 0.5..40.0f64,
        theta in 0.0..180.0f64,
        t in 0.0..1e-3f64,
    ) {
        let sys = SpinSystem::new(field)
            .with_nv()
            .with_nucleus(Nucleus { species: Species::H, a_zz: hf[0], a_zx: hf[1] })
            .with_nucleus(Nucleus { species: Species::D, a_zz: hf[2] / 6.5, a_zx: hf[3] / 6.5 })
            .with_coupling(0, 1, Coupling::Dipolar { delta, theta_deg: theta, form: DipolarForm::Full });
        let u = Propagator::new(&build_hamiltonian(&sys).unwrap()).unitary(t);
        let err = (u.adjoint() * &u - nalgebra::DMatrix::identity(u.nrows(), u.ncols()))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "{}", err);
    }

    #[test]
    fn sinusoid_fit_never_increases_residual(
        tones in prop::collection::vec((0.1..1.0f64, 5.0..200.0f64, -3.0..3.0f64), 1..4),
        n in 64usize..256,
    ) {
        let dt = 1e-3 / 500.0;
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                tones.iter().map(|(a, f, ph)| a * (2.0 * std::f64::consts::PI * f * 1e3 * t + ph).cos()).sum()
            })
            .collect();
        let ts = TimeSeries::new(dt, values).unwrap();
        if let Ok(fit) = fit_sinusoids(&ts, tones.len()) {
            prop_assert!(fit.residual_norm <= fit.initial_residual_norm * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    // Inside one Nyquist zone the band [hint − W, hint + W] with W < f_s/4
    // around the zone centre maps one-to-one onto baseband.
    #[test]
    fn unfold_inverts_alias(f_s in 50.0..5000.0f64, zone in 0u32..8, mirrored in any::<bool>(), u in -1.0..1.0f64) {
        let hint = (zone as f64 + if mirrored { 0.75 } else { 0.25 }) * f_s;
        let w = 0.24 * f_s;
        let f = hint + u * w;
        let back = unfold_peak(alias(f, f_s), f_s, hint, w).unwrap();
        prop_assert!((back - f).abs() <= 1e-9 * f.max(f_s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bond_length_scales_with_coupling(c in 0.5..2.0f64) {
        let consts = PhysicalConstants::default();
        let dp = DipolarParams::from_delta(c * reference().delta, &consts).unwrap();
        let sp = SpectrumParams {
            p: 0.0,
            line_broadening: SpectrumParams::broadening_for_line_fwhm(6.0),
            filter_sigma: 80.0,
            ..Default::default()
        };
        let grid = frequency_grid(-150.0, 150.0, 0.25).unwrap();
        let set: Vec<BondSpectrum> = [22.0, 90.0]
            .iter()
            .map(|&t| BondSpectrum {
                curve: synthesize_from_angles(&[t], &dp, &sp, &grid).unwrap(),
                angles: KnownAngles::Theta(t),
            })
            .collect();
        let r = estimate_bond_length(&set, &sp, &consts).unwrap();
        let want = 1.58 / c.cbrt();
        prop_assert!((r.d - want).abs() < 0.01 * want, "{} vs {}", r.d, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn equivalent_minima_closed_under_hexagonal_rotation(o in orientation()) {
        let sp = SpectrumParams::default();
        let y = synthesize_spectrum(&o, &reference(), &sp, &fit_grid()).unwrap();
        let r = fit_orientation(&y, &reference(), &sp, &OrientationFitOptions::default()).unwrap();
        let best = r.orientation();
        prop_assert!(r.equivalent_minima.iter().any(|m| m.distance_up_to_symmetry(&best) < 1e-6));
        for m in &r.equivalent_minima {
            let turned = CrystalOrientation { alpha: m.alpha + 60.0, beta: m.beta }.normalized();
            let found = r.equivalent_minima.iter().any(|q| {
                let da = (q.alpha - turned.alpha).rem_euclid(120.0);
                let db = (q.beta - turned.beta).rem_euclid(180.0);
                da.min(120.0 - da) < 1e-6 && db.min(180.0 - db) < 1e-6
            });
            prop_assert!(found, "{:?} has no image {:?}", m, turned);
        }
    }

    #[test]
    fn fit_beats_every_grid_point(o in orientation(), seed in 0u64..1000) {
        let sp = SpectrumParams::default();
        let grid = fit_grid();
        let clean = synthesize_spectrum(&o, &reference(), &sp, &grid).unwrap();
        let y = add_gaussian_noise(&clean, 0.02, seed).unwrap();
        let r = fit_orientation(&y, &reference(), &sp, &OrientationFitOptions::default()).unwrap();
        let mut a = 61.0;
        while a <= 91.0 {
            let mut b = 30.0;
            while b <= 120.0 {
                let g = CrystalOrientation::new(a, b).unwrap();
                prop_assert!(r.residual <= rss_at(&y.intensities, &grid, &g, &sp) * (1.0 + 1e-12));
                b += 3.0;
            }
            a += 3.0;
        }
    }

    #[test]
    fn joint_and_sequential_ratio_fits_agree(o in orientation(), p in 0.05..0.7f64) {
        let sp = SpectrumParams { p, ..Default::default() };
        let y = synthesize_spectrum(&o, &reference(), &sp, &fit_grid()).unwrap();
        let opts = OrientationFitOptions { fit_p: true, ..Default::default() };
        let joint = fit_orientation(&y, &reference(), &SpectrumParams::default(), &opts).unwrap();
        let fixed = SpectrumParams { f_shift: joint.f_shift, ..Default::default() };
        let seq = fit_ratio(&y, &joint.orientation(), &reference(), &fixed).unwrap();
        let tol = 3.0 * seq.sigma.max(joint.p_sigma.unwrap_or(0.0)).max(1e-6);
        prop_assert!((joint.p - seq.p).abs() <= tol, "{} vs {} (tol {})", joint.p, seq.p, tol);
        prop_assert!((seq.p - p).abs() < 0.05);
    }
}

#[test]
fn orientation_recovered_for_random_ground_truth() {
    let sp = SpectrumParams::default();
    let grid = fit_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut hits = 0;
    for trial in 0..20u64 {
        let o = CrystalOrientation::new(
            rand::Rng::random_range(&mut rng, 0.0..180.0),
            rand::Rng::random_range(&mut rng, 0.0..360.0),
        )
        .unwrap();
        let clean = synthesize_spectrum(&o, &reference(), &sp, &grid).unwrap();
        let y = add_gaussian_noise(&clean, 0.02, trial).unwrap();
        let r = fit_orientation(&y, &reference(), &sp, &OrientationFitOptions::default()).unwrap();
        if r.orientation().distance_up_to_symmetry(&o) <= 3.0 {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn central_intensity_grows_with_hdo_fraction() {
    let o = CrystalOrientation::new(65.0, 79.0).unwrap();
    let grid = fit_grid();
    let central: Vec<f64> = (0..=16)
        .map(|i| {
            let sp = SpectrumParams { p: 0.05 * i as f64, ..Default::default() };
            let y = synthesize_spectrum(&o, &reference(), &sp, &grid).unwrap();
            let total: f64 = y.intensities.iter().sum();
            let mid: f64 = grid.iter().zip(&y.intensities).filter(|(f, _)| f.abs() <= 5.0).map(|(_, v)| v).sum();
            mid / total
        })
        .collect();
    for w in central.windows(2) {
        assert!(w[1] > w[0], "{central:?}");
    }
}

#[test]
fn slope_within_three_sigma_in_most_trials() {
    let gamma = PhysicalConstants::default().gamma_h;
    let fields = [312.2, 364.8, 419.8, 434.4];
    let noise = Normal::new(0.0, 5.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ok = 0;
    for _ in 0..100 {
        let f: Vec<f64> = fields.iter().map(|b| gamma * b + noise.sample(&mut rng)).collect();
        let r = larmor_slope(&fields, &f, Some(&[5.0; 4]), false).unwrap();
        if (r.slope - gamma).abs() <= 3.0 * r.slope_se.unwrap() {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}/100");
}

#[test]
fn orientation_fit_is_reproducible_under_seeded_noise() {
    let o = CrystalOrientation::new(65.0, 79.0).unwrap();
    let sp = SpectrumParams::default();
    let clean = synthesize_spectrum(&o, &reference(), &sp, &fit_grid()).unwrap();
    let run = || {
        let y = add_gaussian_noise(&clean, 0.02, 11).unwrap();
        fit_orientation(&y, &reference(), &sp, &OrientationFitOptions::default()).unwrap()
    };
    assert_eq!(run(), run());
}
