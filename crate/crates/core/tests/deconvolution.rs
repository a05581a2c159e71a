use rabi_xuv::deconv::{
    convolve_gaussian, gaussian_kernel, richardson_lucy, richardson_lucy_blind, DeconvolutionConfig,
};
use rabi_xuv::ionization::{final_spectrum, Selector, TwoPhotonOptions};
use rabi_xuv::model::{AtomModel, PulseParams, SpectrumGrid};
use rabi_xuv::scans::{analyze_doublet_xy, DoubletReport, DEFAULT_NOISE_FLOOR};
use rabi_xuv::units::{au_to_ev, ev_to_au, field_from_intensity};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn mev_grid(n: usize, step_mev: f64) -> SpectrumGrid {
    let half = 0.5 * step_mev * 1e-3 * (n - 1) as f64;
    SpectrumGrid::uniform(ev_to_au(-half), ev_to_au(half), n).unwrap()
}

fn x_ev(g: &SpectrumGrid) -> Vec<f64> {
    g.energies().iter().map(|&e| au_to_ev(e)).collect()
}

fn gaussian_pair(x: &[f64], sep: f64, sigma: f64) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let a = (v + 0.5 * sep) / sigma;
            let b = (v - 0.5 * sep) / sigma;
            (-0.5 * a * a).exp() + (-0.5 * b * b).exp()
        })
        .collect()
}

fn doublet(x: &[f64], y: &[f64]) -> rabi_xuv::scans::DoubletAnalysis {
    match analyze_doublet_xy(x, y, DEFAULT_NOISE_FLOOR) {
        DoubletReport::Doublet(d) => d,
        other => panic!("{other:?}"),
    }
}

/// Maximum of g(x − a) + g(x + a) for a Gaussian g of width σ: x = a·u with
/// u = tanh(a²u/σ²), solved by fixed-point iteration.
fn merged_peak_offset(a: f64, sigma: f64) -> f64 {
    let c = a * a / (sigma * sigma);
    let mut u = 1.0f64;
    for _ in 0..500 {
        u = (c * u).tanh();
    }
    a * u
}

#[test]
fn blurred_doublet_keeps_positions() {
    let g = mev_grid(801, 0.5);
    let x = x_ev(&g);
    for sigma in [0.002, 0.010] {
        let s = gaussian_pair(&x, 0.080, sigma);
        let b = convolve_gaussian(&s, 0.070, &g).unwrap();
        let contrast = |y: &[f64]| 1.0 - y[400] / y.iter().copied().fold(0.0, f64::max);
        assert!(contrast(&b) < contrast(&s));
        let after = doublet(&x, &b);
        let combined = (sigma * sigma + (0.070f64 / 2.354_820_045).powi(2)).sqrt();
        let expect = merged_peak_offset(0.040, combined);
        assert!((after.peak_positions[1] - expect).abs() < 2e-4, "{after:?} vs {expect}");
        assert!((after.peak_positions[0] + expect).abs() < 2e-4);
        assert!((after.splitting - 0.080).abs() < 0.010);
    }
}

#[test]
fn identity_kernel_converges_with_monotone_residual() {
    let g = mev_grid(401, 1.0);
    let x = x_ev(&g);
    let m: Vec<f64> = gaussian_pair(&x, 0.1, 0.02).iter().map(|v| v + 0.01).collect();
    let cfg = DeconvolutionConfig {
        psf_init_fwhm: 0.004,
        tikhonov_lambda: 0.0,
        blind: false,
        blind_rounds: 20,
        tolerance: 0.0,
        ..Default::default()
    };
    let r = richardson_lucy_blind(&m, &cfg, &g).unwrap();
    for w in r.residual_norm.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", r.residual_norm);
    }
    let err: f64 = m
        .iter()
        .zip(&r.estimate)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
        / m.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(err < 0.02, "{err}");
}

#[test]
fn known_kernel_error_decreases_monotonically() {
    let g = mev_grid(601, 1.0);
    let x = x_ev(&g);
    let truth: Vec<f64> = gaussian_pair(&x, 0.08, 0.012).iter().map(|v| v + 1e-3).collect();
    let measured = convolve_gaussian(&truth, 0.070, &g).unwrap();
    let kernel = gaussian_kernel(ev_to_au(0.070), g.uniform_step().unwrap(), 5.0);
    let mut errs = Vec::new();
    richardson_lucy(&measured, &kernel, 50, 0.0, |s| {
        let e: f64 = s.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum();
        errs.push(e.sqrt());
    })
    .unwrap();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
}

fn synthetic_measurement(seed: u64) -> (SpectrumGrid, Vec<f64>) {
    let atom = AtomModel::helium_cis_default();
    let e0 = field_from_intensity(2e13).unwrap();
    let pulse = PulseParams::flat_top_rabi_periods(&atom, e0, 0.0, 1.5).unwrap();
    let grid = SpectrumGrid::around_two_photon_line(&atom, ev_to_au(-0.4), ev_to_au(0.4), 801).unwrap();
    let clean = final_spectrum(
        &grid,
        &atom,
        &pulse,
        &TwoPhotonOptions::default(),
        Selector::OnePhotonOnly,
    )
    .unwrap()
    .intensity();
    let blurred = convolve_gaussian(&clean, 0.070, &grid).unwrap();
    let peak = blurred.iter().copied().fold(0.0, f64::max);
    let noise = Normal::new(0.0, 0.01 * peak).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let measured = blurred.iter().map(|v| (v + noise.sample(&mut rng)).max(0.0)).collect();
    (grid, measured)
}

fn high_frequency_power(y: &[f64]) -> f64 {
    let n = y.len();
    let mut total = 0.0;
    for k in n / 8..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in y.iter().enumerate() {
            let ph = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
            re += v * ph.cos();
            im += v * ph.sin();
        }
        total += re * re + im * im;
    }
    total
}

#[test]
fn regularization_damps_high_frequencies() {
    let (grid, measured) = synthetic_measurement(3);
    let base = DeconvolutionConfig {
        blind: false,
        psf_init_fwhm: 0.070,
        tolerance: 0.0,
        ..Default::default()
    };
    let plain = richardson_lucy_blind(
        &measured,
        &DeconvolutionConfig {
            tikhonov_lambda: 0.0,
            ..base
        },
        &grid,
    )
    .unwrap();
    let reg = richardson_lucy_blind(
        &measured,
        &DeconvolutionConfig {
            tikhonov_lambda: 1e-3,
            ..base
        },
        &grid,
    )
    .unwrap();
    let (p0, p1) = (
        high_frequency_power(&plain.estimate),
        high_frequency_power(&reg.estimate),
    );
    assert!(p1 < p0, "{p1:e} vs {p0:e}");
}

#[test]
fn blind_run_keeps_invariants() {
    let (grid, measured) = synthetic_measurement(5);
    let r = richardson_lucy_blind(&measured, &DeconvolutionConfig::default(), &grid).unwrap();
    let flux: f64 = measured.iter().sum();
    for st in &r.trace {
        assert!(st.min_estimate >= 0.0 && st.min_psf >= 0.0);
        assert!((st.flux - flux).abs() < 0.01 * flux);
        assert!((st.psf_sum - 1.0).abs() < 1e-9);
    }
    assert!((r.psf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(r.residual_norm.len(), r.rounds);
}
