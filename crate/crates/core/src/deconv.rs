//! Gaussian blurring and blind Richardson–Lucy deconvolution with a
//! Tikhonov–Miller smoothness term.
//!
//! Kernels are stored as odd-length arrays centred on the middle sample.
//! Widths on the public surface are FWHM in eV; grids are in a.u.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::SpectrumGrid;
use crate::units::{au_to_ev, ev_to_au};

/// FWHM / σ for a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

fn uniform_step(grid: &SpectrumGrid) -> Result<f64> {
    match grid.uniform_step() {
        Some(h) if grid.is_uniform() => Ok(h),
        _ => {
            let e = grid.energies();
            let first = e.get(1).map_or(0.0, |v| v - e[0]);
            let other = e
                .windows(2)
                .map(|w| w[1] - w[0])
                .find(|d| (d - first).abs() > 1e-9 * first.abs())
                .unwrap_or(first);
            Err(Error::NonUniformGrid { first, other })
        }
    }
}

/// Unit-sum sampled Gaussian with half-width `ceil(sigmas·σ/step)` samples.
pub fn gaussian_kernel(fwhm: f64, step: f64, sigmas: f64) -> Vec<f64> {
    let sigma = fwhm / FWHM_PER_SIGMA;
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let half = (sigmas * sigma / step).ceil() as i64;
    let mut k: Vec<f64> = (-half..=half)
        .map(|j| {
            let x = j as f64 * step / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Moment-matched Gaussian FWHM of a centred kernel sampled at `step`.
pub fn kernel_fwhm(kernel: &[f64], step: f64) -> f64 {
    let total: f64 = kernel.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let c = (kernel.len() / 2) as f64;
    let mean: f64 = kernel.iter().enumerate().map(|(j, v)| v * (j as f64 - c)).sum::<f64>() / total;
    let var: f64 = kernel
        .iter()
        .enumerate()
        .map(|(j, v)| v * (j as f64 - c - mean).powi(2))
        .sum::<f64>()
        / total;
    FWHM_PER_SIGMA * var.sqrt() * step
}

/// Blur with a unit-sum Gaussian of the given FWHM (eV), truncated at ±5σ.
/// Near the edges the kernel is renormalized over the samples that exist.
pub fn convolve_gaussian(signal: &[f64], fwhm_ev: f64, grid: &SpectrumGrid) -> Result<Vec<f64>> {
    if !(fwhm_ev >= 0.0) {
        return Err(invalid("fwhm", format!("must be >= 0, got {fwhm_ev}")));
    }
    if signal.len() != grid.len() {
        return Err(invalid("signal", "length differs from grid"));
    }
    let step = uniform_step(grid)?;
    if fwhm_ev == 0.0 {
        return Ok(signal.to_vec());
    }
    let k = gaussian_kernel(ev_to_au(fwhm_ev), step, 5.0);
    let h = (k.len() / 2) as isize;
    let n = signal.len() as isize;
    Ok((0..n)
        .map(|i| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for j in -h..=h {
                let src = i - j;
                if (0..n).contains(&src) {
                    let w = k[(j + h) as usize];
                    acc += w * signal[src as usize];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect())
}

/// (k ⊛ s)_i = Σ_j k_j s_{i−j}, zero outside the array.
fn blur(s: &[f64], k: &[f64]) -> Vec<f64> {
    let h = (k.len() / 2) as isize;
    let n = s.len() as isize;
    (0..n)
        .map(|i| {
            let lo = (-h).max(i - n + 1);
            let hi = h.min(i);
            (lo..=hi).map(|j| k[(j + h) as usize] * s[(i - j) as usize]).sum()
        })
        .collect()
}

/// Adjoint of [`blur`]: (kᵀ ⊛ r)_i = Σ_j k_j r_{i+j}.
fn blur_adjoint(r: &[f64], k: &[f64]) -> Vec<f64> {
    let h = (k.len() / 2) as isize;
    let n = r.len() as isize;
    (0..n)
        .map(|i| {
            let lo = (-h).max(-i);
            let hi = h.min(n - 1 - i);
            (lo..=hi).map(|j| k[(j + h) as usize] * r[(i + j) as usize]).sum()
        })
        .collect()
}

fn ratio(measured: &[f64], model: &[f64]) -> Vec<f64> {
    measured
        .iter()
        .zip(model)
        .map(|(m, b)| if *b > 0.0 { m / b } else { 0.0 })
        .collect()
}

/// One regularized RL update of the signal, rescaled so that the blurred
/// model carries the measured flux.
fn signal_step(s: &mut [f64], measured: &[f64], k: &[f64], norm: &[f64], lambda: f64, flux: f64) {
    let r = ratio(measured, &blur(s, k));
    let corr = blur_adjoint(&r, k);
    let n = s.len();
    let mut next: Vec<f64> = (0..n)
        .map(|i| {
            let mut v = if norm[i] > 0.0 { s[i] * corr[i] / norm[i] } else { 0.0 };
            if lambda > 0.0 && s[i] > 0.0 {
                let lap = if i == 0 || i + 1 == n {
                    0.0
                } else {
                    s[i - 1] - 2.0 * s[i] + s[i + 1]
                };
                let g = lap / s[i].max(f64::MIN_POSITIVE);
                v /= (1.0 - 2.0 * lambda * g).max(0.5);
            }
            v.max(0.0)
        })
        .collect();
    let total: f64 = next.iter().zip(norm).map(|(v, w)| v * w).sum();
    if total > 0.0 {
        next.iter_mut().for_each(|v| *v *= flux / total);
    }
    s.copy_from_slice(&next);
}

/// One blind RL update of the kernel given the current signal.
fn psf_step(k: &mut [f64], s: &[f64], measured: &[f64]) {
    let r = ratio(measured, &blur(s, k));
    let h = (k.len() / 2) as isize;
    let n = s.len() as isize;
    for j in -h..=h {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0.max(j)..n.min(n + j) {
            let sv = s[(i - j) as usize];
            num += sv * r[i as usize];
            den += sv;
        }
        let kj = &mut k[(j + h) as usize];
        *kj = if den > 0.0 { *kj * num / den } else { 0.0 };
    }
}

/// Zero the kernel beyond ±4σ of its moment width and renormalize.
fn truncate_and_normalize(k: &mut [f64], step: f64) {
    let sigma = kernel_fwhm(k, step) / FWHM_PER_SIGMA / step;
    let c = (k.len() / 2) as f64;
    for (j, v) in k.iter_mut().enumerate() {
        if (j as f64 - c).abs() > 4.0 * sigma {
            *v = 0.0;
        }
    }
    let s: f64 = k.iter().sum();
    if s > 0.0 {
        k.iter_mut().for_each(|v| *v /= s);
    }
}

/// I-divergence Σ [m ln(m/b) − m + b] / Σ m, the quantity RL descends.
fn residual(measured: &[f64], s: &[f64], k: &[f64]) -> f64 {
    let model = blur(s, k);
    let flux: f64 = measured.iter().sum();
    measured
        .iter()
        .zip(&model)
        .map(|(&m, &b)| {
            let log = if m > 0.0 {
                m * (m / b.max(f64::MIN_POSITIVE)).ln()
            } else {
                0.0
            };
            log - m + b
        })
        .sum::<f64>()
        / flux
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeconvolutionConfig {
    pub iterations_signal: usize,
    pub iterations_psf: usize,
    pub blind_rounds: usize,
    pub tikhonov_lambda: f64,
    /// FWHM of the initial Gaussian kernel, eV.
    pub psf_init_fwhm: f64,
    /// Stop when the relative residual changes by less than this between rounds.
    pub tolerance: f64,
    /// Update the kernel between signal passes.
    pub blind: bool,
}

impl Default for DeconvolutionConfig {
    fn default() -> Self {
        Self {
            iterations_signal: 25,
            iterations_psf: 10,
            blind_rounds: 10,
            tikhonov_lambda: 1e-3,
            psf_init_fwhm: 0.065,
            tolerance: 1e-4,
            blind: true,
        }
    }
}

impl DeconvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations_signal == 0 || self.blind_rounds == 0 || (self.blind && self.iterations_psf == 0) {
            return Err(invalid("iterations", "counts must be >= 1"));
        }
        if !(self.tikhonov_lambda >= 0.0) {
            return Err(invalid("tikhonov_lambda", "must be >= 0"));
        }
        if !(self.psf_init_fwhm > 0.0) {
            return Err(invalid("psf_init_fwhm", "must be > 0"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(invalid("tolerance", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxRounds,
    /// The residual rose for three consecutive rounds.
    Diverged,
}

/// Per-iteration bookkeeping, one entry per signal or kernel update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub round: usize,
    pub min_estimate: f64,
    pub flux: f64,
    pub min_psf: f64,
    pub psf_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconvolutionResult {
    pub estimate: Vec<f64>,
    /// Centred kernel on the grid step.
    pub psf: Vec<f64>,
    /// Moment-matched FWHM of `psf`, eV.
    pub psf_fwhm: f64,
    /// Normalized I-divergence between measured data and k⊛s after each round.
    pub residual_norm: Vec<f64>,
    pub rounds: usize,
    pub stop: StopReason,
    pub trace: Vec<IterationStats>,
}

/// Alternating multiplicative updates of signal and kernel.
pub fn richardson_lucy_blind(
    measured: &[f64],
    config: &DeconvolutionConfig,
    grid: &SpectrumGrid,
) -> Result<DeconvolutionResult> {
    config.validate()?;
    if measured.len() != grid.len() {
        return Err(invalid("measured", "length differs from grid"));
    }
    if measured.iter().any(|v| !(*v >= 0.0)) {
        return Err(invalid("measured", "must be finite and >= 0"));
    }
    let flux: f64 = measured.iter().sum();
    if flux == 0.0 {
        return Err(Error::ZeroInput);
    }
    let step = uniform_step(grid)?;
    let init = gaussian_kernel(ev_to_au(config.psf_init_fwhm), step, 4.0);
    // Room for the kernel to grow to 1.5 times its initial width.
    let half = (init.len() / 2) * 3 / 2 + 1;
    let mut k = vec![0.0; 2 * half + 1];
    let off = half - init.len() / 2;
    k[off..off + init.len()].copy_from_slice(&init);

    let mean = flux / measured.len() as f64;
    let mut s = vec![mean; measured.len()];
    let mut trace = Vec::new();
    let mut history = Vec::new();
    let mut stop = StopReason::MaxRounds;
    let mut rising = 0;
    let stats = |round: usize, s: &[f64], k: &[f64]| IterationStats {
        round,
        min_estimate: s.iter().copied().fold(f64::INFINITY, f64::min),
        flux: s.iter().sum(),
        min_psf: k.iter().copied().fold(f64::INFINITY, f64::min),
        psf_sum: k.iter().sum(),
    };

    for round in 0..config.blind_rounds {
        let norm = blur_adjoint(&vec![1.0; s.len()], &k);
        for _ in 0..config.iterations_signal {
            signal_step(&mut s, measured, &k, &norm, config.tikhonov_lambda, flux);
            trace.push(stats(round, &s, &k));
        }
        if config.blind {
            for _ in 0..config.iterations_psf {
                psf_step(&mut k, &s, measured);
                let total: f64 = k.iter().sum();
                k.iter_mut().for_each(|v| *v /= total);
                trace.push(stats(round, &s, &k));
            }
            truncate_and_normalize(&mut k, step);
        }
        let res = residual(measured, &s, &k);
        if let Some(&prev) = history.last() {
            rising = if res > prev { rising + 1 } else { 0 };
            history.push(res);
            if rising >= 3 {
                stop = StopReason::Diverged;
                break;
            }
            if (prev - res).abs() <= config.tolerance * prev {
                stop = StopReason::Converged;
                break;
            }
        } else {
            history.push(res);
        }
    }
    Ok(DeconvolutionResult {
        psf_fwhm: au_to_ev(kernel_fwhm(&k, step)),
        estimate: s,
        psf: k,
        rounds: history.len(),
        residual_norm: history,
        stop,
        trace,
    })
}

/// Non-blind regularized RL with a fixed kernel. `observe` sees the
/// estimate after every iteration.
pub fn richardson_lucy<F: FnMut(&[f64])>(
    measured: &[f64],
    kernel: &[f64],
    iterations: usize,
    lambda: f64,
    mut observe: F,
) -> Result<Vec<f64>> {
    if kernel.len().is_multiple_of(2) {
        return Err(invalid("kernel", "length must be odd"));
    }
    if !(lambda >= 0.0) {
        return Err(invalid("tikhonov_lambda", "must be >= 0"));
    }
    let flux: f64 = measured.iter().sum();
    if flux == 0.0 {
        return Err(Error::ZeroInput);
    }
    let norm = blur_adjoint(&vec![1.0; measured.len()], kernel);
    let mut s = vec![flux / measured.len() as f64; measured.len()];
    for _ in 0..iterations {
        signal_step(&mut s, measured, kernel, &norm, lambda, flux);
        observe(&s);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, step_ev: f64) -> SpectrumGrid {
        SpectrumGrid::uniform(0.0, ev_to_au(step_ev * (n - 1) as f64), n).unwrap()
    }

    #[test]
    fn zero_width_is_identity() {
        let g = grid(50, 1e-3);
        let s: Vec<f64> = (0..50).map(|i| (i % 7) as f64).collect();
        assert_eq!(convolve_gaussian(&s, 0.0, &g).unwrap(), s);
    }

    #[test]
    fn delta_blurs_to_requested_width() {
        let g = grid(401, 1e-3);
        let mut s = vec![0.0; 401];
        s[200] = 1.0;
        let b = convolve_gaussian(&s, 0.070, &g).unwrap();
        // half-maximum crossings by linear interpolation
        let peak = b[200];
        let cross = |range: &mut dyn Iterator<Item = usize>| -> f64 {
            let mut prev = 200usize;
            for i in range {
                if b[i] < 0.5 * peak {
                    let (y0, y1) = (b[prev], b[i]);
                    let f = (y0 - 0.5 * peak) / (y0 - y1);
                    return prev as f64 + f * (i as f64 - prev as f64);
                }
                prev = i;
            }
            f64::NAN
        };
        let right = cross(&mut (201..401));
        let left = cross(&mut (0..200).rev());
        let fwhm_mev = right - left;
        assert!((fwhm_mev - 70.0).abs() <= 1.0, "{fwhm_mev}");
    }

    #[test]
    fn moment_fwhm_of_sampled_gaussian() {
        for (fwhm, step) in [(0.07, 0.001), (0.07, 0.01), (0.02, 0.003)] {
            let k = gaussian_kernel(fwhm, step, 8.0);
            assert!((kernel_fwhm(&k, step) - fwhm).abs() < step);
        }
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let g = SpectrumGrid::new(vec![0.0, 1.0, 3.0]).unwrap();
        assert!(matches!(
            convolve_gaussian(&[1.0, 1.0, 1.0], 0.1, &g),
            Err(Error::NonUniformGrid { .. })
        ));
    }

    #[test]
    fn blur_adjoint_identity() {
        let k = [0.1, 0.5, 0.3, 0.05, 0.05];
        let x: Vec<f64> = (0..20).map(|i| ((i * 37) % 11) as f64).collect();
        let y: Vec<f64> = (0..20).map(|i| ((i * 13) % 5) as f64 - 1.0).collect();
        let lhs: f64 = blur(&x, &k).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(blur_adjoint(&y, &k)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn zero_input_and_bad_config() {
        let g = grid(64, 1e-3);
        let cfg = DeconvolutionConfig::default();
        assert_eq!(richardson_lucy_blind(&[0.0; 64], &cfg, &g), Err(Error::ZeroInput));
        let bad = DeconvolutionConfig {
            iterations_signal: 0,
            ..cfg
        };
        assert!(richardson_lucy_blind(&[1.0; 64], &bad, &g).is_err());
    }
}
