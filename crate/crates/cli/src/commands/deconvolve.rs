use std::path::Path;

use rabi_xuv::deconv::{convolve_gaussian, richardson_lucy_blind, DeconvolutionResult};
use rabi_xuv::ionization::final_spectrum;
use rabi_xuv::model::SpectrumGrid;
use rabi_xuv::scans::{analyze_doublet_prominent, DoubletReport};
use rabi_xuv::units::{au_to_ev, ev_to_au};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::Context;
use crate::config::RunConfig;
use crate::error::{model_ctx, CliError};
use crate::output::Artifacts;

struct Measurement {
    grid: SpectrumGrid,
    x_ev: Vec<f64>,
    values: Vec<f64>,
    truth: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct Summary<'a> {
    source: String,
    points: usize,
    psf_fwhm_ev: f64,
    rounds: usize,
    stop: rabi_xuv::deconv::StopReason,
    residual_norm: &'a [f64],
    doublet_measured: DoubletReport,
    doublet_estimate: DoubletReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    doublet_truth: Option<DoubletReport>,
    /// Smallest estimate and kernel values and the worst relative flux error
    /// over all iterations.
    min_estimate: f64,
    min_psf: f64,
    max_flux_error: f64,
}

/// Two numeric columns with a header: kinetic energy (eV), intensity.
fn read_input(path: &Path) -> Result<Measurement, CliError> {
    let fail = |m: String| CliError::Input {
        path: path.to_path_buf(),
        message: m,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fail(e.to_string()))?;
        if rec.len() < 2 {
            return Err(fail(format!("row {}: expected two columns", i + 2)));
        }
        let num = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|e| fail(format!("row {}, column {}: {e}", i + 2, k + 1)))
        };
        x.push(num(0)?);
        y.push(num(1)?);
    }
    let grid = SpectrumGrid::new(x.iter().map(|&e| ev_to_au(e)).collect()).map_err(|e| fail(e.to_string()))?;
    if !grid.is_uniform() {
        return Err(fail("energies must be uniformly spaced".into()));
    }
    Ok(Measurement {
        grid,
        x_ev: x,
        values: y,
        truth: None,
    })
}

fn synthesize(cfg: &RunConfig, ctx: &Context) -> Result<Measurement, CliError> {
    let s = cfg.deconvolve.synthetic;
    if !(s.blur_fwhm_ev > 0.0) || !(s.noise_relative >= 0.0) {
        return Err(ctx.config_error("deconvolve.synthetic: blur_fwhm_ev must be > 0 and noise_relative >= 0"));
    }
    ctx.require_flat_top("deconvolve")?;
    let pulse = ctx.pulse_at(ctx.detuning)?;
    let context = model_ctx("synthetic measurement");
    let clean = final_spectrum(&ctx.grid, &ctx.atom, &pulse, &ctx.template.two_photon, s.selector)
        .map_err(&context)?
        .intensity();
    let mut values = convolve_gaussian(&clean, s.blur_fwhm_ev, &ctx.grid).map_err(&context)?;
    if let Some(seed) = s.seed {
        let peak = values.iter().copied().fold(0.0, f64::max);
        if s.noise_relative > 0.0 && peak > 0.0 {
            let noise = Normal::new(0.0, s.noise_relative * peak).expect("positive width");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in &mut values {
                *v = (*v + noise.sample(&mut rng)).max(0.0);
            }
        }
    }
    Ok(Measurement {
        grid: ctx.grid.clone(),
        x_ev: ctx.x_ev(),
        values,
        truth: Some(clean),
    })
}

pub(crate) fn run(cfg: &RunConfig, ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    let d = &cfg.deconvolve;
    d.settings
        .validate()
        .map_err(|e| ctx.config_error(format!("deconvolve.settings: {e}")))?;
    if !(d.min_prominence >= 0.0) {
        return Err(ctx.config_error("deconvolve.min_prominence: must be >= 0"));
    }
    let (m, source) = match &d.input {
        Some(path) => (read_input(path)?, path.display().to_string()),
        None => (synthesize(cfg, ctx)?, "synthetic".to_string()),
    };
    let r: DeconvolutionResult =
        richardson_lucy_blind(&m.values, &d.settings, &m.grid).map_err(model_ctx("deconvolution"))?;

    let mut header = vec!["kinetic_energy_eV", "measured", "estimate"];
    if m.truth.is_some() {
        header.push("truth");
    }
    let rows = (0..m.values.len()).map(|i| {
        let mut row = vec![m.x_ev[i], m.values[i], r.estimate[i]];
        if let Some(t) = &m.truth {
            row.push(t[i]);
        }
        row
    });
    art.csv("deconvolution.csv", header, rows)?;
    let step = au_to_ev(m.grid.uniform_step().expect("checked uniform"));
    let half = (r.psf.len() / 2) as f64;
    art.csv(
        "deconvolution_kernel.csv",
        ["offset_eV", "psf"],
        r.psf
            .iter()
            .enumerate()
            .map(|(k, &p)| vec![(k as f64 - half) * step, p]),
    )?;
    art.json_data("deconvolution_trace.json", &r.trace)?;

    let flux: f64 = m.values.iter().sum();
    let doublet = |y: &[f64]| analyze_doublet_prominent(&m.x_ev, y, d.min_prominence);
    art.summary(
        "deconvolution.json",
        &Summary {
            source,
            points: m.values.len(),
            psf_fwhm_ev: r.psf_fwhm,
            rounds: r.rounds,
            stop: r.stop,
            residual_norm: &r.residual_norm,
            doublet_measured: doublet(&m.values),
            doublet_estimate: doublet(&r.estimate),
            doublet_truth: m.truth.as_deref().map(doublet),
            min_estimate: r.trace.iter().map(|s| s.min_estimate).fold(f64::INFINITY, f64::min),
            min_psf: r.trace.iter().map(|s| s.min_psf).fold(f64::INFINITY, f64::min),
            max_flux_error: r
                .trace
                .iter()
                .map(|s| ((s.flux - flux) / flux).abs())
                .fold(0.0, f64::max),
        },
    )?;
    if ctx.emit_plots {
        let mut body = String::from(
            "set xlabel 'kinetic energy (eV)'\nset ylabel 'intensity'\n\
             plot 'deconvolution.csv' using 1:2 with lines, \\\n     'deconvolution.csv' using 1:3 with lines",
        );
        if m.truth.is_some() {
            body.push_str(", \\\n     'deconvolution.csv' using 1:4 with lines dashtype 2");
        }
        body.push_str("\npause -1\n");
        art.gnuplot("plot_deconvolution.gp", &body);
    }
    Ok(())
}
