use std::collections::BTreeMap;

use rabi_xuv::ionization::final_spectrum;
use rabi_xuv::model::{PartialWave, PulseParams, Spectrum};
use rabi_xuv::rabi::{dressed_kinetic_energies, RabiParams};
use rabi_xuv::scans::{analyze_doublet, buildup_sequence, central_dip, DipReport, DoubletReport};
use rabi_xuv::units::{au_to_ev, au_to_mev, mev_to_au};
use serde::Serialize;

use super::{selector_file, spectrum_rows, Context, SPECTRUM_HEADER};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{complex_pairs, Artifacts};

#[derive(Serialize)]
struct BuildupEntry {
    rabi_periods: f64,
    doublet: DoubletReport,
    central_dip: Option<DipReport>,
}

#[derive(Serialize)]
struct SelectorAnalysis {
    selector: &'static str,
    doublet: DoubletReport,
    central_dip: Option<DipReport>,
    /// Dressed-state peak positions, lower then upper (eV).
    predicted_peaks_ev: [f64; 2],
    buildup: Vec<BuildupEntry>,
}

#[derive(Serialize)]
struct Analysis {
    detuning_mev: f64,
    rabi_frequency_mev: f64,
    generalized_rabi_frequency_mev: f64,
    duration_au: f64,
    two_photon_line_ev: f64,
    selectors: Vec<SelectorAnalysis>,
}

#[derive(Serialize)]
struct ChannelJson {
    intensity: Vec<f64>,
    amplitudes: Option<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct SpectrumJson<'a> {
    selector: &'static str,
    kinetic_energy_ev: &'a [f64],
    intensity_total: Vec<f64>,
    channels: BTreeMap<PartialWave, ChannelJson>,
}

fn dip(s: &Spectrum, ctx: &Context, pulse: &PulseParams, half_width: f64) -> Option<DipReport> {
    // absent when the line centre is off the grid
    central_dip(s, &ctx.atom, pulse, half_width).ok()
}

pub(crate) fn run(cfg: &RunConfig, ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    ctx.require_flat_top("spectrum")?;
    let pulse = ctx.pulse_at(ctx.detuning)?;
    let rabi = RabiParams::from_pulse(&ctx.atom, &pulse);
    if rabi.omega <= 0.0 {
        return Err(ctx.config_error("pulse: the Rabi frequency vanishes"));
    }
    let periods = &cfg.spectrum.buildup_rabi_periods;
    if let Some(p) = periods.iter().find(|p| !(**p > 0.0)) {
        return Err(ctx.config_error(format!("spectrum.buildup_rabi_periods: entries must be > 0, got {p}")));
    }
    let half_width = match cfg.spectrum.dip_half_width_mev {
        Some(w) if w > 0.0 => mev_to_au(w),
        Some(w) => return Err(ctx.config_error(format!("spectrum.dip_half_width_mev: must be > 0, got {w}"))),
        None => rabi.omega,
    };

    let x = ctx.x_ev();
    let (hi, lo) = dressed_kinetic_energies(&ctx.atom, &pulse);
    let mut analyses = Vec::new();
    for &sel in &cfg.selectors {
        let context = || format!("spectrum ({})", sel.label());
        let s = final_spectrum(&ctx.grid, &ctx.atom, &pulse, &ctx.template.two_photon, sel)
            .map_err(|e| CliError::model(context(), e))?;
        let buildup = if periods.is_empty() {
            Vec::new()
        } else {
            buildup_sequence(&ctx.atom, &ctx.template, ctx.detuning, periods, &ctx.grid, sel)
                .map_err(|e| CliError::model(context(), e))?
        };

        art.csv(
            &selector_file("spectrum", sel, "csv"),
            SPECTRUM_HEADER,
            spectrum_rows(&s, &x),
        )?;
        let channels = s
            .channels
            .iter()
            .map(|(ell, data)| {
                let ch = ChannelJson {
                    intensity: data.intensity(),
                    amplitudes: data.amplitudes().map(complex_pairs),
                };
                (*ell, ch)
            })
            .collect();
        art.json_data(
            &selector_file("spectrum", sel, "json"),
            &SpectrumJson {
                selector: sel.label(),
                kinetic_energy_ev: &x,
                intensity_total: s.intensity(),
                channels,
            },
        )?;
        if !buildup.is_empty() {
            let mut header = vec!["kinetic_energy_eV".to_string()];
            header.extend(periods.iter().map(|p| format!("periods_{p}")));
            let cols: Vec<Vec<f64>> = buildup.iter().map(Spectrum::intensity).collect();
            let rows = (0..x.len()).map(|i| {
                let mut r = vec![x[i]];
                r.extend(cols.iter().map(|c| c[i]));
                r
            });
            art.csv(&selector_file("buildup", sel, "csv"), header, rows)?;
        }

        analyses.push(SelectorAnalysis {
            selector: sel.label(),
            doublet: analyze_doublet(&s),
            central_dip: dip(&s, ctx, &pulse, half_width),
            predicted_peaks_ev: [au_to_ev(lo), au_to_ev(hi)],
            buildup: periods
                .iter()
                .zip(&buildup)
                .map(|(&n, b)| BuildupEntry {
                    rabi_periods: n,
                    doublet: analyze_doublet(b),
                    central_dip: dip(b, ctx, &pulse, half_width),
                })
                .collect(),
        });
    }
    art.summary(
        "doublet_analysis.json",
        &Analysis {
            detuning_mev: au_to_mev(ctx.detuning),
            rabi_frequency_mev: au_to_mev(rabi.omega),
            generalized_rabi_frequency_mev: au_to_mev(rabi.w),
            duration_au: pulse.duration,
            two_photon_line_ev: au_to_ev(ctx.atom.two_photon_line()),
            selectors: analyses,
        },
    )?;
    if ctx.emit_plots {
        let lines: Vec<String> = cfg
            .selectors
            .iter()
            .map(|&s| {
                format!(
                    "'{}' using 1:2 with lines title '{}'",
                    selector_file("spectrum", s, "csv"),
                    s.label()
                )
            })
            .collect();
        art.gnuplot(
            "plot_spectrum.gp",
            &format!(
                "set xlabel 'kinetic energy (eV)'\nset ylabel 'intensity (a.u.)'\nplot {}\npause -1\n",
                lines.join(", \\\n     ")
            ),
        );
    }
    Ok(())
}
