use rabi_xuv::focal::volume_averaged_spectrum;
use rabi_xuv::ionization::{final_spectrum, Selector};
use rabi_xuv::scans::{central_dip, DipReport};
use rabi_xuv::units::mev_to_au;
use serde::Serialize;

use super::{selector_file, Context};
use crate::config::RunConfig;
use crate::error::{model_ctx, CliError};
use crate::output::Artifacts;

#[derive(Serialize)]
struct SelectorSummary {
    selector: &'static str,
    single_atom_dip: Option<DipReport>,
    averaged_dip: Option<DipReport>,
    /// (C_single − C_averaged)/C_single for the central-dip contrast C.
    contrast_degradation: Option<f64>,
    quadrature_error_estimate: f64,
    nz: usize,
    nrho: usize,
}

#[derive(Serialize)]
struct Summary {
    peak_intensity_w_cm2: f64,
    interaction_volume_m3: f64,
    selectors: Vec<SelectorSummary>,
    /// Present when both single-pathway selectors ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    two_photon_less_degraded: Option<bool>,
}

pub(crate) fn run(cfg: &RunConfig, ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    ctx.require_flat_top("average")?;
    let pulse = ctx.pulse_at(ctx.detuning)?;
    let geom = cfg
        .average
        .geometry(cfg.pulse.intensity_w_cm2)
        .map_err(|e| ctx.config_error(format!("average: {e}")))?;
    let opts = cfg.average.options(ctx.template.two_photon);
    let half_width = match cfg.spectrum.dip_half_width_mev {
        Some(w) => mev_to_au(w),
        None => pulse.rabi_frequency(&ctx.atom),
    };
    let x = ctx.x_ev();

    let mut summaries = Vec::new();
    let mut degradation = Vec::new();
    for &sel in &cfg.selectors {
        let context = format!("average ({})", sel.label());
        let single =
            final_spectrum(&ctx.grid, &ctx.atom, &pulse, &ctx.template.two_photon, sel).map_err(model_ctx(&context))?;
        let avg = volume_averaged_spectrum(&ctx.grid, pulse.duration, &ctx.atom, &pulse, &geom, sel, &opts)
            .map_err(model_ctx(&context))?;
        let (ys, ya) = (single.intensity(), avg.spectrum.intensity());
        let ya_s = avg
            .spectrum
            .channel_intensity(rabi_xuv::model::PartialWave::S)
            .unwrap_or_default();
        let ya_d = avg
            .spectrum
            .channel_intensity(rabi_xuv::model::PartialWave::D)
            .unwrap_or_default();
        art.csv(
            &selector_file("average", sel, "csv"),
            [
                "kinetic_energy_eV",
                "single_atom",
                "averaged_total",
                "averaged_s",
                "averaged_d",
            ],
            (0..x.len()).map(|i| vec![x[i], ys[i], ya[i], ya_s[i], ya_d[i]]),
        )?;
        art.json_data(&selector_file("average", sel, "json"), &avg)?;

        let d1 = central_dip(&single, &ctx.atom, &pulse, half_width).ok();
        let d2 = central_dip(&avg.spectrum, &ctx.atom, &pulse, half_width).ok();
        let deg = match (d1, d2) {
            (Some(a), Some(b)) if a.contrast() > 0.0 => Some((a.contrast() - b.contrast()) / a.contrast()),
            _ => None,
        };
        degradation.push((sel, deg));
        summaries.push(SelectorSummary {
            selector: sel.label(),
            single_atom_dip: d1,
            averaged_dip: d2,
            contrast_degradation: deg,
            quadrature_error_estimate: avg.error_estimate,
            nz: avg.nz,
            nrho: avg.nrho,
        });
    }
    let find = |s: Selector| degradation.iter().find(|(k, _)| *k == s).and_then(|(_, d)| *d);
    let ordering = match (find(Selector::OnePhotonOnly), find(Selector::TwoPhotonOnly)) {
        (Some(one), Some(two)) => Some(two < one),
        _ => None,
    };
    art.summary(
        "average_summary.json",
        &Summary {
            peak_intensity_w_cm2: geom.i0,
            interaction_volume_m3: geom.volume(),
            selectors: summaries,
            two_photon_less_degraded: ordering,
        },
    )?;
    if ctx.emit_plots {
        for &sel in &cfg.selectors {
            let f = selector_file("average", sel, "csv");
            art.gnuplot(
                &selector_file("plot_average", sel, "gp"),
                &format!(
                    "set xlabel 'kinetic energy (eV)'\nset ylabel 'normalized intensity'\n\
                     stats '{f}' using 2 name 'S' nooutput\nstats '{f}' using 3 name 'A' nooutput\n\
                     plot '{f}' using 1:($2/S_max) with lines title 'single atom', \\\n     \
                     '{f}' using 1:($3/A_max) with lines title 'focal average'\npause -1\n"
                ),
            );
        }
    }
    Ok(())
}
