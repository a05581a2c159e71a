use rabi_xuv::ionization::Selector;
use rabi_xuv::scans::{detuning_scan, find_symmetric_detuning, minimum_gap, track_branches, BranchPoint};
use rabi_xuv::units::{au_to_mev, mev_to_au};
use serde::Serialize;

use super::{selector_file, Context};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Artifacts;

#[derive(Serialize)]
struct SelectorSummary {
    selector: &'static str,
    columns: usize,
    tracked_columns: usize,
    min_gap_mev: Option<f64>,
    min_gap_detuning_mev: Option<f64>,
    min_gap_over_rabi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symmetric_detuning_mev: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    rabi_frequency_mev: f64,
    duration_au: f64,
    selectors: Vec<SelectorSummary>,
}

pub(crate) fn run(cfg: &RunConfig, ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    ctx.require_flat_top("scan")?;
    let detunings_mev = cfg
        .scan
        .detunings_mev()
        .map_err(|m| ctx.config_error(format!("scan: {m}")))?;
    let detunings: Vec<f64> = detunings_mev.iter().map(|&d| mev_to_au(d)).collect();
    for &d in [detunings[0], detunings[detunings.len() - 1]].iter() {
        ctx.pulse_at(d)?;
    }
    let search = match cfg.scan.symmetric_search {
        Some(s) => {
            let [lo, hi] = s.window_mev;
            if !(hi > lo) || !(s.tolerance_mev > 0.0) {
                return Err(
                    ctx.config_error("scan.symmetric_search: window_mev must be increasing and tolerance_mev > 0")
                );
            }
            Some(((mev_to_au(lo), mev_to_au(hi)), mev_to_au(s.tolerance_mev)))
        }
        None => None,
    };
    let omega = (ctx.template.e0 * ctx.atom.z_ba).abs();
    let duration = ctx
        .template
        .duration_au(&ctx.atom)
        .map_err(|e| ctx.config_error(format!("pulse: {e}")))?;

    let mut summaries = Vec::new();
    let mut plot_lines = Vec::new();
    for &sel in &cfg.selectors {
        let context = || format!("scan ({})", sel.label());
        let scan = detuning_scan(&ctx.atom, &ctx.template, &detunings, &ctx.grid, sel)
            .map_err(|e| CliError::model(context(), e))?;
        let branches = track_branches(&scan, &ctx.atom);
        let symmetric = match search {
            Some((window, tol)) => Some(
                find_symmetric_detuning(&ctx.atom, &ctx.template, window, &ctx.grid, sel, tol)
                    .map_err(|e| CliError::model(context(), e))?,
            ),
            None => None,
        };

        let mut header = vec!["kinetic_energy_eV".to_string()];
        header.extend(scan.photon_energies.iter().map(|p| crate::output::fmt_f64(*p)));
        let rows = scan.kinetic_energies.iter().enumerate().map(|(j, &e)| {
            let mut r = Vec::with_capacity(detunings.len() + 1);
            r.push(e);
            r.extend(scan.intensity.iter().map(|col| col[j]));
            r
        });
        art.csv(&selector_file("scan", sel, "csv"), header, rows)?;
        art.json_data(&selector_file("scan", sel, "json"), &scan)?;
        art.csv(
            &selector_file("branches", sel, "csv"),
            ["detuning_eV", "lower_eV", "upper_eV", "gap_eV"],
            branches
                .iter()
                .map(|b: &BranchPoint| vec![b.detuning, b.lower, b.upper, b.gap()]),
        )?;
        plot_lines.push(sel);

        let gap = minimum_gap(&branches);
        summaries.push(SelectorSummary {
            selector: sel.label(),
            columns: detunings.len(),
            tracked_columns: branches.len(),
            min_gap_mev: gap.map(|g| g.0 * 1e3),
            min_gap_detuning_mev: gap.map(|g| g.1 * 1e3),
            min_gap_over_rabi: gap.map(|g| rabi_xuv::units::ev_to_au(g.0) / omega),
            symmetric_detuning_mev: symmetric.map(au_to_mev),
        });
    }
    art.summary(
        "scan_summary.json",
        &Summary {
            rabi_frequency_mev: au_to_mev(omega),
            duration_au: duration,
            selectors: summaries,
        },
    )?;
    if ctx.emit_plots {
        emit_plots(art, &plot_lines);
    }
    Ok(())
}

fn emit_plots(art: &mut Artifacts, selectors: &[Selector]) {
    let lines: Vec<String> = selectors
        .iter()
        .flat_map(|&s| {
            let f = selector_file("branches", s, "csv");
            [
                format!("'{f}' using 1:2 with linespoints title '{} lower'", s.label()),
                format!("'{f}' using 1:3 with linespoints title '{} upper'", s.label()),
            ]
        })
        .collect();
    art.gnuplot(
        "plot_branches.gp",
        &format!(
            "set xlabel 'detuning (eV)'\nset ylabel 'peak kinetic energy (eV)'\nplot {}\npause -1\n",
            lines.join(", \\\n     ")
        ),
    );
}
