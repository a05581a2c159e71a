mod average;
mod deconvolve;
mod oracle;
mod scan;
mod spectrum;

use std::path::PathBuf;

use rabi_xuv::ionization::Selector;
use rabi_xuv::model::{AtomModel, Envelope, PulseParams, Spectrum, SpectrumGrid};
use rabi_xuv::scans::PulseTemplate;
use rabi_xuv::units::{au_to_ev, mev_to_au};
use serde::Serialize;

use crate::config::{self, RunConfig};
use crate::error::CliError;
use crate::output::Artifacts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Spectrum,
    Scan,
    Average,
    Oracle,
    Deconvolve,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    /// Overrides `output.dir`.
    pub out: Option<PathBuf>,
    pub emit_plots: bool,
}

pub const MANIFEST_NAME: &str = "run_manifest.json";

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    library_version: &'static str,
    command: Command,
    files: Vec<String>,
    config: &'a RunConfig,
}

/// Everything shared by the subcommands, resolved and checked up front.
pub(crate) struct Context {
    pub label: String,
    pub atom: AtomModel,
    pub template: PulseTemplate,
    /// ω − ω_ba, a.u.
    pub detuning: f64,
    pub grid: SpectrumGrid,
    pub emit_plots: bool,
    pub out_dir: PathBuf,
}

impl Context {
    fn resolve(cfg: &RunConfig, label: &str, emit_plots: bool) -> Result<Self, CliError> {
        let err = |block: &str, m: String| CliError::config(label, format!("{block}: {m}"));
        let atom = cfg.atom.resolve().map_err(|e| err("atom", e.to_string()))?;
        let template = cfg
            .pulse
            .template(cfg.two_photon.options(), &atom)
            .map_err(|m| err("pulse", m))?;
        let grid = cfg.grid.resolve(&atom).map_err(|m| err("grid", m))?;
        if cfg.selectors.is_empty() {
            return Err(err("selectors", "must name at least one selector".into()));
        }
        for (i, s) in cfg.selectors.iter().enumerate() {
            if cfg.selectors[..i].contains(s) {
                return Err(err("selectors", format!("{} listed twice", s.label())));
            }
        }
        Ok(Self {
            label: label.to_string(),
            atom,
            template,
            detuning: mev_to_au(cfg.pulse.detuning_mev),
            grid,
            emit_plots,
            out_dir: cfg.output.dir.clone(),
        })
    }

    pub fn config_error(&self, message: impl Into<String>) -> CliError {
        CliError::config(&self.label, message)
    }

    /// The configured pulse, at `detuning` (a.u.).
    pub fn pulse_at(&self, detuning: f64) -> Result<PulseParams, CliError> {
        self.template
            .pulse(&self.atom, detuning)
            .map_err(|e| self.config_error(format!("pulse: {e}")))
    }

    /// Commands built on the closed-form amplitudes need a flat-top pulse.
    pub fn require_flat_top(&self, command: &str) -> Result<(), CliError> {
        if self.template.envelope != Envelope::FlatTop {
            return Err(self.config_error(format!(
                "pulse.envelope: `{command}` uses the analytic amplitudes, which need a flat-top pulse; use `oracle` for other envelopes"
            )));
        }
        Ok(())
    }

    /// Grid energies in eV.
    pub fn x_ev(&self) -> Vec<f64> {
        self.grid.energies().iter().map(|&e| au_to_ev(e)).collect()
    }
}

/// Load, validate, compute, then write every output file.
pub fn execute(inv: &Invocation) -> Result<Vec<PathBuf>, CliError> {
    let loaded = config::load(inv.config.as_deref())?;
    let mut cfg = loaded.config;
    if let Some(out) = &inv.out {
        cfg.output.dir = out.clone();
    }
    cfg.resolve_paths(&loaded.base_dir);
    let ctx = Context::resolve(&cfg, &loaded.label, inv.emit_plots)?;
    let mut art = Artifacts::new(&cfg.output.formats);
    match inv.command {
        Command::Spectrum => spectrum::run(&cfg, &ctx, &mut art)?,
        Command::Scan => scan::run(&cfg, &ctx, &mut art)?,
        Command::Average => average::run(&cfg, &ctx, &mut art)?,
        Command::Oracle => oracle::run(&cfg, &ctx, &mut art)?,
        Command::Deconvolve => deconvolve::run(&cfg, &ctx, &mut art)?,
    }
    let manifest = Manifest {
        tool: "rabi-xuv",
        version: env!("CARGO_PKG_VERSION"),
        library_version: rabi_xuv::VERSION,
        command: inv.command,
        files: art.names(),
        config: &cfg,
    };
    art.summary(MANIFEST_NAME, &manifest)?;
    art.write_all(&cfg.output.dir)
}

/// `kinetic_energy_eV, intensity_total, intensity_s, intensity_d` rows.
pub(crate) fn spectrum_rows(s: &Spectrum, x_ev: &[f64]) -> Vec<Vec<f64>> {
    use rabi_xuv::model::PartialWave;
    let total = s.intensity();
    let zeros = vec![0.0; x_ev.len()];
    let is = s.channel_intensity(PartialWave::S).unwrap_or_else(|| zeros.clone());
    let id = s.channel_intensity(PartialWave::D).unwrap_or(zeros);
    (0..x_ev.len()).map(|i| vec![x_ev[i], total[i], is[i], id[i]]).collect()
}

pub(crate) const SPECTRUM_HEADER: [&str; 4] = ["kinetic_energy_eV", "intensity_total", "intensity_s", "intensity_d"];

pub(crate) fn selector_file(prefix: &str, sel: Selector, ext: &str) -> String {
    format!("{prefix}_{}.{ext}", sel.label())
}
