//! Run configuration: TOML or JSON, every block optional, unknown keys rejected.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rabi_xuv::deconv::DeconvolutionConfig;
use rabi_xuv::focal::{AveragingOptions, BeamGeometry, BeamProfile, IntensitySampling, QuadratureSpec};
use rabi_xuv::ionization::{Selector, TwoPhotonOptions};
use rabi_xuv::model::{AtomModel, ChannelDipoles, Envelope, SpectrumGrid};
use rabi_xuv::oracle::{CouplingMode, IntermediateState};
use rabi_xuv::scans::{DurationMode, PulseTemplate};
use rabi_xuv::units::{ev_to_au, field_from_intensity, fs_to_au};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub atom: AtomConfig,
    pub pulse: PulseConfig,
    pub grid: GridConfig,
    pub selectors: Vec<Selector>,
    pub two_photon: TwoPhotonConfig,
    pub spectrum: SpectrumConfig,
    pub scan: ScanConfig,
    pub average: AverageConfig,
    pub oracle: OracleConfig,
    pub deconvolve: DeconvolveConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            atom: AtomConfig::default(),
            pulse: PulseConfig::default(),
            grid: GridConfig::default(),
            selectors: Selector::ALL.to_vec(),
            two_photon: TwoPhotonConfig::default(),
            spectrum: SpectrumConfig::default(),
            scan: ScanConfig::default(),
            average: AverageConfig::default(),
            oracle: OracleConfig::default(),
            deconvolve: DeconvolveConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomPreset {
    #[default]
    Cis,
    Experimental,
}

/// Preset with optional overrides. Energies in eV, dipoles in a.u.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomConfig {
    pub preset: AtomPreset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_a_ev: Option<f64>,
    /// ε_b − ε_a.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excitation_ev: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_ba: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_cont_from_b: Option<ChannelDipoles>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_cont_from_rho: Option<ChannelDipoles>,
    /// Offset of the nearest neglected intermediate state above |b⟩.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_c_nearest_ev: Option<f64>,
}

impl AtomConfig {
    pub fn resolve(&self) -> rabi_xuv::Result<AtomModel> {
        let mut atom = match self.preset {
            AtomPreset::Cis => AtomModel::helium_cis_default(),
            AtomPreset::Experimental => AtomModel::helium_experimental(),
        };
        let excitation = self.excitation_ev.map_or(atom.omega_ba(), ev_to_au);
        if let Some(e) = self.eps_a_ev {
            atom.eps_a = ev_to_au(e);
        }
        atom.eps_b = atom.eps_a + excitation;
        if let Some(z) = self.z_ba {
            atom.z_ba = z;
        }
        if let Some(z) = self.z_cont_from_b {
            atom.z_cont_from_b = z;
        }
        if let Some(z) = self.z_cont_from_rho {
            atom.z_cont_from_rho = z;
        }
        if let Some(c) = self.eps_c_nearest_ev {
            atom.eps_c_nearest = Some(ev_to_au(c));
        }
        atom.validate()?;
        Ok(atom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationConfig {
    RabiPeriods(f64),
    Fs(f64),
    Au(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub intensity_w_cm2: f64,
    /// ω − ω_ba.
    pub detuning_mev: f64,
    pub envelope: Envelope,
    /// Flat-top on-time, or the Gaussian intensity FWHM.
    pub duration: DurationConfig,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            intensity_w_cm2: 2e13,
            detuning_mev: 0.0,
            envelope: Envelope::FlatTop,
            duration: DurationConfig::RabiPeriods(1.5),
        }
    }
}

impl PulseConfig {
    pub fn template(&self, two_photon: TwoPhotonOptions, atom: &AtomModel) -> Result<PulseTemplate, String> {
        if !(self.intensity_w_cm2 > 0.0) {
            return Err(format!("intensity_w_cm2 must be > 0, got {}", self.intensity_w_cm2));
        }
        if !self.detuning_mev.is_finite() {
            return Err("detuning_mev must be finite".into());
        }
        let e0 = field_from_intensity(self.intensity_w_cm2).map_err(|e| e.to_string())?;
        let duration = match self.duration {
            DurationConfig::RabiPeriods(n) => DurationMode::RabiPeriods(n),
            DurationConfig::Fs(t) => DurationMode::Absolute(fs_to_au(t)),
            DurationConfig::Au(t) => DurationMode::Absolute(t),
        };
        let template = PulseTemplate {
            e0,
            duration,
            envelope: self.envelope,
            two_photon,
        };
        let t = template.duration_au(atom).map_err(|e| e.to_string())?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(format!("duration must be positive, got {t} a.u."));
        }
        Ok(template)
    }
}

/// Kinetic-energy grid relative to the two-resonant-photon line, eV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub delta_min_ev: f64,
    pub delta_max_ev: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            delta_min_ev: -0.6,
            delta_max_ev: 0.6,
            points: 2401,
        }
    }
}

impl GridConfig {
    pub fn resolve(&self, atom: &AtomModel) -> Result<SpectrumGrid, String> {
        if !(self.delta_max_ev > self.delta_min_ev) {
            return Err(format!(
                "empty energy window: delta_min_ev = {} must be below delta_max_ev = {}",
                self.delta_min_ev, self.delta_max_ev
            ));
        }
        if self.points < 3 {
            return Err(format!("points must be >= 3, got {}", self.points));
        }
        SpectrumGrid::around_two_photon_line(
            atom,
            ev_to_au(self.delta_min_ev),
            ev_to_au(self.delta_max_ev),
            self.points,
        )
        .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoPhotonConfig {
    pub include_transient_term: bool,
    /// Absolute energy of the nearest neglected intermediate state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_eps_c_ev: Option<f64>,
}

impl TwoPhotonConfig {
    pub fn options(&self) -> TwoPhotonOptions {
        TwoPhotonOptions {
            include_transient_term: self.include_transient_term,
            effective_eps_c: self.effective_eps_c_ev.map(ev_to_au),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Extra spectra with the pulse cut after these many Rabi periods.
    pub buildup_rabi_periods: Vec<f64>,
    /// Half-width of the central-dip search; defaults to Ω.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dip_half_width_mev: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymmetricSearchConfig {
    pub window_mev: [f64; 2],
    pub tolerance_mev: f64,
}

impl Default for SymmetricSearchConfig {
    fn default() -> Self {
        Self {
            window_mev: [0.0, 150.0],
            tolerance_mev: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub detuning_min_mev: f64,
    pub detuning_max_mev: f64,
    pub detuning_step_mev: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetric_search: Option<SymmetricSearchConfig>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            detuning_min_mev: -150.0,
            detuning_max_mev: 150.0,
            detuning_step_mev: 1.0,
            symmetric_search: None,
        }
    }
}

/// Columns beyond this are refused.
pub const MAX_SCAN_COLUMNS: usize = 100_000;

impl ScanConfig {
    /// Detunings in meV, `min + k·step` up to `max`.
    pub fn detunings_mev(&self) -> Result<Vec<f64>, String> {
        let (lo, hi, step) = (self.detuning_min_mev, self.detuning_max_mev, self.detuning_step_mev);
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(format!(
                "empty detuning window: detuning_min_mev = {lo}, detuning_max_mev = {hi}"
            ));
        }
        if !(step > 0.0) {
            return Err(format!("detuning_step_mev must be > 0, got {step}"));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        if n > MAX_SCAN_COLUMNS {
            return Err(format!("{n} detunings exceed the limit of {MAX_SCAN_COLUMNS}"));
        }
        Ok((0..n).map(|k| lo + step * k as f64).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AverageConfig {
    pub w0_um: f64,
    pub z_r_mm: f64,
    pub length_mm: f64,
    pub rho_max_in_waists: f64,
    pub profile: BeamProfile,
    pub quadrature: QuadratureSpec,
    pub sampling: IntensitySampling,
}

impl Default for AverageConfig {
    fn default() -> Self {
        Self {
            w0_um: 10.2,
            z_r_mm: 6.3,
            length_mm: 2.0,
            rho_max_in_waists: 5.0,
            profile: BeamProfile::Gaussian,
            quadrature: QuadratureSpec::default(),
            sampling: IntensitySampling::default(),
        }
    }
}

impl AverageConfig {
    pub fn geometry(&self, i0: f64) -> rabi_xuv::Result<BeamGeometry> {
        let g = BeamGeometry {
            i0,
            w0: self.w0_um * 1e-6,
            z_r: self.z_r_mm * 1e-3,
            length: self.length_mm * 1e-3,
            rho_max_in_waists: self.rho_max_in_waists,
            profile: self.profile,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn options(&self, two_photon: TwoPhotonOptions) -> AveragingOptions {
        AveragingOptions {
            quadrature: self.quadrature,
            sampling: self.sampling,
            two_photon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub coupling_mode: CouplingMode,
    pub selector: Selector,
    /// Bins per partial wave; 0 gives the bare two-level system.
    pub n_bins: usize,
    /// Continuum window half-width around the two-resonant-photon line.
    pub half_width_ev: f64,
    /// Defaults to 1 a.u. with the rotating-wave coupling and 0.1/ω otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_au: Option<f64>,
    pub observer_stride: usize,
    /// Explicit intermediate states (a.u.) replacing the effective two-photon coupling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intermediates: Option<Vec<IntermediateState>>,
    /// Write `oracle.ckpt` into the output directory every this many steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resume_from: Option<PathBuf>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            coupling_mode: CouplingMode::Rwa,
            selector: Selector::CoherentTotal,
            n_bins: 1024,
            half_width_ev: 1.5,
            dt_au: None,
            observer_stride: 10,
            intermediates: None,
            checkpoint_every: None,
            resume_from: None,
        }
    }
}

impl OracleConfig {
    pub fn dt(&self, omega: f64) -> f64 {
        self.dt_au.unwrap_or(match self.coupling_mode {
            CouplingMode::Rwa => 1.0,
            CouplingMode::FullOscillating => 0.1 / omega,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    /// Spectrum that gets blurred.
    pub selector: Selector,
    pub blur_fwhm_ev: f64,
    /// Gaussian noise width relative to the blurred maximum.
    pub noise_relative: f64,
    /// No seed, no noise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            selector: Selector::OnePhotonOnly,
            blur_fwhm_ev: 0.070,
            noise_relative: 0.01,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeconvolveConfig {
    /// Two-column CSV with a header: kinetic energy (eV), intensity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Used when no input file is given.
    pub synthetic: SyntheticConfig,
    pub settings: DeconvolutionConfig,
    /// Minimum peak prominence, relative to the maximum, in the doublet analysis.
    pub min_prominence: f64,
}

impl Default for DeconvolveConfig {
    fn default() -> Self {
        Self {
            input: None,
            synthetic: SyntheticConfig::default(),
            settings: DeconvolutionConfig::default(),
            min_prominence: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: BTreeSet<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: [Format::Csv, Format::Json].into(),
        }
    }
}

/// A parsed configuration and where it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    /// Config path for messages, or `<defaults>`.
    pub label: String,
    /// Directory that relative input paths are resolved against.
    pub base_dir: PathBuf,
}

/// Read a TOML or JSON config. A run manifest is accepted too: its `config`
/// member is used.
pub fn load(path: Option<&Path>) -> Result<Loaded, CliError> {
    let Some(path) = path else {
        return Ok(Loaded {
            config: RunConfig::default(),
            label: "<defaults>".into(),
            base_dir: PathBuf::from("."),
        });
    };
    let label = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| CliError::config(&label, format!("cannot read: {e}")))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let value: serde_json::Value = if is_toml {
        toml::from_str(&text).map_err(|e| CliError::config(&label, e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::config(&label, e.to_string()))?
    };
    let config = parse_value(value).map_err(|m| CliError::config(&label, m))?;
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    Ok(Loaded {
        config,
        label,
        base_dir,
    })
}

/// Deserialize with the location of the first offending key in the message.
pub fn parse_value(value: serde_json::Value) -> Result<RunConfig, String> {
    let value = match value {
        serde_json::Value::Object(mut m) if m.contains_key("tool") && m.contains_key("config") => {
            m.remove("config").expect("checked above")
        }
        v => v,
    };
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("{path}: {}", e.inner())
        }
    })
}

impl RunConfig {
    /// Make input paths absolute so a manifest is usable from anywhere.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                let joined = base.join(&*p);
                *p = fs::canonicalize(&joined).unwrap_or(joined);
            }
        };
        if let Some(p) = self.deconvolve.input.as_mut() {
            fix(p);
        }
        if let Some(p) = self.oracle.resume_from.as_mut() {
            fix(p);
        }
    }
}
