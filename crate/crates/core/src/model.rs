//! Atom, pulse, grid and spectrum data types shared by every module.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::units::ev_to_au;

/// Photoelectron partial wave. Only s and d are reachable from a 1s² ground
/// state at first order from 1snp and at second order from 1s².
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartialWave {
    S,
    D,
}

impl PartialWave {
    pub const ALL: [PartialWave; 2] = [PartialWave::S, PartialWave::D];

    pub fn label(self) -> &'static str {
        match self {
            PartialWave::S => "s",
            PartialWave::D => "d",
        }
    }
}

impl fmt::Display for PartialWave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One dipole value per partial wave (a.u.).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDipoles {
    pub s: f64,
    pub d: f64,
}

impl ChannelDipoles {
    pub fn get(&self, ell: PartialWave) -> f64 {
        match ell {
            PartialWave::S => self.s,
            PartialWave::D => self.d,
        }
    }

    fn is_finite(&self) -> bool {
        self.s.is_finite() && self.d.is_finite()
    }
}

/// Two-level atom coupled to s and d continua. Energies and dipoles in a.u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomModel {
    /// Ground-state energy, equal to minus the ionization potential.
    pub eps_a: f64,
    /// Excited-state energy.
    pub eps_b: f64,
    /// Bound–bound dipole ⟨b|z|a⟩.
    pub z_ba: f64,
    /// One-photon continuum dipoles from |b⟩.
    pub z_cont_from_b: ChannelDipoles,
    /// Effective two-photon dipoles through the non-resonant intermediate states.
    pub z_cont_from_rho: ChannelDipoles,
    /// Offset of the nearest neglected intermediate state above |b⟩.
    pub eps_c_nearest: Option<f64>,
}

impl AtomModel {
    pub fn new(
        eps_a: f64,
        eps_b: f64,
        z_ba: f64,
        z_cont_from_b: ChannelDipoles,
        z_cont_from_rho: ChannelDipoles,
        eps_c_nearest: Option<f64>,
    ) -> Result<Self> {
        let atom = Self {
            eps_a,
            eps_b,
            z_ba,
            z_cont_from_b,
            z_cont_from_rho,
            eps_c_nearest,
        };
        atom.validate()?;
        Ok(atom)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eps_a.is_finite() || self.eps_a >= 0.0 {
            return Err(invalid("eps_a", format!("must be negative, got {}", self.eps_a)));
        }
        if !self.eps_b.is_finite() || self.eps_b <= self.eps_a {
            return Err(invalid(
                "eps_b",
                format!("must lie above eps_a = {}, got {}", self.eps_a, self.eps_b),
            ));
        }
        if !self.z_ba.is_finite() {
            return Err(invalid("z_ba", "must be finite"));
        }
        if !self.z_cont_from_b.is_finite() {
            return Err(invalid("z_cont_from_b", "must be finite"));
        }
        if !self.z_cont_from_rho.is_finite() {
            return Err(invalid("z_cont_from_rho", "must be finite"));
        }
        if let Some(c) = self.eps_c_nearest {
            if !c.is_finite() || c <= 0.0 {
                return Err(invalid("eps_c_nearest", format!("must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Helium 1s² → 1s4p with configuration-interaction-singles level data.
    pub fn helium_cis_default() -> Self {
        let eps_a = ev_to_au(-24.9788);
        Self {
            eps_a,
            eps_b: eps_a + 0.887246,
            z_ba: 0.124,
            z_cont_from_b: ChannelDipoles {
                s: 0.009311,
                d: 0.01298,
            },
            z_cont_from_rho: ChannelDipoles { s: 0.1056, d: -1.300 },
            eps_c_nearest: Some(ev_to_au(0.3)),
        }
    }

    /// Same continuum dipoles with the measured ionization potential,
    /// 1s4p excitation energy and bound–bound dipole.
    pub fn helium_experimental() -> Self {
        let eps_a = ev_to_au(-24.5873);
        Self {
            eps_a,
            eps_b: eps_a + ev_to_au(23.7421),
            z_ba: 0.1318,
            ..Self::helium_cis_default()
        }
    }

    /// Transition frequency ω_ba.
    pub fn omega_ba(&self) -> f64 {
        self.eps_b - self.eps_a
    }

    pub fn ionization_potential(&self) -> f64 {
        -self.eps_a
    }

    /// Kinetic energy of the two-resonant-photon line, 2ω_ba − I_p.
    pub fn two_photon_line(&self) -> f64 {
        2.0 * self.omega_ba() + self.eps_a
    }

    /// δ_ε = ε − 2ω_ba − ε_a.
    pub fn relative_energy(&self, eps: f64) -> f64 {
        eps - self.two_photon_line()
    }

    /// Energy of the nearest neglected intermediate state, if known.
    pub fn eps_c(&self) -> Option<f64> {
        self.eps_c_nearest.map(|d| self.eps_b + d)
    }
}

/// Temporal shape of the field envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    /// Constant amplitude from 0 to the duration.
    FlatTop,
    /// Field envelope exp(−2 ln2 (t − t_c)²/τ²), τ being the duration
    /// parameter. The field FWHM is τ√2; the intensity FWHM is τ.
    /// The pulse runs from 0 to 6τ and is centred at t_c = 3τ.
    Gaussian,
}

/// Number of τ covered by a Gaussian pulse on each side of its centre.
pub const GAUSSIAN_HALF_SPAN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    /// Peak field amplitude (a.u.).
    pub e0: f64,
    /// Carrier angular frequency (a.u.).
    pub omega: f64,
    pub envelope: Envelope,
    /// Flat-top on-time t_f, or Gaussian τ (a.u.).
    pub duration: f64,
}

impl PulseParams {
    pub fn new(e0: f64, omega: f64, envelope: Envelope, duration: f64) -> Result<Self> {
        let p = Self {
            e0,
            omega,
            envelope,
            duration,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.e0.is_finite() || self.e0 < 0.0 {
            return Err(invalid("e0", format!("must be finite and >= 0, got {}", self.e0)));
        }
        if !self.omega.is_finite() || self.omega <= 0.0 {
            return Err(invalid("omega", format!("must be > 0, got {}", self.omega)));
        }
        if !self.duration.is_finite() || self.duration <= 0.0 {
            return Err(invalid("duration", format!("must be > 0, got {}", self.duration)));
        }
        Ok(())
    }

    /// Flat-top pulse lasting `periods` resonant Rabi periods 2π/Ω at field `e0`,
    /// detuned by `detuning` from ω_ba.
    pub fn flat_top_rabi_periods(atom: &AtomModel, e0: f64, detuning: f64, periods: f64) -> Result<Self> {
        let omega_r = e0 * atom.z_ba.abs();
        if omega_r <= 0.0 {
            return Err(invalid("e0", "Rabi-period durations need a nonzero Rabi frequency"));
        }
        Self::new(
            e0,
            atom.omega_ba() + detuning,
            Envelope::FlatTop,
            2.0 * PI * periods / omega_r,
        )
    }

    /// Δω = ω − ω_ba.
    pub fn detuning(&self, atom: &AtomModel) -> f64 {
        self.omega - atom.omega_ba()
    }

    /// Ω = E0·z_ba, taken nonnegative.
    pub fn rabi_frequency(&self, atom: &AtomModel) -> f64 {
        (self.e0 * atom.z_ba).abs()
    }

    /// Time at which the field has switched off.
    pub fn end_time(&self) -> f64 {
        match self.envelope {
            Envelope::FlatTop => self.duration,
            Envelope::Gaussian => 2.0 * GAUSSIAN_HALF_SPAN * self.duration,
        }
    }

    /// Field envelope f(t) ∈ [0, 1].
    pub fn envelope_at(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.end_time() {
            return 0.0;
        }
        match self.envelope {
            Envelope::FlatTop => 1.0,
            Envelope::Gaussian => {
                let x = t - GAUSSIAN_HALF_SPAN * self.duration;
                (-2.0 * LN_2 * x * x / (self.duration * self.duration)).exp()
            }
        }
    }

    /// ∫ f(t) dt over the whole pulse.
    pub fn pulse_area_time(&self) -> f64 {
        match self.envelope {
            Envelope::FlatTop => self.duration,
            Envelope::Gaussian => self.duration * (PI / (2.0 * LN_2)).sqrt(),
        }
    }

    pub fn with_e0(&self, e0: f64) -> Self {
        Self { e0, ..*self }
    }

    pub fn with_detuning(&self, atom: &AtomModel, detuning: f64) -> Self {
        Self {
            omega: atom.omega_ba() + detuning,
            ..*self
        }
    }

    pub fn with_duration(&self, duration: f64) -> Self {
        Self { duration, ..*self }
    }
}

/// Photoelectron energy axis. Energies are measured from the ionization
/// threshold, so a sample ε is also the photoelectron kinetic energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    energies: Vec<f64>,
    uniform_step: Option<f64>,
}

impl SpectrumGrid {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.is_empty() {
            return Err(invalid("grid", "needs at least one energy"));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(invalid("grid", "energies must be finite"));
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid", "energies must be strictly increasing"));
        }
        let uniform_step = detect_uniform_step(&energies);
        Ok(Self { energies, uniform_step })
    }

    /// `n` evenly spaced samples from `lo` to `hi` inclusive.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(invalid(
                "grid",
                format!("needs n >= 2 and hi > lo, got n={n}, [{lo}, {hi}]"),
            ));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let energies = (0..n).map(|i| lo + step * i as f64).collect();
        Ok(Self {
            energies,
            uniform_step: Some(step),
        })
    }

    /// Uniform grid in δ_ε from `delta_lo` to `delta_hi`.
    pub fn around_two_photon_line(atom: &AtomModel, delta_lo: f64, delta_hi: f64, n: usize) -> Result<Self> {
        let c = atom.two_photon_line();
        Self::uniform(c + delta_lo, c + delta_hi, n)
    }

    /// δ_ε ∈ [−0.6, 0.6] eV with 0.5 meV spacing.
    pub fn default_for(atom: &AtomModel) -> Self {
        Self::around_two_photon_line(atom, ev_to_au(-0.6), ev_to_au(0.6), 2401)
            .expect("static grid parameters are valid")
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Kinetic energies, identical to the stored energies.
    pub fn kinetic_energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn relative_energies(&self, atom: &AtomModel) -> Vec<f64> {
        self.energies.iter().map(|&e| atom.relative_energy(e)).collect()
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn uniform_step(&self) -> Option<f64> {
        self.uniform_step
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform_step.is_some()
    }
}

fn detect_uniform_step(e: &[f64]) -> Option<f64> {
    if e.len() < 2 {
        return None;
    }
    let step = (e[e.len() - 1] - e[0]) / (e.len() - 1) as f64;
    let tol = 1e-9 * step.abs().max(f64::MIN_POSITIVE);
    e.windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= tol.max(1e-12 * w[1].abs()))
        .then_some(step)
}

/// Per-channel content: complex amplitudes (analytic) or spectral densities
/// (volume-averaged, oracle or deconvolved spectra).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelData {
    Amplitudes(Vec<Complex64>),
    Intensities(Vec<f64>),
}

impl ChannelData {
    pub fn len(&self) -> usize {
        match self {
            ChannelData::Amplitudes(a) => a.len(),
            ChannelData::Intensities(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn intensity(&self) -> Vec<f64> {
        match self {
            ChannelData::Amplitudes(a) => a.iter().map(|z| z.norm_sqr()).collect(),
            ChannelData::Intensities(i) => i.clone(),
        }
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        match self {
            ChannelData::Amplitudes(a) => Some(a),
            ChannelData::Intensities(_) => None,
        }
    }
}

/// Photoelectron spectrum resolved by partial wave. Channels never interfere:
/// the total is the sum of per-channel intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub grid: SpectrumGrid,
    pub channels: BTreeMap<PartialWave, ChannelData>,
}

impl Spectrum {
    pub fn new(grid: SpectrumGrid, channels: BTreeMap<PartialWave, ChannelData>) -> Result<Self> {
        for (ell, data) in &channels {
            if data.len() != grid.len() {
                return Err(invalid(
                    "channels",
                    format!("{ell} channel has {} samples, grid has {}", data.len(), grid.len()),
                ));
            }
            if let ChannelData::Intensities(v) = data {
                if v.iter().any(|x| !(*x >= 0.0)) {
                    return Err(invalid("channels", format!("{ell} intensities must be >= 0")));
                }
            }
        }
        Ok(Self { grid, channels })
    }

    pub fn channel_intensity(&self, ell: PartialWave) -> Option<Vec<f64>> {
        self.channels.get(&ell).map(ChannelData::intensity)
    }

    /// Σ_ℓ |c_ℓ(ε)|².
    pub fn intensity(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.grid.len()];
        for data in self.channels.values() {
            for (t, x) in total.iter_mut().zip(data.intensity()) {
                *t += x;
            }
        }
        total
    }
}

/// Resonant Rabi frequency for a preset at a given peak intensity (W/cm²).
pub fn rabi_frequency_at(atom: &AtomModel, intensity: f64) -> Result<f64> {
    Ok((crate::units::field_from_intensity(intensity)? * atom.z_ba).abs())
}
