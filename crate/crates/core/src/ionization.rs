//! Analytic photoionization amplitudes for flat-top pulses.
//!
//! One-photon ionization proceeds from the Rabi-cycling excited state |b⟩,
//! two-photon ionization from |a⟩ through every other intermediate state,
//! lumped into one effective dipole per partial wave. Both amplitudes are
//! built from the lobe function
//!
//! L(x, t) = e^{ixt/2} sin(xt/2)/x = ½ ∫₀ᵗ e^{ixs} ds,
//!
//! evaluated at u = δ_ε − 3Δω/2 + W/2 (lower peak) and
//! v = δ_ε − 3Δω/2 − W/2 (upper peak).

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{AtomModel, ChannelData, Envelope, PartialWave, PulseParams, Spectrum, SpectrumGrid};
use crate::rabi::RabiParams;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which ionization pathways enter a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    OnePhotonOnly,
    TwoPhotonOnly,
    CoherentTotal,
}

impl Selector {
    pub const ALL: [Selector; 3] = [
        Selector::OnePhotonOnly,
        Selector::TwoPhotonOnly,
        Selector::CoherentTotal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Selector::OnePhotonOnly => "one_photon_only",
            Selector::TwoPhotonOnly => "two_photon_only",
            Selector::CoherentTotal => "coherent_total",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPhotonOptions {
    /// Keep the term oscillating at the energy of the nearest neglected
    /// intermediate state.
    #[serde(default)]
    pub include_transient_term: bool,
    /// Energy of that state (a.u.). Defaults to the atom's `eps_c()`.
    #[serde(default)]
    pub effective_eps_c: Option<f64>,
}

impl TwoPhotonOptions {
    pub fn with_transient_term() -> Self {
        Self {
            include_transient_term: true,
            effective_eps_c: None,
        }
    }

    fn eps_c(&self, atom: &AtomModel) -> Result<f64> {
        let eps_c = self
            .effective_eps_c
            .or_else(|| atom.eps_c())
            .ok_or_else(|| invalid("effective_eps_c", "needed when the transient term is enabled"))?;
        if !(eps_c > atom.eps_b) {
            return Err(invalid(
                "effective_eps_c",
                format!("must lie above eps_b = {}, got {eps_c}", atom.eps_b),
            ));
        }
        Ok(eps_c)
    }
}

/// L(x, t) = e^{ixt/2} sin(xt/2)/x, with the series form for |x| < 1e-8.
pub fn lobe(x: f64, t: f64) -> Complex64 {
    let h = 0.5 * x * t;
    let mag = if x.abs() < 1e-8 {
        0.5 * t * (1.0 - h * h / 6.0)
    } else {
        h.sin() / x
    };
    Complex64::from_polar(mag, h)
}

struct Kernel {
    u: f64,
    v: f64,
    rabi: RabiParams,
}

impl Kernel {
    fn new(eps: f64, atom: &AtomModel, pulse: &PulseParams) -> Self {
        let rabi = RabiParams::from_pulse(atom, pulse);
        let centre = atom.relative_energy(eps) - 1.5 * rabi.delta_omega;
        Self {
            u: centre + 0.5 * rabi.w,
            v: centre - 0.5 * rabi.w,
            rabi,
        }
    }

    /// (1 − Δω/W, 1 + Δω/W), continuous through W = 0.
    fn weights(&self) -> (f64, f64) {
        if self.rabi.w == 0.0 {
            (1.0, 1.0)
        } else {
            let r = self.rabi.delta_omega / self.rabi.w;
            (1.0 - r, 1.0 + r)
        }
    }
}

fn check_time(t: f64, pulse: &PulseParams) -> Result<()> {
    if pulse.envelope != Envelope::FlatTop {
        return Err(Error::UnsupportedEnvelope);
    }
    if !(t >= 0.0) || t > pulse.duration * (1.0 + 1e-12) {
        return Err(invalid("t", format!("must lie in [0, {}], got {t}", pulse.duration)));
    }
    Ok(())
}

/// One-photon amplitude from |b⟩ into partial wave `ell` at energy `eps`
/// after time `t` of a flat-top pulse.
pub fn alpha1(eps: f64, t: f64, atom: &AtomModel, pulse: &PulseParams, ell: PartialWave) -> Result<Complex64> {
    check_time(t, pulse)?;
    Ok(alpha1_unchecked(eps, t, atom, pulse, ell))
}

fn alpha1_unchecked(eps: f64, t: f64, atom: &AtomModel, pulse: &PulseParams, ell: PartialWave) -> Complex64 {
    let k = Kernel::new(eps, atom, pulse);
    if k.rabi.w == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let pre = atom.z_cont_from_b.get(ell) * pulse.e0 * k.rabi.omega / (2.0 * k.rabi.w);
    I * pre * (lobe(k.u, t) - lobe(k.v, t))
}

/// Two-photon amplitude from |a⟩ through the effective intermediate dipole.
pub fn alpha2(
    eps: f64,
    t: f64,
    atom: &AtomModel,
    pulse: &PulseParams,
    ell: PartialWave,
    opts: &TwoPhotonOptions,
) -> Result<Complex64> {
    check_time(t, pulse)?;
    let eps_c = if opts.include_transient_term {
        Some(opts.eps_c(atom)?)
    } else {
        None
    };
    Ok(alpha2_unchecked(eps, t, atom, pulse, ell, eps_c))
}

fn alpha2_unchecked(
    eps: f64,
    t: f64,
    atom: &AtomModel,
    pulse: &PulseParams,
    ell: PartialWave,
    eps_c: Option<f64>,
) -> Complex64 {
    let k = Kernel::new(eps, atom, pulse);
    let (wm, wp) = k.weights();
    let z = atom.z_cont_from_rho.get(ell);
    let pre = 0.25 * pulse.e0 * pulse.e0 * z;
    let mut amp = -I * pre * (wm * lobe(k.u, t) + wp * lobe(k.v, t));
    if let Some(eps_c) = eps_c {
        let dw = k.rabi.delta_omega;
        let w = k.rabi.w;
        let omega_c = atom.eps_a + pulse.omega - eps_c;
        let om_minus = omega_c - 0.5 * dw - 0.5 * w;
        let om_plus = omega_c - 0.5 * dw + 0.5 * w;
        let y = atom.relative_energy(eps) + atom.eps_b - eps_c - dw;
        amp += I * pre * omega_c * (wm / om_minus + wp / om_plus) * lobe(y, t);
    }
    amp
}

/// Two-photon amplitude through one explicit intermediate state of energy
/// `eps_c` with dipole product `coupling` = z_εc·z_ca, keeping the exact
/// dressed denominators and the transient term.
pub fn alpha2_single_intermediate(
    eps: f64,
    t: f64,
    atom: &AtomModel,
    pulse: &PulseParams,
    coupling: f64,
    eps_c: f64,
) -> Result<Complex64> {
    check_time(t, pulse)?;
    let k = Kernel::new(eps, atom, pulse);
    let (wm, wp) = k.weights();
    let dw = k.rabi.delta_omega;
    let w = k.rabi.w;
    let omega_c = atom.eps_a + pulse.omega - eps_c;
    let om_minus = omega_c - 0.5 * dw - 0.5 * w;
    let om_plus = omega_c - 0.5 * dw + 0.5 * w;
    if om_minus == 0.0 || om_plus == 0.0 {
        return Err(invalid("eps_c", "intermediate state is resonant with a dressed level"));
    }
    let y = atom.relative_energy(eps) + atom.eps_b - eps_c - dw;
    let ly = lobe(y, t);
    let pre = 0.25 * pulse.e0 * pulse.e0 * coupling;
    Ok(-I * pre * (wm / om_minus * (lobe(k.u, t) - ly) + wp / om_plus * (lobe(k.v, t) - ly)))
}

/// R = |(E0/2)·z_ρ/z_b|, the size of two-photon relative to one-photon amplitudes.
pub fn amplitude_ratio(atom: &AtomModel, pulse: &PulseParams, ell: PartialWave) -> Result<f64> {
    let zb = atom.z_cont_from_b.get(ell);
    if zb == 0.0 {
        return Err(Error::ZeroDipole(ell.label()));
    }
    Ok((0.5 * pulse.e0 * atom.z_cont_from_rho.get(ell) / zb).abs())
}

/// α1 and α2 for one partial wave over a whole grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAmplitudeSet {
    pub ell: PartialWave,
    pub alpha1: Vec<Complex64>,
    pub alpha2: Vec<Complex64>,
}

impl ChannelAmplitudeSet {
    pub fn total(&self) -> Vec<Complex64> {
        self.alpha1.iter().zip(&self.alpha2).map(|(a, b)| a + b).collect()
    }

    pub fn select(&self, selector: Selector) -> Vec<Complex64> {
        match selector {
            Selector::OnePhotonOnly => self.alpha1.clone(),
            Selector::TwoPhotonOnly => self.alpha2.clone(),
            Selector::CoherentTotal => self.total(),
        }
    }
}

pub fn channel_amplitudes(
    grid: &SpectrumGrid,
    t: f64,
    atom: &AtomModel,
    pulse: &PulseParams,
    ell: PartialWave,
    opts: &TwoPhotonOptions,
) -> Result<ChannelAmplitudeSet> {
    check_time(t, pulse)?;
    let eps_c = if opts.include_transient_term {
        Some(opts.eps_c(atom)?)
    } else {
        None
    };
    let (alpha1, alpha2) = grid
        .energies()
        .par_iter()
        .map(|&e| {
            (
                alpha1_unchecked(e, t, atom, pulse, ell),
                alpha2_unchecked(e, t, atom, pulse, ell, eps_c),
            )
        })
        .unzip();
    Ok(ChannelAmplitudeSet { ell, alpha1, alpha2 })
}

/// Angle-integrated spectrum after time `t`: pathways add coherently within
/// a partial wave, partial waves add incoherently.
pub fn single_atom_spectrum(
    grid: &SpectrumGrid,
    t: f64,
    atom: &AtomModel,
    pulse: &PulseParams,
    opts: &TwoPhotonOptions,
    selector: Selector,
) -> Result<Spectrum> {
    let mut channels = BTreeMap::new();
    for ell in PartialWave::ALL {
        let set = channel_amplitudes(grid, t, atom, pulse, ell, opts)?;
        channels.insert(ell, ChannelData::Amplitudes(set.select(selector)));
    }
    Spectrum::new(grid.clone(), channels)
}

/// Spectrum at the end of the pulse.
pub fn final_spectrum(
    grid: &SpectrumGrid,
    atom: &AtomModel,
    pulse: &PulseParams,
    opts: &TwoPhotonOptions,
    selector: Selector,
) -> Result<Spectrum> {
    single_atom_spectrum(grid, pulse.duration, atom, pulse, opts, selector)
}
