//! Brute-force time propagation of a few bound levels coupled to
//! energy-discretized s and d continua.
//!
//! The state is written in a frame that removes ε_a + nω from a level
//! reached by n photons (|a⟩: 0, |b⟩ and explicit intermediates: 1,
//! continuum bins: 2). In that frame the diagonal is ε_j − ε_a − n_jω and
//! the couplings carry the field envelope. In `Rwa` mode only the slowly
//! varying parts survive; `FullOscillating` keeps the counter-rotating
//! factors e^{2iωt} (one photon) and e^{4iωt} (effective two-photon).
//! Continuum–continuum couplings are omitted.

mod checkpoint;
mod propagation;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ionization::Selector;
use crate::model::{AtomModel, ChannelData, ChannelDipoles, PartialWave, PulseParams, Spectrum, SpectrumGrid};
use crate::units::ev_to_au;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use propagation::{propagate, PropagationResult, Propagator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    FullOscillating,
    #[default]
    Rwa,
}

/// Continuum window in kinetic energy (a.u.) split into `n_bins` equal bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumGridSpec {
    pub emin: f64,
    pub emax: f64,
    pub n_bins: usize,
}

impl ContinuumGridSpec {
    /// 1024 bins over ±1.5 eV around the two-resonant-photon line.
    pub fn default_for(atom: &AtomModel) -> Self {
        Self::around(atom.two_photon_line(), ev_to_au(1.5), 1024)
    }

    pub fn around(centre: f64, half_width: f64, n_bins: usize) -> Self {
        Self {
            emin: centre - half_width,
            emax: centre + half_width,
            n_bins,
        }
    }
}

/// An explicitly enumerated intermediate state for the two-photon pathway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntermediateState {
    pub label: String,
    pub energy: f64,
    /// ⟨c|z|a⟩.
    pub z_from_a: f64,
    /// ⟨ε ℓ|z|c⟩ per partial wave.
    pub z_to_continuum: ChannelDipoles,
}

/// How ionization out of |a⟩ by two photons is represented.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoPhotonCoupling {
    /// Direct a ↔ continuum coupling through the effective dipoles.
    #[default]
    Reduced,
    /// Explicit intermediate states instead of the effective dipoles.
    Explicit(Vec<IntermediateState>),
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pathways {
    pub one_photon: bool,
    pub two_photon: TwoPhotonCoupling,
}

impl Default for Pathways {
    fn default() -> Self {
        Self {
            one_photon: true,
            two_photon: TwoPhotonCoupling::Reduced,
        }
    }
}

impl Pathways {
    pub fn one_photon_only() -> Self {
        Self {
            one_photon: true,
            two_photon: TwoPhotonCoupling::Off,
        }
    }

    pub fn two_photon_only() -> Self {
        Self {
            one_photon: false,
            two_photon: TwoPhotonCoupling::Reduced,
        }
    }

    /// The reduced-coupling pathways that correspond to an analytic selector.
    pub fn for_selector(selector: Selector) -> Self {
        match selector {
            Selector::OnePhotonOnly => Self::one_photon_only(),
            Selector::TwoPhotonOnly => Self::two_photon_only(),
            Selector::CoherentTotal => Self::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundLevel {
    pub label: String,
    pub energy: f64,
    /// Photons absorbed to reach the level from |a⟩.
    pub photons: u32,
}

/// Time-independent coupling coefficient between bound row `row` and
/// continuum bin `bin`; the field dependence enters through the row's order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub(crate) struct RowOrder {
    /// 1 for one-photon rows (∝ E0 f/2), 2 for the effective two-photon row (∝ E0² f²/4).
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssentialStatesSystem {
    pub atom: AtomModel,
    pub mode: CouplingMode,
    pub bound: Vec<BoundLevel>,
    /// Bound–bound dipoles (symmetric, real) between levels of adjacent photon number.
    pub bound_dipoles: Vec<Vec<f64>>,
    /// Bin centres (a.u. kinetic energy), shared by every partial wave.
    pub bin_energies: Vec<f64>,
    pub d_eps: f64,
    /// Partial waves present, in block order.
    pub waves: Vec<PartialWave>,
    /// For every bound row: coupling order and per-wave dipole to the continuum.
    pub(crate) rows: Vec<(RowOrder, ChannelDipoles)>,
}

impl EssentialStatesSystem {
    pub fn n_bound(&self) -> usize {
        self.bound.len()
    }

    pub fn n_bins(&self) -> usize {
        self.bin_energies.len()
    }

    pub fn dimension(&self) -> usize {
        self.n_bound() + self.waves.len() * self.n_bins()
    }

    /// Continuum window edges.
    pub fn window(&self) -> Option<(f64, f64)> {
        let (first, last) = (self.bin_energies.first()?, self.bin_energies.last()?);
        Some((first - 0.5 * self.d_eps, last + 0.5 * self.d_eps))
    }

    /// Energy-normalized coupling z·√dε between bound row `row` and one bin
    /// of wave `ell`, before the field factor.
    pub fn bin_coupling(&self, row: usize, ell: PartialWave) -> f64 {
        self.rows[row].1.get(ell) * self.d_eps.sqrt()
    }

    /// The Hamiltonian in the rotating frame at time t for field amplitude
    /// `e0`, carrier `omega` and envelope value `f`, as a dense matrix.
    /// Used for checking hermiticity; the propagator never forms it.
    pub fn dense_hamiltonian(&self, t: f64, e0: f64, omega: f64, f: f64) -> Vec<Vec<Complex64>> {
        let n = self.dimension();
        let mut h = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        let diag = self.frame_diagonal(omega);
        for (i, d) in diag.iter().enumerate() {
            h[i][i] = Complex64::new(*d, 0.0);
        }
        let (g1, g2) = self.field_factors(t, e0, omega, f);
        let m = self.n_bound();
        for i in 0..m {
            for j in 0..m {
                let z = self.bound_dipoles[i][j];
                if z != 0.0 && self.bound[i].photons == self.bound[j].photons + 1 {
                    h[i][j] = g1 * z;
                    h[j][i] = (g1 * z).conj();
                }
            }
        }
        for r in 0..m {
            let g = if self.rows[r].0.order == 2 { g2 } else { g1 };
            for (w, &ell) in self.waves.iter().enumerate() {
                let c = self.bin_coupling(r, ell);
                if c == 0.0 {
                    continue;
                }
                for k in 0..self.n_bins() {
                    let col = m + w * self.n_bins() + k;
                    h[col][r] = g * c;
                    h[r][col] = (g * c).conj();
                }
            }
        }
        h
    }

    /// ε_j − ε_a − n_j ω for every state in vector order.
    pub fn frame_diagonal(&self, omega: f64) -> Vec<f64> {
        let ea = self.atom.eps_a;
        let mut d: Vec<f64> = self
            .bound
            .iter()
            .map(|b| b.energy - ea - b.photons as f64 * omega)
            .collect();
        for _ in &self.waves {
            d.extend(self.bin_energies.iter().map(|&e| e - ea - 2.0 * omega));
        }
        d
    }

    /// Field factors for one-photon (lower ← upper photon number) and
    /// effective two-photon couplings, including the frame phase.
    pub(crate) fn field_factors(&self, t: f64, e0: f64, omega: f64, f: f64) -> (Complex64, Complex64) {
        let g1 = 0.5 * e0 * f;
        let g2 = 0.25 * e0 * e0 * f * f;
        match self.mode {
            CouplingMode::Rwa => (Complex64::new(g1, 0.0), Complex64::new(g2, 0.0)),
            CouplingMode::FullOscillating => (
                g1 * (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, 2.0 * omega * t)),
                g2 * (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, 4.0 * omega * t)),
            ),
        }
    }
}

/// Minimum number of bins for a nonempty continuum.
pub const MIN_BINS: usize = 64;

/// Assemble the essential-states system. `n_bins = 0` leaves a pure bound system.
pub fn build_system(
    atom: &AtomModel,
    grid: &ContinuumGridSpec,
    mode: CouplingMode,
    pathways: &Pathways,
) -> Result<EssentialStatesSystem> {
    atom.validate()?;
    let mut bound = vec![
        BoundLevel {
            label: "a".into(),
            energy: atom.eps_a,
            photons: 0,
        },
        BoundLevel {
            label: "b".into(),
            energy: atom.eps_b,
            photons: 1,
        },
    ];
    let zero = ChannelDipoles { s: 0.0, d: 0.0 };
    let mut rows = vec![
        (RowOrder { order: 2 }, zero),
        (
            RowOrder { order: 1 },
            if pathways.one_photon { atom.z_cont_from_b } else { zero },
        ),
    ];
    match &pathways.two_photon {
        TwoPhotonCoupling::Reduced => rows[0].1 = atom.z_cont_from_rho,
        TwoPhotonCoupling::Off => {}
        TwoPhotonCoupling::Explicit(states) => {
            for s in states {
                if !(s.energy > atom.eps_a) || !s.z_from_a.is_finite() {
                    return Err(invalid("intermediates", format!("bad state `{}`", s.label)));
                }
                bound.push(BoundLevel {
                    label: s.label.clone(),
                    energy: s.energy,
                    photons: 1,
                });
                rows.push((RowOrder { order: 1 }, s.z_to_continuum));
            }
        }
    }
    let m = bound.len();
    let mut bound_dipoles = vec![vec![0.0; m]; m];
    bound_dipoles[1][0] = atom.z_ba;
    bound_dipoles[0][1] = atom.z_ba;
    if let TwoPhotonCoupling::Explicit(states) = &pathways.two_photon {
        for (k, s) in states.iter().enumerate() {
            bound_dipoles[2 + k][0] = s.z_from_a;
            bound_dipoles[0][2 + k] = s.z_from_a;
        }
    }

    let (bin_energies, d_eps, waves) = if grid.n_bins == 0 {
        (Vec::new(), 0.0, Vec::new())
    } else {
        if grid.n_bins < MIN_BINS {
            return Err(invalid(
                "n_bins",
                format!("needs 0 or at least {MIN_BINS}, got {}", grid.n_bins),
            ));
        }
        if !(grid.emax > grid.emin) {
            return Err(invalid("continuum", "emax must exceed emin"));
        }
        let line = atom.two_photon_line();
        if !(grid.emin < line && line < grid.emax) {
            return Err(Error::OutsideWindow {
                lo: line,
                hi: line,
                wlo: grid.emin,
                whi: grid.emax,
            });
        }
        let d = (grid.emax - grid.emin) / grid.n_bins as f64;
        let e = (0..grid.n_bins).map(|k| grid.emin + (k as f64 + 0.5) * d).collect();
        (e, d, PartialWave::ALL.to_vec())
    };

    Ok(EssentialStatesSystem {
        atom: *atom,
        mode,
        bound,
        bound_dipoles,
        bin_energies,
        d_eps,
        waves,
        rows,
    })
}

/// Build, propagate and map onto `grid` in one call.
pub fn run_spectrum(
    atom: &AtomModel,
    continuum: &ContinuumGridSpec,
    mode: CouplingMode,
    pathways: &Pathways,
    pulse: &PulseParams,
    dt: f64,
    grid: &SpectrumGrid,
) -> Result<Spectrum> {
    let sys = build_system(atom, continuum, mode, pathways)?;
    let res = propagate(&sys, pulse, dt, usize::MAX)?;
    oracle_spectrum(&res, grid)
}

/// Map final bin amplitudes onto `grid` as a spectral density |c_k|²/dε per
/// partial wave. The density is linear between bin centres and constant over
/// the outer half bins; each channel is then rescaled so that its trapezoid
/// integral over the grid equals the exact integral of that interpolant.
pub fn oracle_spectrum(result: &PropagationResult, grid: &SpectrumGrid) -> Result<Spectrum> {
    let e = &result.bin_energies;
    let de = result.d_eps;
    let x = grid.energies();
    let (wlo, whi) = match (e.first(), e.last()) {
        (Some(a), Some(b)) => (a - 0.5 * de, b + 0.5 * de),
        _ => return Err(invalid("result", "propagation has no continuum")),
    };
    let (lo, hi) = (x[0], x[x.len() - 1]);
    if lo < wlo - 1e-12 * wlo.abs() || hi > whi + 1e-12 * whi.abs() {
        return Err(Error::OutsideWindow { lo, hi, wlo, whi });
    }
    let mut channels = BTreeMap::new();
    for (ell, amps) in &result.continuum_amplitudes {
        let rho: Vec<f64> = amps.iter().map(|c| c.norm_sqr() / de).collect();
        let interp = |v: f64| -> f64 {
            if v <= e[0] {
                return rho[0];
            }
            if v >= e[e.len() - 1] {
                return rho[rho.len() - 1];
            }
            let k = ((v - e[0]) / de).floor() as usize;
            let k = k.min(e.len() - 2);
            let u = (v - e[k]) / de;
            rho[k] + u * (rho[k + 1] - rho[k])
        };
        let mut samples: Vec<f64> = x.iter().map(|&v| interp(v)).collect();
        let exact = interp_integral(e, &rho, de, lo, hi);
        let trap: f64 = x
            .windows(2)
            .zip(samples.windows(2))
            .map(|(xx, yy)| 0.5 * (xx[1] - xx[0]) * (yy[0] + yy[1]))
            .sum();
        if trap > 0.0 {
            let scale = exact / trap;
            samples.iter_mut().for_each(|s| *s *= scale);
        }
        channels.insert(*ell, ChannelData::Intensities(samples));
    }
    Spectrum::new(grid.clone(), channels)
}

/// ∫_lo^hi of the piecewise-linear density through bin centres, constant
/// beyond the first and last centre.
fn interp_integral(e: &[f64], rho: &[f64], de: f64, lo: f64, hi: f64) -> f64 {
    let n = e.len();
    // breakpoints: window edge, centres, window edge
    let mut xs = Vec::with_capacity(n + 2);
    let mut ys = Vec::with_capacity(n + 2);
    xs.push(e[0] - 0.5 * de);
    ys.push(rho[0]);
    xs.extend_from_slice(e);
    ys.extend_from_slice(rho);
    xs.push(e[n - 1] + 0.5 * de);
    ys.push(rho[n - 1]);
    let mut total = 0.0;
    for k in 0..xs.len() - 1 {
        let (a, b) = (xs[k].max(lo), xs[k + 1].min(hi));
        if b <= a {
            continue;
        }
        let slope = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
        let ya = ys[k] + slope * (a - xs[k]);
        let yb = ys[k] + slope * (b - xs[k]);
        total += 0.5 * (b - a) * (ya + yb);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom() -> AtomModel {
        AtomModel::helium_cis_default()
    }

    #[test]
    fn zero_bins_is_two_level() {
        let g = ContinuumGridSpec::around(atom().two_photon_line(), 0.05, 0);
        let s = build_system(&atom(), &g, CouplingMode::Rwa, &Pathways::default()).unwrap();
        assert_eq!(s.dimension(), 2);
        assert!(s.window().is_none());
    }

    #[test]
    fn too_few_bins_and_bad_window_rejected() {
        let a = atom();
        let g = ContinuumGridSpec::around(a.two_photon_line(), 0.05, 10);
        assert!(build_system(&a, &g, CouplingMode::Rwa, &Pathways::default()).is_err());
        let g = ContinuumGridSpec {
            emin: a.two_photon_line() + 0.01,
            emax: a.two_photon_line() + 0.05,
            n_bins: 128,
        };
        assert!(matches!(
            build_system(&a, &g, CouplingMode::Rwa, &Pathways::default()),
            Err(Error::OutsideWindow { .. })
        ));
    }

    #[test]
    fn doubling_bins_scales_couplings() {
        let a = atom();
        let g1 = ContinuumGridSpec::around(a.two_photon_line(), 0.05, 128);
        let g2 = ContinuumGridSpec { n_bins: 256, ..g1 };
        let s1 = build_system(&a, &g1, CouplingMode::Rwa, &Pathways::default()).unwrap();
        let s2 = build_system(&a, &g2, CouplingMode::Rwa, &Pathways::default()).unwrap();
        assert!((s1.d_eps / s2.d_eps - 2.0).abs() < 1e-12);
        for row in 0..2 {
            for ell in PartialWave::ALL {
                let r = s2.bin_coupling(row, ell) / s1.bin_coupling(row, ell);
                assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let a = atom();
        let g = ContinuumGridSpec::around(a.two_photon_line(), 0.05, 64);
        let states = vec![IntermediateState {
            label: "c".into(),
            energy: a.eps_b + 0.011,
            z_from_a: 0.05,
            z_to_continuum: ChannelDipoles { s: 0.1, d: -0.2 },
        }];
        for mode in [CouplingMode::Rwa, CouplingMode::FullOscillating] {
            for pw in [
                Pathways::default(),
                Pathways {
                    one_photon: true,
                    two_photon: TwoPhotonCoupling::Explicit(states.clone()),
                },
            ] {
                let s = build_system(&a, &g, mode, &pw).unwrap();
                let h = s.dense_hamiltonian(13.7, 0.02, 0.9, 0.8);
                for i in 0..h.len() {
                    for j in 0..h.len() {
                        assert!((h[i][j] - h[j][i].conj()).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn interpolant_integral_matches_bin_sum() {
        let e: Vec<f64> = (0..10).map(|k| 1.0 + 0.1 * (k as f64 + 0.5)).collect();
        let rho: Vec<f64> = (0..10).map(|k| (k * k) as f64).collect();
        let total: f64 = rho.iter().map(|r| r * 0.1).sum();
        assert!((interp_integral(&e, &rho, 0.1, 1.0, 2.0) - total).abs() < 1e-12);
    }
}
