use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::{CouplingMode, EssentialStatesSystem};
use crate::error::{invalid, Error, Result};
use crate::model::{Envelope, PartialWave, PulseParams};
use crate::rabi::RabiParams;

/// Largest allowed ω·dt (oscillating couplings) or W·dt (rotating wave).
pub const MAX_PHASE_PER_STEP: f64 = 0.2;
/// Largest tolerated |‖ψ‖² − 1| at the end of a run.
pub const NORM_TOLERANCE: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationResult {
    pub times: Vec<f64>,
    pub bound_labels: Vec<String>,
    /// Populations of the bound levels at each recorded time.
    pub bound_populations: Vec<Vec<f64>>,
    pub norm_history: Vec<f64>,
    pub bin_energies: Vec<f64>,
    pub d_eps: f64,
    pub continuum_amplitudes: BTreeMap<PartialWave, Vec<Complex64>>,
    pub final_bound_amplitudes: Vec<Complex64>,
}

impl PropagationResult {
    /// Total probability left in the continuum.
    pub fn ionized_probability(&self) -> f64 {
        self.continuum_amplitudes
            .values()
            .flat_map(|v| v.iter())
            .map(|c| c.norm_sqr())
            .sum()
    }
}

/// Crank–Nicolson stepper. The continuum block is diagonal in the frame, so
/// each step reduces to a small dense solve on the bound levels.
pub struct Propagator<'a> {
    sys: &'a EssentialStatesSystem,
    pulse: PulseParams,
    dt: f64,
    n_steps: usize,
    step: usize,
    state: Vec<Complex64>,
    diag: Vec<f64>,
    /// 1/(1 + iδD_k) per bin, δ = dt/2.
    inv: Vec<Complex64>,
    /// Σ_k 1/(1 + iδD_k).
    inv_sum: Complex64,
    ramp: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(sys: &'a EssentialStatesSystem, pulse: &PulseParams, dt: f64) -> Result<Self> {
        pulse.validate()?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        match sys.mode {
            CouplingMode::FullOscillating => {
                if pulse.omega * dt > MAX_PHASE_PER_STEP {
                    return Err(Error::StepSize(format!(
                        "ω·dt = {:.3} > {MAX_PHASE_PER_STEP}; the carrier is not resolved",
                        pulse.omega * dt
                    )));
                }
            }
            CouplingMode::Rwa => {
                let w = RabiParams::from_pulse(&sys.atom, pulse).w;
                if w * dt > MAX_PHASE_PER_STEP {
                    return Err(Error::StepSize(format!(
                        "W·dt = {:.3} > {MAX_PHASE_PER_STEP}; the Rabi cycle is not resolved",
                        w * dt
                    )));
                }
            }
        }
        if let Some((wlo, whi)) = sys.window() {
            let line = 2.0 * pulse.omega + sys.atom.eps_a;
            if !(wlo < line && line < whi) {
                return Err(Error::OutsideWindow {
                    lo: line,
                    hi: line,
                    wlo,
                    whi,
                });
            }
        }
        let end = pulse.end_time();
        let n_steps = (end / dt).ceil().max(1.0) as usize;
        let dt = end / n_steps as f64;
        let diag = sys.frame_diagonal(pulse.omega);
        let m = sys.n_bound();
        let half = 0.5 * dt;
        let inv: Vec<Complex64> = diag[m..m + sys.n_bins()]
            .iter()
            .map(|&d| 1.0 / Complex64::new(1.0, half * d))
            .collect();
        let inv_sum = inv.iter().sum();
        let mut state = vec![ZERO; sys.dimension()];
        state[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            sys,
            pulse: *pulse,
            dt,
            n_steps,
            step: 0,
            state,
            diag,
            inv,
            inv_sum,
            ramp: 2.0 * PI / pulse.omega,
        })
    }

    /// Resume from a saved state. The step size must match the one used to
    /// write the checkpoint.
    pub fn from_checkpoint(
        sys: &'a EssentialStatesSystem,
        pulse: &PulseParams,
        dt: f64,
        ckpt: &Checkpoint,
    ) -> Result<Self> {
        let mut p = Self::new(sys, pulse, dt)?;
        if ckpt.state.len() != p.state.len() {
            return Err(Error::Checkpoint(format!(
                "state has {} entries, system has {}",
                ckpt.state.len(),
                p.state.len()
            )));
        }
        if ckpt.n_steps != p.n_steps as u64 || ckpt.step > ckpt.n_steps {
            return Err(Error::Checkpoint("step count does not match this run".into()));
        }
        p.step = ckpt.step as usize;
        p.state.clone_from(&ckpt.state);
        Ok(p)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.step as u64, self.n_steps as u64, self.time(), self.state.clone())
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.n_steps
    }

    pub fn state(&self) -> &[Complex64] {
        &self.state
    }

    pub fn norm_sqr(&self) -> f64 {
        self.state.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Envelope seen by the propagator; flat tops are switched on and off
    /// over one optical cycle when the carrier is kept.
    fn envelope(&self, t: f64) -> f64 {
        let f = self.pulse.envelope_at(t);
        if self.sys.mode == CouplingMode::Rwa || self.pulse.envelope != Envelope::FlatTop {
            return f;
        }
        let end = self.pulse.end_time();
        let edge = t.min(end - t);
        if edge < self.ramp {
            let s = (0.5 * PI * edge / self.ramp).sin();
            f * s * s
        } else {
            f
        }
    }

    /// Advance one Crank–Nicolson step with the Hamiltonian at the midpoint.
    pub fn advance(&mut self) {
        if self.is_done() {
            return;
        }
        let sys = self.sys;
        let m = sys.n_bound();
        let nb = sys.n_bins();
        let nw = sys.waves.len();
        let h = 0.5 * self.dt;
        let tm = (self.step as f64 + 0.5) * self.dt;
        let (g1, g2) = sys.field_factors(tm, self.pulse.e0, self.pulse.omega, self.envelope(tm));

        // Bound block B.
        let mut b = DMatrix::<Complex64>::zeros(m, m);
        for i in 0..m {
            b[(i, i)] = Complex64::new(self.diag[i], 0.0);
            for j in 0..m {
                let z = sys.bound_dipoles[i][j];
                if z != 0.0 && sys.bound[i].photons == sys.bound[j].photons + 1 {
                    b[(i, j)] = g1 * z;
                    b[(j, i)] = (g1 * z).conj();
                }
            }
        }
        // Continuum coupling of each row: H[bin][r] = g_r c_rw, H[r][bin] = conj.
        let g: Vec<Complex64> = (0..m).map(|r| if sys.rows[r].0.order == 2 { g2 } else { g1 }).collect();
        let c: Vec<Vec<f64>> = (0..m)
            .map(|r| sys.waves.iter().map(|&w| sys.bin_coupling(r, w)).collect())
            .collect();

        let (bound, cont) = self.state.split_at_mut(m);
        let psi_b = DVector::from_column_slice(bound);

        // r_b = ψ_b − iδ(Bψ_b + H_bc ψ_c)
        let sums: Vec<Complex64> = (0..nw).map(|w| cont[w * nb..(w + 1) * nb].iter().sum()).collect();
        let mut rb = &psi_b - (&b * &psi_b) * (I * h);
        for r in 0..m {
            let acc: Complex64 = (0..nw).map(|w| c[r][w] * sums[w]).sum();
            rb[r] -= I * h * g[r].conj() * acc;
        }
        // r_c = (1 − iδD)ψ_c − iδ H_cb ψ_b, then τ_w = Σ_k r_c/(1 + iδD).
        let hw: Vec<Complex64> = (0..nw)
            .map(|w| (0..m).map(|r| g[r] * c[r][w] * psi_b[r]).sum())
            .collect();
        let mut tau = vec![ZERO; nw];
        for w in 0..nw {
            let block = &mut cont[w * nb..(w + 1) * nb];
            for (k, x) in block.iter_mut().enumerate() {
                let d = self.diag[m + w * nb + k];
                *x = *x * Complex64::new(1.0, -h * d) - I * h * hw[w];
                tau[w] += *x * self.inv[k];
            }
        }
        // Schur complement on the bound levels.
        let mut mat = DMatrix::<Complex64>::identity(m, m) + &b * (I * h);
        let mut rhs = rb;
        for r in 0..m {
            for s in 0..m {
                let cc: f64 = (0..nw).map(|w| c[r][w] * c[s][w]).sum();
                if cc != 0.0 {
                    mat[(r, s)] += h * h * g[r].conj() * g[s] * cc * self.inv_sum;
                }
            }
            let acc: Complex64 = (0..nw).map(|w| c[r][w] * tau[w]).sum();
            rhs[r] -= I * h * g[r].conj() * acc;
        }
        let xb = mat.lu().solve(&rhs).expect("I + iδH is invertible for Hermitian H");
        let hw: Vec<Complex64> = (0..nw).map(|w| (0..m).map(|s| g[s] * c[s][w] * xb[s]).sum()).collect();
        for w in 0..nw {
            let block = &mut cont[w * nb..(w + 1) * nb];
            for (k, x) in block.iter_mut().enumerate() {
                *x = (*x - I * h * hw[w]) * self.inv[k];
            }
        }
        bound.copy_from_slice(xb.as_slice());
        self.step += 1;
    }

    /// Run to the end of the pulse, recording every `stride` steps.
    pub fn run(mut self, stride: usize) -> Result<PropagationResult> {
        let stride = stride.max(1);
        let m = self.sys.n_bound();
        let mut times = Vec::new();
        let mut pops = Vec::new();
        let mut norms = Vec::new();
        let mut record = |p: &Self| {
            times.push(p.time());
            pops.push(p.state[..m].iter().map(|c| c.norm_sqr()).collect::<Vec<_>>());
            norms.push(p.norm_sqr());
        };
        record(&self);
        while !self.is_done() {
            self.advance();
            if self.step.is_multiple_of(stride) || self.is_done() {
                record(&self);
            }
        }
        let drift = (self.norm_sqr() - 1.0).abs();
        if drift > NORM_TOLERANCE {
            return Err(Error::NormDrift {
                drift,
                tol: NORM_TOLERANCE,
            });
        }
        let nb = self.sys.n_bins();
        let continuum_amplitudes = self
            .sys
            .waves
            .iter()
            .enumerate()
            .map(|(w, &ell)| (ell, self.state[m + w * nb..m + (w + 1) * nb].to_vec()))
            .collect();
        Ok(PropagationResult {
            times,
            bound_labels: self.sys.bound.iter().map(|b| b.label.clone()).collect(),
            bound_populations: pops,
            norm_history: norms,
            bin_energies: self.sys.bin_energies.clone(),
            d_eps: self.sys.d_eps,
            continuum_amplitudes,
            final_bound_amplitudes: self.state[..m].to_vec(),
        })
    }
}

/// Propagate from |a⟩ over the whole pulse.
pub fn propagate(
    sys: &EssentialStatesSystem,
    pulse: &PulseParams,
    dt: f64,
    observer_stride: usize,
) -> Result<PropagationResult> {
    Propagator::new(sys, pulse, dt)?.run(observer_stride)
}

#[cfg(test)]
mod tests {
    use super::super::{build_system, ContinuumGridSpec, Pathways};
    use super::*;
    use crate::model::AtomModel;
    use crate::rabi::excited_population;
    use crate::units::field_from_intensity;

    fn two_level(mode: CouplingMode) -> EssentialStatesSystem {
        let atom = AtomModel::helium_cis_default();
        let g = ContinuumGridSpec::around(atom.two_photon_line(), 0.05, 0);
        build_system(&atom, &g, mode, &Pathways::default()).unwrap()
    }

    #[test]
    fn two_level_rwa_matches_closed_form() {
        let sys = two_level(CouplingMode::Rwa);
        let e0 = field_from_intensity(2e13).unwrap();
        let pulse = PulseParams::flat_top_rabi_periods(&sys.atom, e0, 0.001, 1.5).unwrap();
        let res = propagate(&sys, &pulse, 0.25, 50).unwrap();
        let p = RabiParams::from_pulse(&sys.atom, &pulse);
        let worst = res
            .times
            .iter()
            .zip(&res.bound_populations)
            .map(|(&t, pop)| (pop[1] - excited_population(t, &p)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst:e}");
    }

    #[test]
    fn step_size_checks() {
        let sys = two_level(CouplingMode::FullOscillating);
        let pulse = PulseParams::flat_top_rabi_periods(&sys.atom, 0.02, 0.0, 1.0).unwrap();
        assert!(matches!(propagate(&sys, &pulse, 0.5, 1), Err(Error::StepSize(_))));
        let sys = two_level(CouplingMode::Rwa);
        assert!(matches!(propagate(&sys, &pulse, 200.0, 1), Err(Error::StepSize(_))));
    }

    #[test]
    fn norm_is_conserved_with_continuum() {
        let atom = AtomModel::helium_cis_default();
        let g = ContinuumGridSpec::default_for(&atom);
        let sys = build_system(&atom, &g, CouplingMode::Rwa, &Pathways::default()).unwrap();
        let e0 = field_from_intensity(5e13).unwrap();
        let pulse = PulseParams::flat_top_rabi_periods(&atom, e0, 0.0, 1.0).unwrap();
        let res = propagate(&sys, &pulse, 1.0, 100).unwrap();
        for n in &res.norm_history {
            assert!((n - 1.0).abs() < 1e-10);
        }
        assert!(res.ionized_probability() > 0.0);
    }
}
