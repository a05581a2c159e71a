//! Closed-form two-level dynamics in the rotating-wave approximation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{AtomModel, PulseParams};

/// Ω, Δω and the generalized Rabi frequency W = √(Ω² + Δω²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    pub omega: f64,
    pub delta_omega: f64,
    pub w: f64,
}

impl RabiParams {
    pub fn new(omega: f64, delta_omega: f64) -> Result<Self> {
        if !omega.is_finite() || omega < 0.0 {
            return Err(invalid("omega", format!("Rabi frequency must be >= 0, got {omega}")));
        }
        if !delta_omega.is_finite() {
            return Err(invalid("delta_omega", "must be finite"));
        }
        Ok(Self {
            omega,
            delta_omega,
            w: (omega * omega + delta_omega * delta_omega).sqrt(),
        })
    }

    pub fn from_pulse(atom: &AtomModel, pulse: &PulseParams) -> Self {
        let omega = pulse.rabi_frequency(atom);
        let delta_omega = pulse.detuning(atom);
        Self {
            omega,
            delta_omega,
            w: (omega * omega + delta_omega * delta_omega).sqrt(),
        }
    }

    /// sin(Wt/2)/W, continuous through W = 0.
    pub fn sin_half_over_w(&self, t: f64) -> f64 {
        sin_half_over(self.w, t)
    }
}

/// sin(x t/2)/x with the t/2 limit at x → 0.
pub(crate) fn sin_half_over(x: f64, t: f64) -> f64 {
    let h = 0.5 * x * t;
    if h.abs() < 1e-4 {
        0.5 * t * (1.0 - h * h / 6.0 + h.powi(4) / 120.0)
    } else {
        h.sin() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiAmplitudes {
    pub a: Complex64,
    pub b: Complex64,
    pub t: f64,
}

/// Ground and excited amplitudes at time t for a flat-top field switched on at t = 0.
pub fn rabi_amplitudes(t: f64, p: &RabiParams) -> RabiAmplitudes {
    let half = 0.5 * p.w * t;
    let s = p.sin_half_over_w(t);
    let phase = Complex64::from_polar(1.0, 0.5 * p.delta_omega * t);
    let a = Complex64::new(half.cos(), -p.delta_omega * s) * phase;
    let b = Complex64::new(0.0, -p.omega * s) * phase.conj();
    RabiAmplitudes { a, b, t }
}

/// P_b(t) = (Ω/W)² sin²(Wt/2).
pub fn excited_population(t: f64, p: &RabiParams) -> f64 {
    let s = p.omega * p.sin_half_over_w(t);
    s * s
}

/// Dressed energies ε± = (ε_a + ε_b + ω ± W)/2.
pub fn dressed_energies(atom: &AtomModel, pulse: &PulseParams) -> (f64, f64) {
    let p = RabiParams::from_pulse(atom, pulse);
    let mid = 0.5 * (atom.eps_a + atom.eps_b + pulse.omega);
    (mid + 0.5 * p.w, mid - 0.5 * p.w)
}

/// Photoelectron kinetic energies one photon above the dressed states.
/// Energies are measured from threshold (ε_a = −I_p), so this is ε± + ω.
pub fn dressed_kinetic_energies(atom: &AtomModel, pulse: &PulseParams) -> (f64, f64) {
    let (p, m) = dressed_energies(atom, pulse);
    (p + pulse.omega, m + pulse.omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Envelope;
    use crate::units::{au_to_ev, au_to_mev, field_from_intensity, mev_to_au};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn boundary_and_half_period() {
        let p = RabiParams::new(mev_to_au(80.0), 0.0).unwrap();
        let r = rabi_amplitudes(0.0, &p);
        assert_eq!((r.a, r.b), (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)));
        let r = rabi_amplitudes(PI / p.omega, &p);
        assert!(close(r.a, Complex64::new(0.0, 0.0), 1e-12));
        assert!(close(r.b, Complex64::new(0.0, -1.0), 1e-12));
        let r = rabi_amplitudes(2.0 * PI / p.omega, &p);
        assert!(close(r.a, Complex64::new(-1.0, 0.0), 1e-12));
        assert!(close(r.b, Complex64::new(0.0, 0.0), 1e-12));
    }

    #[test]
    fn degenerate_limit() {
        let p = RabiParams::new(0.0, 0.0).unwrap();
        let r = rabi_amplitudes(123.0, &p);
        assert_eq!(r.a, Complex64::new(1.0, 0.0));
        assert_eq!(r.b.norm(), 0.0);
    }

    #[test]
    fn population_examples() {
        let p = RabiParams::new(0.01, 0.0).unwrap();
        assert!((excited_population(PI / 0.01, &p) - 1.0).abs() < 1e-12);
        let p = RabiParams::new(mev_to_au(80.0), mev_to_au(60.0)).unwrap();
        assert!((au_to_mev(p.w) - 100.0).abs() < 1e-9);
        assert!((excited_population(PI / p.w, &p) - 0.64).abs() < 1e-12);
    }

    #[test]
    fn dressed_energy_gap() {
        let atom = AtomModel::helium_cis_default();
        let e0 = field_from_intensity(2e13).unwrap();
        let pulse = PulseParams::new(e0, atom.omega_ba(), Envelope::FlatTop, 1.0).unwrap();
        let (p, m) = dressed_energies(&atom, &pulse);
        let omega = pulse.rabi_frequency(&atom);
        assert!((p - m - omega).abs() < 1e-15);
        assert!((0.5 * (p + m) - atom.eps_b).abs() < 1e-12);

        let (kp, km) = dressed_kinetic_energies(&atom, &pulse);
        let centre = au_to_ev(0.5 * (kp + km));
        assert!((centre - 23.3076).abs() < 1e-4, "{centre}");
        assert!((au_to_ev(kp - km) / 2.0 - 0.0403).abs() < 5e-4);

        let weak = pulse.with_e0(0.0).with_detuning(&atom, 0.01);
        let (p, m) = dressed_energies(&atom, &weak);
        assert!((p - m - 0.01).abs() < 1e-15);
    }

    #[test]
    fn far_detuned_branch_follows_two_photon_line() {
        let atom = AtomModel::helium_cis_default();
        let e0 = field_from_intensity(2e13).unwrap();
        let dw = mev_to_au(2000.0);
        let pulse = PulseParams::new(e0, atom.omega_ba() + dw, Envelope::FlatTop, 1.0).unwrap();
        let (kp, _) = dressed_kinetic_energies(&atom, &pulse);
        let line = 2.0 * pulse.omega + atom.eps_a;
        let omega = pulse.rabi_frequency(&atom);
        assert!((kp - line).abs() < omega * omega / dw);
    }

    #[test]
    fn gap_minimum_at_resonance() {
        let atom = AtomModel::helium_cis_default();
        let e0 = field_from_intensity(2e13).unwrap();
        let base = PulseParams::new(e0, atom.omega_ba(), Envelope::FlatTop, 1.0).unwrap();
        let omega = base.rabi_frequency(&atom);
        let mut best = (f64::INFINITY, 0.0);
        for i in -200..=200 {
            let dw = mev_to_au(i as f64);
            let (p, m) = dressed_kinetic_energies(&atom, &base.with_detuning(&atom, dw));
            if p - m < best.0 {
                best = (p - m, dw);
            }
        }
        assert!((best.0 - omega).abs() < 1e-12);
        assert!(best.1.abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn unitarity(t in 0.0f64..1e5, om in 0.0f64..0.02, dw in -0.02f64..0.02) {
            let p = RabiParams::new(om, dw).unwrap();
            let r = rabi_amplitudes(t, &p);
            prop_assert!((r.a.norm_sqr() + r.b.norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!((excited_population(t, &p) - r.b.norm_sqr()).abs() < 1e-12);
            prop_assert!(p.w >= p.omega && p.w >= dw.abs());
        }
    }

    proptest! {
        #[test]
        fn periodicity(t in 0.0f64..1e4, om in 1e-4f64..0.02, dw in -0.02f64..0.02) {
            let p = RabiParams::new(om, dw).unwrap();
            let period = 2.0 * PI / p.w;
            let r0 = rabi_amplitudes(t, &p);
            let r1 = rabi_amplitudes(t + period, &p);
            let ph = Complex64::from_polar(1.0, dw * PI / p.w);
            prop_assert!(close(r1.a, -r0.a * ph, 1e-8));
            prop_assert!(close(r1.b, -r0.b * ph.conj(), 1e-8));
            prop_assert!((excited_population(t + period, &p) - excited_population(t, &p)).abs() < 1e-9);
        }

        #[test]
        fn gap_scales_with_field(lambda in 0.1f64..10.0) {
            let atom = AtomModel::helium_cis_default();
            let pulse = PulseParams::new(0.02, atom.omega_ba(), Envelope::FlatTop, 1.0).unwrap();
            let (p, m) = dressed_kinetic_energies(&atom, &pulse);
            let (ps, ms) = dressed_kinetic_energies(&atom, &pulse.with_e0(0.02 * lambda));
            prop_assert!(((ps - ms) / (p - m) - lambda).abs() < 1e-9);
        }
    }
}
