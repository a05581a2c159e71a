//! Physical constants and unit conversions.
//!
//! Everything inside the crate is expressed in atomic units (e = ħ = mₑ = 1).
//! Electron-volts, milli-electron-volts, femtoseconds and W/cm² only show up
//! when reading configuration or writing results.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// eV per Hartree.
pub const HARTREE_IN_EV: f64 = 27.211386;

/// fs per atomic unit of time.
pub const ATOMIC_TIME_IN_FS: f64 = 0.02418884;

/// W/cm² corresponding to a field amplitude of one atomic unit.
pub const INTENSITY_CONVERSION: f64 = 3.51e16;

/// Unit tag attached to dipole lengths.
pub const BOHR_RADIUS_LABEL: &str = "a0";

/// The set of constants used for conversions at the I/O boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    pub hartree_in_ev: f64,
    pub atomic_time_in_fs: f64,
    pub bohr_radius_label: &'static str,
    pub intensity_conversion: f64,
}

impl PhysicalConstants {
    pub const fn new() -> Self {
        Self {
            hartree_in_ev: HARTREE_IN_EV,
            atomic_time_in_fs: ATOMIC_TIME_IN_FS,
            bohr_radius_label: BOHR_RADIUS_LABEL,
            intensity_conversion: INTENSITY_CONVERSION,
        }
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnergyUnit {
    #[serde(rename = "a.u.")]
    Hartree,
    #[serde(rename = "eV")]
    ElectronVolt,
    #[serde(rename = "meV")]
    MilliElectronVolt,
}

impl EnergyUnit {
    fn in_hartree(self) -> f64 {
        match self {
            EnergyUnit::Hartree => 1.0,
            EnergyUnit::ElectronVolt => 1.0 / HARTREE_IN_EV,
            EnergyUnit::MilliElectronVolt => 1e-3 / HARTREE_IN_EV,
        }
    }
}

impl FromStr for EnergyUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a.u." | "au" | "hartree" | "Eh" => Ok(EnergyUnit::Hartree),
            "eV" | "ev" => Ok(EnergyUnit::ElectronVolt),
            "meV" | "mev" => Ok(EnergyUnit::MilliElectronVolt),
            other => Err(Error::UnknownUnit(other.to_string())),
        }
    }
}

impl fmt::Display for EnergyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyUnit::Hartree => "a.u.",
            EnergyUnit::ElectronVolt => "eV",
            EnergyUnit::MilliElectronVolt => "meV",
        })
    }
}

/// Linear energy conversion between any two supported units.
pub fn convert_energy(value: f64, from: EnergyUnit, to: EnergyUnit) -> f64 {
    if from == to {
        return value;
    }
    value * from.in_hartree() / to.in_hartree()
}

/// String-keyed variant of [`convert_energy`], used by the config loader.
pub fn convert_energy_str(value: f64, from: &str, to: &str) -> Result<f64> {
    Ok(convert_energy(value, from.parse()?, to.parse()?))
}

#[inline]
pub fn ev_to_au(ev: f64) -> f64 {
    ev / HARTREE_IN_EV
}

#[inline]
pub fn au_to_ev(au: f64) -> f64 {
    au * HARTREE_IN_EV
}

#[inline]
pub fn mev_to_au(mev: f64) -> f64 {
    mev * 1e-3 / HARTREE_IN_EV
}

#[inline]
pub fn au_to_mev(au: f64) -> f64 {
    au * HARTREE_IN_EV * 1e3
}

#[inline]
pub fn fs_to_au(fs: f64) -> f64 {
    fs / ATOMIC_TIME_IN_FS
}

#[inline]
pub fn au_to_fs(au: f64) -> f64 {
    au * ATOMIC_TIME_IN_FS
}

/// Peak field amplitude (a.u.) for a peak intensity in W/cm².
pub fn field_from_intensity(intensity: f64) -> Result<f64> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(invalid(
            "intensity",
            format!("must be finite and non-negative, got {intensity}"),
        ));
    }
    Ok((intensity / INTENSITY_CONVERSION).sqrt())
}

/// Inverse of [`field_from_intensity`].
pub fn intensity_from_field(e0: f64) -> f64 {
    e0 * e0 * INTENSITY_CONVERSION
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hartree_is_the_defined_constant() {
        let ev = convert_energy(1.0, EnergyUnit::Hartree, EnergyUnit::ElectronVolt);
        assert!((ev - 27.211386).abs() < 1e-12);
    }

    #[test]
    fn transition_energy_in_ev() {
        let ev = convert_energy(0.887246, EnergyUnit::Hartree, EnergyUnit::ElectronVolt);
        assert!((ev - 24.1432).abs() < 5e-5, "{ev}");
    }

    #[test]
    fn eighty_mev_in_atomic_units() {
        let au = convert_energy(80.0, EnergyUnit::MilliElectronVolt, EnergyUnit::Hartree);
        assert!((au - 80.0 / 27211.386).abs() < 1e-15);
        assert!((au - 2.9399e-3).abs() < 1e-7);
        // Rabi period 2π/Ω in fs
        let period_fs = au_to_fs(2.0 * std::f64::consts::PI / au);
        assert!((period_fs - 52.0).abs() < 1.0, "{period_fs}");
    }

    #[test]
    fn unknown_unit_is_rejected() {
        assert_eq!(
            "furlong".parse::<EnergyUnit>(),
            Err(Error::UnknownUnit("furlong".into()))
        );
        assert!(convert_energy_str(1.0, "eV", "kcal").is_err());
        assert!((convert_energy_str(1000.0, "meV", "eV").unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn field_from_intensity_examples() {
        assert!((field_from_intensity(2e13).unwrap() - 0.023874).abs() < 1e-4);
        assert_eq!(field_from_intensity(0.0).unwrap(), 0.0);
        assert!((field_from_intensity(3.51e16).unwrap() - 1.0).abs() < 1e-15);
        assert!(field_from_intensity(-1.0).is_err());
        assert!(field_from_intensity(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn energy_round_trip(v in -1e3f64..1e3) {
            for (a, b) in [
                (EnergyUnit::ElectronVolt, EnergyUnit::Hartree),
                (EnergyUnit::MilliElectronVolt, EnergyUnit::Hartree),
                (EnergyUnit::MilliElectronVolt, EnergyUnit::ElectronVolt),
            ] {
                let back = convert_energy(convert_energy(v, a, b), b, a);
                prop_assert!((back - v).abs() <= 1e-12 * v.abs().max(1e-300));
            }
        }

        #[test]
        fn intensity_field_round_trip(i in 0.0f64..1e17) {
            let e0 = field_from_intensity(i).unwrap();
            let back = intensity_from_field(e0);
            prop_assert!((back - i).abs() <= 1e-12 * i.max(1e-300));
        }
    }
}
