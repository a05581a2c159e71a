use rabi_xuv::ionization::{final_spectrum, Selector, TwoPhotonOptions};
use rabi_xuv::model::{AtomModel, PulseParams, SpectrumGrid};
use rabi_xuv::rabi::{dressed_kinetic_energies, RabiParams};
use rabi_xuv::scans::{
    analyze_doublet, detuning_scan, find_peaks, minimum_gap, track_branches, DurationMode, PulseTemplate,
    DEFAULT_NOISE_FLOOR,
};
use rabi_xuv::units::{au_to_ev, ev_to_au, field_from_intensity, mev_to_au};

fn setup() -> (AtomModel, f64, SpectrumGrid) {
    let atom = AtomModel::helium_cis_default();
    let e0 = field_from_intensity(2e13).unwrap();
    let grid = SpectrumGrid::around_two_photon_line(&atom, ev_to_au(-0.6), ev_to_au(0.6), 2401).unwrap();
    (atom, e0, grid)
}

#[test]
fn splitting_follows_generalized_rabi_frequency_for_long_pulses() {
    let (atom, e0, grid) = setup();
    let omega = e0 * atom.z_ba;
    for sel in [Selector::OnePhotonOnly, Selector::CoherentTotal] {
        for k in -10..=10 {
            let dw = omega * k as f64 / 10.0;
            let p = PulseParams::flat_top_rabi_periods(&atom, e0, dw, 5.0).unwrap();
            let w = au_to_ev(RabiParams::from_pulse(&atom, &p).w);
            let s = final_spectrum(&grid, &atom, &p, &TwoPhotonOptions::default(), sel).unwrap();
            let split = analyze_doublet(&s).splitting().unwrap();
            assert!((split / w - 1.0).abs() < 0.05, "{sel:?} Δω = {k}/10 Ω: {split} vs {w}");
        }
    }
}

#[test]
fn coherent_scan_shows_avoided_crossing() {
    let (atom, e0, grid) = setup();
    let omega = au_to_ev(e0 * atom.z_ba);
    let template = PulseTemplate::flat_top(e0, DurationMode::RabiPeriods(1.5));
    let detunings: Vec<f64> = (-30..=30).map(|k| mev_to_au(5.0 * k as f64)).collect();
    let scan = detuning_scan(&atom, &template, &detunings, &grid, Selector::CoherentTotal).unwrap();
    assert_eq!(scan.intensity.len(), detunings.len());
    assert!(scan
        .intensity
        .iter()
        .all(|c| c.len() == grid.len() && c.iter().all(|&v| v >= 0.0)));
    let branches = track_branches(&scan, &atom);
    let (gap, _) = minimum_gap(&branches).unwrap();
    assert!(gap >= 0.9 * omega && gap <= 1.1 * omega, "gap {gap} vs Ω {omega}");
}

#[test]
fn long_pulse_branches_track_dressed_states() {
    let (atom, e0, grid) = setup();
    let template = PulseTemplate::flat_top(e0, DurationMode::RabiPeriods(5.0));
    let detunings: Vec<f64> = (-15..=15).map(|k| mev_to_au(10.0 * k as f64)).collect();
    let scan = detuning_scan(&atom, &template, &detunings, &grid, Selector::CoherentTotal).unwrap();
    let mut worst = 0.0f64;
    for b in track_branches(&scan, &atom) {
        let p = template.pulse(&atom, ev_to_au(b.detuning)).unwrap();
        let (hi, lo) = dressed_kinetic_energies(&atom, &p);
        worst = worst
            .max((b.upper - au_to_ev(hi)).abs())
            .max((b.lower - au_to_ev(lo)).abs());
    }
    assert!(worst < 0.005, "{worst}");
}

#[test]
fn far_red_detuning_leaves_one_dominant_branch() {
    let (atom, e0, _) = setup();
    let grid = SpectrumGrid::around_two_photon_line(&atom, ev_to_au(-1.2), ev_to_au(0.6), 3601).unwrap();
    let dw = mev_to_au(-350.0);
    let p = PulseParams::flat_top_rabi_periods(&atom, e0, dw, 1.5).unwrap();
    let s = final_spectrum(&grid, &atom, &p, &TwoPhotonOptions::default(), Selector::CoherentTotal).unwrap();
    let x: Vec<f64> = grid.energies().iter().map(|&e| au_to_ev(e)).collect();
    let mut peaks = find_peaks(&x, &s.intensity(), DEFAULT_NOISE_FLOOR);
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height));
    let line = au_to_ev(2.0 * p.omega + atom.eps_a);
    assert!((peaks[0].position - line).abs() < 0.01, "{:?} vs {line}", peaks[0]);
    // everything else, including the |b⟩ branch, is far weaker
    assert!(peaks[1].height < 0.1 * peaks[0].height, "{peaks:?}");
}

#[test]
fn scan_columns_do_not_depend_on_order() {
    let (atom, e0, grid) = setup();
    let template = PulseTemplate::flat_top(e0, DurationMode::RabiPeriods(1.5));
    let d: Vec<f64> = [-0.004, 0.0, 0.002, 0.003].to_vec();
    let mut r = d.clone();
    r.reverse();
    let a = detuning_scan(&atom, &template, &d, &grid, Selector::TwoPhotonOnly).unwrap();
    let b = detuning_scan(&atom, &template, &r, &grid, Selector::TwoPhotonOnly).unwrap();
    for (i, col) in a.intensity.iter().enumerate() {
        assert_eq!(col, &b.intensity[d.len() - 1 - i]);
    }
    let fixed = PulseTemplate::flat_top(e0, DurationMode::Absolute(1234.5));
    let p = fixed.pulse(&atom, 0.002).unwrap();
    assert_eq!(p.duration, 1234.5);
}
