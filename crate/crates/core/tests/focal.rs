use rabi_xuv::focal::{
    sample_intensity, volume_averaged_spectrum, AveragingOptions, BeamGeometry, BeamProfile, IntensitySampling,
    QuadratureSpec,
};
use rabi_xuv::ionization::{single_atom_spectrum, Selector, TwoPhotonOptions};
use rabi_xuv::model::{AtomModel, ChannelDipoles, PulseParams, SpectrumGrid};
use rabi_xuv::units::{ev_to_au, field_from_intensity};
use rabi_xuv::Error;

const I0: f64 = 2e13;

fn setup() -> (AtomModel, PulseParams, SpectrumGrid) {
    let atom = AtomModel::helium_cis_default();
    let pulse = PulseParams::flat_top_rabi_periods(&atom, field_from_intensity(I0).unwrap(), 0.0, 1.5).unwrap();
    let grid = SpectrumGrid::around_two_photon_line(&atom, ev_to_au(-0.3), ev_to_au(0.3), 121).unwrap();
    (atom, pulse, grid)
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn direct() -> AveragingOptions {
    AveragingOptions {
        sampling: IntensitySampling::Direct,
        ..Default::default()
    }
}

#[test]
fn uniform_beam_is_single_atom_times_volume() {
    let (atom, pulse, grid) = setup();
    let geom = BeamGeometry {
        profile: BeamProfile::Uniform,
        ..BeamGeometry::reference(I0)
    };
    let avg = volume_averaged_spectrum(
        &grid,
        pulse.duration,
        &atom,
        &pulse,
        &geom,
        Selector::CoherentTotal,
        &direct(),
    )
    .unwrap();
    let single = single_atom_spectrum(
        &grid,
        pulse.duration,
        &atom,
        &pulse,
        &TwoPhotonOptions::default(),
        Selector::CoherentTotal,
    )
    .unwrap();
    let expect: Vec<f64> = single.intensity().iter().map(|v| v * geom.volume()).collect();
    assert!(rel_l2(&avg.spectrum.intensity(), &expect) < 1e-12);
}

#[test]
fn thin_target_reduces_to_transverse_average() {
    let (atom, pulse, grid) = setup();
    let geom = BeamGeometry::new(I0, 10.2e-6, 1e6, 1e-9).unwrap();
    for sel in Selector::ALL {
        let avg = volume_averaged_spectrum(&grid, pulse.duration, &atom, &pulse, &geom, sel, &direct()).unwrap();
        // composite Simpson in ρ on [0, 5 w0]
        let n = 2000;
        let h = geom.rho_max() / n as f64;
        let mut acc = vec![0.0; grid.len()];
        for k in 0..=n {
            let rho = k as f64 * h;
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let e0 = field_from_intensity(I0 * (-2.0 * rho * rho / (geom.w0 * geom.w0)).exp()).unwrap();
            let s = single_atom_spectrum(
                &grid,
                pulse.duration,
                &atom,
                &pulse.with_e0(e0),
                &TwoPhotonOptions::default(),
                sel,
            )
            .unwrap()
            .intensity();
            for (a, v) in acc.iter_mut().zip(s) {
                *a += w * rho * v;
            }
        }
        let expect: Vec<f64> = acc
            .iter()
            .map(|v| 2.0 * std::f64::consts::PI * geom.length * v * h / 3.0)
            .collect();
        let err = rel_l2(&avg.spectrum.intensity(), &expect);
        assert!(err < 1e-6, "{sel:?}: {err:e}");
    }
}

#[test]
fn node_doubling_converges() {
    let (atom, pulse, grid) = setup();
    let geom = BeamGeometry::reference(I0);
    let opts = AveragingOptions::default();
    let base = volume_averaged_spectrum(
        &grid,
        pulse.duration,
        &atom,
        &pulse,
        &geom,
        Selector::CoherentTotal,
        &opts,
    )
    .unwrap();
    let fine = volume_averaged_spectrum(
        &grid,
        pulse.duration,
        &atom,
        &pulse,
        &geom,
        Selector::CoherentTotal,
        &AveragingOptions {
            quadrature: QuadratureSpec::Fixed { nz: 130, nrho: 258 },
            ..opts
        },
    )
    .unwrap();
    let change = rel_l2(&base.spectrum.intensity(), &fine.spectrum.intensity());
    assert!(change < 5e-3, "{change:e}");
    assert!(base.error_estimate < 5e-3);
    assert!(base.spectrum.intensity().iter().all(|&v| v >= 0.0));
}

#[test]
fn adaptive_mode_reports_failure() {
    let (atom, pulse, grid) = setup();
    let geom = BeamGeometry::reference(I0);
    let opts = AveragingOptions {
        quadrature: QuadratureSpec::Adaptive {
            nz: 2,
            nrho: 2,
            tol: 1e-12,
            max_doublings: 1,
        },
        ..Default::default()
    };
    let r = volume_averaged_spectrum(
        &grid,
        pulse.duration,
        &atom,
        &pulse,
        &geom,
        Selector::OnePhotonOnly,
        &opts,
    );
    assert!(matches!(r, Err(Error::Quadrature { .. })));
    let ok = AveragingOptions {
        quadrature: QuadratureSpec::Adaptive {
            nz: 16,
            nrho: 32,
            tol: 5e-3,
            max_doublings: 4,
        },
        ..Default::default()
    };
    let r = volume_averaged_spectrum(
        &grid,
        pulse.duration,
        &atom,
        &pulse,
        &geom,
        Selector::OnePhotonOnly,
        &ok,
    )
    .unwrap();
    assert!(r.error_estimate < 5e-3);
}

#[test]
fn signal_is_linear_in_continuum_strength() {
    let (atom, pulse, grid) = setup();
    let geom = BeamGeometry::reference(I0);
    let lambda: f64 = 3.7;
    let scaled = AtomModel {
        z_cont_from_b: ChannelDipoles {
            s: atom.z_cont_from_b.s * lambda.sqrt(),
            d: atom.z_cont_from_b.d * lambda.sqrt(),
        },
        z_cont_from_rho: ChannelDipoles {
            s: atom.z_cont_from_rho.s * lambda.sqrt(),
            d: atom.z_cont_from_rho.d * lambda.sqrt(),
        },
        ..atom
    };
    let opts = AveragingOptions {
        quadrature: QuadratureSpec::Fixed { nz: 17, nrho: 33 },
        ..Default::default()
    };
    let a = volume_averaged_spectrum(
        &grid,
        pulse.duration,
        &atom,
        &pulse,
        &geom,
        Selector::CoherentTotal,
        &opts,
    )
    .unwrap();
    let b = volume_averaged_spectrum(
        &grid,
        pulse.duration,
        &scaled,
        &pulse,
        &geom,
        Selector::CoherentTotal,
        &opts,
    )
    .unwrap();
    let expect: Vec<f64> = a.spectrum.intensity().iter().map(|v| v * lambda).collect();
    assert!(rel_l2(&b.spectrum.intensity(), &expect) < 1e-12);
}

#[test]
fn cache_is_exact_at_its_nodes_and_close_between() {
    let (atom, pulse, grid) = setup();
    let (points, floor) = (200usize, 1e-4);
    let cached = IntensitySampling::Cached { points, floor };
    let mut worst_node = 0.0f64;
    let mut worst_mid = 0.0f64;
    for k in [0usize, 1, 57, 123, 198, 199] {
        let frac = k as f64 / (points - 1) as f64;
        for (x, worst) in [
            (frac, &mut worst_node),
            (frac + 0.5 / (points - 1) as f64, &mut worst_mid),
        ] {
            if x > 1.0 {
                continue;
            }
            let i = I0 * floor.powf(1.0 - x);
            let c = sample_intensity(&grid, pulse.duration, &atom, &pulse, Selector::CoherentTotal, cached, i).unwrap();
            let d = sample_intensity(
                &grid,
                pulse.duration,
                &atom,
                &pulse,
                Selector::CoherentTotal,
                IntensitySampling::Direct,
                i,
            )
            .unwrap();
            for ch in 0..2 {
                *worst = worst.max(rel_l2(&c[ch], &d[ch]));
            }
        }
    }
    assert!(worst_node < 1e-10, "{worst_node:e}");
    assert!(worst_mid < 1e-3, "{worst_mid:e}");
}

#[test]
fn repeated_runs_are_bit_identical() {
    let (atom, pulse, grid) = setup();
    let geom = BeamGeometry::reference(I0);
    let opts = AveragingOptions {
        quadrature: QuadratureSpec::Fixed { nz: 17, nrho: 33 },
        ..Default::default()
    };
    let run = || {
        volume_averaged_spectrum(
            &grid,
            pulse.duration,
            &atom,
            &pulse,
            &geom,
            Selector::TwoPhotonOnly,
            &opts,
        )
        .unwrap()
        .spectrum
        .intensity()
    };
    assert_eq!(run(), run());
}
