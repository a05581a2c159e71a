use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rabi_xuv::ionization::Selector;
use rabi_xuv::model::{Envelope, PulseParams};
use rabi_xuv::oracle::{
    build_system, oracle_spectrum, Checkpoint, ContinuumGridSpec, EssentialStatesSystem, Pathways, PropagationResult,
    Propagator, TwoPhotonCoupling,
};
use rabi_xuv::rabi::{excited_population, RabiParams};
use rabi_xuv::units::{au_to_ev, au_to_fs, ev_to_au};
use serde::Serialize;

use super::{spectrum_rows, Context, SPECTRUM_HEADER};
use crate::config::{OracleConfig, RunConfig};
use crate::error::{model_ctx, CliError};
use crate::output::{complex_pairs, Artifacts};

pub const CHECKPOINT_NAME: &str = "oracle.ckpt";

#[derive(Serialize)]
struct ResultJson<'a> {
    coupling_mode: rabi_xuv::oracle::CouplingMode,
    selector: &'static str,
    dt_au: f64,
    steps: usize,
    resumed_at_step: usize,
    bound_labels: &'a [String],
    final_bound_amplitudes: Vec<[f64; 2]>,
    final_norm: f64,
    max_norm_drift: f64,
    ionized_probability: f64,
    /// Largest |P_b − closed form| over the recorded times (flat-top only).
    #[serde(skip_serializing_if = "Option::is_none")]
    max_closed_form_error: Option<f64>,
}

#[derive(Serialize)]
struct ContinuumJson {
    bin_energies_ev: Vec<f64>,
    d_eps_au: f64,
    amplitudes: BTreeMap<&'static str, Vec<[f64; 2]>>,
}

fn pathways(o: &OracleConfig) -> Pathways {
    let two_photon = match (&o.intermediates, o.selector) {
        (_, Selector::OnePhotonOnly) => TwoPhotonCoupling::Off,
        (Some(states), _) => TwoPhotonCoupling::Explicit(states.clone()),
        (None, _) => TwoPhotonCoupling::Reduced,
    };
    Pathways {
        one_photon: o.selector != Selector::TwoPhotonOnly,
        two_photon,
    }
}

fn write_checkpoint(dir: &Path, ckpt: &Checkpoint) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(CHECKPOINT_NAME);
    let tmp = dir.join(format!("{CHECKPOINT_NAME}.tmp"));
    fs::write(&tmp, ckpt.to_bytes()).map_err(|e| CliError::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, &path).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// Step to the end of the pulse, recording bound populations every `stride`
/// steps and saving a checkpoint every `every` steps.
fn drive(
    mut p: Propagator<'_>,
    nb: usize,
    stride: usize,
    every: Option<usize>,
    dir: &Path,
) -> Result<PropagationResult, CliError> {
    let mut times = Vec::new();
    let mut pops = Vec::new();
    let mut norms = Vec::new();
    let mut record = |p: &Propagator<'_>| {
        times.push(p.time());
        pops.push(p.state()[..nb].iter().map(|c| c.norm_sqr()).collect::<Vec<_>>());
        norms.push(p.norm_sqr());
    };
    record(&p);
    while !p.is_done() {
        p.advance();
        let k = p.steps_done();
        if k.is_multiple_of(stride) || p.is_done() {
            record(&p);
        }
        if let Some(every) = every {
            if k.is_multiple_of(every) || p.is_done() {
                write_checkpoint(dir, &p.checkpoint())?;
            }
        }
    }
    let mut result = p.run(1).map_err(model_ctx("oracle propagation"))?;
    result.times = times;
    result.bound_populations = pops;
    result.norm_history = norms;
    Ok(result)
}

pub(crate) fn run(cfg: &RunConfig, ctx: &Context, art: &mut Artifacts) -> Result<(), CliError> {
    let o = &cfg.oracle;
    let bad = |m: String| ctx.config_error(format!("oracle: {m}"));
    let pulse: PulseParams = ctx.pulse_at(ctx.detuning)?;
    if !(o.half_width_ev > 0.0) {
        return Err(bad(format!("half_width_ev must be > 0, got {}", o.half_width_ev)));
    }
    if o.observer_stride == 0 || o.checkpoint_every == Some(0) {
        return Err(bad("observer_stride and checkpoint_every must be >= 1".into()));
    }
    if o.intermediates.is_some() && o.selector == Selector::OnePhotonOnly {
        return Err(bad("intermediates have no effect with selector one_photon_only".into()));
    }
    let continuum = ContinuumGridSpec::around(ctx.atom.two_photon_line(), ev_to_au(o.half_width_ev), o.n_bins);
    let sys: EssentialStatesSystem =
        build_system(&ctx.atom, &continuum, o.coupling_mode, &pathways(o)).map_err(|e| bad(e.to_string()))?;
    let dt = o.dt(pulse.omega);
    let propagator = match &o.resume_from {
        None => Propagator::new(&sys, &pulse, dt).map_err(|e| bad(e.to_string()))?,
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| CliError::Input {
                path: path.clone(),
                message: e.to_string(),
            })?;
            let ckpt = Checkpoint::from_bytes(&bytes).map_err(|e| CliError::Input {
                path: path.clone(),
                message: e.to_string(),
            })?;
            Propagator::from_checkpoint(&sys, &pulse, dt, &ckpt).map_err(|e| CliError::Input {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
    };
    let (dt, steps, resumed_at) = (propagator.dt(), propagator.n_steps(), propagator.steps_done());

    let res = drive(
        propagator,
        sys.n_bound(),
        o.observer_stride,
        o.checkpoint_every,
        &ctx.out_dir,
    )?;

    let flat = pulse.envelope == Envelope::FlatTop;
    let rabi = RabiParams::from_pulse(&ctx.atom, &pulse);
    let b = res
        .bound_labels
        .iter()
        .position(|l| l == "b")
        .expect("level b is always present");
    let mut header = vec!["time_au".to_string(), "time_fs".to_string()];
    header.extend(res.bound_labels.iter().map(|l| format!("P_{l}")));
    header.push("norm".into());
    if flat {
        header.push("P_b_closed_form".into());
    }
    let mut closed_err = 0.0f64;
    let rows: Vec<Vec<f64>> = res
        .times
        .iter()
        .zip(&res.bound_populations)
        .zip(&res.norm_history)
        .map(|((&t, pop), &n)| {
            let mut r = vec![t, au_to_fs(t)];
            r.extend(pop);
            r.push(n);
            if flat {
                let pb = excited_population(t, &rabi);
                closed_err = closed_err.max((pop[b] - pb).abs());
                r.push(pb);
            }
            r
        })
        .collect();
    art.csv("oracle_populations.csv", header, rows)?;

    if sys.n_bins() > 0 {
        let s = oracle_spectrum(&res, &ctx.grid).map_err(model_ctx("oracle spectrum"))?;
        art.csv("oracle_spectrum.csv", SPECTRUM_HEADER, spectrum_rows(&s, &ctx.x_ev()))?;
        art.json_data(
            "oracle_continuum.json",
            &ContinuumJson {
                bin_energies_ev: res.bin_energies.iter().map(|&e| au_to_ev(e)).collect(),
                d_eps_au: res.d_eps,
                amplitudes: res
                    .continuum_amplitudes
                    .iter()
                    .map(|(ell, a)| (ell.label(), complex_pairs(a)))
                    .collect(),
            },
        )?;
    }
    let final_norm = *res.norm_history.last().expect("at least one record");
    art.summary(
        "oracle_result.json",
        &ResultJson {
            coupling_mode: o.coupling_mode,
            selector: o.selector.label(),
            dt_au: dt,
            steps,
            resumed_at_step: resumed_at,
            bound_labels: &res.bound_labels,
            final_bound_amplitudes: complex_pairs(&res.final_bound_amplitudes),
            final_norm,
            max_norm_drift: res.norm_history.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max),
            ionized_probability: res.ionized_probability(),
            max_closed_form_error: flat.then_some(closed_err),
        },
    )?;
    if ctx.emit_plots {
        let mut body = String::from("set xlabel 'time (fs)'\nset ylabel 'population'\nplot ");
        let cols: Vec<String> = (0..res.bound_labels.len())
            .map(|k| format!("'oracle_populations.csv' using 2:{} with lines", k + 3))
            .collect();
        body.push_str(&cols.join(", \\\n     "));
        if flat {
            let c = res.bound_labels.len() + 4;
            body.push_str(&format!(
                ", \\\n     'oracle_populations.csv' using 2:{c} with lines dashtype 2"
            ));
        }
        body.push_str("\npause -1\n");
        art.gnuplot("plot_oracle_populations.gp", &body);
    }
    Ok(())
}
