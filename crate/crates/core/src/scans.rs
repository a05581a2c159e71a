//! Parameter sweeps and the observables extracted from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ionization::{final_spectrum, Selector, TwoPhotonOptions};
use crate::model::{AtomModel, Envelope, PulseParams, Spectrum, SpectrumGrid};
use crate::rabi::RabiParams;
use crate::units::{au_to_ev, ev_to_au};

/// Pulse duration, either in resonant Rabi periods 2π/Ω at the template
/// field or in atomic units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationMode {
    RabiPeriods(f64),
    Absolute(f64),
}

/// Everything about a pulse except its detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTemplate {
    pub e0: f64,
    pub duration: DurationMode,
    #[serde(default = "flat_top")]
    pub envelope: Envelope,
    #[serde(default)]
    pub two_photon: TwoPhotonOptions,
}

fn flat_top() -> Envelope {
    Envelope::FlatTop
}

impl PulseTemplate {
    pub fn flat_top(e0: f64, duration: DurationMode) -> Self {
        Self {
            e0,
            duration,
            envelope: Envelope::FlatTop,
            two_photon: TwoPhotonOptions::default(),
        }
    }

    /// Resonant Rabi period 2π/Ω at the template field.
    pub fn rabi_period(&self, atom: &AtomModel) -> Result<f64> {
        let omega = (self.e0 * atom.z_ba).abs();
        if omega <= 0.0 {
            return Err(invalid("e0", "Rabi period undefined at zero field"));
        }
        Ok(2.0 * std::f64::consts::PI / omega)
    }

    pub fn duration_au(&self, atom: &AtomModel) -> Result<f64> {
        match self.duration {
            DurationMode::RabiPeriods(n) => Ok(n * self.rabi_period(atom)?),
            DurationMode::Absolute(t) => Ok(t),
        }
    }

    pub fn pulse(&self, atom: &AtomModel, detuning: f64) -> Result<PulseParams> {
        PulseParams::new(
            self.e0,
            atom.omega_ba() + detuning,
            self.envelope,
            self.duration_au(atom)?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub selector: Selector,
    pub e0: f64,
    pub duration: f64,
    pub detunings: Vec<f64>,
    pub atom: AtomModel,
}

/// Photon-energy × kinetic-energy intensity map. `intensity[i][j]` belongs to
/// `photon_energies[i]` and `kinetic_energies[j]`. Axes are in eV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult2D {
    pub photon_energies: Vec<f64>,
    pub kinetic_energies: Vec<f64>,
    pub intensity: Vec<Vec<f64>>,
    pub metadata: ScanMetadata,
}

/// One spectrum per detuning from an arbitrary column model.
pub fn detuning_scan_with<F>(
    atom: &AtomModel,
    template: &PulseTemplate,
    detunings: &[f64],
    grid: &SpectrumGrid,
    selector: Selector,
    column: F,
) -> Result<ScanResult2D>
where
    F: Fn(&PulseParams) -> Result<Vec<f64>> + Sync,
{
    if detunings.is_empty() {
        return Err(invalid("detunings", "must not be empty"));
    }
    let pulses = detunings
        .iter()
        .map(|&d| template.pulse(atom, d))
        .collect::<Result<Vec<_>>>()?;
    let intensity = pulses
        .par_iter()
        .map(|p| {
            let col = column(p)?;
            if col.len() != grid.len() {
                return Err(invalid("column", "length differs from grid"));
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult2D {
        photon_energies: pulses.iter().map(|p| au_to_ev(p.omega)).collect(),
        kinetic_energies: grid.energies().iter().map(|&e| au_to_ev(e)).collect(),
        intensity,
        metadata: ScanMetadata {
            selector,
            e0: template.e0,
            duration: template.duration_au(atom)?,
            detunings: detunings.to_vec(),
            atom: *atom,
        },
    })
}

/// Single-atom analytic spectra across detunings.
pub fn detuning_scan(
    atom: &AtomModel,
    template: &PulseTemplate,
    detunings: &[f64],
    grid: &SpectrumGrid,
    selector: Selector,
) -> Result<ScanResult2D> {
    detuning_scan_with(atom, template, detunings, grid, selector, |p| {
        Ok(final_spectrum(grid, atom, p, &template.two_photon, selector)?.intensity())
    })
}

/// Two dominant peaks of a spectrum, in eV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubletAnalysis {
    /// Lower then upper peak position.
    pub peak_positions: [f64; 2],
    pub peak_heights: [f64; 2],
    pub splitting: f64,
    /// (h₊ − h₋)/(h₊ + h₋), h₊ being the upper peak.
    pub asymmetry: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DoubletReport {
    Doublet(DoubletAnalysis),
    SinglePeak { position: f64, height: f64 },
    NoPeak,
}

impl DoubletReport {
    pub fn doublet(&self) -> Option<&DoubletAnalysis> {
        match self {
            DoubletReport::Doublet(d) => Some(d),
            _ => None,
        }
    }

    pub fn splitting(&self) -> Option<f64> {
        self.doublet().map(|d| d.splitting)
    }
}

/// Default noise floor relative to the global maximum.
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub position: f64,
    pub height: f64,
}

/// Interior local maxima above `floor × max`, refined by a parabola through
/// the log intensity of the three surrounding samples.
pub fn find_peaks(x: &[f64], y: &[f64], floor: f64) -> Vec<Peak> {
    let n = y.len().min(x.len());
    if n < 3 {
        return Vec::new();
    }
    let ymax = y[..n].iter().cloned().fold(0.0, f64::max);
    if !(ymax > 0.0) {
        return Vec::new();
    }
    let threshold = floor * ymax;
    let mut peaks = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > threshold {
            // a flat top counts once, at its first sample
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j < n - 1 {
                let (pos, h) = refine(x, y, i);
                peaks.push(Peak {
                    index: i,
                    position: pos,
                    height: h,
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn refine(x: &[f64], y: &[f64], i: usize) -> (f64, f64) {
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let use_log = y[i - 1] > 0.0 && y[i + 1] > 0.0;
    let f = |v: f64| if use_log { v.ln() } else { v };
    let (f0, f1, f2) = (f(y[i - 1]), f(y[i]), f(y[i + 1]));
    // parabola through three points in Newton form
    let d01 = (f1 - f0) / (x1 - x0);
    let d12 = (f2 - f1) / (x2 - x1);
    let c2 = (d12 - d01) / (x2 - x0);
    if !(c2 < 0.0) {
        return (x1, y[i]);
    }
    let c1 = d01 - c2 * (x0 + x1);
    let xp = (-c1 / (2.0 * c2)).clamp(x0, x2);
    let fp = f0 + d01 * (xp - x0) + c2 * (xp - x0) * (xp - x1);
    (xp, if use_log { fp.exp() } else { fp })
}

/// Two tallest local maxima; ties go to the lower energy.
pub fn analyze_doublet_xy(x: &[f64], y: &[f64], floor: f64) -> DoubletReport {
    doublet_from_peaks(find_peaks(x, y, floor))
}

fn doublet_from_peaks(mut peaks: Vec<Peak>) -> DoubletReport {
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.index.cmp(&b.index)));
    match peaks.len() {
        0 => DoubletReport::NoPeak,
        1 => DoubletReport::SinglePeak {
            position: peaks[0].position,
            height: peaks[0].height,
        },
        _ => {
            let (lo, hi) = if peaks[0].position <= peaks[1].position {
                (peaks[0], peaks[1])
            } else {
                (peaks[1], peaks[0])
            };
            DoubletReport::Doublet(DoubletAnalysis {
                peak_positions: [lo.position, hi.position],
                peak_heights: [lo.height, hi.height],
                splitting: hi.position - lo.position,
                asymmetry: (hi.height - lo.height) / (hi.height + lo.height),
            })
        }
    }
}

/// Height of each peak above the higher of its two bases, the bases being
/// the minima between the peak and the nearest higher sample on each side.
pub fn prominence(y: &[f64], index: usize) -> f64 {
    let h = y[index];
    let side = |it: &mut dyn Iterator<Item = usize>| -> f64 {
        let mut base = h;
        for j in it {
            if y[j] > h {
                break;
            }
            base = base.min(y[j]);
        }
        base
    };
    let left = side(&mut (0..index).rev());
    let right = side(&mut (index + 1..y.len()));
    h - left.max(right)
}

/// As [`analyze_doublet_xy`], keeping only maxima whose prominence exceeds
/// `min_prominence × max(y)`. Suited to noisy data such as deconvolved spectra.
pub fn analyze_doublet_prominent(x: &[f64], y: &[f64], min_prominence: f64) -> DoubletReport {
    let ymax = y.iter().copied().fold(0.0, f64::max);
    let keep: Vec<Peak> = find_peaks(x, y, 0.0)
        .into_iter()
        .filter(|p| prominence(y, p.index) > min_prominence * ymax)
        .collect();
    doublet_from_peaks(keep)
}

/// Doublet analysis of a spectrum's total intensity, positions in eV.
pub fn analyze_doublet(spectrum: &Spectrum) -> DoubletReport {
    analyze_doublet_with_floor(spectrum, DEFAULT_NOISE_FLOOR)
}

pub fn analyze_doublet_with_floor(spectrum: &Spectrum, floor: f64) -> DoubletReport {
    let x: Vec<f64> = spectrum.grid.energies().iter().map(|&e| au_to_ev(e)).collect();
    analyze_doublet_xy(&x, &spectrum.intensity(), floor)
}

/// Asymmetry of the final spectrum at one detuning.
pub fn asymmetry_at(
    atom: &AtomModel,
    template: &PulseTemplate,
    detuning: f64,
    grid: &SpectrumGrid,
    selector: Selector,
) -> Result<f64> {
    let pulse = template.pulse(atom, detuning)?;
    let s = final_spectrum(grid, atom, &pulse, &template.two_photon, selector)?;
    match analyze_doublet(&s) {
        DoubletReport::Doublet(d) => Ok(d.asymmetry),
        other => Err(Error::Analysis(format!(
            "no doublet at detuning {:.2} meV: {other:?}",
            au_to_ev(detuning) * 1e3
        ))),
    }
}

/// Asymmetries smaller than this are treated as exact symmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Root of the doublet asymmetry in detuning, found by bisection inside
/// `window` (a.u.) until the bracket is narrower than `tol`. If the doublet is
/// symmetric at both ends the asymmetry is taken to vanish throughout and the
/// first midpoint is returned.
pub fn find_symmetric_detuning(
    atom: &AtomModel,
    template: &PulseTemplate,
    window: (f64, f64),
    grid: &SpectrumGrid,
    selector: Selector,
    tol: f64,
) -> Result<f64> {
    bisect_asymmetry(|dw| asymmetry_at(atom, template, dw, grid, selector), window, tol)
}

/// Bisection for a zero of an asymmetry function of the detuning. Values
/// within [`SYMMETRY_TOLERANCE`] of zero count as roots; when both ends are
/// already symmetric the window centre is returned.
pub fn bisect_asymmetry<F>(mut asym: F, window: (f64, f64), tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = window;
    if !(hi > lo) || !(tol > 0.0) {
        return Err(invalid("search_window", "needs lo < hi and tol > 0"));
    }
    let zero = |a: f64| a.abs() <= SYMMETRY_TOLERANCE;
    let mut f_lo = asym(lo)?;
    let f_hi = asym(hi)?;
    match (zero(f_lo), zero(f_hi)) {
        (true, false) => return Ok(lo),
        (false, true) => return Ok(hi),
        (false, false) if f_lo.signum() == f_hi.signum() => return Err(Error::NoSignChange { lo, hi }),
        _ => {}
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = asym(mid)?;
        if zero(f_mid) {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Default bisection tolerance, 0.5 meV.
pub fn default_detuning_tolerance() -> f64 {
    ev_to_au(0.5e-3)
}

/// Spectra after truncating the flat-top pulse at each multiple of the
/// resonant Rabi period.
pub fn buildup_sequence(
    atom: &AtomModel,
    template: &PulseTemplate,
    detuning: f64,
    periods: &[f64],
    grid: &SpectrumGrid,
    selector: Selector,
) -> Result<Vec<Spectrum>> {
    let period = template.rabi_period(atom)?;
    periods
        .par_iter()
        .map(|&n| {
            if !(n > 0.0) {
                return Err(invalid("times", format!("must be > 0, got {n}")));
            }
            let mut t = *template;
            t.duration = DurationMode::Absolute(n * period);
            let pulse = t.pulse(atom, detuning)?;
            final_spectrum(grid, atom, &pulse, &template.two_photon, selector)
        })
        .collect()
}

/// Central minimum at δ_ε = 3Δω/2 compared with the maxima on either side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipReport {
    pub centre_intensity: f64,
    pub left_max: f64,
    pub right_max: f64,
    /// I_centre / min(left_max, right_max).
    pub ratio: f64,
}

impl DipReport {
    /// A dip is present when the centre lies below `threshold` × the lower flank maximum.
    pub fn present(&self, threshold: f64) -> bool {
        self.ratio < threshold
    }

    /// 1 − I_centre/min(flank maxima); zero or negative when the centre is
    /// not a minimum.
    pub fn contrast(&self) -> f64 {
        1.0 - self.ratio
    }
}

/// Default dip threshold: the centre must sit below 80% of the flanking maxima.
pub const DIP_THRESHOLD: f64 = 0.8;

/// Inspect the spectrum around δ_ε = 3Δω/2 within ±`half_width` (a.u.).
pub fn central_dip(spectrum: &Spectrum, atom: &AtomModel, pulse: &PulseParams, half_width: f64) -> Result<DipReport> {
    let x = spectrum.grid.energies();
    let y = spectrum.intensity();
    let centre = atom.two_photon_line() + 1.5 * pulse.detuning(atom);
    if centre <= x[0] || centre >= x[x.len() - 1] {
        return Err(invalid("grid", "does not contain the line centre"));
    }
    let k = x.partition_point(|&e| e < centre).max(1);
    let f = (centre - x[k - 1]) / (x[k] - x[k - 1]);
    let yc = y[k - 1] + f * (y[k] - y[k - 1]);
    let mut left = 0.0f64;
    let mut right = 0.0f64;
    for (&e, &v) in x.iter().zip(&y) {
        if e < centre && e >= centre - half_width {
            left = left.max(v);
        } else if e > centre && e <= centre + half_width {
            right = right.max(v);
        }
    }
    let flank = left.min(right);
    Ok(DipReport {
        centre_intensity: yc,
        left_max: left,
        right_max: right,
        ratio: if flank > 0.0 { yc / flank } else { f64::INFINITY },
    })
}

/// Branch positions extracted from one scan column (eV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub detuning: f64,
    pub lower: f64,
    pub upper: f64,
}

impl BranchPoint {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Follow both dressed branches through a detuning scan. Each branch takes
/// the local maximum nearest its predicted position 3Δω/2 ∓ W/2 above the
/// two-photon line; columns where both predictions land on the same maximum
/// are dropped.
pub fn track_branches(scan: &ScanResult2D, atom: &AtomModel) -> Vec<BranchPoint> {
    let m = &scan.metadata;
    let omega = (m.e0 * atom.z_ba).abs();
    let line = au_to_ev(atom.two_photon_line());
    let mut out = Vec::new();
    for (col, &dw) in scan.intensity.iter().zip(&m.detunings) {
        let r = RabiParams::new(omega, dw).expect("finite scan parameters");
        let peaks = find_peaks(&scan.kinetic_energies, col, DEFAULT_NOISE_FLOOR);
        if peaks.len() < 2 {
            continue;
        }
        let nearest = |target: f64| {
            peaks
                .iter()
                .min_by(|a, b| (a.position - target).abs().total_cmp(&(b.position - target).abs()))
                .copied()
                .expect("nonempty")
        };
        let c = line + au_to_ev(1.5 * dw);
        let lo = nearest(c - au_to_ev(0.5 * r.w));
        let hi = nearest(c + au_to_ev(0.5 * r.w));
        if lo.index == hi.index {
            continue;
        }
        out.push(BranchPoint {
            detuning: au_to_ev(dw),
            lower: lo.position,
            upper: hi.position,
        });
    }
    out
}

/// Smallest branch gap and where it occurs (eV, eV).
pub fn minimum_gap(branches: &[BranchPoint]) -> Option<(f64, f64)> {
    branches
        .iter()
        .min_by(|a, b| a.gap().total_cmp(&b.gap()))
        .map(|b| (b.gap(), b.detuning))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{field_from_intensity, mev_to_au};

    fn gaussian_pair(centre: f64, sep: f64, sigma: f64, h: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..2001).map(|i| -0.5 + 0.0005 * i as f64).collect();
        let y = x
            .iter()
            .map(|&e| {
                let a = (e - centre + sep / 2.0) / sigma;
                let b = (e - centre - sep / 2.0) / sigma;
                h.0 * (-0.5 * a * a).exp() + h.1 * (-0.5 * b * b).exp()
            })
            .collect();
        (x, y)
    }

    #[test]
    fn synthetic_doublet_splitting() {
        let (x, y) = gaussian_pair(0.0, 0.08, 0.015, (1.0, 1.0));
        let d = *analyze_doublet_xy(&x, &y, DEFAULT_NOISE_FLOOR).doublet().unwrap();
        assert!((d.splitting - 0.080).abs() < 0.5e-3, "{}", d.splitting);
        assert!(d.asymmetry.abs() < 1e-9);
    }

    #[test]
    fn asymmetry_sign_follows_upper_peak() {
        let (x, y) = gaussian_pair(0.0, 0.1, 0.015, (1.0, 3.0));
        let d = *analyze_doublet_xy(&x, &y, DEFAULT_NOISE_FLOOR).doublet().unwrap();
        assert!((d.asymmetry - 0.5).abs() < 1e-3);
        assert!(d.peak_positions[0] < d.peak_positions[1]);
    }

    #[test]
    fn single_and_empty_reports() {
        let x: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (-(v - 50.0f64).powi(2) / 50.0).exp()).collect();
        match analyze_doublet_xy(&x, &y, DEFAULT_NOISE_FLOOR) {
            DoubletReport::SinglePeak { position, .. } => assert!((position - 50.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert_eq!(analyze_doublet_xy(&x, &vec![0.0; 101], 1e-4), DoubletReport::NoPeak);
    }

    #[test]
    fn noise_floor_suppresses_small_lobes() {
        let x: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let mut y: Vec<f64> = x.iter().map(|v| (-(v - 50.0f64).powi(2) / 50.0).exp()).collect();
        y[10] = 1e-6;
        assert!(matches!(
            analyze_doublet_xy(&x, &y, DEFAULT_NOISE_FLOOR),
            DoubletReport::SinglePeak { .. }
        ));
        assert!(analyze_doublet_xy(&x, &y, 1e-8).doublet().is_some());
    }

    #[test]
    fn prominence_ignores_ripple() {
        let (x, mut y) = gaussian_pair(0.2, 0.08, 0.01, (1.0, 0.8));
        // small ripple riding on both lobes
        for (i, v) in y.iter_mut().enumerate() {
            *v += 0.02 * ((i % 3) as f64);
        }
        let d = *analyze_doublet_prominent(&x, &y, 0.05).doublet().unwrap();
        assert!((d.splitting - 0.08).abs() < 0.004, "{d:?}");
        assert!((prominence(&[0.0, 1.0, 0.2, 2.0, 0.0], 1) - 0.8).abs() < 1e-12);
        assert!((prominence(&[0.0, 1.0, 0.2, 2.0, 0.0], 3) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_lower_energy() {
        let x: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let y = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.5, 0.0];
        let d = *analyze_doublet_xy(&x, &y, 1e-4).doublet().unwrap();
        assert_eq!(d.peak_positions, [1.0, 3.0]);
    }

    fn cis_template(periods: f64) -> (AtomModel, PulseTemplate) {
        let atom = AtomModel::helium_cis_default();
        let e0 = field_from_intensity(2e13).unwrap();
        (atom, PulseTemplate::flat_top(e0, DurationMode::RabiPeriods(periods)))
    }

    #[test]
    fn one_photon_asymmetry_is_odd_in_detuning() {
        let (atom, t) = cis_template(1.5);
        let grid = SpectrumGrid::default_for(&atom);
        for k in 1..=10 {
            let d = mev_to_au(10.0 * k as f64);
            let p = asymmetry_at(&atom, &t, d, &grid, Selector::OnePhotonOnly).unwrap();
            let m = asymmetry_at(&atom, &t, -d, &grid, Selector::OnePhotonOnly).unwrap();
            assert!((p + m).abs() < 1e-9);
        }
    }

    #[test]
    fn one_photon_resonant_doublet_is_symmetric() {
        let (atom, t) = cis_template(3.0);
        let grid = SpectrumGrid::default_for(&atom);
        let a = asymmetry_at(&atom, &t, 0.0, &grid, Selector::OnePhotonOnly).unwrap();
        assert!(a.abs() < 1e-6, "{a}");
    }

    #[test]
    fn symmetric_detuning_for_pure_pathways() {
        let (atom, t) = cis_template(1.5);
        let grid = SpectrumGrid::default_for(&atom);
        let w = (mev_to_au(-40.0), mev_to_au(40.0));
        for sel in [Selector::OnePhotonOnly, Selector::TwoPhotonOnly] {
            let d = find_symmetric_detuning(&atom, &t, w, &grid, sel, default_detuning_tolerance()).unwrap();
            assert!(d.abs() <= mev_to_au(0.5), "{sel:?}: {}", d / mev_to_au(1.0));
        }
    }

    #[test]
    fn no_sign_change_is_reported() {
        let (atom, t) = cis_template(1.5);
        let grid = SpectrumGrid::default_for(&atom);
        let err = find_symmetric_detuning(
            &atom,
            &t,
            (mev_to_au(5.0), mev_to_au(30.0)),
            &grid,
            Selector::TwoPhotonOnly,
            default_detuning_tolerance(),
        );
        assert!(matches!(err, Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn zero_field_scan_follows_two_photon_line() {
        let atom = AtomModel::helium_cis_default();
        let grid = SpectrumGrid::around_two_photon_line(&atom, -0.02, 0.02, 801).unwrap();
        let t = PulseTemplate::flat_top(1e-6, DurationMode::Absolute(4000.0));
        let dets: Vec<f64> = (-3..=3).map(|k| mev_to_au(30.0 * k as f64)).collect();
        let scan = detuning_scan(&atom, &t, &dets, &grid, Selector::TwoPhotonOnly).unwrap();
        assert_eq!(scan.intensity.len(), dets.len());
        for (col, &dw) in scan.intensity.iter().zip(&dets) {
            let (i, _) = col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            let line = au_to_ev(atom.two_photon_line() + 2.0 * dw);
            let step = scan.kinetic_energies[1] - scan.kinetic_energies[0];
            assert!((scan.kinetic_energies[i] - line).abs() <= step);
        }
    }

    #[test]
    fn empty_detunings_rejected() {
        let (atom, t) = cis_template(1.5);
        let grid = SpectrumGrid::default_for(&atom);
        assert!(detuning_scan(&atom, &t, &[], &grid, Selector::CoherentTotal).is_err());
    }
}
