//! Focal-volume averaging of single-atom spectra over a Gaussian focus and
//! a box-shaped gas target.
//!
//! S(ε) = 2π ∫ dz ∫₀^ρmax ρ dρ |c(ε, I(ρ, z))|². The radial integral is
//! carried out in s = ρ², which absorbs the ρ weight exactly.

use std::collections::BTreeMap;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ionization::{single_atom_spectrum, Selector, TwoPhotonOptions};
use crate::model::{AtomModel, ChannelData, PartialWave, PulseParams, Spectrum, SpectrumGrid};
use crate::units::{field_from_intensity, intensity_from_field};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamProfile {
    #[default]
    Gaussian,
    /// Constant intensity I0 over the whole integration volume.
    Uniform,
}

/// Focus and target geometry. Lengths in metres, intensity in W/cm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    pub i0: f64,
    pub w0: f64,
    pub z_r: f64,
    pub length: f64,
    pub rho_max_in_waists: f64,
    #[serde(default)]
    pub profile: BeamProfile,
}

impl BeamGeometry {
    pub fn new(i0: f64, w0: f64, z_r: f64, length: f64) -> Result<Self> {
        let g = Self {
            i0,
            w0,
            z_r,
            length,
            rho_max_in_waists: 5.0,
            profile: BeamProfile::Gaussian,
        };
        g.validate()?;
        Ok(g)
    }

    /// w0 = 10.2 μm, zR = 6.3 mm, L = 2 mm.
    pub fn reference(i0: f64) -> Self {
        Self::new(i0, 10.2e-6, 6.3e-3, 2e-3).expect("reference geometry is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("i0", self.i0),
            ("w0", self.w0),
            ("z_r", self.z_r),
            ("length", self.length),
            ("rho_max_in_waists", self.rho_max_in_waists),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// w(z) = w0 √(1 + (z/zR)²).
    pub fn waist(&self, z: f64) -> f64 {
        match self.profile {
            BeamProfile::Gaussian => self.w0 * (1.0 + (z / self.z_r).powi(2)).sqrt(),
            BeamProfile::Uniform => self.w0,
        }
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max_in_waists * self.w0
    }

    /// Integration volume π ρmax² L.
    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * self.rho_max().powi(2) * self.length
    }
}

/// I(ρ, z) = I0 (w0/w(z))² exp(−2ρ²/w(z)²).
pub fn beam_intensity(rho: f64, z: f64, geom: &BeamGeometry) -> f64 {
    match geom.profile {
        BeamProfile::Uniform => geom.i0,
        BeamProfile::Gaussian => {
            let w = geom.waist(z);
            geom.i0 * (geom.w0 / w).powi(2) * (-2.0 * rho * rho / (w * w)).exp()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureSpec {
    /// Tensor-product Gauss–Legendre with the given node counts.
    Fixed { nz: usize, nrho: usize },
    /// Start from the given counts and double both until the relative L2
    /// change drops below `tol`.
    Adaptive {
        nz: usize,
        nrho: usize,
        tol: f64,
        max_doublings: usize,
    },
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::Fixed { nz: 65, nrho: 129 }
    }
}

/// How |c(ε, I)|² is obtained at each node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensitySampling {
    /// Evaluate the single-atom model at every node.
    Direct,
    /// Interpolate from `points` log-spaced intensities in [floor·I0, I0];
    /// nodes below the floor are evaluated directly.
    Cached { points: usize, floor: f64 },
}

impl Default for IntensitySampling {
    fn default() -> Self {
        IntensitySampling::Cached {
            points: 200,
            floor: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedSpectrum {
    pub spectrum: Spectrum,
    /// Relative L2 difference to the rule with half the nodes (fixed) or to
    /// the previous refinement (adaptive).
    pub error_estimate: f64,
    pub nz: usize,
    pub nrho: usize,
}

/// Per-channel |c|² at one intensity, ordered as `PartialWave::ALL`.
type ChannelIntensities = [Vec<f64>; 2];

struct SingleAtom<'a> {
    grid: &'a SpectrumGrid,
    t: f64,
    atom: &'a AtomModel,
    pulse: &'a PulseParams,
    opts: &'a TwoPhotonOptions,
    selector: Selector,
}

impl SingleAtom<'_> {
    fn eval(&self, intensity: f64) -> Result<ChannelIntensities> {
        let e0 = field_from_intensity(intensity)?;
        let s = single_atom_spectrum(
            self.grid,
            self.t,
            self.atom,
            &self.pulse.with_e0(e0),
            self.opts,
            self.selector,
        )?;
        let mut out: ChannelIntensities = [Vec::new(), Vec::new()];
        for (k, ell) in PartialWave::ALL.iter().enumerate() {
            out[k] = s.channel_intensity(*ell).unwrap_or_else(|| vec![0.0; self.grid.len()]);
        }
        Ok(out)
    }
}

/// Monotone piecewise-cubic interpolation in ln I of per-channel spectra.
pub struct IntensityCache {
    ln_lo: f64,
    step: f64,
    intensities: Vec<f64>,
    values: Vec<ChannelIntensities>,
    slopes: Vec<ChannelIntensities>,
}

impl IntensityCache {
    fn build(model: &SingleAtom<'_>, i_max: f64, points: usize, floor: f64) -> Result<Self> {
        if points < 2 || !(floor > 0.0 && floor < 1.0) {
            return Err(invalid("cache", "needs >= 2 points and 0 < floor < 1"));
        }
        let ln_lo = (floor * i_max).ln();
        let step = (i_max.ln() - ln_lo) / (points - 1) as f64;
        let intensities: Vec<f64> = (0..points)
            .map(|k| {
                if k == points - 1 {
                    i_max
                } else {
                    (ln_lo + step * k as f64).exp()
                }
            })
            .collect();
        let values = intensities
            .par_iter()
            .map(|&i| model.eval(i))
            .collect::<Result<Vec<_>>>()?;
        let n = model.grid.len();
        let mut slopes: Vec<ChannelIntensities> = (0..points).map(|_| [vec![0.0; n], vec![0.0; n]]).collect();
        let mut column = vec![0.0; points];
        for ch in 0..2 {
            for j in 0..n {
                for k in 0..points {
                    column[k] = values[k][ch][j];
                }
                let d = pchip_slopes(&column, step);
                for k in 0..points {
                    slopes[k][ch][j] = d[k];
                }
            }
        }
        Ok(Self {
            ln_lo,
            step,
            intensities,
            values,
            slopes,
        })
    }

    pub fn lowest(&self) -> f64 {
        self.intensities[0]
    }

    /// Interpolated per-channel |c|² at `intensity` inside the cached range.
    fn interpolate(&self, intensity: f64) -> ChannelIntensities {
        let last = self.intensities.len() - 1;
        let x = ((intensity.ln() - self.ln_lo) / self.step).clamp(0.0, last as f64);
        let k = (x.floor() as usize).min(last - 1);
        let u = x - k as f64;
        let (h00, h10, h01, h11) = hermite(u);
        let h = self.step;
        let mut out: ChannelIntensities = [Vec::new(), Vec::new()];
        for ch in 0..2 {
            let (y0, y1) = (&self.values[k][ch], &self.values[k + 1][ch]);
            let (d0, d1) = (&self.slopes[k][ch], &self.slopes[k + 1][ch]);
            out[ch] = (0..y0.len())
                .map(|j| h00 * y0[j] + h10 * h * d0[j] + h01 * y1[j] + h11 * h * d1[j])
                .collect();
        }
        out
    }
}

fn hermite(u: f64) -> (f64, f64, f64, f64) {
    let u2 = u * u;
    let u3 = u2 * u;
    (
        2.0 * u3 - 3.0 * u2 + 1.0,
        u3 - 2.0 * u2 + u,
        -2.0 * u3 + 3.0 * u2,
        u3 - u2,
    )
}

/// Fritsch–Carlson slopes on a uniform grid with spacing `h`.
fn pchip_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let delta: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        d[k] = if a * b <= 0.0 { 0.0 } else { 2.0 * a * b / (a + b) };
    }
    let end = |d0: f64, d1: f64| {
        let s = (3.0 * d0 - d1) / 2.0;
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(delta[0], delta[1]);
    d[n - 1] = end(delta[n - 2], delta[n - 3]);
    d
}

struct Sampler<'a> {
    model: SingleAtom<'a>,
    cache: Option<IntensityCache>,
}

impl Sampler<'_> {
    fn at(&self, intensity: f64) -> Result<ChannelIntensities> {
        match &self.cache {
            Some(c) if intensity >= c.lowest() => Ok(c.interpolate(intensity)),
            _ => self.model.eval(intensity),
        }
    }
}

fn gl_nodes(n: usize, a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
    let rule = GaussLegendre::new(n).map_err(|e| invalid("quadrature", e.to_string()))?;
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut pairs: Vec<(f64, f64)> = rule
        .into_node_weight_pairs()
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(pairs)
}

fn integrate(sampler: &Sampler<'_>, geom: &BeamGeometry, nz: usize, nrho: usize) -> Result<ChannelIntensities> {
    if nz < 2 || nrho < 2 {
        return Err(invalid("quadrature", "node counts must be >= 2"));
    }
    let zs = gl_nodes(nz, -0.5 * geom.length, 0.5 * geom.length)?;
    let ss = gl_nodes(nrho, 0.0, geom.rho_max().powi(2))?;
    let n = sampler.model.grid.len();
    // one partial sum per z node, reduced in node order afterwards
    let slabs = zs
        .par_iter()
        .map(|&(z, wz)| {
            let mut acc: ChannelIntensities = [vec![0.0; n], vec![0.0; n]];
            for &(s, ws) in &ss {
                let i = beam_intensity(s.sqrt(), z, geom);
                let c = sampler.at(i)?;
                // 2π ∫ρ dρ = π ∫ ds
                let w = std::f64::consts::PI * wz * ws;
                for ch in 0..2 {
                    for (a, v) in acc[ch].iter_mut().zip(&c[ch]) {
                        *a += w * v;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total: ChannelIntensities = [vec![0.0; n], vec![0.0; n]];
    for slab in &slabs {
        for ch in 0..2 {
            for (t, v) in total[ch].iter_mut().zip(&slab[ch]) {
                *t += v;
            }
        }
    }
    Ok(total)
}

fn relative_l2(a: &ChannelIntensities, b: &ChannelIntensities) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ch in 0..2 {
        for (x, y) in a[ch].iter().zip(&b[ch]) {
            num += (x - y) * (x - y);
            den += x * x;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

fn to_spectrum(grid: &SpectrumGrid, c: ChannelIntensities) -> Result<Spectrum> {
    let mut channels = BTreeMap::new();
    for (ell, v) in PartialWave::ALL.into_iter().zip(c) {
        channels.insert(
            ell,
            ChannelData::Intensities(v.into_iter().map(|x| x.max(0.0)).collect()),
        );
    }
    Spectrum::new(grid.clone(), channels)
}

/// Options for [`volume_averaged_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AveragingOptions {
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub sampling: IntensitySampling,
    #[serde(default)]
    pub two_photon: TwoPhotonOptions,
}

/// Spectrum at time `t_spec` integrated over the focal volume. The pulse
/// carries the peak field; each node rescales E0 to its local intensity with
/// the duration held fixed.
pub fn volume_averaged_spectrum(
    grid: &SpectrumGrid,
    t_spec: f64,
    atom: &AtomModel,
    pulse_at_i0: &PulseParams,
    geom: &BeamGeometry,
    selector: Selector,
    opts: &AveragingOptions,
) -> Result<AveragedSpectrum> {
    geom.validate()?;
    let i_peak = intensity_from_field(pulse_at_i0.e0);
    if (i_peak - geom.i0).abs() > 1e-9 * geom.i0 {
        return Err(invalid(
            "pulse_at_i0",
            format!("field corresponds to {i_peak:e} W/cm², geometry has {:e}", geom.i0),
        ));
    }
    let model = SingleAtom {
        grid,
        t: t_spec,
        atom,
        pulse: pulse_at_i0,
        opts: &opts.two_photon,
        selector,
    };
    // fail early on envelope or time errors
    model.eval(geom.i0)?;
    let cache = match opts.sampling {
        IntensitySampling::Direct => None,
        IntensitySampling::Cached { points, floor } => Some(IntensityCache::build(&model, geom.i0, points, floor)?),
    };
    let sampler = Sampler { model, cache };

    match opts.quadrature {
        QuadratureSpec::Fixed { nz, nrho } => {
            let full = integrate(&sampler, geom, nz, nrho)?;
            let half = integrate(&sampler, geom, (nz / 2).max(2), (nrho / 2).max(2))?;
            let error_estimate = relative_l2(&full, &half);
            Ok(AveragedSpectrum {
                spectrum: to_spectrum(grid, full)?,
                error_estimate,
                nz,
                nrho,
            })
        }
        QuadratureSpec::Adaptive {
            nz,
            nrho,
            tol,
            max_doublings,
        } => {
            let (mut nz, mut nrho) = (nz.max(2), nrho.max(2));
            let mut prev = integrate(&sampler, geom, nz, nrho)?;
            let mut change = f64::INFINITY;
            for _ in 0..max_doublings {
                nz *= 2;
                nrho *= 2;
                let next = integrate(&sampler, geom, nz, nrho)?;
                change = relative_l2(&next, &prev);
                prev = next;
                if change < tol {
                    return Ok(AveragedSpectrum {
                        spectrum: to_spectrum(grid, prev)?,
                        error_estimate: change,
                        nz,
                        nrho,
                    });
                }
            }
            Err(Error::Quadrature { change, tol })
        }
    }
}

/// Per-channel |c(ε, I)|² at one intensity, through the cache when enabled.
/// Exposed for checking the interpolation against direct evaluation.
pub fn sample_intensity(
    grid: &SpectrumGrid,
    t_spec: f64,
    atom: &AtomModel,
    pulse_at_i0: &PulseParams,
    selector: Selector,
    sampling: IntensitySampling,
    intensity: f64,
) -> Result<Vec<Vec<f64>>> {
    let i0 = intensity_from_field(pulse_at_i0.e0);
    let opts = TwoPhotonOptions::default();
    let model = SingleAtom {
        grid,
        t: t_spec,
        atom,
        pulse: pulse_at_i0,
        opts: &opts,
        selector,
    };
    let cache = match sampling {
        IntensitySampling::Direct => None,
        IntensitySampling::Cached { points, floor } => Some(IntensityCache::build(&model, i0, points, floor)?),
    };
    let [s, d] = Sampler { model, cache }.at(intensity)?;
    Ok(vec![s, d])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::field_from_intensity;

    #[test]
    fn beam_intensity_examples() {
        let g = BeamGeometry::reference(2e13);
        assert_eq!(beam_intensity(0.0, 0.0, &g), 2e13);
        assert!((beam_intensity(0.0, g.z_r, &g) / 1e13 - 1.0).abs() < 1e-12);
        let r = g.w0 * (std::f64::consts::LN_2 / 2.0).sqrt();
        assert!((beam_intensity(r, 0.0, &g) / 1e13 - 1.0).abs() < 1e-12);
        assert!(g.waist(1e-3) >= g.w0);
    }

    #[test]
    fn geometry_validation() {
        assert!(BeamGeometry::new(1e13, 0.0, 1.0, 1.0).is_err());
        assert!(BeamGeometry::new(-1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn pchip_is_exact_on_lines_and_monotone() {
        let y: Vec<f64> = (0..10).map(|k| 3.0 * k as f64 + 1.0).collect();
        assert!(pchip_slopes(&y, 1.0).iter().all(|d| (d - 3.0).abs() < 1e-12));
        let y = [0.0, 0.0, 1.0, 1.0, 1.0];
        let d = pchip_slopes(&y, 1.0);
        assert_eq!(d[1], 0.0);
        assert_eq!(d[3], 0.0);
    }

    #[test]
    fn gl_nodes_integrate_polynomials() {
        let nodes = gl_nodes(5, 0.0, 2.0).unwrap();
        let integral: f64 = nodes.iter().map(|(x, w)| w * x.powi(4)).sum();
        assert!((integral - 32.0 / 5.0).abs() < 1e-12);
        assert!(nodes.windows(2).all(|p| p[0].0 < p[1].0));
    }

    #[test]
    fn mismatched_peak_intensity_is_rejected() {
        let atom = AtomModel::helium_cis_default();
        let e0 = field_from_intensity(1e13).unwrap();
        let p = PulseParams::flat_top_rabi_periods(&atom, e0, 0.0, 1.5).unwrap();
        let grid = SpectrumGrid::around_two_photon_line(&atom, -0.01, 0.01, 41).unwrap();
        let r = volume_averaged_spectrum(
            &grid,
            p.duration,
            &atom,
            &p,
            &BeamGeometry::reference(2e13),
            Selector::CoherentTotal,
            &AveragingOptions::default(),
        );
        assert!(r.is_err());
    }
}
