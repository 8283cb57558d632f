//! Field-swept cw-EPR spectra: stick positions from the first-order
//! resonance conditions, Gaussian-derivative broadening, and peak-to-peak
//! analysis of the resulting trace.

use alloc::format;
use alloc::vec::Vec;

use crate::constants::PhysicalConstants;
use crate::spin::{orientations, resonance_field, CenterKind, CenterParams, HalfInt, TransitionSpec};
use crate::{Error, Result};

/// A single resonance line before broadening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stick {
    pub field: f64,
    pub weight: f64,
    /// The first transition that landed on this field; coincident lines
    /// of the same center are merged into it.
    pub transition: TransitionSpec,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StickSpectrum {
    /// Sorted by field.
    pub sticks: Vec<Stick>,
}

impl StickSpectrum {
    pub fn total_weight(&self, kind: CenterKind) -> f64 {
        self.sticks
            .iter()
            .filter(|s| s.transition.center.label == kind)
            .map(|s| s.weight)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StickOptions {
    /// Tilt of B₀ away from [111], degrees.
    pub tilt_deg: f64,
    /// Use g∥ for every orientation instead of the angular g_eff.
    pub isotropic_g: bool,
    /// Include every Δm_S = 1 transition instead of only the pulsed-EPR
    /// lines (|−1⟩↔|0⟩ for N-V, |−1/2⟩↔|+1/2⟩ for N).
    pub all_transitions: bool,
}

impl Default for StickOptions {
    fn default() -> Self {
        StickOptions {
            tilt_deg: 0.0,
            isotropic_g: true,
            all_transitions: false,
        }
    }
}

fn transitions_for(center: &CenterParams, all: bool) -> Vec<(HalfInt, HalfInt)> {
    let m = center.spin.projections();
    let pairs: Vec<_> = m.windows(2).map(|w| (w[0], w[1])).collect();
    if all {
        pairs
    } else {
        pairs.into_iter().take(1).collect()
    }
}

/// Boltzmann population difference P(m_low) − P(m_high) with first-order
/// level energies at field `b`.
fn population_difference(center: &CenterParams, cos_theta: f64, b: f64, t: f64, low: HalfInt, high: HalfInt) -> f64 {
    let k = PhysicalConstants::SI;
    let g = center.g_eff(cos_theta);
    let angular = (3.0 * cos_theta * cos_theta - 1.0) / 2.0;
    let s = center.spin.value();
    let energy = |m: HalfInt| {
        let mv = m.value();
        g * k.bohr_magneton() * b * mv
            + k.planck_h() * center.zero_field_d * angular * (mv * mv - s * (s + 1.0) / 3.0)
    };
    let levels = center.spin.projections();
    let e_min = levels.iter().map(|&m| energy(m)).fold(f64::INFINITY, f64::min);
    let beta = 1.0 / (k.boltzmann_k() * t);
    let z: f64 = levels.iter().map(|&m| libm::exp(-beta * (energy(m) - e_min))).sum();
    let p = |m: HalfInt| libm::exp(-beta * (energy(m) - e_min)) / z;
    p(low) - p(high)
}

/// Enumerate every (orientation, m_I, transition) line of the given centers.
///
/// Weight = population × orientation degeneracy/4 × 1/(2I+1) × the
/// transition's share of the thermal population difference among the
/// included transitions of that site, so the weights of one center add up
/// to its population. Sticks of the same center at the same field are
/// merged.
pub fn build_sticks(
    centers: &[(CenterParams, f64)],
    freq: f64,
    temperature: f64,
    opts: &StickOptions,
) -> Result<StickSpectrum> {
    if centers.is_empty() {
        return Err(Error::domain("no centers to build a spectrum from"));
    }
    if !(freq.is_finite() && freq > 0.0) {
        return Err(Error::domain(format!("frequency must be > 0, got {freq}")));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::domain(format!("temperature must be > 0 K, got {temperature}")));
    }
    let orient = orientations(opts.tilt_deg)?;
    let mut sticks = Vec::new();
    for (params, population) in centers {
        params.validate()?;
        if !(population.is_finite() && *population > 0.0) {
            return Err(Error::domain(format!(
                "{} population must be > 0, got {population}",
                params.label
            )));
        }
        let mut center = *params;
        if opts.isotropic_g {
            center.g_perp = center.g_parallel;
        }
        let nuclear_fraction = 1.0 / f64::from(2 * center.nuclear_spin + 1);
        let pairs = transitions_for(&center, opts.all_transitions);
        for o in &orient {
            let site_weight = population * f64::from(o.degeneracy) / 4.0 * nuclear_fraction;
            for m_i in center.nuclear_projections() {
                let mut lines = Vec::with_capacity(pairs.len());
                for &(lo, hi) in &pairs {
                    let spec = TransitionSpec::new(center, lo, hi, m_i, *o)?;
                    let b = resonance_field(&spec, freq)?;
                    let dp = population_difference(&center, o.cos_theta, b, temperature, lo, hi);
                    lines.push((spec, b, dp));
                }
                let total: f64 = lines.iter().map(|l| l.2).sum();
                for (spec, b, dp) in lines {
                    let share = if total > 0.0 { dp / total } else { 1.0 / pairs.len() as f64 };
                    sticks.push(Stick {
                        field: b,
                        weight: site_weight * share,
                        transition: spec,
                    });
                }
            }
        }
    }
    sticks.sort_by(|a, b| a.field.total_cmp(&b.field));
    let mut merged: Vec<Stick> = Vec::with_capacity(sticks.len());
    for s in sticks {
        if let Some(last) = merged
            .iter_mut()
            .rev()
            .take_while(|m| (m.field - s.field).abs() <= 1e-12 * s.field)
            .find(|m| m.transition.center.label == s.transition.center.label)
        {
            last.weight += s.weight;
        } else {
            merged.push(s);
        }
    }
    merged.retain(|s| s.weight > 0.0);
    Ok(StickSpectrum { sticks: merged })
}

/// Uniform ascending field grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl FieldGrid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && step.is_finite()) || !(step > 0.0) || !(max > min) {
            return Err(Error::domain(format!(
                "field grid needs min < max and step > 0, got [{min}, {max}] step {step}"
            )));
        }
        if (max - min) / step > 5e7 {
            return Err(Error::domain("field grid has more than 5e7 points"));
        }
        Ok(FieldGrid { min, max, step })
    }

    pub fn len(&self) -> usize {
        libm::floor((self.max - self.min) / self.step + 1e-9) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn field(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }
}

impl Default for FieldGrid {
    fn default() -> Self {
        FieldGrid {
            min: 8.40,
            max: 8.75,
            step: 2e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// A line lies within five linewidths of (or beyond) a grid edge; the
    /// trace holds only part of it.
    TruncatedLine { field: f64, linewidth: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumMeta {
    pub frequency: f64,
    pub temperature: f64,
    pub populations: Vec<(CenterKind, f64)>,
}

/// First-derivative absorption trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub field_grid: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub step: f64,
    pub meta: SpectrumMeta,
    pub diagnostics: Vec<Diagnostic>,
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Derivative of a unit-area Gaussian with peak-to-peak width `pp`
/// (σ = pp/2), evaluated at offset `dx` from the line center.
fn gaussian_derivative(dx: f64, pp: f64) -> f64 {
    let sigma = pp / 2.0;
    let u = dx / sigma;
    -u * libm::exp(-0.5 * u * u) * INV_SQRT_2PI / (sigma * sigma)
}

/// Broaden every stick with a Gaussian-derivative line of its center's
/// peak-to-peak width. The amplitude of a line scales as weight/width²
/// and its double integral equals its weight.
pub fn convolve(sticks: &StickSpectrum, grid: &FieldGrid) -> Spectrum {
    let n = grid.len();
    let field_grid: Vec<f64> = (0..n).map(|i| grid.field(i)).collect();
    let lo = field_grid[0];
    let hi = field_grid[n - 1];
    let mut diagnostics = Vec::new();
    for s in &sticks.sticks {
        let w = s.transition.center.linewidth_pp;
        if s.field - 5.0 * w < lo || s.field + 5.0 * w > hi {
            diagnostics.push(Diagnostic::TruncatedLine {
                field: s.field,
                linewidth: w,
            });
        }
    }
    let amplitude = field_grid
        .iter()
        .map(|&b| {
            sticks
                .sticks
                .iter()
                .map(|s| s.weight * gaussian_derivative(b - s.field, s.transition.center.linewidth_pp))
                .fold(0.0, |acc, v| acc + v)
        })
        .collect();
    let mut populations: Vec<(CenterKind, f64)> = Vec::new();
    for s in &sticks.sticks {
        let kind = s.transition.center.label;
        match populations.iter_mut().find(|p| p.0 == kind) {
            Some(p) => p.1 += s.weight,
            None => populations.push((kind, s.weight)),
        }
    }
    Spectrum {
        field_grid,
        amplitude,
        step: grid.step,
        meta: SpectrumMeta {
            frequency: f64::NAN,
            temperature: f64::NAN,
            populations,
        },
        diagnostics,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Midpoint of the derivative extrema.
    pub center_field: f64,
    /// Field distance between the maximum and the following minimum.
    pub pp_width: f64,
    pub pp_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakReport {
    pub peaks: Vec<Peak>,
}

/// Parabolic vertex through three equally spaced samples: (offset in steps, value).
fn vertex(y0: f64, y1: f64, y2: f64) -> (f64, f64) {
    let denom = y0 - 2.0 * y1 + y2;
    if denom == 0.0 {
        return (0.0, y1);
    }
    let off = 0.5 * (y0 - y2) / denom;
    (off, y1 - 0.25 * (y0 - y2) * off)
}

/// Locate derivative lines as (maximum, next minimum) pairs.
///
/// Extrema smaller than `rel_threshold` × max|amplitude| are ignored.
/// Positions are refined by a parabola through the three samples around
/// each extremum.
pub fn analyze_peaks(spec: &Spectrum, rel_threshold: f64) -> PeakReport {
    let y = &spec.amplitude;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if y.len() < 3 || scale == 0.0 || !scale.is_finite() {
        return PeakReport::default();
    }
    let thr = rel_threshold * scale;
    // (is_max, field, value)
    let mut extrema: Vec<(bool, f64, f64)> = Vec::new();
    let step = spec.step;
    for i in 1..y.len() - 1 {
        let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
        let is_max = b > a && b >= c && b > thr;
        let is_min = b < a && b <= c && b < -thr;
        if is_max || is_min {
            let (off, val) = vertex(a, b, c);
            extrema.push((is_max, spec.field_grid[i] + off * step, val));
        }
    }
    let mut peaks = Vec::new();
    for w in extrema.windows(2) {
        let (max, min) = (w[0], w[1]);
        if max.0 && !min.0 {
            peaks.push(Peak {
                center_field: 0.5 * (max.1 + min.1),
                pp_width: min.1 - max.1,
                pp_amplitude: max.2 - min.2,
            });
        }
    }
    PeakReport { peaks }
}
