//! Defect parameter sets and first-order resonance calculators.
//!
//! The N-V center (S = 1) and the substitutional nitrogen (S = 1/2) are
//! both treated to first order in the zero-field splitting and the ¹⁴N
//! hyperfine coupling. At 8.5 T the electron Zeeman term exceeds D and A by
//! almost two orders of magnitude, so the first-order line positions are
//! what a field-swept spectrum resolves.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::constants::PhysicalConstants;
use crate::{Error, Result};

/// Which defect a parameter set describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CenterKind {
    Nv,
    N,
}

impl CenterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CenterKind::Nv => "nv",
            CenterKind::N => "n",
        }
    }
}

impl fmt::Display for CenterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A half-integer spin quantum number stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(i8);

impl HalfInt {
    pub const fn from_twice(twice: i8) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(m: i8) -> Self {
        HalfInt(2 * m)
    }

    pub const fn twice(self) -> i8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Electron spin multiplicity of a center.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Half,
    One,
}

impl Spin {
    pub fn value(self) -> f64 {
        match self {
            Spin::Half => 0.5,
            Spin::One => 1.0,
        }
    }

    /// All m_S projections in ascending order.
    pub fn projections(self) -> Vec<HalfInt> {
        match self {
            Spin::Half => alloc::vec![HalfInt(-1), HalfInt(1)],
            Spin::One => alloc::vec![HalfInt(-2), HalfInt(0), HalfInt(2)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterParams {
    pub label: CenterKind,
    pub spin: Spin,
    pub g_parallel: f64,
    pub g_perp: f64,
    /// Zero-field splitting D in Hz (0 for S = 1/2).
    pub zero_field_d: f64,
    /// ¹⁴N hyperfine constant for the defect axis along B₀, Hz.
    pub hyperfine_111: f64,
    /// ¹⁴N hyperfine constant for the three inclined axes, Hz.
    pub hyperfine_other: f64,
    /// Peak-to-peak derivative linewidth, T.
    pub linewidth_pp: f64,
    /// Nuclear spin I of the host nitrogen (1 for ¹⁴N).
    pub nuclear_spin: u8,
}

impl CenterParams {
    /// N-V center: g = 2.0028, D = 2.87 GHz, A = 2.2 MHz, 2.36 G line.
    ///
    /// Only the on-axis hyperfine value is known; the inclined axes reuse it.
    pub const fn nv() -> Self {
        CenterParams {
            label: CenterKind::Nv,
            spin: Spin::One,
            g_parallel: 2.0028,
            g_perp: 2.0028,
            zero_field_d: 2.87e9,
            hyperfine_111: 2.2e6,
            hyperfine_other: 2.2e6,
            linewidth_pp: 2.36e-4,
            nuclear_spin: 1,
        }
    }

    /// Substitutional nitrogen: g∥ = 2.0024, g⊥ = 2.0025, A = 114/86 MHz,
    /// 0.95 G line.
    pub const fn nitrogen() -> Self {
        CenterParams {
            label: CenterKind::N,
            spin: Spin::Half,
            g_parallel: 2.0024,
            g_perp: 2.0025,
            zero_field_d: 0.0,
            hyperfine_111: 114e6,
            hyperfine_other: 86e6,
            linewidth_pp: 0.95e-4,
            nuclear_spin: 1,
        }
    }

    pub fn for_kind(kind: CenterKind) -> Self {
        match kind {
            CenterKind::Nv => Self::nv(),
            CenterKind::N => Self::nitrogen(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{}: {name} must be > 0, got {v}", self.label)))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{}: {name} must be >= 0, got {v}", self.label)))
            }
        };
        positive("g_parallel", self.g_parallel)?;
        positive("g_perp", self.g_perp)?;
        non_negative("zero_field_d", self.zero_field_d)?;
        non_negative("hyperfine_111", self.hyperfine_111)?;
        non_negative("hyperfine_other", self.hyperfine_other)?;
        positive("linewidth_pp", self.linewidth_pp)?;
        if self.spin == Spin::Half && self.zero_field_d != 0.0 {
            return Err(Error::domain(format!(
                "{}: a spin-1/2 center has no zero-field splitting",
                self.label
            )));
        }
        Ok(())
    }

    /// Effective g along a direction at angle θ from the defect axis:
    /// g² = g∥²cos²θ + g⊥²sin²θ.
    pub fn g_eff(&self, cos_theta: f64) -> f64 {
        let c2 = cos_theta * cos_theta;
        libm::sqrt(self.g_parallel * self.g_parallel * c2 + self.g_perp * self.g_perp * (1.0 - c2))
    }

    pub fn hyperfine(&self, axis: AxisLabel) -> f64 {
        match axis {
            AxisLabel::O111 => self.hyperfine_111,
            _ => self.hyperfine_other,
        }
    }

    /// Nuclear projections m_I = -I..=I.
    pub fn nuclear_projections(&self) -> impl Iterator<Item = i8> {
        let i = self.nuclear_spin as i8;
        -i..=i
    }
}

/// The four ⟨111⟩-family defect axes of the diamond lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AxisLabel {
    O111,
    OA,
    OB,
    OC,
}

impl AxisLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisLabel::O111 => "o111",
            AxisLabel::OA => "oA",
            AxisLabel::OB => "oB",
            AxisLabel::OC => "oC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    pub axis_label: AxisLabel,
    /// Cosine of the angle between the defect axis and B₀.
    pub cos_theta: f64,
    /// Number of physical axes sharing this cosine.
    pub degeneracy: u8,
}

/// Defect orientations seen by a field tilted `tilt_deg` away from [111]
/// towards [1,-1,0]. Axes with equal cosines are merged.
///
/// At zero tilt this gives the on-axis site (cos θ = 1) and the three
/// inclined sites at cos θ = -1/3 with degeneracy 3; any tilt splits the
/// inclined triplet into three distinct angles.
pub fn orientations(tilt_deg: f64) -> Result<Vec<Orientation>> {
    if !tilt_deg.is_finite() || tilt_deg.abs() > 90.0 {
        return Err(Error::domain(format!("tilt_deg must lie in [-90, 90], got {tilt_deg}")));
    }
    let s3 = libm::sqrt(3.0);
    let s2 = libm::sqrt(2.0);
    let axes = [
        (AxisLabel::O111, [1.0, 1.0, 1.0]),
        (AxisLabel::OA, [1.0, -1.0, -1.0]),
        (AxisLabel::OB, [-1.0, 1.0, -1.0]),
        (AxisLabel::OC, [-1.0, -1.0, 1.0]),
    ];
    let t = tilt_deg.to_radians();
    let (st, ct) = (libm::sin(t), libm::cos(t));
    let field = [
        ct / s3 + st / s2,
        ct / s3 - st / s2,
        ct / s3,
    ];

    let mut out: Vec<Orientation> = Vec::with_capacity(4);
    for (label, v) in axes {
        let dot = (v[0] * field[0] + v[1] * field[1] + v[2] * field[2]) / s3;
        let cos_theta = dot.clamp(-1.0, 1.0);
        match out
            .iter_mut()
            .find(|o| (o.cos_theta - cos_theta).abs() <= 1e-12)
        {
            Some(o) => o.degeneracy += 1,
            None => out.push(Orientation {
                axis_label: label,
                cos_theta,
                degeneracy: 1,
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSpec {
    pub center: CenterParams,
    pub m_s_low: HalfInt,
    pub m_s_high: HalfInt,
    pub m_i: i8,
    pub orientation: Orientation,
}

impl TransitionSpec {
    pub fn new(
        center: CenterParams,
        m_s_low: HalfInt,
        m_s_high: HalfInt,
        m_i: i8,
        orientation: Orientation,
    ) -> Result<Self> {
        if m_s_high.twice() - m_s_low.twice() != 2 {
            return Err(Error::domain(format!(
                "transition {m_s_low} <-> {m_s_high} is not an allowed Δm_S = 1 step"
            )));
        }
        let s_twice = (center.spin.value() * 2.0) as i8;
        if m_s_low.twice() < -s_twice || m_s_high.twice() > s_twice {
            return Err(Error::domain(format!(
                "m_S outside the spin manifold of the {} center",
                center.label
            )));
        }
        if m_i.unsigned_abs() > center.nuclear_spin {
            return Err(Error::domain(format!("m_I = {m_i} outside the nuclear manifold")));
        }
        Ok(TransitionSpec {
            center,
            m_s_low,
            m_s_high,
            m_i,
            orientation,
        })
    }
}

/// Temperature equivalent of a photon energy, hν/k_B.
pub fn zeeman_temperature(frequency: f64) -> Result<f64> {
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(Error::domain(format!("frequency must be > 0, got {frequency}")));
    }
    let k = PhysicalConstants::SI;
    Ok(k.planck_h() * frequency / k.boltzmann_k())
}

/// Electron Zeeman frequency gμ_B B/h.
pub fn field_to_frequency(field: f64, g: f64) -> Result<f64> {
    check_g(g)?;
    if !(field.is_finite() && field >= 0.0) {
        return Err(Error::domain(format!("field must be >= 0, got {field}")));
    }
    let k = PhysicalConstants::SI;
    Ok(g * k.bohr_magneton() * field / k.planck_h())
}

/// Resonance field hν/(gμ_B) of a free electron-like spin.
pub fn frequency_to_field(frequency: f64, g: f64) -> Result<f64> {
    check_g(g)?;
    if !(frequency.is_finite() && frequency >= 0.0) {
        return Err(Error::domain(format!("frequency must be >= 0, got {frequency}")));
    }
    let k = PhysicalConstants::SI;
    Ok(frequency * k.planck_h() / (g * k.bohr_magneton()))
}

fn check_g(g: f64) -> Result<()> {
    if g.is_finite() && g > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("g must be > 0, got {g}")))
    }
}

/// First-order zero-field contribution to the frequency of the transition
/// `m_s_low <-> m_s_high` at fixed field:
/// D·(3cos²θ − 1)/2 · (m_high² − m_low²).
///
/// For the |−1⟩↔|0⟩ line on-axis this is −D: the transition sits lower in
/// frequency, so at a fixed spectrometer frequency it resonates D higher,
/// i.e. at a larger field.
pub fn zfs_first_order_shift(d: f64, cos_theta: f64, m_s_low: HalfInt, m_s_high: HalfInt) -> Result<f64> {
    if !(cos_theta.abs() <= 1.0) {
        return Err(Error::domain(format!("|cos_theta| must be <= 1, got {cos_theta}")));
    }
    let angular = (3.0 * cos_theta * cos_theta - 1.0) / 2.0;
    let lo = m_s_low.value();
    let hi = m_s_high.value();
    Ok(d * angular * (hi * hi - lo * lo))
}

/// Field at which `spec` is resonant with the spectrometer frequency, to
/// first order in D and A:
/// B = [ν − Δν_zfs − m_I·A] · h/(g_eff μ_B).
pub fn resonance_field(spec: &TransitionSpec, spectrometer_freq: f64) -> Result<f64> {
    let c = &spec.center;
    let cos_theta = spec.orientation.cos_theta;
    let zfs = zfs_first_order_shift(c.zero_field_d, cos_theta, spec.m_s_low, spec.m_s_high)?;
    let hf = f64::from(spec.m_i) * c.hyperfine(spec.orientation.axis_label);
    let detuned = spectrometer_freq - zfs - hf;
    if !(detuned > 0.0) {
        return Err(Error::domain(format!(
            "{} transition {}<->{} (m_I = {}, cos θ = {cos_theta}) needs a negative field at {spectrometer_freq} Hz: \
             zero-field offset {zfs} Hz, hyperfine offset {hf} Hz",
            c.label, spec.m_s_low, spec.m_s_high, spec.m_i
        )));
    }
    frequency_to_field(detuned, c.g_eff(cos_theta))
}
