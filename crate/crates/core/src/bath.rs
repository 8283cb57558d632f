//! Thermal polarization of the nitrogen spin bath and the relaxation-rate
//! models built on it.
//!
//! Both the polarization and the flip-flop factor are evaluated with
//! exponentials of non-positive arguments only, so T_Ze/T can be as large
//! as ~700 without overflow.

use alloc::format;

use crate::units::{PerMicrosecond, PerSecond};
use crate::{Error, Result};

/// Parameters of the flip-flop T₂ model, 1/T₂ = C·P↓P↑ + Γ_res.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T2Params {
    pub c: PerMicrosecond,
    /// Zeeman temperature of the bath spins, K.
    pub t_ze: f64,
    pub gamma_res: PerMicrosecond,
}

impl T2Params {
    /// N-V values: T_Ze = 14.7 K and Γ_res = 0.004 μs⁻¹ as fitted, with
    /// C = 0.58136 μs⁻¹ chosen so that T₂(300 K) = 6.7 μs.
    pub const fn nv_reference() -> Self {
        T2Params {
            c: PerMicrosecond(0.58136),
            t_ze: 14.7,
            gamma_res: PerMicrosecond(0.004),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c.0 >= 0.0 && self.gamma_res.0 >= 0.0) {
            return Err(Error::domain(format!(
                "T2 model needs C >= 0 and Gamma_res >= 0, got C = {}, Gamma_res = {}",
                self.c.0, self.gamma_res.0
            )));
        }
        Ok(())
    }
}

/// Parameters of the phonon T₁ model, 1/T₁ = A·T + B·T⁵.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T1Params {
    /// s⁻¹ K⁻¹
    pub a: f64,
    /// s⁻¹ K⁻⁵
    pub b: f64,
}

impl T1Params {
    /// Nitrogen-center fit: A = 8.0e-3, B = 3.5e-10.
    pub const fn nitrogen_reference() -> Self {
        T1Params { a: 8.0e-3, b: 3.5e-10 }
    }

    /// Temperature where the direct and Raman-like terms are equal,
    /// (A/B)^{1/4}.
    pub fn crossover_temperature(&self) -> Result<f64> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::domain("crossover needs A > 0 and B > 0"));
        }
        Ok(libm::pow(self.a / self.b, 0.25))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathModelParams {
    pub t2: T2Params,
    pub t1: T1Params,
}

impl Default for BathModelParams {
    fn default() -> Self {
        BathModelParams {
            t2: T2Params::nv_reference(),
            t1: T1Params::nitrogen_reference(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationPoint {
    pub temperature: f64,
    /// P↓ − P↑.
    pub polarization: f64,
    /// (P↓, P↑): ground (m_S = −1/2) and excited level populations.
    pub level_populations: (f64, f64),
}

fn check_temperatures(t: f64, t_ze: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::domain(format!("temperature must be > 0 K, got {t}")));
    }
    if !(t_ze.is_finite() && t_ze > 0.0) {
        return Err(Error::domain(format!("T_Ze must be > 0 K, got {t_ze}")));
    }
    Ok(())
}

/// Two-level Boltzmann populations of a spin-1/2 with Zeeman temperature
/// `t_ze` at temperature `t`.
pub fn polarization(t: f64, t_ze: f64) -> Result<PolarizationPoint> {
    check_temperatures(t, t_ze)?;
    let e = libm::exp(-t_ze / t);
    let p_down = 1.0 / (1.0 + e);
    let p_up = e / (1.0 + e);
    Ok(PolarizationPoint {
        temperature: t,
        // tanh(T_Ze / 2T); expm1 keeps precision when T ≫ T_Ze
        polarization: -libm::expm1(-t_ze / t) / (1.0 + e),
        level_populations: (p_down, p_up),
    })
}

/// P↓·P↑ = 1/[(1 + e^{T_Ze/T})(1 + e^{−T_Ze/T})], the fraction of
/// antiparallel pairs available for flip-flops (1/4 for an unpolarized
/// bath).
pub fn flip_flop_factor(t: f64, t_ze: f64) -> Result<f64> {
    check_temperatures(t, t_ze)?;
    Ok(flip_flop_unchecked(t_ze / t))
}

/// Flip-flop factor as a function of x = T_Ze/T ≥ 0.
pub(crate) fn flip_flop_unchecked(x: f64) -> f64 {
    let e = libm::exp(-x);
    let d = 1.0 + e;
    e / (d * d)
}

/// Derivative of the flip-flop factor with respect to x = T_Ze/T.
pub(crate) fn flip_flop_dx(x: f64) -> f64 {
    let e = libm::exp(-x);
    let f = e / ((1.0 + e) * (1.0 + e));
    -f * (1.0 - e) / (1.0 + e)
}

/// 1/T₂ = C·P↓P↑ + Γ_res in μs⁻¹.
pub fn t2_rate(t: f64, params: &T2Params) -> Result<PerMicrosecond> {
    params.validate()?;
    let f = flip_flop_factor(t, params.t_ze)?;
    Ok(PerMicrosecond(params.c.0 * f + params.gamma_res.0))
}

/// 1/T₁ = A·T + B·T⁵ in s⁻¹.
pub fn t1_rate(t: f64, params: &T1Params) -> Result<PerSecond> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::domain(format!("temperature must be > 0 K, got {t}")));
    }
    if !(params.a >= 0.0 && params.b >= 0.0) {
        return Err(Error::domain("T1 model needs A >= 0 and B >= 0"));
    }
    let t2 = t * t;
    Ok(PerSecond(params.a * t + params.b * t2 * t2 * t))
}
