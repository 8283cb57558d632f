//! The four relaxation models: echo decay, inversion recovery, the phonon
//! T₁ law and the flip-flop T₂ law.

use alloc::vec;
use alloc::vec::Vec;

use super::{GuessContext, ModelSpec, ParamSpec, Series};
use crate::bath::{flip_flop_dx, flip_flop_unchecked};
use crate::spin::zeeman_temperature;

/// Γ_res held fixed in N-V T₂ fits, μs⁻¹ (a 250 μs floor).
pub const GAMMA_RES_DEFAULT: f64 = 0.004;

pub static ECHO_DECAY: ModelSpec = ModelSpec {
    name: "echo_decay",
    description: "a·exp(-2τ/T2)",
    x_unit: "s",
    y_unit: "a.u.",
    params: &[
        ParamSpec::positive("a", "a.u."),
        ParamSpec::positive("T2", "s"),
    ],
    eval: echo_eval,
    jacobian: Some(echo_jac),
    guess: Some(echo_guess),
};

pub static INVERSION_RECOVERY: ModelSpec = ModelSpec {
    name: "inversion_recovery",
    description: "y0 - a·exp(-T/T1)",
    x_unit: "s",
    y_unit: "a.u.",
    params: &[
        ParamSpec::free("y0", "a.u."),
        ParamSpec::free("a", "a.u."),
        ParamSpec::positive("T1", "s"),
    ],
    eval: ir_eval,
    jacobian: Some(ir_jac),
    guess: Some(ir_guess),
};

pub static T1_MODEL: ModelSpec = ModelSpec {
    name: "t1_model",
    description: "1/T1 = A·T + B·T^5",
    x_unit: "K",
    y_unit: "1/s",
    params: &[
        ParamSpec::positive("A", "1/(s·K)"),
        ParamSpec::positive("B", "1/(s·K^5)"),
    ],
    eval: t1_eval,
    jacobian: Some(t1_jac),
    guess: Some(t1_guess),
};

pub static T2_MODEL: ModelSpec = ModelSpec {
    name: "t2_model",
    description: "1/T2 = C/((1+exp(T_Ze/T))(1+exp(-T_Ze/T))) + Gamma_res",
    x_unit: "K",
    y_unit: "1/us",
    params: &[
        ParamSpec::positive("C", "1/us"),
        ParamSpec::positive("T_Ze", "K"),
        ParamSpec {
            name: "Gamma_res",
            unit: "1/us",
            positive: true,
            default_fixed: Some(GAMMA_RES_DEFAULT),
        },
    ],
    eval: t2_eval,
    jacobian: Some(t2_jac),
    guess: Some(t2_guess),
};

fn echo_eval(p: &[f64], tau: f64) -> f64 {
    p[0] * libm::exp(-2.0 * tau / p[1])
}

fn echo_jac(p: &[f64], tau: f64, out: &mut [f64]) {
    let e = libm::exp(-2.0 * tau / p[1]);
    out[0] = e;
    out[1] = p[0] * e * 2.0 * tau / (p[1] * p[1]);
}

fn ir_eval(p: &[f64], t: f64) -> f64 {
    p[0] - p[1] * libm::exp(-t / p[2])
}

fn ir_jac(p: &[f64], t: f64, out: &mut [f64]) {
    let e = libm::exp(-t / p[2]);
    out[0] = 1.0;
    out[1] = -e;
    out[2] = -p[1] * e * t / (p[2] * p[2]);
}

fn t1_eval(p: &[f64], t: f64) -> f64 {
    let t2 = t * t;
    p[0] * t + p[1] * t2 * t2 * t
}

fn t1_jac(_p: &[f64], t: f64, out: &mut [f64]) {
    let t2 = t * t;
    out[0] = t;
    out[1] = t2 * t2 * t;
}

fn t2_eval(p: &[f64], t: f64) -> f64 {
    p[0] * flip_flop_unchecked(p[1] / t) + p[2]
}

fn t2_jac(p: &[f64], t: f64, out: &mut [f64]) {
    let x = p[1] / t;
    out[0] = flip_flop_unchecked(x);
    out[1] = p[0] * flip_flop_dx(x) / t;
    out[2] = 1.0;
}

/// Least-squares line through (x, ln y) for the points with y above
/// `floor`; returns (intercept, slope).
fn log_linear(xs: &[f64], ys: impl Iterator<Item = f64>, floor: f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| *y > floor && y.is_finite())
        .map(|(&x, y)| (x, libm::log(y)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

fn span(xs: &[f64]) -> f64 {
    let m = xs.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

fn echo_guess(data: &Series, _: &GuessContext) -> Vec<f64> {
    let a = data.y().iter().fold(f64::NEG_INFINITY, |m, &y| m.max(y));
    let a = if a > 0.0 { a } else { 1.0 };
    let t2 = match log_linear(data.x(), data.y().iter().copied(), 0.05 * a) {
        Some((_, slope)) if slope < 0.0 => -2.0 / slope,
        _ => 100.0 * span(data.x()),
    };
    vec![a, t2]
}

fn ir_guess(data: &Series, _: &GuessContext) -> Vec<f64> {
    let y = data.y();
    let y0 = y.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let ymin = y.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let a = if y0 > ymin { y0 - ymin } else { 1.0 };
    let t1 = match log_linear(data.x(), y.iter().map(|v| y0 - v), 0.05 * a) {
        Some((_, slope)) if slope < 0.0 => -1.0 / slope,
        _ => span(data.x()),
    };
    vec![y0, a, t1]
}

fn t1_guess(data: &Series, _: &GuessContext) -> Vec<f64> {
    // Weighted linear least squares in (A, B).
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&t, &y), &s) in data.x().iter().zip(data.y()).zip(data.sigma()) {
        let w = 1.0 / (s * s);
        let t5 = t * t * t * t * t;
        s11 += w * t * t;
        s12 += w * t * t5;
        s22 += w * t5 * t5;
        b1 += w * t * y;
        b2 += w * t5 * y;
    }
    let det = s11 * s22 - s12 * s12;
    let n = data.len() as f64;
    let a_scale = data.x().iter().zip(data.y()).map(|(t, y)| (y / t).abs()).sum::<f64>() / n;
    let b_scale = data
        .x()
        .iter()
        .zip(data.y())
        .map(|(t, y)| (y / libm::pow(*t, 5.0)).abs())
        .sum::<f64>()
        / n;
    let (mut a, mut b) = if det.abs() > 0.0 && det.is_finite() {
        ((b1 * s22 - b2 * s12) / det, (s11 * b2 - s12 * b1) / det)
    } else {
        (a_scale, b_scale)
    };
    if !(a > 0.0) {
        a = 1e-3 * a_scale.max(f64::MIN_POSITIVE);
    }
    if !(b > 0.0) {
        b = 1e-3 * b_scale.max(f64::MIN_POSITIVE);
    }
    vec![a, b]
}

fn t2_guess(data: &Series, ctx: &GuessContext) -> Vec<f64> {
    let t_ze = zeeman_temperature(ctx.spectrometer_freq).unwrap_or(11.518);
    // Rate at the hottest point.
    let (i_max, _) = data
        .x()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &t)| if t > acc.1 { (i, t) } else { acc });
    let hot = data.y()[i_max];
    let mut c = 4.0 * (hot - GAMMA_RES_DEFAULT);
    if !(c > 0.0) {
        c = 4.0 * data.y().iter().fold(0.0f64, |m, &v| m.max(v));
    }
    if !(c > 0.0) {
        c = 1.0;
    }
    vec![c, t_ze, GAMMA_RES_DEFAULT]
}
