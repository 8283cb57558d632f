//! Weighted nonlinear least squares.
//!
//! [`fit`] minimizes Σ((y − f(x; p))/σ)² with a Levenberg–Marquardt
//! iteration (Marquardt diagonal scaling). Parameters flagged positive are
//! optimized as ln p so they can never cross zero; fixed parameters are
//! removed from the problem and reported unchanged.
//!
//! The data are sorted by (x, y, σ) before any arithmetic, so the result
//! does not depend on the order the points were supplied in.

mod linalg;
pub mod models;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};
pub use models::{ECHO_DECAY, GAMMA_RES_DEFAULT, INVERSION_RECOVERY, T1_MODEL, T2_MODEL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub unit: &'static str,
    /// Fitted on a log scale; must start and stay > 0.
    pub positive: bool,
    /// Held at this value unless the caller frees it.
    pub default_fixed: Option<f64>,
}

impl ParamSpec {
    pub const fn free(name: &'static str, unit: &'static str) -> Self {
        ParamSpec {
            name,
            unit,
            positive: false,
            default_fixed: None,
        }
    }

    pub const fn positive(name: &'static str, unit: &'static str) -> Self {
        ParamSpec {
            name,
            unit,
            positive: true,
            default_fixed: None,
        }
    }
}

pub type EvalFn = fn(&[f64], f64) -> f64;
pub type JacobianFn = fn(&[f64], f64, &mut [f64]);
pub type GuessFn = fn(&Series, &GuessContext) -> Vec<f64>;

/// Context for data-driven initial guesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuessContext {
    /// Spectrometer frequency in Hz; sets the initial T_Ze.
    pub spectrometer_freq: f64,
}

impl Default for GuessContext {
    fn default() -> Self {
        GuessContext {
            spectrometer_freq: 240e9,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ModelSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub x_unit: &'static str,
    pub y_unit: &'static str,
    pub params: &'static [ParamSpec],
    pub eval: EvalFn,
    pub jacobian: Option<JacobianFn>,
    pub guess: Option<GuessFn>,
}

impl ModelSpec {
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn param_index(&self, name: &str) -> Result<usize> {
        self.params
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::UnknownParameter {
                model: self.name.into(),
                name: name.into(),
            })
    }

    pub fn default_mask(&self) -> Vec<bool> {
        self.params.iter().map(|p| p.default_fixed.is_some()).collect()
    }

    /// Data-driven starting point, with default-fixed parameters at their
    /// default values.
    pub fn initial_guess(&self, data: &Series, ctx: &GuessContext) -> Vec<f64> {
        let mut p = match self.guess {
            Some(g) => g(data, ctx),
            None => vec![1.0; self.n_params()],
        };
        for (v, spec) in p.iter_mut().zip(self.params) {
            if let Some(d) = spec.default_fixed {
                *v = d;
            }
        }
        p
    }

    fn gradient(&self, p: &[f64], x: f64, out: &mut [f64]) {
        match self.jacobian {
            Some(j) => j(p, x, out),
            None => numeric_gradient(self.eval, p, x, out),
        }
    }
}

impl PartialEq for ModelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

static REGISTRY: [&ModelSpec; 4] = [&ECHO_DECAY, &INVERSION_RECOVERY, &T1_MODEL, &T2_MODEL];

/// All registered models, in a stable order.
pub fn registry() -> &'static [&'static ModelSpec] {
    &REGISTRY
}

pub fn lookup(name: &str) -> Result<&'static ModelSpec> {
    REGISTRY
        .iter()
        .copied()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::UnknownModel(name.into()))
}

/// Central difference step: the power of two nearest below 1e-6·|p|, so
/// that p ± h is exactly representable.
fn fd_step(p: f64) -> f64 {
    let h = if p != 0.0 { 1e-6 * p.abs() } else { 1e-6 };
    let h = libm::exp2(libm::floor(libm::log2(h)));
    (p + h) - p
}

fn numeric_gradient(eval: EvalFn, p: &[f64], x: f64, out: &mut [f64]) {
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = fd_step(p[j]);
        q[j] = p[j] + h;
        let up = eval(&q, x);
        q[j] = p[j] - h;
        let dn = eval(&q, x);
        q[j] = p[j];
        out[j] = (up - dn) / (2.0 * h);
    }
}

/// Largest relative disagreement between the analytic Jacobian and central
/// finite differences over the probe points.
pub fn jacobian_check(model: &ModelSpec, params: &[f64], x_probe: &[f64]) -> Result<f64> {
    let jac = model
        .jacobian
        .ok_or_else(|| Error::domain(format!("model `{}` has no analytic jacobian", model.name)))?;
    if params.len() != model.n_params() {
        return Err(Error::domain("parameter count mismatch"));
    }
    let n = params.len();
    let mut analytic = vec![0.0; n];
    let mut numeric = vec![0.0; n];
    let mut worst = 0.0f64;
    for &x in x_probe {
        jac(params, x, &mut analytic);
        numeric_gradient(model.eval, params, x, &mut numeric);
        for (a, f) in analytic.iter().zip(&numeric) {
            let scale = a.abs().max(f.abs());
            if scale > 0.0 {
                worst = worst.max((a - f).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// Observations (x, y, σ_y).
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    x: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
}

impl Series {
    pub fn new(x: Vec<f64>, y: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() != sigma.len() {
            return Err(Error::domain(format!(
                "series columns differ in length: {} x, {} y, {} sigma",
                x.len(),
                y.len(),
                sigma.len()
            )));
        }
        if let Some(i) = x.iter().zip(&y).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::domain(format!("non-finite data at point {i}")));
        }
        if let Some(i) = sigma.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::domain(format!("sigma must be > 0, point {i} has {}", sigma[i])));
        }
        Ok(Series { x, y, sigma })
    }

    /// σ = 1 for every point.
    pub fn unweighted(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        Self::new(x, y, vec![1.0; n])
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Fixed-parameter mask; `None` uses the model defaults.
    pub fixed: Option<Vec<bool>>,
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this
    /// fraction.
    pub ftol: f64,
    /// Stop when every component of Jᵀr (in the fitted coordinates) is
    /// below this.
    pub gtol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            fixed: None,
            max_iterations: 500,
            ftol: 1e-10,
            gtol: 1e-12,
        }
    }
}

impl FitOptions {
    pub fn with_fixed(mask: Vec<bool>) -> Self {
        FitOptions {
            fixed: Some(mask),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    CostTolerance,
    GradientTolerance,
    MaxIterations,
    /// Damping grew without bound; no downhill step could be found.
    Stagnated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: &'static str,
    pub params: Vec<f64>,
    /// 1σ from the covariance scaled by the reduced chi-square (unscaled
    /// when there are no degrees of freedom). Zero for fixed parameters.
    pub stderr: Vec<f64>,
    /// (JᵀWJ)⁻¹ in parameter space, row-major n×n, zero rows/columns for
    /// fixed parameters.
    pub covariance: Vec<f64>,
    pub fixed: Vec<bool>,
    pub chi2: f64,
    /// chi2/(N − free); NaN when there are no degrees of freedom.
    pub reduced_chi2: f64,
    /// (y − f)/σ in the caller's point order.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
}

struct Problem<'a> {
    model: &'a ModelSpec,
    x: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
    free: Vec<usize>,
    base: Vec<f64>,
}

impl Problem<'_> {
    fn params(&self, u: &[f64]) -> Vec<f64> {
        let mut p = self.base.clone();
        for (k, &j) in self.free.iter().enumerate() {
            p[j] = if self.model.params[j].positive { libm::exp(u[k]) } else { u[k] };
        }
        p
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) -> f64 {
        let mut cost = 0.0;
        for (((o, &x), &y), &s) in out.iter_mut().zip(&self.x).zip(&self.y).zip(&self.sigma) {
            let r = (y - (self.model.eval)(p, x)) / s;
            *o = r;
            cost += r * r;
        }
        if cost.is_finite() {
            cost
        } else {
            f64::INFINITY
        }
    }

    /// Weighted Jacobian of f with respect to the fitted coordinates,
    /// row-major m×k. `log_space` applies the dp/du = p chain factor.
    fn jacobian(&self, p: &[f64], log_space: bool) -> Vec<f64> {
        let m = self.x.len();
        let k = self.free.len();
        let mut grad = vec![0.0; p.len()];
        let mut jac = vec![0.0; m * k];
        for i in 0..m {
            self.model.gradient(p, self.x[i], &mut grad);
            for (c, &j) in self.free.iter().enumerate() {
                let chain = if log_space && self.model.params[j].positive { p[j] } else { 1.0 };
                jac[i * k + c] = grad[j] * chain / self.sigma[i];
            }
        }
        jac
    }
}

fn normal_equations(jac: &[f64], r: &[f64], m: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; k * k];
    let mut g = vec![0.0; k];
    for i in 0..m {
        let row = &jac[i * k..(i + 1) * k];
        for c in 0..k {
            g[c] += row[c] * r[i];
            for d in 0..=c {
                a[c * k + d] += row[c] * row[d];
            }
        }
    }
    for c in 0..k {
        for d in 0..c {
            a[d * k + c] = a[c * k + d];
        }
    }
    (a, g)
}

/// Fit `model` to `data` starting from `init`.
///
/// Returns `Err` only for malformed input; a fit that runs out of
/// iterations or stalls comes back with `converged == false`.
pub fn fit(model: &ModelSpec, data: &Series, init: &[f64], options: &FitOptions) -> Result<FitResult> {
    let n = model.n_params();
    if init.len() != n {
        return Err(Error::domain(format!(
            "model `{}` takes {n} parameters, {} given",
            model.name,
            init.len()
        )));
    }
    let fixed = options.fixed.clone().unwrap_or_else(|| model.default_mask());
    if fixed.len() != n {
        return Err(Error::domain("fixed-parameter mask has the wrong length"));
    }
    let free: Vec<usize> = (0..n).filter(|&j| !fixed[j]).collect();
    if data.len() < free.len() || free.is_empty() && data.is_empty() {
        return Err(Error::Underdetermined {
            points: data.len(),
            free: free.len(),
        });
    }
    for (j, v) in init.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::domain(format!("initial {} is not finite", model.params[j].name)));
        }
        if !fixed[j] && model.params[j].positive && !(*v > 0.0) {
            return Err(Error::domain(format!(
                "initial {} must be > 0 (positive parameter), got {v}",
                model.params[j].name
            )));
        }
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| {
        data.x[a]
            .total_cmp(&data.x[b])
            .then(data.y[a].total_cmp(&data.y[b]))
            .then(data.sigma[a].total_cmp(&data.sigma[b]))
    });
    let problem = Problem {
        model,
        x: order.iter().map(|&i| data.x[i]).collect(),
        y: order.iter().map(|&i| data.y[i]).collect(),
        sigma: order.iter().map(|&i| data.sigma[i]).collect(),
        free: free.clone(),
        base: init.to_vec(),
    };
    let m = data.len();
    let k = free.len();

    let mut u: Vec<f64> = free
        .iter()
        .map(|&j| if model.params[j].positive { libm::log(init[j]) } else { init[j] })
        .collect();
    let mut p = problem.params(&u);
    let mut r = vec![0.0; m];
    let mut cost = problem.residuals(&p, &mut r);
    if !cost.is_finite() {
        return Err(Error::domain("model is not finite at the initial parameters"));
    }
    let mut cost_history = vec![cost];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut r_trial = vec![0.0; m];

    if k == 0 {
        termination = Termination::GradientTolerance;
    }
    let mut fresh = true;
    let (mut a, mut g) = (Vec::new(), Vec::new());
    while k > 0 && iterations < options.max_iterations {
        if fresh {
            let jac = problem.jacobian(&p, true);
            (a, g) = normal_equations(&jac, &r, m, k);
            fresh = false;
            if g.iter().all(|v| v.abs() < options.gtol) {
                termination = Termination::GradientTolerance;
                break;
            }
        }
        iterations += 1;
        let mut damped = a.clone();
        for c in 0..k {
            let d = a[c * k + c].max(1e-30);
            damped[c * k + c] += lambda * d;
        }
        let step = linalg::cholesky_solve(&damped, &g, k);
        let accepted = step.and_then(|delta| {
            let u_new: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let p_new = problem.params(&u_new);
            if p_new.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let c_new = problem.residuals(&p_new, &mut r_trial);
            (c_new <= cost).then_some((u_new, p_new, c_new))
        });
        match accepted {
            Some((u_new, p_new, c_new)) => {
                debug_assert!(c_new <= cost);
                let drop = cost - c_new;
                u = u_new;
                p = p_new;
                cost = c_new;
                core::mem::swap(&mut r, &mut r_trial);
                cost_history.push(cost);
                lambda = (lambda / 10.0).max(1e-12);
                fresh = true;
                if drop <= options.ftol * cost_history[cost_history.len() - 2] {
                    termination = Termination::CostTolerance;
                    break;
                }
            }
            None => {
                lambda *= 10.0;
                if lambda > 1e32 {
                    termination = Termination::Stagnated;
                    break;
                }
            }
        }
    }
    let converged = matches!(termination, Termination::CostTolerance | Termination::GradientTolerance);

    // Covariance in the original parameterization.
    let mut covariance = vec![0.0; n * n];
    let mut stderr = vec![0.0; n];
    let dof = m - k;
    let reduced_chi2 = if dof > 0 { cost / dof as f64 } else { f64::NAN };
    if k > 0 {
        let jac = problem.jacobian(&p, false);
        let (a, _) = normal_equations(&jac, &r, m, k);
        let scale = if dof > 0 { reduced_chi2 } else { 1.0 };
        match linalg::spd_inverse(&a, k) {
            Some(inv) => {
                for (c, &jc) in free.iter().enumerate() {
                    for (d, &jd) in free.iter().enumerate() {
                        covariance[jc * n + jd] = inv[c * k + d];
                    }
                    stderr[jc] = libm::sqrt(inv[c * k + c].max(0.0) * scale);
                }
            }
            None => {
                for &j in &free {
                    covariance[j * n + j] = f64::INFINITY;
                    stderr[j] = f64::INFINITY;
                }
            }
        }
    }

    let mut residuals = vec![0.0; m];
    for (sorted_pos, &orig) in order.iter().enumerate() {
        residuals[orig] = r[sorted_pos];
    }
    Ok(FitResult {
        model: model.name,
        params: p,
        stderr,
        covariance,
        fixed,
        chi2: cost,
        reduced_chi2,
        residuals,
        iterations,
        converged,
        termination,
        cost_history,
    })
}

impl FitResult {
    /// Plain-text report, one parameter per line.
    pub fn report(&self, spec: &ModelSpec) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "model: {} ({})", spec.name, spec.description);
        for (j, p) in spec.params.iter().enumerate() {
            let tag = if self.fixed[j] { " (fixed)" } else { "" };
            let _ = writeln!(
                s,
                "  {:<10} = {:.6e} +/- {:.2e} {}{}",
                p.name, self.params[j], self.stderr[j], p.unit, tag
            );
        }
        let _ = writeln!(s, "chi2: {:.6e}", self.chi2);
        let _ = writeln!(s, "reduced chi2: {:.6e}", self.reduced_chi2);
        let _ = writeln!(s, "iterations: {}", self.iterations);
        let _ = writeln!(s, "converged: {} ({:?})", self.converged, self.termination);
        s
    }
}
