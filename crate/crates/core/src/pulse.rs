//! Hahn-echo and inversion-recovery simulation for a central spin in a bath
//! of random-telegraph noise sources.
//!
//! Each source i contributes a detuning b_i·s_i(t) with s_i ∈ {−1, +1}
//! switching at rate γ. The echo phase after π/2 − τ − π − τ is
//!
//! ```text
//! Φ(τ) = Σ b_i (∫₀^τ s_i dt − ∫_τ^2τ s_i dt) = Σ b_i (2·I_i(τ) − I_i(2τ))
//! ```
//!
//! with I_i the running integral of s_i, and the echo amplitude is ⟨cos Φ⟩.
//! Trajectories are sampled event by event (exponential waiting times), so
//! there is no time step.
//!
//! Realization r draws from ChaCha8 stream r of the configured seed and
//! results are accumulated in r order, so a parallel driver that reduces in
//! the same order reproduces the serial output bit for bit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::bath::flip_flop_factor;
use crate::fit::{self, FitOptions, GuessContext, Series, ECHO_DECAY};
use crate::{Error, Result};

/// Stream reserved for the coupling draw; realizations use 0, 1, 2, …
const COUPLING_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathNoiseConfig {
    pub n_sources: usize,
    /// rad/s
    pub coupling_scale: f64,
    /// Per-source switching rate in an unpolarized bath, s⁻¹.
    pub base_rate: f64,
    /// K
    pub temperature: f64,
    /// K
    pub t_ze: f64,
    pub seed: u64,
}

impl Default for BathNoiseConfig {
    /// Calibrated so that the simulated 300 K echo gives T₂ ≈ 6.7 μs.
    fn default() -> Self {
        BathNoiseConfig {
            n_sources: 8,
            coupling_scale: 2.0e6,
            base_rate: 1.76e4,
            temperature: 300.0,
            t_ze: 11.518,
            seed: 7,
        }
    }
}

impl BathNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sources == 0 {
            return Err(Error::domain("n_sources must be >= 1"));
        }
        if !(self.coupling_scale.is_finite() && self.coupling_scale >= 0.0) {
            return Err(Error::domain(format!(
                "coupling_scale must be >= 0 rad/s, got {}",
                self.coupling_scale
            )));
        }
        if !(self.base_rate.is_finite() && self.base_rate >= 0.0) {
            return Err(Error::domain(format!("base_rate must be >= 0, got {}", self.base_rate)));
        }
        flip_flop_factor(self.temperature, self.t_ze).map(|_| ())
    }

    /// base_rate · flip_flop_factor(T, T_Ze) / (1/4), s⁻¹.
    pub fn effective_rate(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.base_rate * 4.0 * flip_flop_factor(self.temperature, self.t_ze)?)
    }

    pub fn at_temperature(&self, temperature: f64) -> Self {
        BathNoiseConfig { temperature, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sequence {
    HahnEcho,
    InversionRecovery,
}

impl Sequence {
    pub fn as_str(self) -> &'static str {
        match self {
            Sequence::HahnEcho => "hahn_echo",
            Sequence::InversionRecovery => "inversion_recovery",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hahn_echo" | "hahn" => Some(Sequence::HahnEcho),
            "inversion_recovery" | "ir" => Some(Sequence::InversionRecovery),
            _ => None,
        }
    }
}

/// A simulated decay curve. For the Hahn echo `delays` holds τ (the echo
/// forms at 2τ); for inversion recovery it holds the recovery time T.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTrace {
    pub sequence: Sequence,
    pub delays: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub std_error: Vec<f64>,
    pub n_realizations: usize,
    pub seed: u64,
}

/// Detunings b_i = ±coupling_scale/r_i³ for the n nearest points of a
/// unit-density Poisson process around the central spin.
///
/// The enclosed volume (4π/3)r³ of the i-th nearest point is a sum of i
/// unit exponentials, so 1/r_i³ = (4π/3)/V_i. Couplings come out ordered
/// from strongest to weakest.
pub fn sample_couplings(cfg: &BathNoiseConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(COUPLING_STREAM);
    let ball = 4.0 * core::f64::consts::PI / 3.0;
    let mut volume = 0.0;
    let mut out = Vec::with_capacity(cfg.n_sources);
    for _ in 0..cfg.n_sources {
        let e: f64 = rng.sample(Exp1);
        volume += e;
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        out.push(sign * cfg.coupling_scale * ball / volume);
    }
    Ok(out)
}

fn check_grid(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::domain("delay grid is empty"));
    }
    if taus.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::domain("delays must be finite and >= 0"));
    }
    if taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("delay grid must be ascending"));
    }
    Ok(())
}

/// Running mean and variance per delay, fed one realization at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoAccumulator {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl EchoAccumulator {
    pub fn new(len: usize) -> Self {
        EchoAccumulator {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn push(&mut self, sample: &[f64]) {
        debug_assert_eq!(sample.len(), self.mean.len());
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(sample) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// (mean, standard error of the mean); the error is 0 for n < 2.
    pub fn finish(&self) -> (Vec<f64>, Vec<f64>) {
        let se = if self.n < 2 {
            vec![0.0; self.mean.len()]
        } else {
            let denom = (self.n * (self.n - 1)) as f64;
            self.m2.iter().map(|s| libm::sqrt(s.max(0.0) / denom)).collect()
        };
        (self.mean.clone(), se)
    }
}

/// A fixed bath (couplings, rate) and delay grid. Immutable; realizations
/// can be generated from any thread in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoSimulation {
    couplings: Vec<f64>,
    rate: f64,
    seed: u64,
    taus: Vec<f64>,
    /// Sorted union of τ and 2τ.
    queries: Vec<f64>,
    /// Positions of τ_k and 2τ_k in `queries`.
    index: Vec<(usize, usize)>,
}

impl EchoSimulation {
    pub fn new(couplings: Vec<f64>, rate: f64, seed: u64, taus: &[f64]) -> Result<Self> {
        check_grid(taus)?;
        if couplings.is_empty() {
            return Err(Error::domain("at least one noise source is required"));
        }
        if couplings.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("couplings must be finite"));
        }
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::domain(format!("switching rate must be >= 0, got {rate}")));
        }
        let mut queries: Vec<f64> = taus.iter().flat_map(|&t| [t, 2.0 * t]).collect();
        queries.sort_by(f64::total_cmp);
        queries.dedup();
        let find = |v: f64| queries.binary_search_by(|q| q.total_cmp(&v)).unwrap_or(0);
        let index = taus.iter().map(|&t| (find(t), find(2.0 * t))).collect();
        Ok(EchoSimulation {
            couplings,
            rate,
            seed,
            taus: taus.to_vec(),
            queries,
            index,
        })
    }

    pub fn from_config(cfg: &BathNoiseConfig, taus: &[f64]) -> Result<Self> {
        Self::new(sample_couplings(cfg)?, cfg.effective_rate()?, cfg.seed, taus)
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// cos Φ(τ_k) for realization `r`.
    pub fn realization(&self, r: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(r);
        let nq = self.queries.len();
        let mut integral = vec![0.0; nq];
        let mut phase = vec![0.0; self.taus.len()];
        for &b in &self.couplings {
            let mut s: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let mut t = 0.0;
            let mut acc = 0.0;
            let mut next = self.next_flip(&mut rng, t);
            for (q, &tq) in self.queries.iter().enumerate() {
                while next <= tq {
                    acc += s * (next - t);
                    t = next;
                    s = -s;
                    next = self.next_flip(&mut rng, t);
                }
                integral[q] = acc + s * (tq - t);
            }
            for (k, &(i1, i2)) in self.index.iter().enumerate() {
                phase[k] += b * (2.0 * integral[i1] - integral[i2]);
            }
        }
        phase.iter().map(|&p| libm::cos(p)).collect()
    }

    fn next_flip(&self, rng: &mut ChaCha8Rng, t: f64) -> f64 {
        if self.rate > 0.0 {
            let e: f64 = rng.sample(Exp1);
            t + e / self.rate
        } else {
            f64::INFINITY
        }
    }

    /// Serial run over realizations 0..n.
    pub fn run(&self, n_realizations: usize) -> Result<DecayTrace> {
        if n_realizations == 0 {
            return Err(Error::domain("n_realizations must be >= 1"));
        }
        let mut acc = EchoAccumulator::new(self.taus.len());
        for r in 0..n_realizations as u64 {
            acc.push(&self.realization(r));
        }
        Ok(self.trace(&acc))
    }

    /// Package accumulated realizations as a trace.
    pub fn trace(&self, acc: &EchoAccumulator) -> DecayTrace {
        let (amplitude, std_error) = acc.finish();
        DecayTrace {
            sequence: Sequence::HahnEcho,
            delays: self.taus.clone(),
            amplitude,
            std_error,
            n_realizations: acc.count(),
            seed: self.seed,
        }
    }
}

pub fn simulate_hahn_echo(cfg: &BathNoiseConfig, taus: &[f64], n_realizations: usize) -> Result<DecayTrace> {
    EchoSimulation::from_config(cfg, taus)?.run(n_realizations)
}

/// Ideal echo-detected inversion recovery, 1 − 2·exp(−T/T₁), with optional
/// Gaussian noise of standard deviation `noise` (reported as the error).
pub fn simulate_inversion_recovery(t1: f64, delays: &[f64], noise: f64, seed: u64) -> Result<DecayTrace> {
    if !(t1.is_finite() && t1 > 0.0) {
        return Err(Error::domain(format!("T1 must be > 0 s, got {t1}")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::domain("noise amplitude must be >= 0"));
    }
    check_grid(delays)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitude = delays
        .iter()
        .map(|&t| {
            let clean = 1.0 - 2.0 * libm::exp(-t / t1);
            if noise > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                clean + noise * z
            } else {
                clean
            }
        })
        .collect();
    Ok(DecayTrace {
        sequence: Sequence::InversionRecovery,
        delays: delays.to_vec(),
        amplitude,
        std_error: vec![noise; delays.len()],
        n_realizations: 1,
        seed,
    })
}

/// Fit a·exp(−2τ/T₂) to an echo trace (unweighted); returns (T₂, σ_T₂).
pub fn fit_echo_t2(trace: &DecayTrace) -> Result<(f64, f64, bool)> {
    let data = Series::unweighted(trace.delays.clone(), trace.amplitude.clone())?;
    let init = ECHO_DECAY.initial_guess(&data, &GuessContext::default());
    let res = fit::fit(&ECHO_DECAY, &data, &init, &FitOptions::default())?;
    Ok((res.params[1], res.stderr[1], res.converged))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T2ScanPoint {
    pub temperature: f64,
    pub flip_flop_factor: f64,
    /// Per-source switching rate at this temperature, s⁻¹.
    pub rate: f64,
    /// Fitted T₂, s.
    pub t2: f64,
    pub t2_stderr: f64,
}

/// Number of delays on each scan grid.
pub const SCAN_GRID_POINTS: usize = 41;

/// Delay grid for a scan point: 0 to 1.5·(n·γ)⁻¹, the echo time expected
/// when every switch of a strongly coupled source erases the coherence.
/// The span is capped at 10⁴ times its unpolarized value.
pub fn scan_grid(cfg: &BathNoiseConfig) -> Result<Vec<f64>> {
    let rate = cfg.effective_rate()?;
    let n = cfg.n_sources as f64;
    let floor = cfg.base_rate * 1e-4;
    let span = if rate.max(floor) > 0.0 {
        1.5 / (n * rate.max(floor))
    } else {
        1.5 / cfg.coupling_scale.max(1.0)
    };
    Ok((0..SCAN_GRID_POINTS)
        .map(|k| span * k as f64 / (SCAN_GRID_POINTS - 1) as f64)
        .collect())
}

/// Simulate and fit the echo at each temperature with the serial runner.
pub fn effective_t2_scan(
    template: &BathNoiseConfig,
    temperatures: &[f64],
    n_realizations: usize,
) -> Result<Vec<T2ScanPoint>> {
    effective_t2_scan_with(template, temperatures, |sim| sim.run(n_realizations))
}

/// As [`effective_t2_scan`], with the caller supplying how a simulation is
/// run (e.g. in parallel). Every temperature shares the template seed.
pub fn effective_t2_scan_with<F>(template: &BathNoiseConfig, temperatures: &[f64], mut run: F) -> Result<Vec<T2ScanPoint>>
where
    F: FnMut(&EchoSimulation) -> Result<DecayTrace>,
{
    let mut out = Vec::with_capacity(temperatures.len());
    for &temperature in temperatures {
        let cfg = template.at_temperature(temperature);
        let fail = |reason: alloc::string::String| Error::ScanFit { temperature, reason };
        let taus = scan_grid(&cfg).map_err(|e| fail(format!("{e}")))?;
        let sim = EchoSimulation::from_config(&cfg, &taus).map_err(|e| fail(format!("{e}")))?;
        let trace = run(&sim)?;
        let (t2, t2_stderr, converged) = fit_echo_t2(&trace).map_err(|e| fail(format!("{e}")))?;
        if !converged {
            return Err(fail("echo fit did not converge".into()));
        }
        out.push(T2ScanPoint {
            temperature,
            flip_flop_factor: flip_flop_factor(temperature, cfg.t_ze)?,
            rate: sim.rate(),
            t2,
            t2_stderr,
        });
    }
    Ok(out)
}
