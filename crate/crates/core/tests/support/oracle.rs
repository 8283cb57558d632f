//! Reference implementations used only by tests: a fixed-step telegraph
//! integrator and the closed-form single-source echo.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Fine-step Hahn echo for one telegraph source with coupling `b` (rad/s)
/// and switching rate `gamma` (1/s). `tau_steps[k]` is τ_k in units of
/// `dt`. Returns (mean cos Φ, standard error) per τ.
pub fn fixed_step_echo(
    b: f64,
    gamma: f64,
    dt: f64,
    tau_steps: &[u64],
    n: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let max_steps = 2 * tau_steps.iter().copied().max().unwrap_or(0);
    let p_flip = gamma * dt;
    let threshold = (p_flip * 4294967296.0) as u32;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; tau_steps.len()];
    let mut sum2 = vec![0.0; tau_steps.len()];
    // integral[j] = ∫₀^{j·dt} s dt, recorded only where needed
    let mut wanted = vec![false; max_steps as usize + 1];
    for &k in tau_steps {
        wanted[k as usize] = true;
        wanted[2 * k as usize] = true;
    }
    let mut integral = vec![0.0; max_steps as usize + 1];
    for _ in 0..n {
        let mut s: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let mut acc = 0.0;
        for j in 0..=max_steps as usize {
            if wanted[j] {
                integral[j] = acc;
            }
            acc += s * dt;
            if rng.random::<u32>() < threshold {
                s = -s;
            }
        }
        for (k, &m) in tau_steps.iter().enumerate() {
            let phi = b * (2.0 * integral[m as usize] - integral[2 * m as usize]);
            let c = phi.cos();
            sum[k] += c;
            sum2[k] += c * c;
        }
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let se = sum2
        .iter()
        .zip(&mean)
        .map(|(s2, m)| ((s2 / nf - m * m).max(0.0) * nf / (nf - 1.0) / nf).sqrt())
        .collect();
    (mean, se)
}

type M2 = [[Complex64; 2]; 2];

fn expm(m: M2, t: f64) -> M2 {
    // e^{Mt} = e^{tr·t/2} [cosh(Δt) I + sinh(Δt)/Δ (M − tr/2 I)]
    let half = (m[0][0] + m[1][1]) * 0.5;
    let a = m[0][0] - half;
    let d2 = a * a + m[0][1] * m[1][0];
    let delta = d2.sqrt();
    let z = delta * t;
    let (ch, sh_over) = if z.norm() < 1e-6 {
        (Complex64::new(1.0, 0.0) + z * z * 0.5, Complex64::new(t, 0.0) * (Complex64::new(1.0, 0.0) + z * z / 6.0))
    } else {
        (z.cosh(), z.sinh() / delta)
    };
    let pre = (half * t).exp();
    let id = |i: usize, j: usize| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let shifted = m[i][j] - if i == j { half } else { Complex64::new(0.0, 0.0) };
            out[i][j] = pre * (ch * id(i, j) + sh_over * shifted);
        }
    }
    out
}

/// Exact ⟨e^{iΦ}⟩ for a stationary symmetric telegraph source: propagate
/// the phase-weighted state probabilities through both halves of the echo.
pub fn exact_echo(b: f64, gamma: f64, tau: f64) -> f64 {
    let g = Complex64::new(gamma, 0.0);
    let gen = |sign: f64| -> M2 {
        let ib = Complex64::new(0.0, sign * b);
        [[ib - g, g], [g, -ib - g]]
    };
    let first = expm(gen(1.0), tau);
    let second = expm(gen(-1.0), tau);
    let p0 = [Complex64::new(0.5, 0.0); 2];
    let mid = [
        first[0][0] * p0[0] + first[0][1] * p0[1],
        first[1][0] * p0[0] + first[1][1] * p0[1],
    ];
    let end = [
        second[0][0] * mid[0] + second[0][1] * mid[1],
        second[1][0] * mid[0] + second[1][1] * mid[1],
    ];
    (end[0] + end[1]).re
}
