use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spinbath_core::fit::{fit, FitOptions, GuessContext, ModelSpec, Series, ECHO_DECAY, INVERSION_RECOVERY, T1_MODEL, T2_MODEL};

const T2_GRID: [f64; 16] = [1.7, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 40.0, 80.0, 150.0, 300.0];
const T2_TRUE: [f64; 3] = [0.581, 14.7, 0.004];
const T1_GRID: [f64; 8] = [40.0, 60.0, 80.0, 100.0, 150.0, 200.0, 250.0, 300.0];
const T1_TRUE: [f64; 2] = [8.0e-3, 3.5e-10];

fn synth(model: &ModelSpec, p: &[f64], x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| (model.eval)(p, v)).collect()
}

fn noisy(model: &ModelSpec, p: &[f64], x: &[f64], rel: f64, rng: &mut ChaCha8Rng) -> Series {
    let clean = synth(model, p, x);
    let y = clean.iter().map(|&v| v * (1.0 + rel * rng.sample::<f64, _>(StandardNormal))).collect();
    let sigma = clean.iter().map(|&v| rel * v).collect();
    Series::new(x.to_vec(), y, sigma).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn noiseless_round_trips_for_every_model() {
    let echo_x: Vec<f64> = (0..40).map(|k| k as f64 * 0.5e-6).collect();
    let ir_x: Vec<f64> = (0..40).map(|k| k as f64 * 0.2e-3).collect();
    let cases: [(&ModelSpec, Vec<f64>, Vec<f64>); 4] = [
        (&ECHO_DECAY, vec![0.9, 7e-6], echo_x),
        (&INVERSION_RECOVERY, vec![1.0, 2.0, 1.2e-3], ir_x),
        (&T1_MODEL, T1_TRUE.to_vec(), T1_GRID.to_vec()),
        (&T2_MODEL, T2_TRUE.to_vec(), T2_GRID.to_vec()),
    ];
    for (model, truth, x) in cases {
        let data = Series::unweighted(x.clone(), synth(model, &truth, &x)).unwrap();
        let init = model.initial_guess(&data, &GuessContext::default());
        let res = fit(model, &data, &init, &FitOptions::default()).unwrap();
        assert!(res.converged, "{}: {:?}", model.name, res.termination);
        for (got, want) in res.params.iter().zip(&truth) {
            assert!(((got - want) / want).abs() < 1e-6, "{}: {got} vs {want}", model.name);
        }
    }
}

#[test]
fn echo_from_three_microseconds() {
    let x: Vec<f64> = (0..30).map(|k| k as f64 * 0.5e-6).collect();
    let data = Series::unweighted(x.clone(), synth(&ECHO_DECAY, &[1.0, 7e-6], &x)).unwrap();
    let res = fit(&ECHO_DECAY, &data, &[1.0, 3e-6], &FitOptions::default()).unwrap();
    assert!(((res.params[1] - 7e-6) / 7e-6).abs() < 1e-8);
}

#[test]
fn t2_model_monte_carlo_study() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut t_ze = Vec::new();
    let mut covered = 0;
    let trials = 200;
    for _ in 0..trials {
        let data = noisy(&T2_MODEL, &T2_TRUE, &T2_GRID, 0.05, &mut rng);
        let init = T2_MODEL.initial_guess(&data, &GuessContext::default());
        let res = fit(&T2_MODEL, &data, &init, &FitOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.params[2], 0.004);
        if (res.params[1] - T2_TRUE[1]).abs() <= res.stderr[1] {
            covered += 1;
        }
        t_ze.push(res.params[1]);
    }
    let med = median(t_ze);
    let coverage = covered as f64 / trials as f64;
    assert!((med - 14.7).abs() <= 0.8, "median T_Ze {med}");
    assert!((0.55..=0.80).contains(&coverage), "coverage {coverage}");
}

#[test]
fn t1_model_noisy_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let data = noisy(&T1_MODEL, &T1_TRUE, &T1_GRID, 0.10, &mut rng);
    let init = T1_MODEL.initial_guess(&data, &GuessContext::default());
    let res = fit(&T1_MODEL, &data, &init, &FitOptions::default()).unwrap();
    assert!(res.converged);
    for (j, want) in T1_TRUE.iter().enumerate() {
        assert!((res.params[j] - want).abs() <= 2.0 * res.stderr[j], "{j}: {} ± {}", res.params[j], res.stderr[j]);
    }
}

#[test]
fn sigma_scaling_leaves_estimates_and_scales_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = noisy(&T2_MODEL, &T2_TRUE, &T2_GRID, 0.05, &mut rng);
    let k = 3.0;
    let scaled = Series::new(data.x().to_vec(), data.y().to_vec(), data.sigma().iter().map(|s| k * s).collect()).unwrap();
    let init = T2_MODEL.initial_guess(&data, &GuessContext::default());
    let a = fit(&T2_MODEL, &data, &init, &FitOptions::default()).unwrap();
    let b = fit(&T2_MODEL, &scaled, &init, &FitOptions::default()).unwrap();
    for (x, y) in a.params.iter().zip(&b.params) {
        assert!(((x - y) / x).abs() < 1e-8, "{x} vs {y}");
    }
    for (x, y) in a.covariance.iter().zip(&b.covariance) {
        if *x != 0.0 {
            assert!((y / (k * k * x) - 1.0).abs() < 1e-6, "{x} vs {y}");
        }
    }
    // Scaled stderr is invariant because the reduced chi-square absorbs k².
    for (x, y) in a.stderr.iter().zip(&b.stderr) {
        if *x != 0.0 {
            assert!((y / x - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn cost_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let data = noisy(&T2_MODEL, &T2_TRUE, &T2_GRID, 0.2, &mut rng);
        let res = fit(&T2_MODEL, &data, &[5.0, 40.0, 0.004], &FitOptions::default()).unwrap();
        assert!(res.cost_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.stderr.iter().all(|s| *s >= 0.0));
    }
}

#[test]
fn freed_gamma_is_fitted() {
    let x = T2_GRID.to_vec();
    let data = Series::unweighted(x.clone(), synth(&T2_MODEL, &[0.6, 14.0, 0.005], &x)).unwrap();
    let res = fit(&T2_MODEL, &data, &[0.5, 11.5, 0.004], &FitOptions::with_fixed(vec![false; 3])).unwrap();
    assert!(res.converged);
    assert!((res.params[2] - 0.005).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reordering_is_bit_identical(seed in any::<u64>(), rot in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = noisy(&T2_MODEL, &T2_TRUE, &T2_GRID, 0.05, &mut rng);
        let n = data.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + rot) % n).collect();
        let shuffled = Series::new(
            perm.iter().map(|&i| data.x()[i]).collect(),
            perm.iter().map(|&i| data.y()[i]).collect(),
            perm.iter().map(|&i| data.sigma()[i]).collect(),
        ).unwrap();
        let init = [0.5, 11.5, 0.004];
        let a = fit(&T2_MODEL, &data, &init, &FitOptions::default()).unwrap();
        let b = fit(&T2_MODEL, &shuffled, &init, &FitOptions::default()).unwrap();
        prop_assert_eq!(&a.params, &b.params);
        prop_assert_eq!(a.chi2.to_bits(), b.chi2.to_bits());
        for (j, &i) in perm.iter().enumerate() {
            prop_assert_eq!(a.residuals[i].to_bits(), b.residuals[j].to_bits());
        }
    }

    #[test]
    fn fixed_parameters_pass_through(c in 0.1f64..2.0, gamma in 1e-4f64..0.05) {
        let x = T2_GRID.to_vec();
        let data = Series::unweighted(x.clone(), synth(&T2_MODEL, &[c, 14.7, gamma], &x)).unwrap();
        let init = [c, 12.0, gamma * 1.37];
        let res = fit(&T2_MODEL, &data, &init, &FitOptions::with_fixed(vec![true, false, true])).unwrap();
        prop_assert_eq!(res.params[0].to_bits(), init[0].to_bits());
        prop_assert_eq!(res.params[2].to_bits(), init[2].to_bits());
    }
}
