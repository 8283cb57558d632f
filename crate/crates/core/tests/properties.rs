use proptest::prelude::*;
use spinbath_core::bath::{flip_flop_factor, polarization, t1_rate, t2_rate, T1Params, T2Params};
use spinbath_core::pulse::{simulate_hahn_echo, BathNoiseConfig};
use spinbath_core::spin::{field_to_frequency, frequency_to_field, zeeman_temperature};
use spinbath_core::units::{PerMicrosecond, PerSecond};

proptest! {
    #[test]
    fn flip_flop_is_one_minus_p_squared_over_four(log_t in -2.0f64..6.0, t_ze in 0.1f64..100.0) {
        let t = 10f64.powf(log_t);
        let p = polarization(t, t_ze).unwrap();
        let f = flip_flop_factor(t, t_ze).unwrap();
        prop_assert!((f - (1.0 - p.polarization * p.polarization) / 4.0).abs() < 1e-14);
        prop_assert!((0.0..=0.25).contains(&f));
        let (down, up) = p.level_populations;
        prop_assert!((down + up - 1.0).abs() < 1e-15 && down >= up);
    }

    #[test]
    fn rates_grow_with_temperature(t in 0.1f64..500.0, dt in 0.0f64..100.0) {
        let p2 = T2Params::nv_reference();
        prop_assert!(t2_rate(t + dt, &p2).unwrap().0 >= t2_rate(t, &p2).unwrap().0);
        let p1 = T1Params::nitrogen_reference();
        prop_assert!(t1_rate(t + dt, &p1).unwrap().0 >= t1_rate(t, &p1).unwrap().0);
    }

    #[test]
    fn field_frequency_round_trip(b in 1e-3f64..20.0, g in 1.9f64..2.1) {
        let nu = field_to_frequency(b, g).unwrap();
        prop_assert!((frequency_to_field(nu, g).unwrap() / b - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zeeman_temperature_is_linear(f in 1e9f64..1e12) {
        let a = zeeman_temperature(f).unwrap();
        let b = zeeman_temperature(2.0 * f).unwrap();
        prop_assert!((b / a - 2.0).abs() < 1e-14);
    }

    #[test]
    fn unit_conversions_invert(r in 1e-6f64..1e9) {
        let back = PerSecond(r).to_per_microsecond().to_per_second().0;
        prop_assert!((back / r - 1.0).abs() < 1e-15);
        prop_assert!((PerMicrosecond(r).time_us() * r - 1.0).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn echo_amplitude_is_bounded_and_deterministic(seed in any::<u64>(), t in 1.0f64..400.0) {
        let cfg = BathNoiseConfig { seed, temperature: t, ..BathNoiseConfig::default() };
        let taus = [0.0, 1e-6, 4e-6, 1e-5];
        let a = simulate_hahn_echo(&cfg, &taus, 64).unwrap();
        let b = simulate_hahn_echo(&cfg, &taus, 64).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.amplitude[0], 1.0);
        prop_assert!(a.amplitude.iter().all(|x| (-1.0..=1.0).contains(x)));
        prop_assert!(a.std_error.iter().all(|s| *s >= 0.0));
    }
}
