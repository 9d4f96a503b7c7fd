use std::f64::consts::FRAC_PI_2;

use pic_core::{gain_range, stage_control, stage_gain, FunnelParams, StageControllerParams};
use proptest::prelude::*;

fn funnel_params() -> impl Strategy<Value = FunnelParams> {
    (1e-3f64..5.0, 0.0f64..5.0, 1e-2f64..5.0)
        .prop_map(|(q, extra, mu)| FunnelParams::new(q + extra, q, mu).unwrap())
}

fn stage_params() -> impl Strategy<Value = StageControllerParams> {
    (0.1f64..20.0, 0.05f64..6.0).prop_map(|(v, c)| {
        StageControllerParams::new(v, c, FunnelParams::new(1.0, 0.1, 1.0).unwrap()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn funnel_stays_between_bounds(f in funnel_params(), t in 0.0f64..50.0) {
        let v = f.value(t).unwrap();
        prop_assert!(f.q() <= v && v <= f.p());
        let (lo, hi) = f.rate_bounds();
        let r = f.rate(t).unwrap();
        prop_assert!(lo <= r && r <= hi);
    }

    #[test]
    fn funnel_is_non_increasing(f in funnel_params(), t in 0.0f64..30.0, dt in 0.0f64..5.0) {
        prop_assert!(f.value(t + dt).unwrap() <= f.value(t).unwrap());
    }

    #[test]
    fn funnel_rate_matches_central_difference(f in funnel_params(), t in 1e-4f64..20.0) {
        let h = 1e-5;
        let fd = (f.value(t + h).unwrap() - f.value(t - h).unwrap()) / (2.0 * h);
        prop_assert!((fd - f.rate(t).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn control_is_odd(s in stage_params(), theta in -0.999f64..0.999) {
        let a = stage_control(theta, &s).unwrap();
        let b = stage_control(-theta, &s).unwrap();
        prop_assert!((a + b).abs() <= 1e-12);
    }

    #[test]
    fn control_is_strictly_decreasing(s in stage_params(), a in -0.99f64..0.99, gap in 1e-6f64..0.5) {
        let b = (a + gap).min(0.999);
        prop_assume!(b > a);
        prop_assert!(stage_control(a, &s).unwrap() > stage_control(b, &s).unwrap());
    }

    #[test]
    fn control_is_bounded(s in stage_params(), theta in -0.999_999f64..0.999_999) {
        prop_assert!(stage_control(theta, &s).unwrap().abs() < s.v_bar());
    }

    #[test]
    fn gain_is_negative_and_in_range(s in stage_params(), theta in -0.999_999f64..0.999_999) {
        let phi = stage_gain(theta, &s).unwrap();
        let (lo, hi) = gain_range(&s);
        let slack = 1e-12 * lo.abs();
        prop_assert!(phi < 0.0);
        prop_assert!(lo <= hi && hi < 0.0);
        prop_assert!(lo - slack <= phi && phi <= hi + slack, "{} not in [{}, {}]", phi, lo, hi);
    }

    #[test]
    fn gain_matches_central_difference(s in stage_params(), theta in -0.99f64..0.99) {
        let h = 1e-6;
        let fd = (stage_control(theta + h, &s).unwrap() - stage_control(theta - h, &s).unwrap()) / (2.0 * h);
        let phi = stage_gain(theta, &s).unwrap();
        prop_assert!((fd - phi).abs() < 1e-6, "fd {} vs phi {}", fd, phi);
    }

    #[test]
    fn half_pi_shape_is_linear(v in 0.1f64..20.0, theta in -0.999f64..0.999) {
        let s = StageControllerParams::new(v, FRAC_PI_2, FunnelParams::new(1.0, 0.1, 1.0).unwrap()).unwrap();
        prop_assert!((stage_control(theta, &s).unwrap() + v * theta).abs() <= 1e-12);
    }
}
