use mediflow_core::kinematics::Kinematics;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use proptest::prelude::*;

const PI_40: &str = "3.1415926535897932384626433832795028841971";

fn pi() -> BigRational {
    let digits: BigInt = PI_40.replace('.', "").parse().unwrap();
    BigRational::new(digits, BigInt::from(10).pow(40))
}

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn step_ul(step: f64, d: f64) -> BigRational {
    let r = q(d) / BigRational::from_integer(2.into());
    pi() * &r * &r * q(step)
}

fn ulps_f64(x: f64, truth: &BigRational) -> f64 {
    let ulp = f64::from_bits(x.to_bits() + 1) - x;
    ((q(x) - truth).abs() / q(ulp)).to_f64().unwrap()
}

fn ulps_f32(x: f32, truth: &BigRational) -> f64 {
    let ulp = f32::from_bits(x.to_bits() + 1) - x;
    ((q(x as f64) - truth).abs() / q(ulp as f64)).to_f64().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn f64_matches_exact(volume in 0.001f64..200.0, rate in 0.01f64..2000.0, d in 0.5f64..60.0, step in 1e-4f64..0.05) {
        let k = Kinematics::<f64>::new(step, d, 1.0).unwrap();
        let per_step = step_ul(step, d);
        let steps = q(volume) * BigRational::from_integer(1000.into()) / &per_step;
        let half = BigRational::new(1.into(), 2.into());
        let expect = (steps + half).floor().to_integer();
        prop_assert_eq!(BigInt::from(k.volume_to_steps(volume).unwrap()), expect);

        let interval = &per_step * BigRational::from_integer(3600.into()) / (q(rate) * BigRational::from_integer(1000.into()));
        prop_assert!(ulps_f64(k.rate_to_step_interval(rate).unwrap(), &interval) <= 1.0);
        prop_assert!(ulps_f64(k.volume_per_step_ul(), &per_step) <= 1.0);
    }

    #[test]
    fn f32_matches_exact(rate in 0.1f32..500.0, d in 1.0f32..40.0) {
        let k = Kinematics::<f32>::new(0.0018, d, 1.0).unwrap();
        let step = 0.0018f32 as f64;
        let per_step = step_ul(step, d as f64);
        let interval = &per_step * BigRational::from_integer(3600.into()) / (q(rate as f64) * BigRational::from_integer(1000.into()));
        prop_assert!(ulps_f32(k.rate_to_step_interval(rate).unwrap(), &interval) <= 1.0);
    }
}

#[test]
fn f32_and_f64_agree_on_the_default_syringe() {
    let single = Kinematics::<f32>::default();
    let double = Kinematics::<f64>::default();
    assert_eq!(
        single.volume_to_steps(2.0).unwrap(),
        double.volume_to_steps(2.0).unwrap()
    );
    assert_eq!(single.volume_to_steps(5.0).unwrap(), 16822);
}
