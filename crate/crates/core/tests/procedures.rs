//! Single-dataset procedures checked against their sampling properties.

use skewgof::distributions::SlParams;
use skewgof::gof::{composite_test, simple_test, Shape, TestConfig};
use skewgof::{Family, FamilySpec, SeedSpec};

/// Composite SL test on data drawn from the null: the share of p ≤ 0.05 over
/// 200 datasets lies in [0.01, 0.10] and the p-values are centred on 1/2.
#[test]
fn composite_test_holds_its_level_on_null_data() {
    let truth = FamilySpec::Sl(SlParams::canonical(2, 3.0));
    let datasets = 200;
    let mut rejections = 0;
    let mut p_sum = 0.0;
    for k in 0..datasets {
        let x = truth.sample(40, &mut SeedSpec::new(900 + k).stream()).unwrap();
        let mut cfg = TestConfig::composite(Family::Sl, 40);
        cfg.bootstrap = 39;
        cfg.seed = 5000 + k;
        let out = composite_test(&x, &cfg).unwrap();
        let p = out.p_value.unwrap();
        assert!(p > 0.0 && p <= 1.0);
        rejections += usize::from(out.reject);
        p_sum += p;
    }
    let mean_p = p_sum / datasets as f64;
    assert!((2..=20).contains(&rejections), "{rejections} rejections of {datasets}");
    assert!((0.4..=0.6).contains(&mean_p), "mean p-value {mean_p}");
}

/// With a fixed shape far from the data's, the simple test rejects; at the
/// data's own shape it does not, for the same data and seed.
#[test]
fn simple_test_separates_shapes() {
    let x = FamilySpec::Sl(SlParams::canonical(2, 0.0))
        .sample(400, &mut SeedSpec::new(31).stream())
        .unwrap();
    let mut cfg = TestConfig::simple(Shape::Sl { alpha_star: 8.0 }, 400);
    cfg.replications = 99;
    cfg.seed = 7;
    let far = simple_test(&x, &cfg).unwrap();
    cfg.lambda0 = Some(Shape::Sl { alpha_star: 0.0 });
    let near = simple_test(&x, &cfg).unwrap();
    assert!(far.reject, "statistic {} critical {:?}", far.statistic.value, far.critical_value);
    assert!(!near.reject, "statistic {} critical {:?}", near.statistic.value, near.critical_value);
    assert!(far.statistic.value > near.statistic.value);
}
