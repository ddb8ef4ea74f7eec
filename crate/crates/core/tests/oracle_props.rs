use delta_bounds::oracle::{self, exact_log_product_volume, NeighborhoodSpec};
use delta_bounds::linalg::Vector;
use proptest::prelude::*;

fn factor() -> impl Strategy<Value = NeighborhoodSpec> {
    (1usize..=3, any::<bool>(), 0.3f64..2.0).prop_map(|(d, ball, r)| {
        if ball {
            NeighborhoodSpec::ball(d, r)
        } else {
            NeighborhoodSpec::cube(d, r)
        }
    })
}

fn log_product() -> impl Strategy<Value = NeighborhoodSpec> {
    (factor(), factor(), 0.3f64..2.0, 0.3f64..2.0, 0.01f64..1.0).prop_map(|(u, v, r1, r2, t)| {
        let max = r1.powi(u.dim() as i32) * r2.powi(v.dim() as i32);
        NeighborhoodSpec::log_product(u, v, r1, r2, t * max)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn log_product_samples_lie_inside(spec in log_product(), seed in any::<u64>()) {
        for x in oracle::sample_many(&spec, 200, seed).unwrap() {
            prop_assert!(spec.contains(&x));
        }
    }

    #[test]
    fn split_chain_samples_lie_inside(u in factor(), v in factor(), eps in 1e-4f64..1.0, seed in any::<u64>()) {
        let spec = NeighborhoodSpec::split_chain(u, v, eps, None);
        for x in oracle::sample_many(&spec, 200, seed).unwrap() {
            prop_assert!(spec.contains(&x));
        }
    }

    #[test]
    fn gauge_is_homogeneous(spec in factor(), t in 0.1f64..5.0, seed in any::<u64>()) {
        let x = oracle::sample_many(&spec, 1, seed).unwrap().remove(0);
        let g = spec.gauge(&x);
        prop_assert!((spec.gauge(&(&x * t)) - t * g).abs() <= 1e-12 * (1.0 + t * g));
        prop_assert!(g < 1.0);
    }

    #[test]
    fn log_volume_grows_with_eps(d1 in 1usize..=3, d2 in 1usize..=3, r1 in 0.3f64..2.0, r2 in 0.3f64..2.0, a in 0.01f64..0.5, b in 0.5f64..1.0) {
        let max = r1.powi(d1 as i32) * r2.powi(d2 as i32);
        let small = exact_log_product_volume(d1, d2, 1.0, 1.0, r1, r2, a * max).unwrap();
        let large = exact_log_product_volume(d1, d2, 1.0, 1.0, r1, r2, b * max).unwrap();
        prop_assert!(small > 0.0 && small < large);
        // At ε = R1^{d1} R2^{d2} the set is the product of the scaled factors.
        let full = exact_log_product_volume(d1, d2, 1.0, 1.0, r1, r2, max).unwrap();
        prop_assert!((full - max).abs() <= 1e-12 * max);
    }

    #[test]
    fn inner_margin_implies_membership(spec in log_product(), r in 1e-4f64..0.2, seed in any::<u64>()) {
        for x in oracle::sample_many(&spec, 100, seed).unwrap() {
            if spec.inner_margin_contains(&x, r).unwrap() {
                // Probe the margin along the coordinate axes.
                for i in 0..x.len() {
                    for s in [-1.0, 1.0] {
                        let mut y = x.clone();
                        y[i] += 0.999 * s * r;
                        prop_assert!(spec.contains(&y));
                    }
                }
            }
        }
    }

    #[test]
    fn ball_volume_estimate_within_four_sigma(d in 1usize..=4, r in 0.2f64..3.0, seed in any::<u64>()) {
        let spec = NeighborhoodSpec::ball(d, r);
        let est = oracle::mc_volume(&spec, 20_000, seed).unwrap();
        prop_assert!(est.within(spec.exact_volume().unwrap(), 4.5));
    }
}

#[test]
fn exact_volume_rejects_large_eps() {
    assert!(exact_log_product_volume(1, 1, 2.0, 2.0, 1.0, 1.0, 1.5).is_err());
    assert!(exact_log_product_volume(1, 1, 2.0, 2.0, 1.0, 1.0, 0.0).is_err());
}

#[test]
fn bounding_boxes_contain_samples() {
    let spec = NeighborhoodSpec::log_product(NeighborhoodSpec::ball(2, 1.0), NeighborhoodSpec::cube(1, 1.0), 1.5, 0.5, 0.2);
    let bbox = spec.bbox();
    for x in oracle::sample_many(&spec, 2000, 1).unwrap() {
        assert!(x.iter().zip(&bbox).all(|(v, w)| v.abs() <= *w));
    }
    assert!(spec.contains(&Vector::zeros(3)));
}
