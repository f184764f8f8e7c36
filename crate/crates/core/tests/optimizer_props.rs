mod common;

use aor_core::analytic::{rp_aoi_gaw, sp_avg_aoi};
use aor_core::optimizer::{
    grid_search_p, kappa_coeffs, optimal_p_rp, optimal_p_sp, sp_threshold, OptCase,
};
use aor_core::{ChannelParams, Protocol};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn analytic_channel() -> impl Strategy<Value = ChannelParams> {
    (0.01f64..0.95, 0.0f64..1.0, 0.0f64..1.0).prop_filter_map("domain", |(p1, a, b)| {
        ChannelParams::analytic(p1, p1 + (1.0 - p1) * a, p1 + (1.0 - p1) * b).ok()
    })
}

proptest! {
    #[test]
    fn quadratic_signs_and_discriminant(c in analytic_channel()) {
        let k = kappa_coeffs(c).unwrap();
        prop_assert!(k.xi < 0.0);
        prop_assert!(k.discriminant() > 0.0);
        let ChannelParams { p1, p2, p3 } = c;
        let either = p1 + p2 - p1 * p2;
        let expected = 4.0 * p2 * p3 * p3 * (p3 - p1) * (1.0 - p1) * either * either;
        let scale = k.lambda * k.lambda + (4.0 * k.mu * k.xi).abs();
        prop_assert!((k.discriminant() - expected).abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn threshold_is_a_probability(p2 in 0.001f64..0.999, p3 in 0.001f64..0.999) {
        let t = sp_threshold(p2, p3);
        prop_assert!(t > 0.0 && t < 1.0, "{t}");
    }

    #[test]
    fn derivative_sign_follows_quadratic(c in analytic_channel(), p in 0.02f64..0.98) {
        let k = kappa_coeffs(c).unwrap();
        let h = 1e-6;
        let slope = sp_avg_aoi(c, g(p + h)).unwrap() - sp_avg_aoi(c, g(p - h)).unwrap();
        let kv = k.eval(p);
        // Skip points where either side is within rounding of zero.
        prop_assume!(kv.abs() > 1e-9 * (k.mu.abs() + k.lambda.abs() + k.xi.abs()));
        prop_assume!(slope.abs() > 1e-9);
        prop_assert_eq!(slope > 0.0, kv > 0.0);
    }

    #[test]
    fn optimum_matches_grid(c in analytic_channel()) {
        let opt = optimal_p_sp(c).unwrap();
        prop_assert!(opt.p_star > 0.0 && opt.p_star <= 1.0);
        prop_assert_eq!(opt.aoi_at_p_star, sp_avg_aoi(c, g(opt.p_star)).unwrap());
        let grid = grid_search_p(c, Protocol::SourcePrioritized, 1000).unwrap();
        prop_assert!((grid - opt.p_star).abs() <= 1e-3 + 1e-9, "{} vs {}", grid, opt.p_star);
        let rp = optimal_p_rp(c).unwrap();
        prop_assert_eq!(rp.p_star, 1.0);
        prop_assert_eq!(rp.aoi_at_p_star, rp_aoi_gaw(c).unwrap());
        prop_assert_eq!(grid_search_p(c, Protocol::RelayPrioritized, 200).unwrap(), 1.0);
    }
}

#[test]
fn case_four_never_occurs() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10_000 {
        let k = kappa_coeffs(random_channel(&mut rng)).unwrap();
        assert!(!(k.mu < 0.0 && k.lambda > 0.0), "{k:?}");
    }
}

#[test]
fn interior_optimum_is_unimodal() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut checked = 0;
    while checked < 50 {
        let c = random_channel(&mut rng);
        let opt = optimal_p_sp(c).unwrap();
        if opt.case_tag != OptCase::InteriorRoot {
            continue;
        }
        checked += 1;
        let grid: Vec<f64> = (1..=1000).map(|k| k as f64 / 1000.0).collect();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (sp_avg_aoi(c, g(a)).unwrap(), sp_avg_aoi(c, g(b)).unwrap());
            if b < opt.p_star {
                assert!(fb < fa, "{c}: not decreasing at {a}");
            } else if a > opt.p_star {
                assert!(fb > fa, "{c}: not increasing at {a}");
            }
        }
    }
}

#[test]
fn threshold_joins_both_branches() {
    let mut checked = 0;
    for p2 in [0.3, 0.5, 0.6, 0.8, 0.95] {
        for p3 in [0.3, 0.5, 0.6, 0.8, 0.95] {
            let t = sp_threshold(p2, p3);
            let (Ok(lo), Ok(hi)) = (
                ChannelParams::analytic(t - 1e-6, p2, p3),
                ChannelParams::analytic(t + 1e-6, p2, p3),
            ) else {
                continue;
            };
            checked += 1;
            let below = optimal_p_sp(lo).unwrap();
            let above = optimal_p_sp(hi).unwrap();
            assert_eq!(below.case_tag, OptCase::InteriorRoot);
            assert_eq!(above.case_tag, OptCase::BoundaryOne);
            assert!(
                (below.p_star - 1.0).abs() < 1e-3,
                "{p2},{p3}: {}",
                below.p_star
            );
        }
    }
    assert!(checked >= 10, "{checked}");
}

#[test]
fn reported_operating_points() {
    let cases = [
        ((0.2, 0.8, 0.8), 0.616),
        ((0.2, 0.3, 0.8), 0.662),
        ((0.2, 0.8, 0.3), 0.826),
    ];
    for ((a, b, c), want) in cases {
        let opt = optimal_p_sp(ch(a, b, c)).unwrap();
        assert!((opt.p_star - want).abs() < 5e-3, "{}", opt.p_star);
        assert_eq!(opt.case_tag, OptCase::InteriorRoot);
    }
    for (a, b, c) in [(0.2, 0.3, 0.3), (0.7, 0.8, 0.8)] {
        let opt = optimal_p_sp(ch(a, b, c)).unwrap();
        assert_eq!(opt.p_star, 1.0);
        assert_eq!(opt.case_tag, OptCase::BoundaryOne);
    }
}
