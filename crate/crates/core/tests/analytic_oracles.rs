mod common;

use aor_core::analytic::{
    crossover_p1, rp_aoi_gaw, rp_avg_aoi, rp_terms, sp_aoi_gaw, sp_avg_aoi, sp_terms,
    stationary_dist,
};
use aor_core::{ChannelParams, GenProb};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn draws(n: usize, seed: u64) -> Vec<(ChannelParams, GenProb)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let c = random_channel(&mut rng);
            let p = rng.gen_range(0.01..=1.0);
            (c, g(p))
        })
        .collect()
}

#[test]
fn sp_renewal_assembly_reproduces_closed_form() {
    for (c, p) in draws(1000, 1) {
        let t = sp_terms(c, p).unwrap();
        let assembled = t.e_s + t.e_z2 / (2.0 * t.e_z) - 0.5;
        let direct = sp_avg_aoi(c, p).unwrap();
        assert!(
            rel_err(assembled, direct) < 1e-12,
            "{c} p={:?}: {assembled} vs {direct}",
            p
        );
    }
}

#[test]
fn rp_mixture_reproduces_closed_form() {
    for (c, p) in draws(1000, 2) {
        let t = rp_terms(c, p).unwrap();
        let (pe, pb) = (t.prob_empty, 1.0 - t.prob_empty);
        let e_z = pe * t.e_z_empty + pb * t.e_z_busy;
        let e_z2 = pe * t.e_z2_empty + pb * t.e_z2_busy;
        let e_yz =
            pe * (t.e_h + t.e_s_empty) * t.e_z_empty + pb * (t.e_h + t.e_s_busy) * t.e_z_busy;
        let mixture = e_yz / e_z + e_z2 / (2.0 * e_z) - 0.5;
        let closed = rp_avg_aoi(c, p).unwrap();
        assert!(
            rel_err(mixture, closed) < 1e-12,
            "{c}: {mixture} vs {closed}"
        );
    }
}

#[test]
fn stationary_law_matches_flag_chain() {
    for (c, p) in draws(1000, 3) {
        let closed = stationary_dist(c, p).unwrap().as_array();
        let oracle = power_iterate(&flag_chain(c, p.value()));
        for k in 0..4 {
            assert!(
                (closed[k] - oracle[k]).abs() < 1e-10,
                "{c} p={}: {closed:?} vs {oracle:?}",
                p.value()
            );
        }
        assert!((closed.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn stationary_law_hand_value() {
    let pi = stationary_dist(ch(0.2, 0.8, 0.8), g(1.0)).unwrap();
    assert!((pi.pi00 - 0.8 * 0.2 / (0.8 + 0.64)).abs() < 1e-12);
}

fn series_draws(n: usize, seed: u64) -> Vec<(ChannelParams, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let p1 = rng.gen_range(0.05..0.9);
            let p2 = rng.gen_range(0.05..0.95);
            let p3 = rng.gen_range(0.05..0.95);
            if let Ok(c) = ChannelParams::analytic(p1, p2, p3) {
                break (c, rng.gen_range(0.05..=1.0));
            }
        })
        .collect()
}

#[test]
fn sp_moments_match_truncated_series() {
    for (c, p) in series_draws(40, 4) {
        let t = sp_terms(c, g(p)).unwrap();
        let s = sp_series(c, p);
        assert!(
            rel_err(t.e_s, s.e_s) < 1e-8,
            "{c} p={p} E[S] {} vs {}",
            t.e_s,
            s.e_s
        );
        assert!(
            rel_err(t.e_t, s.e_t) < 1e-8,
            "{c} p={p} E[T] {} vs {}",
            t.e_t,
            s.e_t
        );
        assert!(
            rel_err(t.e_t2, s.e_t2) < 1e-8,
            "{c} p={p} E[T2] {} vs {}",
            t.e_t2,
            s.e_t2
        );
    }
}

#[test]
fn rp_moments_match_truncated_series() {
    for (c, p) in series_draws(40, 5) {
        let t = rp_terms(c, g(p)).unwrap();
        let s = rp_series(c, p);
        let sp = sp_series(c, p);
        assert!(
            rel_err(t.e_t, s.e_t) < 1e-8,
            "{c} p={p} E[T] {} vs {}",
            t.e_t,
            s.e_t
        );
        assert!(
            rel_err(t.e_t2, s.e_t2) < 1e-8,
            "{c} p={p} E[T2] {} vs {}",
            t.e_t2,
            s.e_t2
        );
        assert!(rel_err(t.e_s_empty, sp.e_s) < 1e-8, "{c} p={p} E[S|empty]");
        assert!(
            rel_err(t.e_s_busy, s.e_s_busy) < 1e-8,
            "{c} p={p} E[S|busy] {} vs {}",
            t.e_s_busy,
            s.e_s_busy
        );
    }
}

#[test]
fn rp_service_round_is_independent_of_generation() {
    let c = ch(0.2, 0.8, 0.8);
    for p in [0.2, 0.5, 1.0] {
        let t = rp_terms(c, g(p)).unwrap();
        assert!((t.e_t - 1.44 / 0.672).abs() < 1e-12);
    }
}

#[test]
fn generate_at_will_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let c = random_channel(&mut rng);
        let sp = sp_avg_aoi(c, GenProb::ALWAYS).unwrap();
        assert!(rel_err(sp, 1.0 / c.p1) < 1e-12);
        assert_eq!(sp_aoi_gaw(c).unwrap(), 1.0 / c.p1);
        let rp = rp_avg_aoi(c, GenProb::ALWAYS).unwrap();
        assert!(rel_err(rp, rp_aoi_gaw(c).unwrap()) < 1e-12, "{c}");
    }
}

#[test]
fn crossover_separates_protocols_at_reported_points() {
    let gap = |p1: f64, p2: f64, p3: f64| {
        let c = ch(p1, p2, p3);
        rp_aoi_gaw(c).unwrap() - sp_aoi_gaw(c).unwrap()
    };
    assert!(gap(0.15, 0.3, 0.3) < 0.0);
    assert!(gap(0.2, 0.3, 0.3) > 0.0);
    let f = crossover_p1(0.3, 0.3).unwrap();
    assert!((f - 0.1701).abs() < 2e-3);
    let f = crossover_p1(0.8, 0.8).unwrap();
    assert!((f - 0.4624).abs() < 2e-3);
}

proptest! {
    #[test]
    fn crossover_is_a_sign_change(p2 in 0.02f64..0.98, p3 in 0.02f64..0.98) {
        let f = crossover_p1(p2, p3).unwrap();
        prop_assert!(f > 0.0 && f < 1.0);
        let gap = |p1: f64| {
            let c = ChannelParams::analytic(p1, p2, p3).ok()?;
            Some(rp_aoi_gaw(c).unwrap() - sp_aoi_gaw(c).unwrap())
        };
        if let (Some(below), Some(above)) = (gap(f * (1.0 - 1e-6)), gap(f * (1.0 + 1e-6))) {
            prop_assert!(below < 0.0 && above > 0.0, "f={f} below={below} above={above}");
        }
    }

    #[test]
    fn term_invariants(p1 in 0.01f64..0.9, d2 in 0.001f64..1.0, d3 in 0.001f64..1.0, p in 0.01f64..0.999) {
        let p2 = p1 + (0.999 - p1) * d2;
        let p3 = p1 + (0.999 - p1) * d3;
        prop_assume!(p2 > p1 && p3 > p1 && p2 < 1.0 && p3 < 1.0);
        let c = ch(p1, p2, p3);
        let t = sp_terms(c, g(p)).unwrap();
        for v in [t.alpha, t.beta, t.gamma] {
            prop_assert!(v > 0.0 && v < 1.0);
        }
        prop_assert!(t.e_z >= t.e_t);
        prop_assert!(t.e_z2 >= t.e_z * t.e_z);
        prop_assert!(((t.e_z - t.e_t) - (1.0 - p) / p).abs() < 1e-9 * t.e_z);
        prop_assert!(sp_avg_aoi(c, g(p)).unwrap() >= 1.0);

        let r = rp_terms(c, g(p)).unwrap();
        prop_assert!(r.pi.as_array().iter().all(|x| *x >= 0.0));
        prop_assert!((r.pi.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.prob_empty));
        prop_assert!(((r.e_z_empty - r.e_z_busy) - (1.0 - p) / p).abs() < 1e-9 * r.e_z_empty);
        prop_assert!(rp_avg_aoi(c, g(p)).unwrap() >= 1.0);
    }
}

#[test]
fn domain_guards() {
    assert!(sp_avg_aoi(ch(0.8, 0.8, 0.9), g(0.5)).is_err());
    assert!(rp_avg_aoi(ch(0.2, 1.0, 0.8), g(0.5)).is_err());
    assert!(sp_aoi_gaw(ch(1.0, 0.5, 0.5)).is_err());
    assert!(crossover_p1(0.0, 0.5).is_err());
    assert!(crossover_p1(0.5, 1.0).is_err());
}
