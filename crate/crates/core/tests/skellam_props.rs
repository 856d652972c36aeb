use oddsmix::skellam::{implicit_rates, skellam_pmf, three_way_probs, RatePair};
use proptest::prelude::*;

proptest! {
    #[test]
    fn pmf_sums_to_one(h in 0.05f64..8.0, a in 0.05f64..8.0) {
        let r = RatePair { home: h, away: a };
        let total: f64 = (-60..=60).map(|k| skellam_pmf(k, r)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pmf_mean_is_rate_difference(h in 0.05f64..8.0, a in 0.05f64..8.0) {
        let r = RatePair { home: h, away: a };
        let m: f64 = (-60..=60).map(|k| k as f64 * skellam_pmf(k, r)).sum();
        prop_assert!((m - (h - a)).abs() < 1e-6);
    }

    #[test]
    fn three_way_is_a_simplex(h in 0.05f64..8.0, a in 0.05f64..8.0) {
        let p = three_way_probs(RatePair { home: h, away: a });
        prop_assert!((p.sum() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn home_win_grows_with_home_rate() {
    for away in [0.2, 1.0, 3.0] {
        let mut prev = 0.0;
        for i in 1..=60 {
            let w = three_way_probs(RatePair { home: 0.1 * i as f64, away }).win;
            assert!(w > prev, "not increasing at home {} away {away}", 0.1 * i as f64);
            prev = w;
        }
    }
}

#[test]
fn inversion_round_trip_grid() {
    let grid = [0.1, 0.5, 1.0, 2.0, 4.0];
    for &h in &grid {
        for &a in &grid {
            let r = RatePair { home: h, away: a };
            let back = implicit_rates(three_way_probs(r), None).unwrap();
            assert!(((back.home - h) / h).abs() < 1e-4 && ((back.away - a) / a).abs() < 1e-4, "{r:?} -> {back:?}");
        }
    }
}
