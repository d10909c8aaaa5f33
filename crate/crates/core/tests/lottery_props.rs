use claimlot::lottery::{
    bf_lottery, iterative_weighted_selection, partial_bf_lottery, top_k, unweighted_lottery, SelectionOptions,
    WeightRule,
};
use claimlot::{check_bf_compliance, ClaimProfile, LotteryConfig, RandomSource};
use proptest::prelude::*;

fn profile_and_k() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (1usize..40).prop_flat_map(|n| (prop::collection::vec(0.0f64..=1.0, n), 1..=n))
}

fn selected(outcomes: &[u8]) -> usize {
    outcomes.iter().map(|&o| o as usize).sum()
}

proptest! {
    #[test]
    fn every_mechanism_selects_exactly_k((claims, k) in profile_and_k(), seed in any::<u64>()) {
        let p = ClaimProfile::new(claims).unwrap();
        let mut rng = RandomSource::new(seed, 0);
        for r in [
            top_k(&p, k).unwrap(),
            bf_lottery(&p, k, &mut rng).unwrap(),
            unweighted_lottery(&p, k, &mut rng).unwrap(),
        ] {
            prop_assert_eq!(selected(&r.outcomes), k);
            prop_assert_eq!(r.selected_order.len(), k);
            r.validate(k).unwrap();
        }
    }

    #[test]
    fn partial_bf_selects_exactly_k(
        (claims, k) in profile_and_k(),
        kp_frac in 0.0f64..=1.0,
        np_frac in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let n = claims.len();
        let p = ClaimProfile::new(claims).unwrap();
        let kp = ((kp_frac * k as f64).ceil() as usize).max(1);
        let upper = n - k + kp;
        prop_assume!(upper > kp);
        let np = kp + 1 + ((np_frac * (upper - kp - 1) as f64) as usize);
        let cfg = LotteryConfig::partial(n, k, kp, np).unwrap();
        let (r, trace) = partial_bf_lottery(&p, &cfg, &mut RandomSource::new(seed, 1), SelectionOptions::default()).unwrap();
        prop_assert_eq!(selected(&r.outcomes), k);
        // The top k - k' are always in.
        let top = top_k(&p, k - kp.min(k));
        if let Ok(top) = top {
            for (i, &o) in top.outcomes.iter().enumerate() {
                if o == 1 {
                    prop_assert_eq!(r.outcomes[i], 1);
                }
            }
        }
        prop_assert!(check_bf_compliance(&p, &trace.weights()).unwrap().is_fair() || p.claims().iter().any(|&c| c == 0.0));
    }

    #[test]
    fn bf_rounds_are_fair_for_positive_claims(
        claims in prop::collection::vec(0.001f64..=1.0, 2..30),
        seed in any::<u64>(),
    ) {
        let k = claims.len() / 2 + 1;
        let p = ClaimProfile::new(claims).unwrap();
        let (_, trace) = iterative_weighted_selection(
            &p, k, WeightRule::Proportional, &mut RandomSource::new(seed, 2), SelectionOptions::default(),
        ).unwrap();
        let report = check_bf_compliance(&p, &trace.weights()).unwrap();
        prop_assert!(report.is_fair(), "{:?}", report.violations);
    }

    #[test]
    fn same_seed_same_draw((claims, k) in profile_and_k(), seed in any::<u64>()) {
        let p = ClaimProfile::new(claims).unwrap();
        let a = bf_lottery(&p, k, &mut RandomSource::derive(seed, &[3])).unwrap();
        let b = bf_lottery(&p, k, &mut RandomSource::derive(seed, &[3])).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn all_zero_claims_fall_back_to_uniform() {
    let p = ClaimProfile::new(vec![0.0; 6]).unwrap();
    let r = bf_lottery(&p, 3, &mut RandomSource::new(1, 1)).unwrap();
    assert_eq!(selected(&r.outcomes), 3);
    assert!(r.mechanism.contains("fallback"));
}

#[test]
fn bf_inclusion_tracks_claim_order() {
    // Larger claims should be included more often.
    let p = ClaimProfile::new(vec![0.1, 0.4, 0.9]).unwrap();
    let mut rng = RandomSource::new(5, 0);
    let mut hits = [0usize; 3];
    for _ in 0..20_000 {
        let r = bf_lottery(&p, 1, &mut rng).unwrap();
        for (h, o) in hits.iter_mut().zip(&r.outcomes) {
            *h += *o as usize;
        }
    }
    assert!(hits[0] < hits[1] && hits[1] < hits[2], "{hits:?}");
    approx::assert_abs_diff_eq!(hits[2] as f64 / 20_000.0, 0.9 / 1.4, epsilon = 0.015);
}
