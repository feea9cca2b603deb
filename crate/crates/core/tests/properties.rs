mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_is_disjoint(seed in any::<u64>(), inputs in proptest::collection::vec(sdr(128, 24), 1..12)) {
        check_partition(seed, &inputs)?;
    }

    #[test]
    fn top_k_cardinality(
        scores in proptest::collection::vec(0u8..6, 1..80),
        eligible in proptest::collection::vec(any::<bool>(), 80),
        k in 0usize..40,
    ) {
        check_top_k(&scores, &eligible, k)?;
    }

    #[test]
    fn permanences_stay_clamped(
        seed in any::<u64>(),
        inputs in proptest::collection::vec(sdr(128, 30), 1..6),
        inc in 0.0f64..=1.0,
        dec in 0.0f64..=1.0,
    ) {
        check_clamping(seed, &inputs, inc, dec)?;
    }

    #[test]
    fn seeded_runs_are_deterministic(seed in any::<u64>(), stream in symbols(20)) {
        check_determinism(seed, &stream)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn snapshots_round_trip(seed in any::<u64>(), train in symbols(30), tail in symbols(10)) {
        check_round_trip(seed, &train, &tail)?;
    }
}

proptest! {
    #[test]
    fn sdr_set_algebra(a in sdr(200, 40), b in sdr(200, 40)) {
        let u = a.union(&b).unwrap();
        let i = a.intersection(&b).unwrap();
        prop_assert_eq!(a.overlap(&b).unwrap(), i.cardinality());
        prop_assert_eq!(u.cardinality() + i.cardinality(), a.cardinality() + b.cardinality());
        prop_assert!(u.active().windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(pacla::Sdr::from_dense(&a.to_dense()), a);
    }

    #[test]
    fn flip_noise_keeps_cardinality(a in sdr(300, 30), f in 0.0f64..=1.0, seed in any::<u64>()) {
        let n = a.flip_noise(f, seed);
        prop_assert_eq!(n.cardinality(), a.cardinality());
        let moved = a.cardinality() - a.overlap(&n).unwrap();
        let want = ((f * a.cardinality() as f64).round() as usize).min(300 - a.cardinality());
        prop_assert_eq!(moved, want);
    }
}
