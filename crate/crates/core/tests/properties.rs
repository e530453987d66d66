mod common;

use proptest::prelude::*;
use qpas_core::oracle::RandomKind;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn path_is_continuous(n in 2usize..10, seed in any::<u64>()) {
        check_path_continuity(n, seed)?;
    }

    #[test]
    fn committed_breakpoints_keep_sign_conditions(n in 2usize..10, seed in any::<u64>()) {
        check_sign_conditions(n, seed)?;
    }

    #[test]
    fn filtrate_is_idempotent(
        y in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1e3, 0.0f64..1e-6], 0..40),
        eta in 1e-12f64..0.5,
    ) {
        check_filtrate_idempotent(&y, eta)?;
    }

    #[test]
    fn results_round_trip(
        x in prop::collection::vec(finite(), 0..20),
        scalars in prop::array::uniform4(finite()),
        counts in prop::array::uniform4(0usize..1_000_000),
    ) {
        check_result_round_trip(x, scalars, counts)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn manifests_round_trip(scqp in any::<bool>(), m in 1usize..5, n in 1usize..8, seed in any::<u64>()) {
        let kind = if scqp { RandomKind::Scqp } else { RandomKind::Lp };
        check_manifest_round_trip(kind, m, n, seed)?;
    }
}
