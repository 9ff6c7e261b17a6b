//! Randomised invariant suites, 1000 cases each.

#[path = "support/invariant_checks.rs"]
mod checks;

use proptest::prelude::*;

fn cases() -> ProptestConfig {
    ProptestConfig { cases: 1000, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn envelope_weights_are_admissible(seed in any::<u64>()) {
        checks::envelope_weights_are_admissible(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn path_perturbation_product_is_bounded(seed in any::<u64>()) {
        checks::path_perturbation_product_is_bounded(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn widening_respects_the_visit_bound(seed in any::<u64>()) {
        checks::widening_respects_the_visit_bound(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn backups_are_running_means(seed in any::<u64>()) {
        checks::backups_are_running_means(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn value_table_is_monotone_in_budget(seed in any::<u64>()) {
        checks::value_table_is_monotone_in_budget(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn particle_weights_stay_normalised(seed in any::<u64>()) {
        checks::particle_weights_stay_normalised(seed).map_err(TestCaseError::fail)?;
    }
}
