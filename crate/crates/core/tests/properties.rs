use proptest::prelude::*;

use xdmev_core::testkit::{checks, random_scenario, GenOptions};
use xdmev_core::{Amount, EngineConfig, Rate, World};

fn cfg() -> EngineConfig {
    EngineConfig::default().with_threads(1)
}

fn world(seed: u64, opts: &GenOptions) -> World {
    World::new(random_scenario(seed, opts)).expect("generated scenarios validate")
}

fn ok(c: checks::Check) -> Result<(), TestCaseError> {
    c.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn mev_is_non_negative(seed in any::<u64>()) {
        ok(checks::non_negative(&world(seed, &GenOptions::default()), cfg()))?;
    }

    #[test]
    fn more_action_domains_never_lower_mev(seed in any::<u64>()) {
        ok(checks::monotone(&world(seed, &GenOptions::default()), cfg()))?;
    }

    #[test]
    fn separable_scenarios_add_up(seed in any::<u64>()) {
        ok(checks::separable(&world(seed, &GenOptions::separable()), cfg()))?;
    }

    #[test]
    fn witness_replay_reproduces_value(seed in any::<u64>()) {
        ok(checks::witness_replays(&world(seed, &GenOptions::default()), cfg()))?;
    }

    #[test]
    fn verdict_is_monotone_in_alpha(seed in any::<u64>(), raw in proptest::collection::vec(0i64..400, 1..5)) {
        let alphas: Vec<Amount> = raw.iter().map(|c| Amount::from_int(*c).checked_div(Amount::from_int(100)).unwrap()).collect();
        let mut opts = GenOptions::default();
        opts.min_domains = 2;
        ok(checks::verdict_monotone(&world(seed, &opts), cfg(), &alphas))?;
    }

    #[test]
    fn discrete_scenarios_match_the_oracle(seed in any::<u64>()) {
        let opts = GenOptions { continuous: false, ..GenOptions::default() };
        ok(checks::oracle_agrees(&world(seed, &opts), cfg()))?;
    }

    #[test]
    fn witness_is_invariant_under_price_scaling(seed in any::<u64>(), factor in 2i128..50) {
        ok(checks::witness_price_invariant(&world(seed, &GenOptions::default()), cfg(), factor))?;
    }

    #[test]
    fn price_round_trip_is_tight(n in 1i128..1_000_000, d in 1i128..1_000_000, raw in -10i128.pow(30)..10i128.pow(30)) {
        let rate = Rate::new(n, d).unwrap();
        let amount = Amount::from_raw(ethnum::I256::new(raw));
        ok(checks::reciprocity(rate, amount))?;
    }

    #[test]
    fn thread_count_does_not_matter(seed in any::<u64>()) {
        let w = world(seed, &GenOptions::default());
        let q = xdmev_core::MevQuery::over(&w, w.default_player().unwrap(), &w.domain_ids());
        let a = w.engine_with(cfg()).mev(&q, &w.initial).unwrap();
        let b = w.engine_with(EngineConfig::default().with_threads(4)).mev(&q, &w.initial).unwrap();
        prop_assert_eq!(a, b);
    }
}
