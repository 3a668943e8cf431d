use phyq_core::score::{compute_phyq, z_score, HumanScenarioStats, HumanStats, ScenarioRates};
use proptest::prelude::*;

fn human_strategy() -> impl Strategy<Value = HumanStats> {
    prop::collection::vec((0.4..0.95f64, 0.05..0.3f64), 15).prop_map(|rows| {
        HumanStats::new(
            "generated",
            rows.into_iter()
                .enumerate()
                .map(|(i, (mean, sigma))| HumanScenarioStats { scenario: i as u8 + 1, mean, sigma, unusable: false })
                .collect(),
        )
    })
}

fn rates_strategy(lo: f64, hi: f64) -> impl Strategy<Value = ScenarioRates> {
    prop::collection::vec(lo..hi, 15).prop_map(|v| v.into_iter().enumerate().map(|(i, r)| (i as u8 + 1, r)).collect())
}

fn random_below(human: &HumanStats) -> ScenarioRates {
    human.scenarios.iter().map(|s| (s.scenario, (s.mean - 0.3).max(0.0))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn human_means_score_exactly_one_hundred(h in human_strategy()) {
        let p = compute_phyq(&h.means(), &h, &random_below(&h)).unwrap();
        prop_assert_eq!(p.z_agent, 0.0);
        prop_assert_eq!(p.score, 100.0);
    }

    #[test]
    fn random_rates_score_zero(h in human_strategy(), r in rates_strategy(0.0, 0.3)) {
        let p = compute_phyq(&r, &h, &r).unwrap();
        prop_assert!(p.score.abs() < 1e-9, "{}", p.score);
    }

    #[test]
    fn shifting_z_by_delta_is_affine(h in human_strategy(), a in rates_strategy(0.2, 0.8), delta in -0.5..0.5f64) {
        let random = random_below(&h);
        let shifted: ScenarioRates = a.iter().map(|(&s, &r)| (s, r + delta * h.get(s).unwrap().sigma)).collect();
        prop_assume!(shifted.values().all(|r| (0.0..=1.0).contains(r)));
        let p0 = compute_phyq(&a, &h, &random).unwrap();
        let p1 = compute_phyq(&shifted, &h, &random).unwrap();
        prop_assert!((p1.z_agent - p0.z_agent - delta).abs() < 1e-9);
        prop_assert!((p1.score - p0.score - delta * 100.0 / p0.z_random.abs()).abs() < 1e-7);
    }

    #[test]
    fn raising_a_scored_rate_never_lowers_the_score(
        h in human_strategy(), a in rates_strategy(0.0, 0.9), m in 3u8..=15, bump in 0.0..0.1f64,
    ) {
        let random = random_below(&h);
        let mut b = a.clone();
        *b.get_mut(&m).unwrap() += bump;
        prop_assert!(compute_phyq(&b, &h, &random).unwrap().score >= compute_phyq(&a, &h, &random).unwrap().score);
    }

    #[test]
    fn first_two_scenarios_do_not_count(h in human_strategy(), a in rates_strategy(0.0, 1.0), p1 in 0.0..1.0f64, p2 in 0.0..1.0f64) {
        let random = random_below(&h);
        let mut b = a.clone();
        b.insert(1, p1);
        b.insert(2, p2);
        prop_assert_eq!(compute_phyq(&a, &h, &random).unwrap(), compute_phyq(&b, &h, &random).unwrap());
    }

    #[test]
    fn one_sigma_everywhere_is_one_interval(h in human_strategy(), a in rates_strategy(0.0, 0.6)) {
        let random = random_below(&h);
        let up: ScenarioRates = a.iter().map(|(&s, &r)| (s, r + h.get(s).unwrap().sigma)).collect();
        let p0 = compute_phyq(&a, &h, &random).unwrap();
        let p1 = compute_phyq(&up, &h, &random).unwrap();
        prop_assert!((p1.score - p0.score - 100.0 / p0.z_random.abs()).abs() < 1e-7);
    }
}

#[test]
fn z_is_the_mean_normalised_deviation() {
    let h = HumanStats::new(
        "two values",
        (1..=15u8)
            .map(|s| HumanScenarioStats {
                scenario: s,
                mean: 0.5,
                sigma: if s % 2 == 0 { 0.1 } else { 0.2 },
                unusable: false,
            })
            .collect(),
    );
    let rates: ScenarioRates = (1..=15u8).map(|s| (s, 0.3)).collect();
    // Scenarios 3..=15: seven odd (-1 each) and six even (-2 each).
    let want = (7.0 * -1.0 + 6.0 * -2.0) / 13.0;
    assert!((z_score(&rates, &h).unwrap() - want).abs() < 1e-12);
}
