use proptest::prelude::*;
use selfish_core::{
    decide_action, resolve_match_weights, run_simulation, Action, BranchOwner, MinerSpec, Protocol,
    SimulationConfig,
};

fn protocol() -> impl Strategy<Value = Protocol> {
    prop_oneof![
        Just(Protocol::Nakamoto),
        Just(Protocol::Strongchain),
        Just(Protocol::Fruitchain),
    ]
}

/// One honest miner plus up to seven attackers, powers normalized.
fn config() -> impl Strategy<Value = SimulationConfig> {
    (
        protocol(),
        prop::collection::vec(0.05f64..1.0, 2..9),
        0.0f64..=1.0,
        any::<u64>(),
    )
        .prop_map(|(protocol, raw, gamma, seed)| {
            let total: f64 = raw.iter().sum();
            let miners = raw
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    if i == 0 {
                        MinerSpec::honest(i, p / total)
                    } else {
                        MinerSpec::selfish(i, p / total)
                    }
                })
                .collect();
            SimulationConfig::new(protocol, miners)
                .with_gamma(gamma)
                .with_rounds(3_000)
                .with_seed(seed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn revenues_form_a_distribution(cfg in config()) {
        let r = run_simulation(&cfg).unwrap();
        prop_assert_eq!(r.rounds_executed, cfg.rounds);
        prop_assert!(r.revenues.iter().all(|x| *x >= 0.0));
        prop_assert!((r.revenues.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn artifacts_are_conserved(cfg in config()) {
        let r = run_simulation(&cfg).unwrap();
        match r.fruits {
            Some(f) => {
                prop_assert!(f.is_conserved(), "{:?}", f);
                prop_assert_eq!(f.duplicates, 0);
                prop_assert_eq!(f.freshness_violations, 0);
            }
            None => prop_assert_eq!(r.canonical_nodes + r.orphaned_nodes, r.rounds_executed),
        }
    }

    #[test]
    fn runs_replay_exactly(cfg in config()) {
        prop_assert_eq!(run_simulation(&cfg).unwrap(), run_simulation(&cfg).unwrap());
    }

    #[test]
    fn tie_weights_are_normalized(tied in 1usize..6, gamma in 0.0f64..=1.0, honest in 0.05f64..0.9) {
        let attackers = (1.0 - honest) / tied as f64;
        let mut miners = vec![MinerSpec::honest(0, honest)];
        miners.extend((1..=tied).map(|i| MinerSpec::selfish(i, attackers)));
        let mut owners = vec![BranchOwner::Honest];
        owners.extend((1..=tied).map(BranchOwner::Attacker));
        let w = resolve_match_weights(&owners, &miners, gamma).unwrap();
        prop_assert_eq!(w.len(), owners.len());
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stronger_public_chain_is_always_adopted(private in 0u64..1000, extra in 1u64..100, quantum in 1u64..20) {
        prop_assert_eq!(decide_action(private, private + extra, true, quantum), Action::Adopt);
    }

    #[test]
    fn nothing_withheld_means_no_release(private in 0u64..1000, public in 0u64..1000, quantum in 1u64..20) {
        prop_assume!(public <= private);
        prop_assert_eq!(decide_action(private, public, false, quantum), Action::Wait);
    }
}
