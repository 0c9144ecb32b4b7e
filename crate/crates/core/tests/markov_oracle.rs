mod common;

use common::markov::{closed_form, LeadChain};

#[test]
fn stationary_distribution_sums_to_one() {
    for alpha in [0.05, 0.25, 0.45] {
        let pi = LeadChain::new(alpha, 0.5).stationary();
        let total: f64 = pi.iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
        assert!(pi.iter().all(|p| *p >= 0.0));
    }
}

#[test]
fn chain_matches_closed_form() {
    for alpha in [0.1, 0.2, 0.25, 0.33, 0.4, 0.45] {
        for gamma in [0.0, 0.3, 0.5, 1.0] {
            let chain = LeadChain::new(alpha, gamma).revenue();
            let formula = closed_form(alpha, gamma);
            assert!(
                (chain - formula).abs() < 1e-9,
                "alpha {alpha} gamma {gamma}: {chain} vs {formula}"
            );
        }
    }
}

#[test]
fn known_thresholds() {
    // Break-even points: 1/3 at gamma 0, 1/4 at gamma 1/2, zero at gamma 1.
    let at = |a, g| LeadChain::new(a, g).revenue() - a;
    assert!(at(0.33, 0.0) < 0.0 && at(0.34, 0.0) > 0.0);
    assert!(at(0.24, 0.5) < 0.0 && at(0.26, 0.5) > 0.0);
    assert!(at(0.01, 1.0) > 0.0);
}
