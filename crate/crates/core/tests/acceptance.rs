//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;

use common::markov::LeadChain;
use selfish_core::io::{results_csv, sweep_rows, write_results, Outputs, ThresholdRecord};
use selfish_core::{
    resolve_match_weights, run_repeated, run_simulation, sweep_with_refinement, table1_suite,
    BranchOwner, MinerSpec, Protocol, ProtocolParams, RevenuePoint, SimulationConfig, SplitMix64,
    SweepConfig, ThresholdEstimate,
};

const SEED: u64 = 2025;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }
}

struct Sweep {
    points: Vec<RevenuePoint>,
    estimate: ThresholdEstimate,
    config: SweepConfig,
}

impl Sweep {
    fn pct(&self) -> f64 {
        self.estimate.threshold.map_or(f64::NAN, |t| t * 100.0)
    }
}

fn run_suite() -> BTreeMap<String, Sweep> {
    table1_suite(SEED)
        .into_iter()
        .map(|entry| {
            let (points, estimate) = sweep_with_refinement(&entry.sweep).expect("suite sweep runs");
            let sweep = Sweep {
                points,
                estimate,
                config: entry.sweep,
            };
            (entry.name, sweep)
        })
        .collect()
}

fn within(value: f64, lo: f64, hi: f64) -> bool {
    value >= lo && value <= hi
}

fn fmt_thresholds(suite: &BTreeMap<String, Sweep>, names: &[&str]) -> String {
    names
        .iter()
        .map(|n| format!("{n}={:.1}%", suite[*n].pct()))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `(suite name, low %, high %)` bands; all must hold.
fn band_check(
    report: &mut Report,
    title: &str,
    suite: &BTreeMap<String, Sweep>,
    bands: &[(&str, f64, f64)],
) {
    let ok = bands
        .iter()
        .all(|(n, lo, hi)| within(suite[*n].pct(), *lo, *hi));
    let names: Vec<&str> = bands.iter().map(|b| b.0).collect();
    report.check(title, ok, fmt_thresholds(suite, &names));
}

fn nakamoto_single(report: &mut Report, suite: &BTreeMap<String, Sweep>) {
    let g1 = suite["nakamoto_g1_k1"]
        .estimate
        .threshold
        .unwrap_or(f64::NAN);
    let ok = within(suite["nakamoto_g0_k1"].pct(), 32.0, 34.0)
        && within(suite["nakamoto_g0.5_k1"].pct(), 24.0, 26.0)
        && g1 <= 0.01;
    report.check(
        "nakamoto single attacker thresholds",
        ok,
        fmt_thresholds(
            suite,
            &["nakamoto_g0_k1", "nakamoto_g0.5_k1", "nakamoto_g1_k1"],
        ),
    );
}

fn fruitchain_single(report: &mut Report, suite: &BTreeMap<String, Sweep>) {
    let names = ["fruitchain_g0_k1", "fruitchain_g0.5_k1", "fruitchain_g1_k1"];
    let in_band = names.iter().all(|n| within(suite[*n].pct(), 36.0, 40.0));
    let spread = (suite[names[0]].pct() - suite[names[2]].pct()).abs();
    report.check(
        "fruitchain single attacker threshold and gamma insensitivity",
        in_band && spread <= 1.0,
        format!(
            "{} spread={spread:.2} points",
            fmt_thresholds(suite, &names)
        ),
    );
}

fn rivals(report: &mut Report, suite: &BTreeMap<String, Sweep>) {
    let naka = &suite["nakamoto_g0.5_rivals0.4"];
    let above: Vec<f64> = naka
        .points
        .iter()
        .filter(|p| p.alpha < 0.4 && p.mean_revenue >= p.alpha)
        .map(|p| p.alpha)
        .collect();
    report.check(
        "nakamoto attacker below fair share against a 40% rival",
        above.is_empty(),
        format!(
            "points below 40% at or above fair share: {above:?}; layout {:?}",
            naka.config.layout
        ),
    );

    let names = [
        "fruitchain_g0.5_k1",
        "fruitchain_g0.5_rivals0.2",
        "fruitchain_g0.5_rivals0.4",
    ];
    let t: Vec<f64> = names.iter().map(|n| suite[*n].pct()).collect();
    report.check(
        "fruitchain threshold falls as the rival grows 0 -> 20% -> 40%",
        t[0] > t[1] && t[1] > t[2],
        fmt_thresholds(suite, &names),
    );
}

fn markov_oracle(report: &mut Report) {
    let mut worst = (0.0f64, 0.0, 0.0);
    for alpha in [0.1, 0.25, 0.33, 0.4] {
        for gamma in [0.0, 0.5, 1.0] {
            let cfg = SimulationConfig::new(
                Protocol::Nakamoto,
                vec![
                    MinerSpec::honest(0, 1.0 - alpha),
                    MinerSpec::selfish(1, alpha),
                ],
            )
            .with_gamma(gamma)
            .with_rounds(400_000)
            .with_seed(SEED);
            let runs = run_repeated(&cfg, 5).expect("oracle runs");
            let sim = runs.iter().map(|r| r.revenues[1]).sum::<f64>() / runs.len() as f64;
            let diff = (sim - LeadChain::new(alpha, gamma).revenue()).abs();
            if diff > worst.0 {
                worst = (diff, alpha, gamma);
            }
        }
    }
    report.check(
        "single attacker revenue matches the lead-state Markov chain",
        worst.0 <= 0.005,
        format!(
            "max |diff| {:.4} at alpha={} gamma={} over 12 pairs",
            worst.0, worst.1, worst.2
        ),
    );
}

fn protocols() -> [Protocol; 3] {
    [
        Protocol::Nakamoto,
        Protocol::Strongchain,
        Protocol::Fruitchain,
    ]
}

fn random_powers(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.next_f64()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn fairness(report: &mut Report) {
    let mut rng = SplitMix64::new(SEED);
    let mut worst = 0.0f64;
    for protocol in protocols() {
        for _ in 0..3 {
            let n = 2 + rng.below(5) as usize;
            let powers = random_powers(&mut rng, n);
            let miners = powers
                .iter()
                .enumerate()
                .map(|(i, p)| MinerSpec::honest(i, *p))
                .collect();
            let cfg = SimulationConfig::new(protocol, miners).with_seed(rng.next_u64());
            let runs = run_repeated(&cfg, 5).expect("honest runs");
            for (i, p) in powers.iter().enumerate() {
                let mean = runs.iter().map(|r| r.revenues[i]).sum::<f64>() / runs.len() as f64;
                worst = worst.max((mean - p).abs());
            }
        }
    }
    report.check(
        "honest miners earn their power share with no attackers",
        worst <= 0.01,
        format!("max |R_i - alpha_i| {worst:.4} over 9 random power vectors x 5 seeds"),
    );
}

fn attacked_config(protocol: Protocol, rng: &mut SplitMix64) -> SimulationConfig {
    let attackers = 1 + rng.below(7) as usize;
    let honest = 1 + rng.below(3) as usize;
    let powers = random_powers(rng, attackers + honest);
    let miners = powers
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i < honest {
                MinerSpec::honest(i, *p)
            } else {
                MinerSpec::selfish(i, *p)
            }
        })
        .collect();
    SimulationConfig::new(protocol, miners)
        .with_gamma(rng.next_f64())
        .with_rounds(20_000)
        .with_seed(rng.next_u64())
}

fn conservation(report: &mut Report) {
    let mut rng = SplitMix64::new(SEED ^ 0x5eed);
    let mut problems = Vec::new();
    let mut runs = 0;
    for protocol in protocols() {
        for _ in 0..20 {
            let cfg = attacked_config(protocol, &mut rng);
            let r = run_simulation(&cfg).expect("run terminates");
            runs += 1;
            let total: f64 = r.revenues.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                problems.push(format!("{protocol} revenue sum {total}"));
            }
            if r.rounds_executed != cfg.rounds {
                problems.push(format!(
                    "{protocol} stopped after {} rounds",
                    r.rounds_executed
                ));
            }
            match protocol {
                Protocol::Fruitchain => {
                    let f = r.fruits.expect("fruit accounting");
                    if !f.is_conserved() || f.duplicates != 0 || f.freshness_violations != 0 {
                        problems.push(format!("fruit accounting {f:?}"));
                    }
                }
                _ => {
                    if r.canonical_nodes + r.orphaned_nodes != r.rounds_executed {
                        problems.push(format!(
                            "{protocol} nodes: {} canonical + {} orphaned != {} mined",
                            r.canonical_nodes, r.orphaned_nodes, r.rounds_executed
                        ));
                    }
                }
            }
            if let ProtocolParams::Strongchain(p) = &cfg.protocol_params {
                // Every canonical weak header is paid 1/ratio, every strong block 1.
                let weak = (r.canonical_nodes - r.canonical_height) as f64;
                let expected = r.canonical_height as f64 + weak / f64::from(p.ratio);
                if (r.total_reward() - expected).abs() > 1e-6 {
                    problems.push(format!(
                        "weak header payout {} != {expected}",
                        r.total_reward()
                    ));
                }
            }
        }
    }

    let miners: Vec<MinerSpec> = (0..8)
        .map(|i| {
            if i < 3 {
                MinerSpec::honest(i, 0.125)
            } else {
                MinerSpec::selfish(i, 0.125)
            }
        })
        .collect();
    for _ in 0..1000 {
        let mut owners = vec![BranchOwner::Honest];
        let tied = 1 + rng.below(5) as usize;
        owners.extend((0..tied).map(|k| BranchOwner::Attacker(3 + k)));
        let gamma = rng.next_f64();
        let w = resolve_match_weights(&owners, &miners, gamma).expect("weights");
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || w.iter().any(|x| *x < 0.0) {
            problems.push(format!("tie weights {w:?}"));
        }
    }

    report.check(
        "revenue sums to one, fruits and weak headers conserved, cascades terminate, tie weights normalized",
        problems.is_empty(),
        if problems.is_empty() {
            format!("{runs} attacked runs and 1000 tie draws clean")
        } else {
            problems.join("; ")
        },
    );
}

fn determinism(report: &mut Report) {
    let entry = table1_suite(SEED)
        .into_iter()
        .find(|e| e.name == "fruitchain_g0.5_k3")
        .expect("suite entry");
    let mut sweep = entry.sweep;
    sweep.rounds = 20_000;
    sweep.alpha_grid = vec![0.1, 0.2, 0.3];
    let render = || {
        let (points, estimate) = sweep_with_refinement(&sweep).expect("sweep");
        let outputs = Outputs {
            rows: sweep_rows(&sweep, &points),
            thresholds: vec![ThresholdRecord::new(&sweep, &estimate)],
            master_seed: SEED,
            timestamp: "1970-01-01T00:00:00Z".into(),
            ..Outputs::default()
        };
        let dir = tempfile::tempdir().expect("temp dir");
        write_results(dir.path(), &outputs).expect("write");
        let written = std::fs::read(dir.path().join("results.csv")).expect("read back");
        assert_eq!(written, results_csv(&outputs.rows).expect("csv"));
        written
    };
    let (a, b) = (render(), render());
    report.check(
        "results.csv is byte-identical across runs",
        a == b && !a.is_empty(),
        format!(
            "{} bytes, {} lines",
            a.len(),
            a.iter().filter(|c| **c == b'\n').count()
        ),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    let suite = run_suite();

    nakamoto_single(&mut report, &suite);
    band_check(
        &mut report,
        "nakamoto multi-attacker thresholds at gamma 0.5",
        &suite,
        &[
            ("nakamoto_g0.5_k2", 20.0, 22.0),
            ("nakamoto_g0.5_k3", 18.0, 20.0),
            ("nakamoto_g0.5_k5", 13.0, 16.0),
            ("nakamoto_g0.5_k7", 10.0, 13.0),
        ],
    );
    band_check(
        &mut report,
        "strongchain thresholds at ratio 10, gamma 0",
        &suite,
        &[
            ("strongchain_g0_k1", 44.0, 48.0),
            ("strongchain_g0_k2", 30.0, 34.0),
            ("strongchain_g0_k3", 22.0, 26.0),
            ("strongchain_g0_k5", 15.0, 19.0),
            ("strongchain_g0_k7", 11.0, 15.0),
        ],
    );
    fruitchain_single(&mut report, &suite);
    band_check(
        &mut report,
        "fruitchain multi-attacker thresholds at fruit ratio 10",
        &suite,
        &[
            ("fruitchain_g0.5_k3", 23.0, 27.0),
            ("fruitchain_g0.5_k5", 15.0, 19.0),
            ("fruitchain_g0.5_k7", 11.0, 15.0),
        ],
    );
    rivals(&mut report, &suite);
    markov_oracle(&mut report);
    fairness(&mut report);
    conservation(&mut report);
    determinism(&mut report);

    println!("{} failed", report.failures);
    if report.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
