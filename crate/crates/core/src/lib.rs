//! Monte-Carlo simulation of selfish mining with one or more independent
//! attackers on Nakamoto consensus, Strongchain and Fruitchain.
//!
//! A run is a sequence of rounds. Each round one leader is drawn in
//! proportion to mining power and produces exactly one artifact (a block, a
//! weak header, a strong block or a fruit). Honest leaders publish at once;
//! selfish leaders grow a private branch and release it following the
//! override / match / wait / adopt rules in [`strategy`]. Rewards are paid
//! only along the canonical branch at the end of the run.
//!
//! Good entry points:
//! - [`engine::run_simulation`]
//! - [`experiments::run_sweep`] and [`experiments::estimate_threshold`]
//! - [`io::parse_config`] and [`io::write_results`]

pub mod chain;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod fruitchain;
pub mod io;
pub mod nakamoto;
pub mod rng;
pub mod strategy;
pub mod strongchain;

pub use config::{
    EndCondition, FruitchainParams, FruitchainPreset, MinerId, MinerKind, MinerSpec, Protocol,
    ProtocolParams, SimulationConfig, StrongchainParams,
};
pub use engine::{run_simulation, select_leader, RoundRecord, SimulationResult};
pub use error::{Error, Result};
pub use experiments::{
    bootstrap_ci, default_grid, estimate_threshold, run_repeated, run_sweep, sweep_with_refinement,
    table1_suite, AttackerLayout, RevenuePoint, RunOutcome, SuiteEntry, SweepConfig,
    ThresholdEstimate,
};
pub use rng::{derive_run_seed, SplitMix64};
pub use strategy::{decide_action, resolve_match_weights, Action, BranchOwner, TieContext};
