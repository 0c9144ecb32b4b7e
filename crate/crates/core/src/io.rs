//! Config files and result files.
//!
//! A config is a JSON object. Either `miners` (a single simulation, repeated
//! `repeats` times) or `sweep` (an alpha grid searched for the profitability
//! threshold) must be present:
//!
//! ```json
//! {
//!   "protocol": "strongchain",
//!   "gamma": 0.0,
//!   "rounds": 100000,
//!   "repeats": 5,
//!   "seed": 7,
//!   "protocol_params": { "ratio": 10 },
//!   "end_condition": "round_budget",
//!   "sweep": { "attackers": 2, "alpha_grid": { "start": 0.2, "stop": 0.4, "step": 0.01 } }
//! }
//! ```
//!
//! Omitted keys take defaults: gamma per protocol (0 for Strongchain, 0.5
//! otherwise), 100,000 rounds, 5 repeats, seed 0, ratio 10, fruit ratio 10,
//! freshness window 10 and the balanced reward preset.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{
    EndCondition, FruitchainParams, FruitchainPreset, MinerKind, MinerSpec, Protocol,
    ProtocolParams, SimulationConfig, StrongchainParams,
};
use crate::error::{Error, Result};
use crate::experiments::{
    alpha_range, default_grid, AttackerLayout, RevenuePoint, RunOutcome, SweepConfig,
    ThresholdEstimate,
};

/// First eight bytes of SHA-256, big-endian.
pub fn digest_str(text: &str) -> u64 {
    let hash = Sha256::digest(text.as_bytes());
    u64::from_be_bytes(hash[..8].try_into().expect("sha256 output is 32 bytes"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    Simulate {
        config: SimulationConfig,
        repeats: usize,
    },
    Sweep {
        sweep: SweepConfig,
        /// Add one refinement point in the middle of the detected bracket.
        refine: bool,
    },
}

impl ExperimentConfig {
    pub fn master_seed(&self) -> u64 {
        match self {
            ExperimentConfig::Simulate { config, .. } => config.master_seed,
            ExperimentConfig::Sweep { sweep, .. } => sweep.base.master_seed,
        }
    }

    pub fn set_master_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::Simulate { config, .. } => config.master_seed = seed,
            ExperimentConfig::Sweep { sweep, .. } => sweep.base.master_seed = seed,
        }
    }

    /// Stable hash of the canonical form.
    pub fn digest(&self) -> u64 {
        digest_str(&to_canonical_json(self))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    protocol: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rounds: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    repeats: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    protocol_params: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end_condition: Option<EndCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    miners: Option<Vec<RawMiner>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<RawSweep>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMiner {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<usize>,
    power: f64,
    kind: MinerKind,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attackers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rivals: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha_grid: Option<RawGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    refine: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStrongchain {
    ratio: Option<u32>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFruitchain {
    fruit_ratio: Option<u32>,
    freshness_window: Option<u32>,
    preset: Option<FruitchainPreset>,
    block_reward: Option<f64>,
    fruit_reward: Option<f64>,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, path)
}

/// Parses config text; `path` is only used in error messages.
pub fn parse_config_str(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let protocol: Protocol = raw.protocol.parse()?;
    let protocol_params = parse_protocol_params(protocol, raw.protocol_params)?;
    let rounds = raw.rounds.unwrap_or(100_000);
    let repeats = raw.repeats.unwrap_or(5);
    if repeats == 0 {
        return Err(Error::config("repeats", "must be positive"));
    }
    let mut base = SimulationConfig::new(protocol, Vec::new())
        .with_rounds(rounds)
        .with_seed(raw.seed.unwrap_or(0))
        .with_params(protocol_params);
    if let Some(end) = raw.end_condition {
        base.end_condition = end;
    }
    match (raw.miners, raw.sweep) {
        (Some(miners), None) => {
            let miners = miners
                .into_iter()
                .enumerate()
                .map(|(i, m)| match m.id {
                    Some(id) if id != i => Err(Error::config(
                        format!("miners[{i}].id"),
                        format!("ids must match list positions, found {id}"),
                    )),
                    _ => Ok(MinerSpec {
                        id: i,
                        power: m.power,
                        kind: m.kind,
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            let selfish = miners
                .iter()
                .filter(|m| m.kind == MinerKind::Selfish)
                .count();
            let mut config = base;
            config.gamma = raw.gamma.unwrap_or(protocol.default_gamma(selfish));
            config.miners = miners;
            config.validate()?;
            Ok(ExperimentConfig::Simulate { config, repeats })
        }
        (None, Some(sweep)) => {
            let layout = match (sweep.attackers, sweep.rivals) {
                (Some(attackers), None) => AttackerLayout::Symmetric { attackers },
                (None, Some(rivals)) => AttackerLayout::FixedRivals { rivals },
                _ => {
                    return Err(Error::config(
                        "sweep",
                        "exactly one of `attackers` or `rivals` is required",
                    ))
                }
            };
            let alpha_grid = match sweep.alpha_grid {
                None => default_grid(&layout),
                Some(RawGrid::List(grid)) => grid,
                Some(RawGrid::Range { start, stop, step }) => {
                    if !(step > 0.0 && stop >= start) {
                        return Err(Error::config(
                            "sweep.alpha_grid",
                            "range needs step > 0 and stop >= start",
                        ));
                    }
                    alpha_range(start, stop, step)
                }
            };
            let mut base = base;
            base.gamma = raw
                .gamma
                .unwrap_or(protocol.default_gamma(layout.attackers()));
            let mut cfg = SweepConfig::new(base, alpha_grid, layout);
            cfg.repeats = repeats;
            cfg.rounds = rounds;
            cfg.validate()?;
            Ok(ExperimentConfig::Sweep {
                sweep: cfg,
                refine: sweep.refine.unwrap_or(true),
            })
        }
        (Some(_), Some(_)) => Err(Error::config(
            "miners",
            "give either `miners` or `sweep`, not both",
        )),
        (None, None) => Err(Error::config(
            "miners",
            "one of `miners` or `sweep` is required",
        )),
    }
}

fn parse_protocol_params(
    protocol: Protocol,
    value: Option<serde_json::Value>,
) -> Result<ProtocolParams> {
    let bad = |e: serde_json::Error| Error::config("protocol_params", e.to_string());
    match protocol {
        Protocol::Nakamoto => match value {
            None => Ok(ProtocolParams::Nakamoto),
            Some(serde_json::Value::Object(m)) if m.is_empty() => Ok(ProtocolParams::Nakamoto),
            Some(_) => Err(Error::config(
                "protocol_params",
                "nakamoto takes no parameters",
            )),
        },
        Protocol::Strongchain => {
            let raw: RawStrongchain = match value {
                Some(v) => serde_json::from_value(v).map_err(bad)?,
                None => RawStrongchain::default(),
            };
            Ok(ProtocolParams::Strongchain(StrongchainParams {
                ratio: raw.ratio.unwrap_or(StrongchainParams::default().ratio),
            }))
        }
        Protocol::Fruitchain => {
            let raw: RawFruitchain = match value {
                Some(v) => serde_json::from_value(v).map_err(bad)?,
                None => RawFruitchain::default(),
            };
            let defaults = FruitchainParams::default();
            let fruit_ratio = raw.fruit_ratio.unwrap_or(defaults.fruit_ratio);
            let window = raw.freshness_window.unwrap_or(defaults.freshness_window);
            let preset = FruitchainParams::with_preset(
                fruit_ratio,
                window,
                raw.preset.unwrap_or(FruitchainPreset::Balanced),
            );
            if raw.preset.is_some() && (raw.block_reward.is_some() || raw.fruit_reward.is_some()) {
                return Err(Error::config(
                    "protocol_params.preset",
                    "give either a preset or explicit rewards, not both",
                ));
            }
            Ok(ProtocolParams::Fruitchain(FruitchainParams {
                block_reward: raw.block_reward.unwrap_or(preset.block_reward),
                fruit_reward: raw.fruit_reward.unwrap_or(preset.fruit_reward),
                ..preset
            }))
        }
    }
}

fn raw_protocol_params(params: &ProtocolParams) -> Option<serde_json::Value> {
    match params {
        ProtocolParams::Nakamoto => None,
        ProtocolParams::Strongchain(p) => serde_json::to_value(RawStrongchain {
            ratio: Some(p.ratio),
        })
        .ok(),
        ProtocolParams::Fruitchain(p) => serde_json::to_value(RawFruitchain {
            fruit_ratio: Some(p.fruit_ratio),
            freshness_window: Some(p.freshness_window),
            preset: None,
            block_reward: Some(p.block_reward),
            fruit_reward: Some(p.fruit_reward),
        })
        .ok(),
    }
}

/// Config text with every default spelled out. Parsing it gives back the
/// same config.
pub fn to_canonical_json(cfg: &ExperimentConfig) -> String {
    let (base, repeats) = match cfg {
        ExperimentConfig::Simulate { config, repeats } => (config, *repeats),
        ExperimentConfig::Sweep { sweep, .. } => (&sweep.base, sweep.repeats),
    };
    let mut raw = RawConfig {
        protocol: base.protocol.name().to_string(),
        gamma: Some(base.gamma),
        rounds: Some(base.rounds),
        repeats: Some(repeats),
        seed: Some(base.master_seed),
        protocol_params: raw_protocol_params(&base.protocol_params),
        end_condition: Some(base.end_condition),
        miners: None,
        sweep: None,
    };
    match cfg {
        ExperimentConfig::Simulate { config, .. } => {
            raw.miners = Some(
                config
                    .miners
                    .iter()
                    .map(|m| RawMiner {
                        id: Some(m.id),
                        power: m.power,
                        kind: m.kind,
                    })
                    .collect(),
            );
        }
        ExperimentConfig::Sweep { sweep, refine } => {
            let (attackers, rivals) = match &sweep.layout {
                AttackerLayout::Symmetric { attackers } => (Some(*attackers), None),
                AttackerLayout::FixedRivals { rivals } => (None, Some(rivals.clone())),
            };
            raw.rounds = Some(sweep.rounds);
            raw.sweep = Some(RawSweep {
                attackers,
                rivals,
                alpha_grid: Some(RawGrid::List(sweep.alpha_grid.clone())),
                refine: Some(*refine),
            });
        }
    }
    let mut text = serde_json::to_string_pretty(&raw).expect("config serializes");
    text.push('\n');
    text
}

/// One row of `results.csv`: one miner in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub protocol: Protocol,
    pub gamma: f64,
    pub n_attackers: usize,
    pub alpha_per_attacker: f64,
    pub run_index: usize,
    pub rounds: u64,
    pub seed: u64,
    pub miner_id: usize,
    pub miner_kind: MinerKind,
    pub revenue: f64,
    pub fair_share: f64,
}

pub const RESULT_COLUMNS: [&str; 11] = [
    "protocol",
    "gamma",
    "n_attackers",
    "alpha_per_attacker",
    "run_index",
    "rounds",
    "seed",
    "miner_id",
    "miner_kind",
    "revenue",
    "fair_share",
];

/// Rows of repeated runs of one configuration. `alpha` is the recorded
/// attacker's power.
pub fn rows_from_runs(
    config: &SimulationConfig,
    alpha: f64,
    runs: &[RunOutcome],
) -> Vec<ResultRow> {
    let n_attackers = config.selfish_count();
    runs.iter()
        .flat_map(|run| {
            config.miners.iter().map(move |m| ResultRow {
                protocol: config.protocol,
                gamma: config.gamma,
                n_attackers,
                alpha_per_attacker: alpha,
                run_index: run.run_index,
                rounds: config.rounds,
                seed: run.seed,
                miner_id: m.id,
                miner_kind: m.kind,
                revenue: run.revenues[m.id],
                fair_share: m.power,
            })
        })
        .collect()
}

pub fn simulation_rows(config: &SimulationConfig, runs: &[RunOutcome]) -> Vec<ResultRow> {
    let alpha = config
        .miners
        .iter()
        .find(|m| m.kind == MinerKind::Selfish)
        .map_or(0.0, |m| m.power);
    rows_from_runs(config, alpha, runs)
}

pub fn sweep_rows(sweep: &SweepConfig, points: &[RevenuePoint]) -> Vec<ResultRow> {
    points
        .iter()
        .flat_map(|p| {
            let mut cfg = sweep.base.clone();
            cfg.miners = p.miners.clone();
            cfg.rounds = sweep.rounds;
            rows_from_runs(&cfg, p.alpha, &p.runs)
        })
        .collect()
}

/// Threshold of one sweep as stored in `thresholds.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub protocol: Protocol,
    pub gamma: f64,
    pub n_attackers: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rivals: Vec<f64>,
    pub threshold: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    pub ci95: Option<(f64, f64)>,
    pub crossing_confirmed: bool,
}

impl ThresholdRecord {
    pub fn new(sweep: &SweepConfig, estimate: &ThresholdEstimate) -> Self {
        let finite = |(a, b): (f64, f64)| (a.is_finite() && b.is_finite()).then_some((a, b));
        Self {
            protocol: sweep.base.protocol,
            gamma: sweep.base.gamma,
            n_attackers: sweep.layout.attackers(),
            rivals: match &sweep.layout {
                AttackerLayout::FixedRivals { rivals } => rivals.clone(),
                AttackerLayout::Symmetric { .. } => Vec::new(),
            },
            threshold: estimate.threshold,
            bracket: finite(estimate.bracket),
            ci95: finite(estimate.ci95),
            crossing_confirmed: estimate.crossing_confirmed,
        }
    }

    /// `protocol/gamma=G/k=N`, plus `/rivals=...` for fixed-rival sweeps.
    pub fn key(&self) -> String {
        let mut key = format!(
            "{}/gamma={}/k={}",
            self.protocol, self.gamma, self.n_attackers
        );
        if !self.rivals.is_empty() {
            let parts: Vec<String> = self.rivals.iter().map(|r| r.to_string()).collect();
            key.push_str(&format!("/rivals={}", parts.join(",")));
        }
        key
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub alpha: f64,
    pub revenue: f64,
    pub fair_share: f64,
    pub revenue_min: f64,
    pub revenue_max: f64,
}

/// One revenue-versus-alpha curve, written to `plotdata/<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<PlotPoint>,
}

impl PlotSeries {
    pub fn from_points(name: impl Into<String>, points: &[RevenuePoint]) -> Self {
        let points = points
            .iter()
            .map(|p| PlotPoint {
                alpha: p.alpha,
                revenue: p.mean_revenue,
                fair_share: p.alpha,
                revenue_min: p.run_revenues.iter().copied().fold(f64::INFINITY, f64::min),
                revenue_max: p
                    .run_revenues
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max),
            })
            .collect();
        Self {
            name: name.into(),
            points,
        }
    }
}

/// Everything a command writes.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub rows: Vec<ResultRow>,
    pub thresholds: Vec<ThresholdRecord>,
    pub series: Vec<PlotSeries>,
    pub config_digest: u64,
    pub master_seed: u64,
    /// RFC 3339 time of the run, supplied by the caller.
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_digest: String,
    pub master_seed: u64,
    pub timestamp: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(w)
}

/// `results.csv` content: header plus one line per row.
pub fn results_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv_writer(Vec::new());
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Internal(format!("csv buffer: {e}")))
}

fn plot_csv(series: &PlotSeries) -> Result<Vec<u8>> {
    let mut w = csv_writer(Vec::new());
    w.write_record([
        "alpha",
        "revenue",
        "fair_share",
        "revenue_min",
        "revenue_max",
    ])?;
    for p in &series.points {
        w.serialize(p)?;
    }
    w.into_inner()
        .map_err(|e| Error::Internal(format!("csv buffer: {e}")))
}

/// Files and directories created so far, removed again on failure.
#[derive(Default)]
struct Created {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Created {
    fn dir(&mut self, path: &Path) -> Result<()> {
        if path.is_dir() {
            return Ok(());
        }
        fs::create_dir_all(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.dirs.push(path.to_path_buf());
        Ok(())
    }

    fn file(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        fs::write(&path, bytes).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn roll_back(&self) {
        for f in self.files.iter().rev() {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

/// Writes `results.csv`, `thresholds.json`, `plotdata/*.csv` and
/// `manifest.json` into `out_dir`. On failure nothing written by this call
/// is left behind.
pub fn write_results(out_dir: &Path, outputs: &Outputs) -> Result<RunManifest> {
    let mut created = Created::default();
    let result = write_all(out_dir, outputs, &mut created);
    if result.is_err() {
        created.roll_back();
    }
    result
}

fn write_all(out_dir: &Path, outputs: &Outputs, created: &mut Created) -> Result<RunManifest> {
    created.dir(out_dir)?;
    let mut names = Vec::new();

    created.file(out_dir.join("results.csv"), &results_csv(&outputs.rows)?)?;
    names.push("results.csv".to_string());

    let thresholds: BTreeMap<String, &ThresholdRecord> =
        outputs.thresholds.iter().map(|t| (t.key(), t)).collect();
    if thresholds.len() != outputs.thresholds.len() {
        return Err(Error::Contract("duplicate threshold keys".into()));
    }
    let mut json = serde_json::to_string_pretty(&thresholds)
        .map_err(|e| Error::Internal(format!("thresholds: {e}")))?;
    json.push('\n');
    created.file(out_dir.join("thresholds.json"), json.as_bytes())?;
    names.push("thresholds.json".to_string());

    if !outputs.series.is_empty() {
        let plot_dir = out_dir.join("plotdata");
        created.dir(&plot_dir)?;
        for series in &outputs.series {
            if series.name.is_empty() || series.name.contains(['/', '\\']) {
                return Err(Error::Contract(format!(
                    "bad series name `{}`",
                    series.name
                )));
            }
            let name = format!("{}.csv", series.name);
            created.file(plot_dir.join(&name), &plot_csv(series)?)?;
            names.push(format!("plotdata/{name}"));
        }
    }

    names.push("manifest.json".to_string());
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: format!("{:016x}", outputs.config_digest),
        master_seed: outputs.master_seed,
        timestamp: outputs.timestamp.clone(),
        outputs: names,
    };
    let mut json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Internal(format!("manifest: {e}")))?;
    json.push('\n');
    created.file(out_dir.join("manifest.json"), json.as_bytes())?;
    Ok(manifest)
}
