use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type MinerId = usize;

/// Tolerance on the total of all mining powers.
pub const POWER_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinerKind {
    Honest,
    Selfish,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinerSpec {
    pub id: MinerId,
    pub power: f64,
    pub kind: MinerKind,
}

impl MinerSpec {
    pub fn honest(id: MinerId, power: f64) -> Self {
        Self {
            id,
            power,
            kind: MinerKind::Honest,
        }
    }

    pub fn selfish(id: MinerId, power: f64) -> Self {
        Self {
            id,
            power,
            kind: MinerKind::Selfish,
        }
    }
}

/// Checks that ids are `0..n`, powers are positive and sum to one.
pub fn validate_miners(miners: &[MinerSpec]) -> Result<()> {
    if miners.is_empty() {
        return Err(Error::config("miners", "at least one miner is required"));
    }
    for (i, m) in miners.iter().enumerate() {
        if m.id != i {
            return Err(Error::config(
                "miners",
                format!(
                    "ids must be contiguous from 0; position {i} has id {}",
                    m.id
                ),
            ));
        }
        if !(m.power > 0.0 && m.power <= 1.0) {
            return Err(Error::config(
                "miners",
                format!("miner {i} power {} is outside (0, 1]", m.power),
            ));
        }
    }
    let total: f64 = miners.iter().map(|m| m.power).sum();
    if (total - 1.0).abs() > POWER_SUM_TOLERANCE {
        return Err(Error::config(
            "miners",
            format!("powers sum to {total}, expected 1"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Nakamoto,
    Strongchain,
    Fruitchain,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Nakamoto => "nakamoto",
            Protocol::Strongchain => "strongchain",
            Protocol::Fruitchain => "fruitchain",
        }
    }

    /// Default propagation factor for a run with `selfish` attackers.
    ///
    /// Strongchain always defaults to 0 (honest-favoured ties); the other
    /// protocols use 0.5.
    pub fn default_gamma(self, _selfish: usize) -> f64 {
        match self {
            Protocol::Strongchain => 0.0,
            Protocol::Nakamoto | Protocol::Fruitchain => 0.5,
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nakamoto" => Ok(Protocol::Nakamoto),
            "strongchain" => Ok(Protocol::Strongchain),
            "fruitchain" => Ok(Protocol::Fruitchain),
            other => Err(Error::config(
                "protocol",
                format!(
                    "unknown protocol `{other}` (expected nakamoto, strongchain or fruitchain)"
                ),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongchainParams {
    /// Mean number of weak headers per strong block.
    pub ratio: u32,
}

impl Default for StrongchainParams {
    fn default() -> Self {
        Self { ratio: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FruitchainPreset {
    /// Block reward 1, fruit reward `1/f`: blocks and fruits each earn half.
    Balanced,
    /// Block reward 1, fruit reward 1: blocks earn `1/(f+1)` of the total.
    FruitHeavy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FruitchainParams {
    /// Mean number of fruits per block.
    pub fruit_ratio: u32,
    /// Maximum height distance between a fruit's pointer and the block embedding it.
    pub freshness_window: u32,
    pub block_reward: f64,
    pub fruit_reward: f64,
}

impl FruitchainParams {
    pub fn with_preset(fruit_ratio: u32, freshness_window: u32, preset: FruitchainPreset) -> Self {
        let fruit_reward = match preset {
            FruitchainPreset::Balanced => 1.0 / fruit_ratio.max(1) as f64,
            FruitchainPreset::FruitHeavy => 1.0,
        };
        Self {
            fruit_ratio,
            freshness_window,
            block_reward: 1.0,
            fruit_reward,
        }
    }
}

impl Default for FruitchainParams {
    fn default() -> Self {
        Self::with_preset(10, 10, FruitchainPreset::Balanced)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase")]
pub enum ProtocolParams {
    Nakamoto,
    Strongchain(StrongchainParams),
    Fruitchain(FruitchainParams),
}

impl ProtocolParams {
    pub fn protocol(&self) -> Protocol {
        match self {
            ProtocolParams::Nakamoto => Protocol::Nakamoto,
            ProtocolParams::Strongchain(_) => Protocol::Strongchain,
            ProtocolParams::Fruitchain(_) => Protocol::Fruitchain,
        }
    }

    pub fn default_for(protocol: Protocol) -> Self {
        match protocol {
            Protocol::Nakamoto => ProtocolParams::Nakamoto,
            Protocol::Strongchain => ProtocolParams::Strongchain(StrongchainParams::default()),
            Protocol::Fruitchain => ProtocolParams::Fruitchain(FruitchainParams::default()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ProtocolParams::Nakamoto => Ok(()),
            ProtocolParams::Strongchain(p) => {
                if p.ratio < 1 {
                    return Err(Error::config("protocol_params.ratio", "must be at least 1"));
                }
                Ok(())
            }
            ProtocolParams::Fruitchain(p) => {
                if p.fruit_ratio < 1 {
                    return Err(Error::config(
                        "protocol_params.fruit_ratio",
                        "must be at least 1",
                    ));
                }
                if p.freshness_window < 1 {
                    return Err(Error::config(
                        "protocol_params.freshness_window",
                        "must be at least 1",
                    ));
                }
                if !(p.block_reward > 0.0 && p.block_reward.is_finite()) {
                    return Err(Error::config(
                        "protocol_params.block_reward",
                        "must be positive",
                    ));
                }
                if !(p.fruit_reward > 0.0 && p.fruit_reward.is_finite()) {
                    return Err(Error::config(
                        "protocol_params.fruit_reward",
                        "must be positive",
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndCondition {
    /// Stop after `rounds` artifacts.
    RoundBudget,
    /// Stop once the public chain reaches this block height (Fruitchain only).
    /// `rounds` still caps the run.
    TargetHeight(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub protocol: Protocol,
    pub miners: Vec<MinerSpec>,
    pub gamma: f64,
    pub rounds: u64,
    pub protocol_params: ProtocolParams,
    pub master_seed: u64,
    pub end_condition: EndCondition,
    /// Keep a per-round trace in the result.
    #[serde(default)]
    pub record_rounds: bool,
}

impl SimulationConfig {
    /// Config with protocol defaults: default parameters, default gamma for
    /// the number of selfish miners, 100,000 rounds.
    pub fn new(protocol: Protocol, miners: Vec<MinerSpec>) -> Self {
        let selfish = miners
            .iter()
            .filter(|m| m.kind == MinerKind::Selfish)
            .count();
        Self {
            protocol,
            gamma: protocol.default_gamma(selfish),
            miners,
            rounds: 100_000,
            protocol_params: ProtocolParams::default_for(protocol),
            master_seed: 0,
            end_condition: EndCondition::RoundBudget,
            record_rounds: false,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_rounds(mut self, rounds: u64) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_params(mut self, params: ProtocolParams) -> Self {
        self.protocol_params = params;
        self
    }

    pub fn selfish_count(&self) -> usize {
        self.miners
            .iter()
            .filter(|m| m.kind == MinerKind::Selfish)
            .count()
    }

    pub fn validate(&self) -> Result<()> {
        validate_miners(&self.miners)?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(
                "gamma",
                format!("{} is outside [0, 1]", self.gamma),
            ));
        }
        if self.rounds == 0 {
            return Err(Error::config("rounds", "must be positive"));
        }
        if self.protocol_params.protocol() != self.protocol {
            return Err(Error::config(
                "protocol_params",
                format!(
                    "parameters for {} given to a {} run",
                    self.protocol_params.protocol(),
                    self.protocol
                ),
            ));
        }
        self.protocol_params.validate()?;
        if let EndCondition::TargetHeight(h) = self.end_condition {
            if self.protocol != Protocol::Fruitchain {
                return Err(Error::config(
                    "end_condition",
                    "target_height is only supported for fruitchain",
                ));
            }
            if h == 0 {
                return Err(Error::config(
                    "end_condition",
                    "target height must be positive",
                ));
            }
        }
        Ok(())
    }
}
