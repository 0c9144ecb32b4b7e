//! Longest-chain model: every artifact is a block worth one strength unit
//! and one unit of reward on the canonical chain.

use crate::chain::{ArtifactKind, ChainArena, NodeId, RewardTally, Strength};
use crate::config::MinerId;

pub const BLOCK_UNITS: Strength = 1;

/// A branch from `fork` (exclusive) to `tip` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Branch {
    pub fork: NodeId,
    pub tip: NodeId,
}

impl Branch {
    pub fn at(node: NodeId) -> Self {
        Self {
            fork: node,
            tip: node,
        }
    }

    pub fn len(&self, arena: &ChainArena) -> u64 {
        arena.strength(self.tip) - arena.strength(self.fork)
    }

    pub fn is_empty(&self) -> bool {
        self.fork == self.tip
    }

    /// Block count from the fork point.
    pub fn strength(&self, arena: &ChainArena) -> Strength {
        self.len(arena)
    }
}

pub fn extend_chain(arena: &mut ChainArena, branch: Branch, miner: MinerId, round: u64) -> Branch {
    let tip = arena.push(branch.tip, miner, ArtifactKind::Block, BLOCK_UNITS, round);
    Branch {
        fork: branch.fork,
        tip,
    }
}

/// Each canonical block pays 1 to its miner.
pub fn reward_shares(arena: &ChainArena, canonical_tip: NodeId, miners: usize) -> RewardTally {
    let mut tally = RewardTally::new(miners);
    let mut id = canonical_tip;
    while let Some(miner) = arena.node(id).miner {
        tally.credit(miner, 1.0);
        id = arena.node(id).parent;
    }
    tally
}
