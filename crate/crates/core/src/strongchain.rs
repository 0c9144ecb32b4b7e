//! Strongchain model.
//!
//! Rounds yield either a weak header or a strong block. Both are chain
//! nodes: a weak header extends the tip it was mined on and a strong block
//! embeds the weak headers between it and the previous strong block on its
//! branch. A strong block is worth `ratio` strength units, a weak header one,
//! so branch strength is `strong + weak / ratio` strong-block equivalents.
//! Strong blocks pay 1 and weak headers `1 / ratio`.

use crate::chain::{ArtifactKind, ChainArena, NodeId, RewardTally, Strength};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeaderKind {
    Weak,
    Strong,
}

/// Strong with probability `1 / (ratio + 1)`.
pub fn sample_artifact_kind(ratio: u32, u: f64) -> HeaderKind {
    if u * (f64::from(ratio) + 1.0) < 1.0 {
        HeaderKind::Strong
    } else {
        HeaderKind::Weak
    }
}

pub fn units(kind: HeaderKind, ratio: u32) -> Strength {
    match kind {
        HeaderKind::Strong => Strength::from(ratio),
        HeaderKind::Weak => 1,
    }
}

pub fn artifact(kind: HeaderKind) -> ArtifactKind {
    match kind {
        HeaderKind::Strong => ArtifactKind::StrongBlock,
        HeaderKind::Weak => ArtifactKind::WeakHeader,
    }
}

/// A branch from `fork` (exclusive) to `tip` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrongchainBranch {
    pub fork: NodeId,
    pub tip: NodeId,
}

impl StrongchainBranch {
    /// Weak headers on the tip not yet embedded by a strong block, newest first.
    pub fn pending_weak(&self, arena: &ChainArena) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut id = self.tip;
        while id != self.fork && arena.node(id).kind == ArtifactKind::WeakHeader {
            out.push(id);
            id = arena.node(id).parent;
        }
        out
    }

    /// `(strong, weak)` counts from the fork point.
    pub fn counts(&self, arena: &ChainArena) -> (u64, u64) {
        let (mut strong, mut weak) = (0, 0);
        let mut id = self.tip;
        while id != self.fork {
            match arena.node(id).kind {
                ArtifactKind::StrongBlock => strong += 1,
                ArtifactKind::WeakHeader => weak += 1,
                _ => {}
            }
            id = arena.node(id).parent;
        }
        (strong, weak)
    }
}

/// Strength from the fork point in strong-block equivalents.
pub fn branch_strength(branch: &StrongchainBranch, arena: &ChainArena, ratio: u32) -> f64 {
    let units = arena.strength(branch.tip) - arena.strength(branch.fork);
    units as f64 / f64::from(ratio)
}

/// Strong blocks pay 1, weak headers on the canonical branch pay `1 / ratio`,
/// including weak headers still pending on the tip.
pub fn reward_shares(
    arena: &ChainArena,
    canonical_tip: NodeId,
    miners: usize,
    ratio: u32,
) -> RewardTally {
    let weak_reward = 1.0 / f64::from(ratio);
    let mut tally = RewardTally::new(miners);
    let mut id = canonical_tip;
    while let Some(miner) = arena.node(id).miner {
        let amount = match arena.node(id).kind {
            ArtifactKind::StrongBlock => 1.0,
            ArtifactKind::WeakHeader => weak_reward,
            _ => 0.0,
        };
        tally.credit(miner, amount);
        id = arena.node(id).parent;
    }
    tally
}
