//! Fruitchain model.
//!
//! Rounds yield a fruit or a block. A fruit hangs from the tip its miner was
//! working on and can be embedded by a later block on the same branch as long
//! as the height distance to its pointer stays within the freshness window.
//!
//! Fork choice weighs work: a block is worth `fruit_ratio` units and every
//! fruit hanging from the branch one unit, whether already embedded or still
//! waiting to be. A block's node strength covers the fruits it embeds; fruits
//! not yet embedded are added by [`FruitView`].

use crate::chain::{ArtifactKind, ChainArena, NodeId, RewardTally, Strength};
use crate::config::{FruitchainParams, MinerId};
use crate::strategy::{AttackerState, StrengthView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FruitArtifact {
    Fruit,
    Block,
}

/// Block with probability `1 / (fruit_ratio + 1)`.
pub fn sample_artifact_kind(fruit_ratio: u32, u: f64) -> FruitArtifact {
    if u * (f64::from(fruit_ratio) + 1.0) < 1.0 {
        FruitArtifact::Block
    } else {
        FruitArtifact::Fruit
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fruit {
    pub miner: MinerId,
    pub pointer: NodeId,
    pub pointer_height: u32,
    pub mined_round: u64,
    /// Blocks (on any branch) that embed this fruit.
    pub embedded_in: Vec<NodeId>,
    /// Dropped from its miner's withheld set on Adopt.
    pub discarded: bool,
    /// Dropped from a pool or withheld set after going stale.
    pub stale: bool,
}

impl Fruit {
    pub fn new(miner: MinerId, pointer: NodeId, pointer_height: u32, mined_round: u64) -> Self {
        Self {
            miner,
            pointer,
            pointer_height,
            mined_round,
            embedded_in: Vec::new(),
            discarded: false,
            stale: false,
        }
    }
}

/// A fruit is fresh for a block at `block_height` when the height distance
/// to its pointer is at most `window` (inclusive).
#[inline]
pub fn is_fresh(pointer_height: u32, block_height: u32, window: u32) -> bool {
    block_height.saturating_sub(pointer_height) <= window
}

/// Assembles a block by `miner` on `parent`, embedding every candidate fruit
/// that points into the branch, is fresh at the new height and is not
/// already embedded on the branch.
///
/// Returns the new block, worth `block_units` plus one unit per embedded
/// fruit. Candidates that are embedded or stale are removed from
/// `candidates`; stale ones are marked. Candidates pointing off the branch
/// are left in place.
#[allow(clippy::too_many_arguments)]
pub fn assemble_block(
    arena: &mut ChainArena,
    fruits: &mut [Fruit],
    parent: NodeId,
    miner: MinerId,
    candidates: &mut Vec<u32>,
    window: u32,
    block_units: Strength,
    round: u64,
) -> NodeId {
    let height = arena.height(parent) + 1;
    let mut chosen = Vec::new();
    candidates.retain(|&f| {
        let fruit = &mut fruits[f as usize];
        if !is_fresh(fruit.pointer_height, height, window) {
            fruit.stale = true;
            return false;
        }
        if !arena.is_ancestor_or_self(fruit.pointer, parent) {
            return true;
        }
        if fruit
            .embedded_in
            .iter()
            .any(|&b| arena.is_ancestor_or_self(b, parent))
        {
            return true;
        }
        chosen.push(f);
        false
    });
    let units = block_units + chosen.len() as Strength;
    let block = arena.push_with_fruits(parent, miner, ArtifactKind::Block, units, round, &chosen);
    for f in chosen {
        fruits[f as usize].embedded_in.push(block);
    }
    block
}

/// Strength of Fruitchain branches, counting published fruits that wait in
/// `pool` and the fruits an attacker withholds.
pub struct FruitView<'a> {
    pub arena: &'a ChainArena,
    pub fruits: &'a [Fruit],
    pub pool: &'a mut Vec<u32>,
    pub window: u32,
}

impl FruitView<'_> {
    /// Pool fruits hanging from the branch of `anchor`, not embedded on it
    /// and still fresh for a block at `next_height`.
    fn pending(&self, anchor: NodeId, next_height: u32) -> Strength {
        let arena = self.arena;
        self.pool
            .iter()
            .filter(|&&f| {
                let fruit = &self.fruits[f as usize];
                is_fresh(fruit.pointer_height, next_height, self.window)
                    && arena.is_ancestor_or_self(fruit.pointer, anchor)
                    && !fruit
                        .embedded_in
                        .iter()
                        .any(|&b| arena.is_ancestor_or_self(b, anchor))
            })
            .count() as Strength
    }
}

impl StrengthView for FruitView<'_> {
    fn public_strength(&self, tip: NodeId) -> Strength {
        self.arena.strength(tip) + self.pending(tip, self.arena.height(tip) + 1)
    }

    fn private_strength(&self, attacker: &AttackerState) -> Strength {
        // Pool fruits never point into or sit in withheld blocks, so the
        // published base decides which of them belong to the branch.
        let tip = attacker.tip();
        let next = self.arena.height(tip) + 1;
        let withheld = attacker
            .withheld_fruits
            .iter()
            .filter(|&&f| is_fresh(self.fruits[f as usize].pointer_height, next, self.window))
            .count() as Strength;
        self.arena.strength(tip) + self.pending(attacker.base, next) + withheld
    }

    fn released(&mut self, fruits: &[u32]) {
        self.pool.extend_from_slice(fruits);
    }
}

/// Each canonical block pays `block_reward` to its miner and each embedded
/// fruit pays `fruit_reward` to the fruit's miner.
pub fn reward_shares(
    arena: &ChainArena,
    fruits: &[Fruit],
    canonical_tip: NodeId,
    miners: usize,
    params: &FruitchainParams,
) -> RewardTally {
    let mut tally = RewardTally::new(miners);
    let mut id = canonical_tip;
    while let Some(miner) = arena.node(id).miner {
        tally.credit(miner, params.block_reward);
        for &f in arena.embedded_fruits(id) {
            tally.credit(fruits[f as usize].miner, params.fruit_reward);
        }
        id = arena.node(id).parent;
    }
    tally
}

/// Where every mined fruit ended up at the end of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FruitAccounting {
    pub mined: u64,
    pub embedded_canonical: u64,
    /// Withheld by an attacker that later adopted another branch.
    pub discarded: u64,
    pub stale: u64,
    /// Still waiting in a pool or withheld set, or embedded only off the
    /// canonical chain.
    pub pending: u64,
    /// Fruits embedded more than once on the canonical chain (must be zero).
    pub duplicates: u64,
    /// Canonical embeddings that violate the freshness window (must be zero).
    pub freshness_violations: u64,
}

impl FruitAccounting {
    pub fn is_conserved(&self) -> bool {
        self.embedded_canonical + self.discarded + self.stale + self.pending == self.mined
    }
}

pub fn account_fruits(
    arena: &ChainArena,
    fruits: &[Fruit],
    canonical_tip: NodeId,
    window: u32,
) -> FruitAccounting {
    let mut seen = vec![0u32; fruits.len()];
    let mut acc = FruitAccounting {
        mined: fruits.len() as u64,
        ..Default::default()
    };
    let mut id = canonical_tip;
    while arena.node(id).miner.is_some() {
        let height = arena.height(id);
        for &f in arena.embedded_fruits(id) {
            seen[f as usize] += 1;
            let fruit = &fruits[f as usize];
            if !is_fresh(fruit.pointer_height, height, window)
                || !arena.is_ancestor_or_self(fruit.pointer, id)
            {
                acc.freshness_violations += 1;
            }
        }
        id = arena.node(id).parent;
    }
    for (f, fruit) in fruits.iter().enumerate() {
        match seen[f] {
            0 if fruit.discarded => acc.discarded += 1,
            0 if fruit.stale => acc.stale += 1,
            0 => acc.pending += 1,
            1 => acc.embedded_canonical += 1,
            n => {
                acc.embedded_canonical += 1;
                acc.duplicates += u64::from(n - 1);
            }
        }
    }
    acc
}
