//! Block tree shared by all protocol models.
//!
//! Every chain artifact (block, strong block, weak header) is a node in an
//! append-only arena. A branch is identified by its tip; strength is kept as a
//! cumulative integer count of strength units from genesis so that comparing
//! two branches never involves floating point.

use crate::config::MinerId;

pub type NodeId = u32;

pub const GENESIS: NodeId = 0;

/// Integer strength units. Nakamoto blocks are worth 1; Strongchain strong
/// blocks `ratio` and weak headers 1; Fruitchain blocks `fruit_ratio` plus
/// one per embedded fruit.
pub type Strength = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtifactKind {
    Genesis,
    Block,
    StrongBlock,
    WeakHeader,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub parent: NodeId,
    pub miner: Option<MinerId>,
    pub kind: ArtifactKind,
    /// Number of nodes from genesis.
    pub depth: u32,
    /// Number of blocks (strong blocks for Strongchain) from genesis.
    pub height: u32,
    pub strength: Strength,
    /// Round in which the node was mined.
    pub round: u64,
    /// Range into [`ChainArena::embedded`] for Fruitchain blocks.
    pub fruits: (u32, u32),
}

#[derive(Debug, Clone)]
pub struct ChainArena {
    nodes: Vec<Node>,
    embedded: Vec<u32>,
}

impl Default for ChainArena {
    fn default() -> Self {
        Self::new()
    }
}

impl ChainArena {
    pub fn new() -> Self {
        Self::with_capacity(0)
    }

    pub fn with_capacity(capacity: usize) -> Self {
        let mut nodes = Vec::with_capacity(capacity + 1);
        nodes.push(Node {
            parent: GENESIS,
            miner: None,
            kind: ArtifactKind::Genesis,
            depth: 0,
            height: 0,
            strength: 0,
            round: 0,
            fruits: (0, 0),
        });
        Self {
            nodes,
            embedded: Vec::new(),
        }
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    #[inline]
    pub fn strength(&self, id: NodeId) -> Strength {
        self.nodes[id as usize].strength
    }

    #[inline]
    pub fn height(&self, id: NodeId) -> u32 {
        self.nodes[id as usize].height
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    /// Appends a node on `parent`. `units` is the strength increment and
    /// must be positive.
    pub fn push(
        &mut self,
        parent: NodeId,
        miner: MinerId,
        kind: ArtifactKind,
        units: Strength,
        round: u64,
    ) -> NodeId {
        self.push_with_fruits(parent, miner, kind, units, round, &[])
    }

    pub fn push_with_fruits(
        &mut self,
        parent: NodeId,
        miner: MinerId,
        kind: ArtifactKind,
        units: Strength,
        round: u64,
        fruits: &[u32],
    ) -> NodeId {
        debug_assert!(units > 0);
        let p = &self.nodes[parent as usize];
        let is_block = matches!(kind, ArtifactKind::Block | ArtifactKind::StrongBlock);
        let start = self.embedded.len() as u32;
        self.embedded.extend_from_slice(fruits);
        let node = Node {
            parent,
            miner: Some(miner),
            kind,
            depth: p.depth + 1,
            height: p.height + u32::from(is_block),
            strength: p.strength + units,
            round,
            fruits: (start, fruits.len() as u32),
        };
        let id = self.nodes.len() as NodeId;
        self.nodes.push(node);
        id
    }

    pub fn embedded_fruits(&self, id: NodeId) -> &[u32] {
        let (start, len) = self.nodes[id as usize].fruits;
        &self.embedded[start as usize..(start + len) as usize]
    }

    /// Walks `id` up to the given depth. `depth` must not exceed the node's depth.
    #[inline]
    pub fn ancestor_at_depth(&self, mut id: NodeId, depth: u32) -> NodeId {
        while self.nodes[id as usize].depth > depth {
            id = self.nodes[id as usize].parent;
        }
        id
    }

    /// True if `ancestor` is `id` or lies on the path from `id` to genesis.
    #[inline]
    pub fn is_ancestor_or_self(&self, ancestor: NodeId, id: NodeId) -> bool {
        let d = self.nodes[ancestor as usize].depth;
        if d > self.nodes[id as usize].depth {
            return false;
        }
        self.ancestor_at_depth(id, d) == ancestor
    }

    /// Lowest common ancestor of two nodes.
    pub fn fork_point(&self, a: NodeId, b: NodeId) -> NodeId {
        let da = self.nodes[a as usize].depth;
        let db = self.nodes[b as usize].depth;
        let (mut a, mut b) = if da > db {
            (self.ancestor_at_depth(a, db), b)
        } else {
            (a, self.ancestor_at_depth(b, da))
        };
        while a != b {
            a = self.nodes[a as usize].parent;
            b = self.nodes[b as usize].parent;
        }
        a
    }

    /// Nodes from genesis (exclusive) to `tip` (inclusive), oldest first.
    pub fn path(&self, tip: NodeId) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes[tip as usize].depth as usize);
        let mut id = tip;
        while id != GENESIS {
            out.push(id);
            id = self.nodes[id as usize].parent;
        }
        out.reverse();
        out
    }
}

/// Per-miner rewards collected along a canonical chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTally {
    pub rewards: Vec<f64>,
}

impl RewardTally {
    pub fn new(miners: usize) -> Self {
        Self {
            rewards: vec![0.0; miners],
        }
    }

    pub fn credit(&mut self, miner: MinerId, amount: f64) {
        self.rewards[miner] += amount;
    }

    pub fn total(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Nothing was paid; shares are all zero.
    pub fn is_degenerate(&self) -> bool {
        self.total() <= 0.0
    }

    /// Relative revenue of every miner.
    pub fn shares(&self) -> Vec<f64> {
        let total = self.total();
        if total <= 0.0 {
            return vec![0.0; self.rewards.len()];
        }
        self.rewards.iter().map(|r| r / total).collect()
    }
}
