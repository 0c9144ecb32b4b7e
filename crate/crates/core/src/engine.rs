//! The round loop.
//!
//! Each round: draw a leader, draw the artifact kind, let the leader mine.
//! Honest leaders publish on the public tip (choosing a branch by the honest
//! split while a tie is open). Selfish leaders extend their private branch
//! and publish at once only when extending their own tied branch. Every
//! change of the public chain is followed by [`cascade_release`]; for
//! Fruitchain that includes every published fruit, since fruits add strength.

use serde::{Deserialize, Serialize};

use crate::chain::{ArtifactKind, ChainArena, NodeId, Strength, GENESIS};
use crate::config::{
    validate_miners, EndCondition, MinerId, MinerKind, MinerSpec, ProtocolParams, SimulationConfig,
};
use crate::error::{Error, Result};
use crate::fruitchain::{self, Fruit, FruitAccounting, FruitArtifact, FruitView};
use crate::rng::SplitMix64;
use crate::strategy::{
    cascade_release, honest_split, sync_match_flags, Action, AttackerState, BranchOwner,
    CascadeOutcome, PublicState, StrengthView,
};
use crate::{nakamoto, strongchain};

/// Picks the miner whose half-open cumulative-power interval contains `u`.
pub fn select_leader(miners: &[MinerSpec], u: f64) -> Result<MinerId> {
    validate_miners(miners)?;
    if !(0.0..1.0).contains(&u) {
        return Err(Error::Contract(format!(
            "leader draw {u} is outside [0, 1)"
        )));
    }
    let cumulative = cumulative_powers(miners);
    Ok(pick(&cumulative, u))
}

fn cumulative_powers(miners: &[MinerSpec]) -> Vec<f64> {
    let mut acc = 0.0;
    miners
        .iter()
        .map(|m| {
            acc += m.power;
            acc
        })
        .collect()
}

#[inline]
fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactTag {
    Block,
    StrongBlock,
    WeakHeader,
    Fruit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u64,
    pub leader: MinerId,
    pub artifact_kind: ArtifactTag,
    pub actions_taken: Vec<(MinerId, Action)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub rounds_executed: u64,
    pub rewards: Vec<f64>,
    /// Relative revenue `reward_i / sum(rewards)`.
    pub revenues: Vec<f64>,
    /// No reward was paid (empty canonical chain).
    pub degenerate: bool,
    /// Blocks on the canonical chain (strong blocks for Strongchain).
    pub canonical_height: u64,
    /// Nodes of any kind on the canonical chain.
    pub canonical_nodes: u64,
    /// Chain nodes mined but not on the canonical chain.
    pub orphaned_nodes: u64,
    pub fruits: Option<FruitAccounting>,
    pub records: Vec<RoundRecord>,
}

impl SimulationResult {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationResult> {
    config.validate()?;
    Simulation::new(config).run()
}

struct Simulation<'a> {
    cfg: &'a SimulationConfig,
    rng: SplitMix64,
    cumulative: Vec<f64>,
    /// Miner id to index into `attackers`.
    attacker_slot: Vec<Option<usize>>,
    arena: ChainArena,
    public: PublicState,
    attackers: Vec<AttackerState>,
    fruits: Vec<Fruit>,
    pool: Vec<u32>,
    quantum: Strength,
    outcome: CascadeOutcome,
    records: Vec<RoundRecord>,
}

enum Mined {
    Node(ArtifactKind, Strength),
    Fruit,
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a SimulationConfig) -> Self {
        let mut attacker_slot = vec![None; cfg.miners.len()];
        let mut attackers = Vec::new();
        for m in &cfg.miners {
            if m.kind == MinerKind::Selfish {
                attacker_slot[m.id] = Some(attackers.len());
                attackers.push(AttackerState::new(m.id, GENESIS));
            }
        }
        let quantum = match cfg.protocol_params {
            ProtocolParams::Strongchain(p) => Strength::from(p.ratio),
            ProtocolParams::Nakamoto => nakamoto::BLOCK_UNITS,
            ProtocolParams::Fruitchain(p) => Strength::from(p.fruit_ratio),
        };
        let capacity = match cfg.protocol_params {
            ProtocolParams::Fruitchain(p) => {
                (cfg.rounds / (u64::from(p.fruit_ratio) + 1)) as usize + 16
            }
            _ => cfg.rounds as usize,
        };
        Self {
            cfg,
            rng: SplitMix64::new(cfg.master_seed),
            cumulative: cumulative_powers(&cfg.miners),
            attacker_slot,
            arena: ChainArena::with_capacity(capacity.min(1 << 24)),
            public: PublicState::new(GENESIS),
            attackers,
            fruits: Vec::new(),
            pool: Vec::new(),
            quantum,
            outcome: CascadeOutcome::default(),
            records: Vec::new(),
        }
    }

    fn run(mut self) -> Result<SimulationResult> {
        let mut executed = 0;
        for round in 1..=self.cfg.rounds {
            if let EndCondition::TargetHeight(h) = self.cfg.end_condition {
                if u64::from(self.arena.height(self.public.best())) >= h {
                    break;
                }
            }
            self.step(round)?;
            executed = round;
        }
        self.finish(executed)
    }

    fn draw_artifact(&mut self) -> Mined {
        match self.cfg.protocol_params {
            ProtocolParams::Nakamoto => Mined::Node(ArtifactKind::Block, nakamoto::BLOCK_UNITS),
            ProtocolParams::Strongchain(p) => {
                let kind = strongchain::sample_artifact_kind(p.ratio, self.rng.next_f64());
                Mined::Node(
                    strongchain::artifact(kind),
                    strongchain::units(kind, p.ratio),
                )
            }
            ProtocolParams::Fruitchain(p) => {
                match fruitchain::sample_artifact_kind(p.fruit_ratio, self.rng.next_f64()) {
                    FruitArtifact::Block => {
                        Mined::Node(ArtifactKind::Block, Strength::from(p.fruit_ratio))
                    }
                    FruitArtifact::Fruit => Mined::Fruit,
                }
            }
        }
    }

    fn freshness_window(&self) -> u32 {
        match self.cfg.protocol_params {
            ProtocolParams::Fruitchain(p) => p.freshness_window,
            _ => 0,
        }
    }

    fn step(&mut self, round: u64) -> Result<()> {
        let leader = pick(&self.cumulative, self.rng.next_f64());
        let mined = self.draw_artifact();
        self.outcome.clear();
        let tag = match &mined {
            Mined::Fruit => ArtifactTag::Fruit,
            Mined::Node(ArtifactKind::StrongBlock, _) => ArtifactTag::StrongBlock,
            Mined::Node(ArtifactKind::WeakHeader, _) => ArtifactTag::WeakHeader,
            Mined::Node(_, _) => ArtifactTag::Block,
        };
        match self.attacker_slot[leader] {
            None => self.honest_round(leader, mined, round)?,
            Some(slot) => self.selfish_round(slot, mined, round)?,
        }
        if self.cfg.record_rounds {
            self.records.push(RoundRecord {
                round_index: round,
                leader,
                artifact_kind: tag,
                actions_taken: self.outcome.actions.clone(),
            });
        }
        Ok(())
    }

    fn honest_parent(&mut self) -> NodeId {
        if !self.public.is_tie() {
            return self.public.best();
        }
        let split = honest_split(&self.public.owners(), self.cfg.gamma);
        let u = self.rng.next_f64();
        let mut acc = 0.0;
        for (i, w) in split.iter().enumerate() {
            acc += w;
            if u < acc {
                return self.public.tips[i].1;
            }
        }
        // Rounding left `u` past the last boundary; take the last branch
        // with positive weight.
        let i = split.iter().rposition(|w| *w > 0.0).unwrap_or(0);
        self.public.tips[i].1
    }

    fn honest_round(&mut self, leader: MinerId, mined: Mined, round: u64) -> Result<()> {
        let parent = self.honest_parent();
        match mined {
            Mined::Fruit => {
                let id = self.fruits.len() as u32;
                self.fruits
                    .push(Fruit::new(leader, parent, self.arena.height(parent), round));
                self.pool.push(id);
                self.react()
            }
            Mined::Node(kind, units) => {
                let node = if matches!(self.cfg.protocol_params, ProtocolParams::Fruitchain(_)) {
                    let window = self.freshness_window();
                    fruitchain::assemble_block(
                        &mut self.arena,
                        &mut self.fruits,
                        parent,
                        leader,
                        &mut self.pool,
                        window,
                        units,
                        round,
                    )
                } else {
                    self.arena.push(parent, leader, kind, units, round)
                };
                self.public.set_single(BranchOwner::Honest, node);
                self.react()
            }
        }
    }

    fn selfish_round(&mut self, slot: usize, mined: Mined, round: u64) -> Result<()> {
        let window = self.freshness_window();
        let attacker = &mut self.attackers[slot];
        let tip = attacker.tip();
        match mined {
            Mined::Fruit => {
                let id = self.fruits.len() as u32;
                self.fruits.push(Fruit::new(
                    attacker.owner,
                    tip,
                    self.arena.height(tip),
                    round,
                ));
                if !attacker.in_match {
                    attacker.withheld_fruits.push(id);
                    return Ok(());
                }
                // Hangs from its own tied branch: publishing it breaks the tie.
                self.pool.push(id);
                self.react()
            }
            Mined::Node(kind, units) => {
                let node = if matches!(self.cfg.protocol_params, ProtocolParams::Fruitchain(_)) {
                    fruitchain::assemble_block(
                        &mut self.arena,
                        &mut self.fruits,
                        tip,
                        attacker.owner,
                        &mut attacker.withheld_fruits,
                        window,
                        units,
                        round,
                    )
                } else {
                    self.arena.push(tip, attacker.owner, kind, units, round)
                };
                attacker.private.push(node);
                if !attacker.in_match {
                    return Ok(());
                }
                // Extending its own tied branch: release at once and take the lead.
                attacker.base = node;
                attacker.private.clear();
                attacker.in_match = false;
                self.pool.extend_from_slice(&attacker.withheld_fruits);
                self.outcome
                    .released_fruits
                    .append(&mut attacker.withheld_fruits);
                self.outcome
                    .actions
                    .push((attacker.owner, Action::Override));
                self.public
                    .set_single(BranchOwner::Attacker(attacker.owner), node);
                self.react()
            }
        }
    }

    /// Runs `f` against the protocol's strength metric.
    fn with_view<R>(
        &mut self,
        f: impl FnOnce(
            &mut dyn StrengthView,
            &mut [AttackerState],
            &mut PublicState,
            &mut CascadeOutcome,
        ) -> R,
    ) -> R {
        match self.cfg.protocol_params {
            ProtocolParams::Fruitchain(p) => {
                let mut view = FruitView {
                    arena: &self.arena,
                    fruits: &self.fruits,
                    pool: &mut self.pool,
                    window: p.freshness_window,
                };
                f(
                    &mut view,
                    &mut self.attackers,
                    &mut self.public,
                    &mut self.outcome,
                )
            }
            _ => f(
                &mut self.arena,
                &mut self.attackers,
                &mut self.public,
                &mut self.outcome,
            ),
        }
    }

    fn react(&mut self) -> Result<()> {
        let quantum = self.quantum;
        self.with_view(|view, attackers, public, outcome| {
            if public.settle(view) {
                sync_match_flags(attackers, public);
            }
            if attackers.is_empty() {
                return Ok(());
            }
            cascade_release(attackers, public, view, quantum, outcome)
        })?;
        if let ProtocolParams::Fruitchain(p) = self.cfg.protocol_params {
            // After Adopt, withheld fruits hanging from the adopted branch are
            // published; the rest hang from abandoned blocks.
            let tip = self.public.best();
            for &f in &self.outcome.discarded_fruits {
                if self
                    .arena
                    .is_ancestor_or_self(self.fruits[f as usize].pointer, tip)
                {
                    self.pool.push(f);
                } else {
                    self.fruits[f as usize].discarded = true;
                }
            }
            self.outcome.discarded_fruits.clear();
            self.prune_pool(p.freshness_window);
        }
        Ok(())
    }

    /// Drops published fruits too old for any future block.
    fn prune_pool(&mut self, window: u32) {
        let next_height = self.arena.height(self.public.best()) + 1;
        let fruits = &mut self.fruits;
        self.pool.retain(|&f| {
            let fruit = &mut fruits[f as usize];
            if fruitchain::is_fresh(fruit.pointer_height, next_height, window) {
                true
            } else {
                fruit.stale = true;
                false
            }
        });
    }

    /// Strongest of all published tips and withheld branches; earlier
    /// candidates win exact ties.
    fn canonical_tip(&mut self) -> NodeId {
        self.with_view(|view, attackers, public, _| {
            let mut best = public.best();
            let mut best_strength = view.public_strength(best);
            for &(_, t) in &public.tips {
                let s = view.public_strength(t);
                if s > best_strength {
                    (best, best_strength) = (t, s);
                }
            }
            for a in attackers.iter().filter(|a| a.has_private_artifacts()) {
                let s = view.private_strength(a);
                if s > best_strength {
                    (best, best_strength) = (a.tip(), s);
                }
            }
            best
        })
    }

    fn finish(mut self, executed: u64) -> Result<SimulationResult> {
        let tip = self.canonical_tip();
        let n = self.cfg.miners.len();
        let (tally, fruits) = match &self.cfg.protocol_params {
            ProtocolParams::Nakamoto => (nakamoto::reward_shares(&self.arena, tip, n), None),
            ProtocolParams::Strongchain(p) => (
                strongchain::reward_shares(&self.arena, tip, n, p.ratio),
                None,
            ),
            ProtocolParams::Fruitchain(p) => (
                fruitchain::reward_shares(&self.arena, &self.fruits, tip, n, p),
                Some(fruitchain::account_fruits(
                    &self.arena,
                    &self.fruits,
                    tip,
                    p.freshness_window,
                )),
            ),
        };
        let canonical_nodes = u64::from(self.arena.node(tip).depth);
        Ok(SimulationResult {
            rounds_executed: executed,
            revenues: tally.shares(),
            degenerate: tally.is_degenerate(),
            rewards: tally.rewards,
            canonical_height: u64::from(self.arena.height(tip)),
            canonical_nodes,
            orphaned_nodes: (self.arena.len() as u64 - 1) - canonical_nodes,
            fruits,
            records: self.records,
        })
    }
}
