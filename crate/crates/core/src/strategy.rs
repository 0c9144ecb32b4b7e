//! Selfish-mining decisions and multi-attacker release logic.
//!
//! Strengths are the protocol's fork-choice metric in integer units (see
//! [`crate::chain::Strength`]). The override quantum is the strength of one
//! full block: 1 for Nakamoto, `ratio` for Strongchain, `fruit_ratio` for
//! Fruitchain.

use serde::{Deserialize, Serialize};

use crate::chain::{ChainArena, NodeId, Strength};
use crate::config::{MinerId, MinerKind, MinerSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Override,
    Adopt,
    Match,
    Wait,
}

/// Selfish-mining rule, evaluated whenever the public chain changes.
///
/// `private` and `public` are compared on the same integer metric.
/// Match requires exact equality. Override requires the public chain to be
/// exactly one quantum short; with a finer metric (Strongchain weak headers)
/// a smaller lead is held and may be overtaken.
pub fn decide_action(
    private: Strength,
    public: Strength,
    has_private_artifacts: bool,
    quantum: Strength,
) -> Action {
    if public > private {
        Action::Adopt
    } else if !has_private_artifacts {
        Action::Wait
    } else if public == private {
        Action::Match
    } else if private - public == quantum {
        Action::Override
    } else {
        Action::Wait
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchOwner {
    Honest,
    Attacker(MinerId),
}

/// How the honest mining power splits over tied branches.
///
/// One attacker branch against the honest branch: `gamma` to the attacker,
/// `1 - gamma` to the honest branch. Several attacker branches: an even split
/// over every tied branch, honest branch included.
pub fn honest_split(owners: &[BranchOwner], gamma: f64) -> Vec<f64> {
    let n = owners.len();
    if n == 0 {
        return Vec::new();
    }
    let attackers = owners
        .iter()
        .filter(|o| matches!(o, BranchOwner::Attacker(_)))
        .count();
    let has_honest = attackers < n;
    if has_honest && attackers == 1 {
        owners
            .iter()
            .map(|o| match o {
                BranchOwner::Attacker(_) => gamma,
                BranchOwner::Honest => 1.0 - gamma,
            })
            .collect()
    } else {
        vec![1.0 / n as f64; n]
    }
}

/// Probability that the next artifact extending the tie lands on each branch.
///
/// A branch owned by attacker `i` collects `p_i` plus its honest split of
/// `p_H`. Attackers outside the tie keep mining their own private branches,
/// so the vector is normalised over the power that extends the tie.
pub fn resolve_match_weights(
    owners: &[BranchOwner],
    miners: &[MinerSpec],
    gamma: f64,
) -> Result<Vec<f64>> {
    if owners.len() < 2 {
        return Err(Error::Contract(format!(
            "a tie needs at least two branches, got {}",
            owners.len()
        )));
    }
    let honest_power: f64 = miners
        .iter()
        .filter(|m| m.kind == MinerKind::Honest)
        .map(|m| m.power)
        .sum();
    let split = honest_split(owners, gamma);
    let mut weights: Vec<f64> = owners
        .iter()
        .zip(&split)
        .map(|(owner, share)| {
            let own = match owner {
                BranchOwner::Attacker(id) => miners.get(*id).map_or(0.0, |m| m.power),
                BranchOwner::Honest => 0.0,
            };
            own + share * honest_power
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Internal("tie weights have zero mass".into()));
    }
    for w in &mut weights {
        *w /= total;
    }
    let check: f64 = weights.iter().sum();
    if (check - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::Internal(format!(
            "tie weights {weights:?} are not a distribution"
        )));
    }
    Ok(weights)
}

/// A set of published branches of equal strength, with the probability that
/// each one is extended next.
#[derive(Debug, Clone, PartialEq)]
pub struct TieContext {
    pub branches: Vec<(BranchOwner, NodeId)>,
    pub weights: Vec<f64>,
}

impl TieContext {
    pub fn new(
        branches: Vec<(BranchOwner, NodeId)>,
        miners: &[MinerSpec],
        gamma: f64,
    ) -> Result<Self> {
        let owners: Vec<BranchOwner> = branches.iter().map(|(o, _)| *o).collect();
        let weights = resolve_match_weights(&owners, miners, gamma)?;
        Ok(Self { branches, weights })
    }
}

/// The published tips honest miners consider. More than one entry means an
/// open tie; all entries then have equal strength.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicState {
    pub tips: Vec<(BranchOwner, NodeId)>,
}

impl PublicState {
    pub fn new(tip: NodeId) -> Self {
        Self {
            tips: vec![(BranchOwner::Honest, tip)],
        }
    }

    /// Tip used when a single reference is needed (the first published).
    #[inline]
    pub fn best(&self) -> NodeId {
        self.tips[0].1
    }

    #[inline]
    pub fn is_tie(&self) -> bool {
        self.tips.len() > 1
    }

    pub fn owners(&self) -> Vec<BranchOwner> {
        self.tips.iter().map(|(o, _)| *o).collect()
    }

    pub fn set_single(&mut self, owner: BranchOwner, tip: NodeId) {
        self.tips.clear();
        self.tips.push((owner, tip));
    }

    /// Drops tied tips that fell behind the strongest one. Returns true if
    /// the tie was broken.
    pub fn settle<V: StrengthView + ?Sized>(&mut self, view: &V) -> bool {
        if !self.is_tie() {
            return false;
        }
        let best = self
            .tips
            .iter()
            .map(|&(_, t)| view.public_strength(t))
            .max()
            .unwrap_or(0);
        let before = self.tips.len();
        self.tips.retain(|&(_, t)| view.public_strength(t) == best);
        self.tips.len() != before
    }
}

/// Fork-choice metric of published tips and withheld branches.
pub trait StrengthView {
    fn public_strength(&self, tip: NodeId) -> Strength;
    /// Strength of an attacker's branch including everything it withholds.
    fn private_strength(&self, attacker: &AttackerState) -> Strength;
    /// Withheld fruits that were just published along with their branch.
    fn released(&mut self, _fruits: &[u32]) {}
}

/// Metric carried entirely by the chain nodes (Nakamoto, Strongchain).
impl StrengthView for ChainArena {
    fn public_strength(&self, tip: NodeId) -> Strength {
        self.strength(tip)
    }

    fn private_strength(&self, attacker: &AttackerState) -> Strength {
        self.strength(attacker.tip())
    }
}

/// One selfish miner's withheld state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackerState {
    pub owner: MinerId,
    /// Published node the private branch extends.
    pub base: NodeId,
    /// Withheld nodes, oldest first; each extends the previous one.
    pub private: Vec<NodeId>,
    /// Withheld Fruitchain fruits, not yet embedded in a private block.
    pub withheld_fruits: Vec<u32>,
    /// The attacker's branch is published and part of an open tie.
    pub in_match: bool,
}

impl AttackerState {
    pub fn new(owner: MinerId, base: NodeId) -> Self {
        Self {
            owner,
            base,
            private: Vec::new(),
            withheld_fruits: Vec::new(),
            in_match: false,
        }
    }

    #[inline]
    pub fn tip(&self) -> NodeId {
        self.private.last().copied().unwrap_or(self.base)
    }

    pub fn has_private_artifacts(&self) -> bool {
        !self.private.is_empty()
    }

    fn publish(&mut self, released_fruits: &mut Vec<u32>) -> NodeId {
        let tip = self.tip();
        self.base = tip;
        self.private.clear();
        released_fruits.append(&mut self.withheld_fruits);
        tip
    }

    /// Abandons the private branch and mines on `tip`.
    pub fn adopt(&mut self, tip: NodeId, discarded_fruits: &mut Vec<u32>) {
        self.base = tip;
        self.private.clear();
        discarded_fruits.append(&mut self.withheld_fruits);
        self.in_match = false;
    }
}

/// Side effects of a cascade, reused across calls.
#[derive(Debug, Default, Clone)]
pub struct CascadeOutcome {
    /// State-changing decisions (Override, Match, Adopt) in execution order.
    pub actions: Vec<(MinerId, Action)>,
    pub released_fruits: Vec<u32>,
    pub discarded_fruits: Vec<u32>,
    order: Vec<usize>,
}

impl CascadeOutcome {
    pub fn clear(&mut self) {
        self.actions.clear();
        self.released_fruits.clear();
        self.discarded_fruits.clear();
    }
}

/// An attacker is in a match while its published tip is one of several tied tips.
pub fn sync_match_flags(attackers: &mut [AttackerState], public: &PublicState) {
    let tie = public.is_tie();
    for a in attackers {
        a.in_match = tie
            && a.private.is_empty()
            && public
                .tips
                .iter()
                .any(|&(o, t)| o == BranchOwner::Attacker(a.owner) && t == a.base);
    }
}

/// Lets every attacker react to a change of the public chain until no
/// attacker changes it any further.
///
/// Attackers are scanned in ascending order of tip strength, so a weaker
/// branch is released first and a stronger one may override it in turn.
/// Each Override or Match publishes at least one withheld node, which bounds
/// the number of passes by the total number of withheld nodes.
pub fn cascade_release<V: StrengthView + ?Sized>(
    attackers: &mut [AttackerState],
    public: &mut PublicState,
    view: &mut V,
    quantum: Strength,
    out: &mut CascadeOutcome,
) -> Result<()> {
    let withheld: usize = attackers.iter().map(|a| a.private.len()).sum();
    let mut passes = 0usize;
    loop {
        let mut order = std::mem::take(&mut out.order);
        order.clear();
        order.extend(0..attackers.len());
        if attackers.len() > 1 {
            order.sort_by_key(|&i| (view.private_strength(&attackers[i]), attackers[i].owner));
        }
        let mut changed = false;
        for &i in &order {
            let a = &mut attackers[i];
            let public_tip = public.best();
            let private = view.private_strength(a);
            let public_strength = view.public_strength(public_tip);
            match decide_action(private, public_strength, a.has_private_artifacts(), quantum) {
                Action::Wait => {}
                Action::Adopt => {
                    a.adopt(public_tip, &mut out.discarded_fruits);
                    out.actions.push((a.owner, Action::Adopt));
                }
                Action::Override => {
                    let from = out.released_fruits.len();
                    let tip = a.publish(&mut out.released_fruits);
                    view.released(&out.released_fruits[from..]);
                    a.in_match = false;
                    public.set_single(BranchOwner::Attacker(a.owner), tip);
                    out.actions.push((a.owner, Action::Override));
                    changed = true;
                }
                Action::Match => {
                    let from = out.released_fruits.len();
                    let tip = a.publish(&mut out.released_fruits);
                    view.released(&out.released_fruits[from..]);
                    debug_assert_eq!(view.public_strength(tip), public_strength);
                    a.in_match = true;
                    public.tips.push((BranchOwner::Attacker(a.owner), tip));
                    out.actions.push((a.owner, Action::Match));
                    changed = true;
                }
            }
        }
        out.order = order;
        if changed {
            sync_match_flags(attackers, public);
        }
        if !changed {
            return Ok(());
        }
        passes += 1;
        if passes > withheld {
            return Err(Error::Internal(format!(
                "cascade did not settle after {passes} passes ({withheld} withheld nodes)"
            )));
        }
    }
}
