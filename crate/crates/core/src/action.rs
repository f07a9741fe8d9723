//! Per-player action spaces, sequence validation and application.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::error::{Error, Result};
use crate::ids::{ActionId, AssetId, DomainId, PlayerId, PoolId};
use crate::model::WorldState;
use crate::venues::{
    apply_bridge, apply_pending_tx, apply_stylized_arb, apply_swap, BridgeSpec, Direction, PendingTx,
    StylizedArbSpec,
};

/// How a swap or bridge chooses its input quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AmountSpec {
    /// The player's whole balance of the input asset at application time.
    All,
    Fixed(Amount),
    /// Continuous parameter chosen by the searcher within `[lo, hi]`.
    Range { lo: Amount, hi: Amount },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKindTag {
    ExecutePendingTx,
    Swap,
    StylizedArb,
    Bridge,
}

impl ActionKindTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKindTag::ExecutePendingTx => "execute_pending_tx",
            ActionKindTag::Swap => "swap",
            ActionKindTag::StylizedArb => "stylized_arb",
            ActionKindTag::Bridge => "bridge",
        }
    }
}

impl fmt::Display for ActionKindTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionKind {
    ExecutePendingTx(PendingTx),
    Swap { pool: PoolId, direction: Direction, amount: AmountSpec },
    StylizedArb(StylizedArbSpec),
    Bridge { bridge: BridgeSpec, amount: AmountSpec },
}

/// A named state-to-state mapping the player may include at most once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub id: ActionId,
    /// Sequencers whose cooperation the action needs. Bridges and
    /// cross-domain arbitrages list both endpoints.
    pub domains: BTreeSet<DomainId>,
    pub kind: ActionKind,
}

impl Action {
    pub fn tag(&self) -> ActionKindTag {
        match self.kind {
            ActionKind::ExecutePendingTx(_) => ActionKindTag::ExecutePendingTx,
            ActionKind::Swap { .. } => ActionKindTag::Swap,
            ActionKind::StylizedArb(_) => ActionKindTag::StylizedArb,
            ActionKind::Bridge { .. } => ActionKindTag::Bridge,
        }
    }

    pub fn amount_spec(&self) -> Option<&AmountSpec> {
        match &self.kind {
            ActionKind::Swap { amount, .. } | ActionKind::Bridge { amount, .. } => Some(amount),
            _ => None,
        }
    }

    /// Declared `[lo, hi]` for continuous actions.
    pub fn range(&self) -> Option<(Amount, Amount)> {
        match self.amount_spec() {
            Some(AmountSpec::Range { lo, hi }) => Some((*lo, *hi)),
            _ => None,
        }
    }

    pub fn is_parametric(&self) -> bool {
        self.range().is_some()
    }

    /// Balance slot the player pays from, if any.
    pub fn input_slot(&self, state: &WorldState) -> Result<Option<(DomainId, AssetId)>> {
        Ok(match &self.kind {
            ActionKind::Swap { pool, direction, .. } => {
                let pool = state.pool(pool)?.as_constant_product()?;
                Some((pool.domain.clone(), pool.assets(*direction).0.clone()))
            }
            ActionKind::Bridge { bridge, .. } => Some((bridge.from_domain.clone(), bridge.from_asset.clone())),
            _ => None,
        })
    }

    /// Declared range clipped to what the player can pay in `state`.
    /// `None` when no positive amount in range is affordable.
    pub fn feasible_range(&self, state: &WorldState, player: &PlayerId) -> Option<(Amount, Amount)> {
        let (lo, hi) = self.range()?;
        let (domain, asset) = self.input_slot(state).ok()??;
        let hi = hi.min(state.balance(&domain, player, &asset));
        if hi < lo || !hi.is_positive() {
            return None;
        }
        Some((lo, hi))
    }

    /// The concrete input quantity this step will use, if the action has one.
    pub fn resolve_amount(&self, state: &WorldState, player: &PlayerId, given: Option<Amount>) -> Result<Option<Amount>> {
        match (self.amount_spec(), given) {
            (None, None) => Ok(None),
            (None, Some(_)) | (Some(AmountSpec::All), Some(_)) | (Some(AmountSpec::Fixed(_)), Some(_)) => {
                Err(Error::AmountNotAccepted(self.id.clone()))
            }
            (Some(AmountSpec::Fixed(x)), None) => Ok(Some(*x)),
            (Some(AmountSpec::All), None) => {
                let (domain, asset) = self.input_slot(state)?.expect("swap and bridge have inputs");
                Ok(Some(state.balance(&domain, player, &asset)))
            }
            (Some(AmountSpec::Range { .. }), None) => Err(Error::AmountRequired(self.id.clone())),
            (Some(AmountSpec::Range { lo, hi }), Some(x)) => {
                if x < *lo || x > *hi {
                    return Err(Error::AmountOutOfRange { action: self.id.clone(), amount: x, lo: *lo, hi: *hi });
                }
                Ok(Some(x))
            }
        }
    }

    /// Apply this action for `player`; `amount` is required exactly when the
    /// action is parametric.
    pub fn apply(&self, state: &WorldState, player: &PlayerId, amount: Option<Amount>) -> Result<WorldState> {
        let qty = self.resolve_amount(state, player, amount)?;
        match &self.kind {
            ActionKind::ExecutePendingTx(tx) => apply_pending_tx(state, tx),
            ActionKind::StylizedArb(spec) => apply_stylized_arb(state, player, spec),
            ActionKind::Swap { pool, direction, .. } => {
                apply_swap(state, player, pool, *direction, qty.unwrap_or(Amount::ZERO))
            }
            ActionKind::Bridge { bridge, .. } => apply_bridge(state, player, bridge, qty.unwrap_or(Amount::ZERO)),
        }
    }

    /// Whether some admissible amount lets this action apply in `state`.
    pub fn is_applicable(&self, state: &WorldState, player: &PlayerId) -> bool {
        if !self.is_parametric() {
            return self.apply(state, player, None).is_ok();
        }
        let Some((lo, hi)) = self.feasible_range(state, player) else {
            return false;
        };
        [hi, lo.midpoint(hi), lo]
            .into_iter()
            .any(|x| self.apply(state, player, Some(x)).is_ok())
    }
}

/// One entry of an action sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub action: ActionId,
    /// Chosen input for continuous actions; absent otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<Amount>,
}

impl Step {
    pub fn new(action: ActionId) -> Step {
        Step { action, amount: None }
    }

    pub fn with_amount(action: ActionId, amount: Amount) -> Step {
        Step { action, amount: Some(amount) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSequence(pub Vec<Step>);

impl ActionSequence {
    pub fn empty() -> ActionSequence {
        ActionSequence(Vec::new())
    }

    pub fn of(ids: &[&str]) -> Result<ActionSequence> {
        ids.iter().map(|s| Ok(Step::new(ActionId::new(s)?))).collect::<Result<Vec<_>>>().map(ActionSequence)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> &[Step] {
        &self.0
    }

    pub fn ids(&self) -> impl Iterator<Item = &ActionId> {
        self.0.iter().map(|s| &s.action)
    }
}

/// First failing position of a rejected sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub cause: Error,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.index, self.cause)
    }
}

/// Every player's action templates, keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionSpace {
    domains: BTreeSet<DomainId>,
    players: BTreeMap<PlayerId, BTreeMap<ActionId, Action>>,
}

impl ActionSpace {
    pub fn new(domains: impl IntoIterator<Item = DomainId>, players: impl IntoIterator<Item = PlayerId>) -> ActionSpace {
        ActionSpace {
            domains: domains.into_iter().collect(),
            players: players.into_iter().map(|p| (p, BTreeMap::new())).collect(),
        }
    }

    pub fn insert(&mut self, player: &PlayerId, action: Action) {
        self.players.entry(player.clone()).or_default().insert(action.id.clone(), action);
    }

    pub fn domains(&self) -> &BTreeSet<DomainId> {
        &self.domains
    }

    fn player_actions(&self, player: &PlayerId) -> Result<&BTreeMap<ActionId, Action>> {
        self.players.get(player).ok_or_else(|| Error::unknown(PlayerId::KIND, player))
    }

    fn check_domains(&self, domains: &BTreeSet<DomainId>) -> Result<()> {
        match domains.iter().find(|d| !self.domains.contains(*d)) {
            Some(d) => Err(Error::unknown(DomainId::KIND, d)),
            None => Ok(()),
        }
    }

    pub fn get(&self, player: &PlayerId, id: &ActionId) -> Option<&Action> {
        self.players.get(player)?.get(id)
    }

    /// Templates usable with sequencers of `domains` only, sorted by id.
    pub fn actions(&self, player: &PlayerId, domains: &BTreeSet<DomainId>) -> Result<Vec<&Action>> {
        self.check_domains(domains)?;
        Ok(self
            .player_actions(player)?
            .values()
            .filter(|a| a.domains.is_subset(domains))
            .collect())
    }

    /// Actions that can be applied in `state` (for some amount, if
    /// continuous), sorted by id.
    pub fn available_actions(
        &self,
        player: &PlayerId,
        domains: &BTreeSet<DomainId>,
        state: &WorldState,
    ) -> Result<Vec<&Action>> {
        Ok(self
            .actions(player, domains)?
            .into_iter()
            .filter(|a| a.is_applicable(state, player))
            .collect())
    }

    pub fn validate_sequence(
        &self,
        player: &PlayerId,
        domains: &BTreeSet<DomainId>,
        state: &WorldState,
        seq: &ActionSequence,
    ) -> std::result::Result<(), Violation> {
        let space = self.actions(player, domains).map_err(|cause| Violation { index: 0, cause })?;
        let mut seen = BTreeSet::new();
        let mut cur = state.clone();
        for (index, step) in seq.steps().iter().enumerate() {
            let fail = |cause| Violation { index, cause };
            let Some(action) = space.iter().find(|a| a.id == step.action) else {
                return Err(fail(Error::NotInActionSpace { action: step.action.clone(), player: player.clone() }));
            };
            if !seen.insert(&step.action) {
                return Err(fail(Error::AlreadyConsumed(step.action.clone())));
            }
            cur = action.apply(&cur, player, step.amount).map_err(fail)?;
        }
        Ok(())
    }

    /// Left fold of the sequence over `state`.
    pub fn apply_sequence(&self, state: &WorldState, player: &PlayerId, seq: &ActionSequence) -> Result<WorldState> {
        let actions = self.player_actions(player)?;
        let mut seen = BTreeSet::new();
        let mut cur = state.clone();
        for (index, step) in seq.steps().iter().enumerate() {
            if !seen.insert(&step.action) {
                return Err(Error::AlreadyConsumed(step.action.clone()).at_step(index));
            }
            let action = actions.get(&step.action).ok_or_else(|| {
                Error::NotInActionSpace { action: step.action.clone(), player: player.clone() }.at_step(index)
            })?;
            cur = action.apply(&cur, player, step.amount).map_err(|e| e.at_step(index))?;
        }
        Ok(cur)
    }
}
