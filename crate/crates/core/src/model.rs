//! Shared world state, declared identifiers, and cross-domain pricing.
//!
//! The world is one monolithic state spanning every domain. Balances are
//! keyed by `(domain, player, asset)` so the same asset id held on two
//! domains is two separate balances. Absent entries read as zero and zero
//! entries are never stored, so two states holding the same balances
//! compare equal regardless of how they were produced.

use std::collections::{BTreeMap, BTreeSet};

use crate::amount::{Amount, Rate};
use crate::error::{Error, Result};
use crate::ids::{ActionId, AssetId, DomainId, PlayerId, PoolId};
use crate::venues::Pool;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BalanceKey {
    pub domain: DomainId,
    pub player: PlayerId,
    pub asset: AssetId,
}

/// Immutable snapshot of every domain's state.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WorldState {
    balances: BTreeMap<BalanceKey, Amount>,
    pools: BTreeMap<PoolId, Pool>,
    consumed: BTreeSet<ActionId>,
}

impl WorldState {
    pub fn new() -> WorldState {
        WorldState::default()
    }

    /// Raw balance lookup without id validation; absent reads as zero.
    pub fn balance(&self, domain: &DomainId, player: &PlayerId, asset: &AssetId) -> Amount {
        let key = BalanceKey { domain: domain.clone(), player: player.clone(), asset: asset.clone() };
        self.balances.get(&key).copied().unwrap_or(Amount::ZERO)
    }

    pub fn balances(&self) -> impl Iterator<Item = (&BalanceKey, &Amount)> {
        self.balances.iter()
    }

    pub fn pool(&self, id: &PoolId) -> Result<&Pool> {
        self.pools.get(id).ok_or_else(|| Error::UnknownPool(id.clone()))
    }

    pub fn pools(&self) -> impl Iterator<Item = (&PoolId, &Pool)> {
        self.pools.iter()
    }

    pub fn is_consumed(&self, id: &ActionId) -> bool {
        self.consumed.contains(id)
    }

    pub fn consumed(&self) -> &BTreeSet<ActionId> {
        &self.consumed
    }

    /// Builder-style credit used when materializing initial states.
    pub fn with_balance(
        mut self,
        domain: &DomainId,
        player: &PlayerId,
        asset: &AssetId,
        amount: Amount,
    ) -> Result<WorldState> {
        if amount.is_negative() {
            return Err(Error::InsufficientBalance {
                domain: domain.clone(),
                player: player.clone(),
                asset: asset.clone(),
                needed: -amount,
                available: Amount::ZERO,
            });
        }
        self.set_balance(domain, player, asset, amount);
        Ok(self)
    }

    pub fn with_pool(mut self, pool: Pool) -> WorldState {
        self.pools.insert(pool.id().clone(), pool);
        self
    }

    fn set_balance(&mut self, domain: &DomainId, player: &PlayerId, asset: &AssetId, amount: Amount) {
        let key = BalanceKey { domain: domain.clone(), player: player.clone(), asset: asset.clone() };
        if amount.is_zero() {
            self.balances.remove(&key);
        } else {
            self.balances.insert(key, amount);
        }
    }

    pub(crate) fn credit(&mut self, domain: &DomainId, player: &PlayerId, asset: &AssetId, amount: Amount) {
        let cur = self.balance(domain, player, asset);
        self.set_balance(domain, player, asset, cur + amount);
    }

    pub(crate) fn debit(
        &mut self,
        domain: &DomainId,
        player: &PlayerId,
        asset: &AssetId,
        amount: Amount,
    ) -> Result<()> {
        let cur = self.balance(domain, player, asset);
        if cur < amount {
            return Err(Error::InsufficientBalance {
                domain: domain.clone(),
                player: player.clone(),
                asset: asset.clone(),
                needed: amount,
                available: cur,
            });
        }
        self.set_balance(domain, player, asset, cur - amount);
        Ok(())
    }

    pub(crate) fn pool_mut(&mut self, id: &PoolId) -> Result<&mut Pool> {
        self.pools.get_mut(id).ok_or_else(|| Error::UnknownPool(id.clone()))
    }

    pub(crate) fn mark_consumed(&mut self, id: &ActionId) {
        self.consumed.insert(id.clone());
    }
}

/// The identifiers a scenario declares; used to reject dangling lookups.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    /// Each domain with the native asset its balances are valued in.
    pub domains: BTreeMap<DomainId, AssetId>,
    pub assets: BTreeSet<AssetId>,
    pub players: BTreeSet<PlayerId>,
    pub pools: BTreeSet<PoolId>,
}

impl Registry {
    pub fn check_domain(&self, d: &DomainId) -> Result<()> {
        if self.domains.contains_key(d) {
            Ok(())
        } else {
            Err(Error::unknown(DomainId::KIND, d))
        }
    }

    pub fn check_asset(&self, a: &AssetId) -> Result<()> {
        if self.assets.contains(a) {
            Ok(())
        } else {
            Err(Error::unknown(AssetId::KIND, a))
        }
    }

    pub fn check_player(&self, p: &PlayerId) -> Result<()> {
        if self.players.contains(p) {
            Ok(())
        } else {
            Err(Error::unknown(PlayerId::KIND, p))
        }
    }

    pub fn native_asset(&self, d: &DomainId) -> Result<&AssetId> {
        self.domains.get(d).ok_or_else(|| Error::unknown(DomainId::KIND, d))
    }
}

/// Balance of `player` in `asset` on `domain`, zero when no entry exists.
pub fn balance_of(
    registry: &Registry,
    state: &WorldState,
    domain: &DomainId,
    player: &PlayerId,
    asset: &AssetId,
) -> Result<Amount> {
    registry.check_domain(domain)?;
    registry.check_player(player)?;
    registry.check_asset(asset)?;
    Ok(state.balance(domain, player, asset))
}

/// Pairwise conversion rates between assets.
///
/// Only off-diagonal pairs are stored. A pair declared in one direction
/// answers both directions through its exact reciprocal; declaring both
/// directions is allowed only when they multiply to exactly one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PriceMatrix {
    rates: BTreeMap<(AssetId, AssetId), Rate>,
}

impl PriceMatrix {
    pub fn new() -> PriceMatrix {
        PriceMatrix::default()
    }

    pub fn insert(&mut self, from: AssetId, to: AssetId, rate: Rate) -> Result<()> {
        if from == to {
            return Err(Error::DiagonalRate(from));
        }
        if let Some(back) = self.rates.get(&(to.clone(), from.clone())) {
            if !back.is_reciprocal_of(&rate) {
                return Err(Error::NonReciprocal { from, to });
            }
        }
        if let Some(prev) = self.rates.get(&(from.clone(), to.clone())) {
            if *prev != rate {
                return Err(Error::NonReciprocal { from, to });
            }
        }
        self.rates.insert((from, to), rate);
        Ok(())
    }

    pub fn with(mut self, from: &str, to: &str, rate: &str) -> Result<PriceMatrix> {
        self.insert(AssetId::new(from)?, AssetId::new(to)?, rate.parse()?)?;
        Ok(self)
    }

    /// Declared entries in key order.
    pub fn declared(&self) -> impl Iterator<Item = (&AssetId, &AssetId, &Rate)> {
        self.rates.iter().map(|((f, t), r)| (f, t, r))
    }

    pub fn rate(&self, from: &AssetId, to: &AssetId) -> Result<Rate> {
        if from == to {
            return Ok(Rate::one());
        }
        if let Some(r) = self.rates.get(&(from.clone(), to.clone())) {
            return Ok(*r);
        }
        if let Some(r) = self.rates.get(&(to.clone(), from.clone())) {
            return Ok(r.recip());
        }
        Err(Error::MissingRate { from: from.clone(), to: to.clone() })
    }

    /// `amount * rate(from, to)`, exact on the diagonal.
    pub fn convert(&self, from: &AssetId, to: &AssetId, amount: Amount) -> Result<Amount> {
        if from == to {
            return Ok(amount);
        }
        Ok(amount.mul_rate(&self.rate(from, to)?))
    }

    /// Copy with every rate into `base` multiplied by `factor`.
    pub fn scaled_toward(&self, base: &AssetId, factor: i128) -> Result<PriceMatrix> {
        let mut out = PriceMatrix::new();
        for ((f, t), r) in &self.rates {
            let r = if t == base {
                r.scaled(factor)?
            } else if f == base {
                r.recip().scaled(factor)?.recip()
            } else {
                *r
            };
            out.rates.insert((f.clone(), t.clone()), r);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> DomainId {
        DomainId::new(s).unwrap()
    }
    fn p(s: &str) -> PlayerId {
        PlayerId::new(s).unwrap()
    }
    fn a(s: &str) -> AssetId {
        AssetId::new(s).unwrap()
    }
    fn amt(s: &str) -> Amount {
        s.parse().unwrap()
    }

    fn registry() -> Registry {
        Registry {
            domains: [(d("i"), a("ETH"))].into_iter().collect(),
            assets: [a("ETH"), a("DAI")].into_iter().collect(),
            players: [p("P")].into_iter().collect(),
            pools: BTreeSet::new(),
        }
    }

    #[test]
    fn absent_balance_reads_zero() {
        let s = WorldState::new();
        assert_eq!(balance_of(&registry(), &s, &d("i"), &p("P"), &a("ETH")).unwrap(), Amount::ZERO);
    }

    #[test]
    fn read_after_write() {
        let s = WorldState::new().with_balance(&d("i"), &p("P"), &a("ETH"), amt("5.0")).unwrap();
        assert_eq!(balance_of(&registry(), &s, &d("i"), &p("P"), &a("ETH")).unwrap(), amt("5"));
        // Reads never change the state.
        let before = s.clone();
        let _ = balance_of(&registry(), &s, &d("i"), &p("P"), &a("ETH"));
        assert_eq!(before, s);
    }

    #[test]
    fn unknown_ids_are_rejected() {
        let s = WorldState::new();
        let err = balance_of(&registry(), &s, &d("j"), &p("P"), &a("ETH")).unwrap_err();
        assert!(matches!(err, Error::UnknownId { kind: "domain", .. }));
        let err = balance_of(&registry(), &s, &d("i"), &p("Q"), &a("ETH")).unwrap_err();
        assert!(matches!(err, Error::UnknownId { kind: "player", .. }));
        let err = balance_of(&registry(), &s, &d("i"), &p("P"), &a("BTC")).unwrap_err();
        assert!(matches!(err, Error::UnknownId { kind: "asset", .. }));
    }

    #[test]
    fn zero_entries_are_normalized_away() {
        let mut s = WorldState::new().with_balance(&d("i"), &p("P"), &a("ETH"), amt("1")).unwrap();
        s.debit(&d("i"), &p("P"), &a("ETH"), amt("1")).unwrap();
        assert_eq!(s, WorldState::new());
    }

    #[test]
    fn convert_examples() {
        let one = PriceMatrix::new().with("WMATIC", "MATIC", "1").unwrap();
        assert_eq!(one.convert(&a("WMATIC"), &a("MATIC"), amt("288033.14")).unwrap(), amt("288033.14"));
        let disc = PriceMatrix::new().with("WMATIC", "MATIC", "9/10").unwrap();
        assert_eq!(disc.convert(&a("WMATIC"), &a("MATIC"), amt("288033.14")).unwrap(), amt("259229.826"));
        assert_eq!(disc.convert(&a("DAI"), &a("DAI"), amt("7.25")).unwrap(), amt("7.25"));
        // reverse direction through the reciprocal
        assert_eq!(disc.convert(&a("MATIC"), &a("WMATIC"), amt("9")).unwrap(), amt("10"));
        let err = disc.convert(&a("DAI"), &a("MATIC"), amt("1")).unwrap_err();
        assert!(matches!(err, Error::MissingRate { .. }));
    }

    #[test]
    fn reciprocity_is_enforced() {
        let m = PriceMatrix::new().with("A", "B", "2").unwrap();
        assert!(m.clone().with("B", "A", "1/2").is_ok());
        assert!(matches!(m.with("B", "A", "3/5"), Err(Error::NonReciprocal { .. })));
        assert!(matches!(PriceMatrix::new().with("A", "A", "1"), Err(Error::DiagonalRate(_))));
    }
}
