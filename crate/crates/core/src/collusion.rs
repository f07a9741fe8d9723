//! Whether sequencers of several domains gain by colluding, given a
//! collusion cost alpha in the base asset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::amount::Amount;
use crate::engine::{EngineConfig, MevQuery, MevResult};
use crate::error::{Error, Result};
use crate::ids::{DomainId, PlayerId};
use crate::scenario::World;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Profitable,
    Indifferent,
    Unprofitable,
}

impl Verdict {
    pub fn from_margin(margin: Amount) -> Verdict {
        if margin.is_positive() {
            Verdict::Profitable
        } else if margin.is_zero() {
            Verdict::Indifferent
        } else {
            Verdict::Unprofitable
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Profitable => "profitable",
            Verdict::Indifferent => "indifferent",
            Verdict::Unprofitable => "unprofitable",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollusionReport {
    pub domains: BTreeSet<DomainId>,
    pub alpha: Amount,
    /// `mev_d^d` per member, priced to the base asset.
    pub solo_values: BTreeMap<DomainId, Amount>,
    pub joint_value: Amount,
    /// `joint - (sum of solo + alpha)`.
    pub margin: Amount,
    pub verdict: Verdict,
    /// The alpha at which the verdict is `Indifferent`.
    pub breakeven: Amount,
    pub solo: BTreeMap<DomainId, MevResult>,
    pub joint: MevResult,
}

fn check(domains: &BTreeSet<DomainId>, alpha: Amount) -> Result<()> {
    if domains.len() < 2 {
        return Err(Error::InvalidQuery("collusion needs at least two domains".into()));
    }
    if alpha.is_negative() {
        return Err(Error::InvalidQuery("alpha must be non-negative".into()));
    }
    Ok(())
}

/// Solo and joint values for a coalition.
fn values(
    world: &World,
    config: EngineConfig,
    player: &PlayerId,
    domains: &BTreeSet<DomainId>,
    max_len: usize,
) -> Result<(BTreeMap<DomainId, MevResult>, MevResult)> {
    let engine = world.engine_with(config);
    let mut solo = BTreeMap::new();
    for d in domains {
        let q = MevQuery::over(world, player.clone(), std::slice::from_ref(d)).with_max_len(max_len);
        solo.insert(d.clone(), engine.mev(&q, &world.initial)?);
    }
    let all: Vec<DomainId> = domains.iter().cloned().collect();
    let q = MevQuery::over(world, player.clone(), &all).with_max_len(max_len);
    let joint = engine.mev(&q, &world.initial)?;
    Ok((solo, joint))
}

pub fn classify_collusion(
    world: &World,
    config: EngineConfig,
    player: &PlayerId,
    domains: &BTreeSet<DomainId>,
    alpha: Amount,
    max_len: usize,
) -> Result<CollusionReport> {
    check(domains, alpha)?;
    let (solo, joint) = values(world, config, player, domains, max_len)?;
    let solo_values: BTreeMap<_, _> = solo.iter().map(|(d, r)| (d.clone(), r.value)).collect();
    let solo_sum: Amount = solo_values.values().copied().sum();
    let breakeven = joint.value - solo_sum;
    let margin = breakeven - alpha;
    Ok(CollusionReport {
        domains: domains.clone(),
        alpha,
        solo_values,
        joint_value: joint.value,
        margin,
        verdict: Verdict::from_margin(margin),
        breakeven,
        solo,
        joint,
    })
}

/// `joint - sum of solo`: the largest alpha at which collusion still pays
/// nothing extra.
pub fn alpha_breakeven(
    world: &World,
    config: EngineConfig,
    player: &PlayerId,
    domains: &BTreeSet<DomainId>,
    max_len: usize,
) -> Result<Amount> {
    check(domains, Amount::ZERO)?;
    let (solo, joint) = values(world, config, player, domains, max_len)?;
    Ok(joint.value - solo.values().map(|r| r.value).sum::<Amount>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(name: &str) -> (World, PlayerId, BTreeSet<DomainId>) {
        let w = World::bundled(name).unwrap();
        let p = w.default_player().unwrap();
        let ds = w.domain_ids().into_iter().collect();
        (w, p, ds)
    }

    fn a(s: &str) -> Amount {
        s.parse().unwrap()
    }

    #[test]
    fn two_pool_trichotomy() {
        let (w, p, ds) = setup("section3_2amm");
        let cfg = EngineConfig::default();
        let r = classify_collusion(&w, cfg, &p, &ds, a("0"), 8).unwrap();
        assert_eq!(r.solo_values.values().copied().collect::<Vec<_>>(), vec![a("0"), a("0")]);
        assert_eq!((r.joint_value, r.margin, r.verdict), (a("1"), a("1"), Verdict::Profitable));
        let r = classify_collusion(&w, cfg, &p, &ds, a("1"), 8).unwrap();
        assert_eq!((r.margin, r.verdict), (a("0"), Verdict::Indifferent));
        let r = classify_collusion(&w, cfg, &p, &ds, a("2"), 8).unwrap();
        assert_eq!((r.margin, r.verdict), (a("-1"), Verdict::Unprofitable));
        assert_eq!(alpha_breakeven(&w, cfg, &p, &ds, 8).unwrap(), a("1"));
    }

    #[test]
    fn four_pool_margin() {
        let (w, p, ds) = setup("appendix_b_4amm");
        let cfg = EngineConfig::default();
        let r = classify_collusion(&w, cfg, &p, &ds, a("0"), 8).unwrap();
        assert_eq!(r.solo_values.values().copied().collect::<Vec<_>>(), vec![a("1"), a("0")]);
        assert_eq!((r.joint_value, r.margin, r.verdict), (a("1.6"), a("0.6"), Verdict::Profitable));
        assert_eq!(alpha_breakeven(&w, cfg, &p, &ds, 8).unwrap(), a("0.6"));
    }

    #[test]
    fn separable_breakeven_is_zero() {
        let (w, p, ds) = setup("separable_pair");
        assert_eq!(alpha_breakeven(&w, EngineConfig::default(), &p, &ds, 8).unwrap(), Amount::ZERO);
    }

    #[test]
    fn preconditions() {
        let (w, p, ds) = setup("section3_2amm");
        let one: BTreeSet<_> = ds.iter().take(1).cloned().collect();
        assert!(classify_collusion(&w, EngineConfig::default(), &p, &one, a("0"), 8).is_err());
        assert!(classify_collusion(&w, EngineConfig::default(), &p, &ds, a("-1"), 8).is_err());
    }
}
