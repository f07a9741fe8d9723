//! Scenario documents: schema, validation, canonical JSON, and the
//! scenarios bundled with the crate.
//!
//! A [`Scenario`] is the declarative document. [`World`] is the validated,
//! compiled form the engine runs on: registry, price matrix, per-player
//! action spaces and the initial state.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionKind, ActionKindTag, ActionSpace, AmountSpec};
use crate::amount::{Amount, Rate};
use crate::error::{Error, Result, ValidationIssue};
use crate::ids::{ActionId, AssetId, DomainId, PlayerId, PoolId};
use crate::model::{PriceMatrix, Registry, WorldState};
use crate::venues::{BridgeSpec, Direction, PendingTx, Pool, StylizedArbSpec, TxEffect};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MAX_SEQUENCE_LENGTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainDecl {
    pub id: DomainId,
    /// Asset in which this domain's extractable value is measured.
    pub native_asset: AssetId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceDecl {
    pub domain: DomainId,
    pub asset: AssetId,
    pub amount: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerDecl {
    pub id: PlayerId,
    #[serde(default)]
    pub balances: Vec<BalanceDecl>,
    /// Action kinds the player may generate, per domain.
    #[serde(default)]
    pub capabilities: BTreeMap<DomainId, Vec<ActionKindTag>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapDecl {
    pub id: ActionId,
    pub pool: PoolId,
    pub direction: Direction,
    pub amount: AmountSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeDecl {
    pub id: ActionId,
    pub from_domain: DomainId,
    pub to_domain: DomainId,
    pub from_asset: AssetId,
    pub to_asset: AssetId,
    pub rate: Rate,
    pub flat_fee: Amount,
    pub amount: AmountSpec,
}

impl BridgeDecl {
    pub fn spec(&self) -> BridgeSpec {
        BridgeSpec {
            id: self.id.clone(),
            from_domain: self.from_domain.clone(),
            to_domain: self.to_domain.clone(),
            from_asset: self.from_asset.clone(),
            to_asset: self.to_asset.clone(),
            rate: self.rate,
            flat_fee: self.flat_fee,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceDecl {
    pub from: AssetId,
    pub to: AssetId,
    pub rate: Rate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub base_domain: DomainId,
    pub base_asset: AssetId,
    #[serde(default = "default_max_len")]
    pub max_sequence_length: usize,
    #[serde(default)]
    pub alpha: Amount,
    /// Player used when a query names none; first capable player otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<PlayerId>,
}

fn default_max_len() -> usize {
    DEFAULT_MAX_SEQUENCE_LENGTH
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub domains: Vec<DomainDecl>,
    pub assets: Vec<AssetId>,
    pub players: Vec<PlayerDecl>,
    #[serde(default)]
    pub pools: Vec<Pool>,
    #[serde(default)]
    pub swaps: Vec<SwapDecl>,
    #[serde(default)]
    pub bridges: Vec<BridgeDecl>,
    #[serde(default)]
    pub mempool: Vec<PendingTx>,
    #[serde(default)]
    pub stylized_arbs: Vec<StylizedArbSpec>,
    #[serde(default)]
    pub prices: Vec<PriceDecl>,
    pub defaults: Defaults,
}

/// Parse and fully validate a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Load from a file path, or from a bundled scenario name when no such
/// file exists.
pub fn load_scenario_source(source: &str) -> Result<Scenario> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{source}: {e}")))?;
        return load_scenario(&text);
    }
    match bundled(source) {
        Some(text) => load_scenario(text),
        None => Err(Error::Io(format!("{source}: no such file or bundled scenario"))),
    }
}

/// Canonical JSON: sorted keys, two-space indent, LF, trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("scenario types serialize infallibly");
    let mut out = serde_json::to_string_pretty(&v).expect("json values serialize infallibly");
    out.push('\n');
    out
}

/// Materialize balances and pools; nothing is consumed yet.
pub fn initial_state(scenario: &Scenario) -> WorldState {
    let mut state = WorldState::new();
    for pool in &scenario.pools {
        state = state.with_pool(pool.clone());
    }
    for p in &scenario.players {
        for b in &p.balances {
            let cur = state.balance(&b.domain, &p.id, &b.asset);
            state = state
                .with_balance(&b.domain, &p.id, &b.asset, cur + b.amount)
                .expect("validated balances are non-negative");
        }
    }
    state
}

pub const BUNDLED: &[(&str, &str)] = &[
    ("section3_2amm", include_str!("../scenarios/section3_2amm.json")),
    ("appendix_b_4amm", include_str!("../scenarios/appendix_b_4amm.json")),
    ("figure1_bridge", include_str!("../scenarios/figure1_bridge.json")),
    ("figure1_bridge_discount", include_str!("../scenarios/figure1_bridge_discount.json")),
    ("figure2_3domain", include_str!("../scenarios/figure2_3domain.json")),
    ("cp_arbitrage_small", include_str!("../scenarios/cp_arbitrage_small.json")),
    ("separable_pair", include_str!("../scenarios/separable_pair.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

#[derive(Default)]
struct Issues(Vec<ValidationIssue>);

impl Issues {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationIssue { field: field.into(), message: message.into() });
    }
}

fn check_amount_spec(issues: &mut Issues, field: &str, spec: &AmountSpec) {
    match spec {
        AmountSpec::All => {}
        AmountSpec::Fixed(x) if !x.is_positive() => issues.push(field, "fixed amount must be positive"),
        AmountSpec::Range { lo, hi } => {
            if lo.is_negative() {
                issues.push(field, "range lower bound must be >= 0");
            }
            if hi <= lo {
                issues.push(field, "range upper bound must exceed the lower bound");
            }
        }
        AmountSpec::Fixed(_) => {}
    }
}

impl Scenario {
    pub fn registry(&self) -> Registry {
        Registry {
            domains: self.domains.iter().map(|d| (d.id.clone(), d.native_asset.clone())).collect(),
            assets: self.assets.iter().cloned().collect(),
            players: self.players.iter().map(|p| p.id.clone()).collect(),
            pools: self.pools.iter().map(|p| p.id().clone()).collect(),
        }
    }

    /// Every document-level invariant; all failures are reported together.
    pub fn validate(&self) -> Result<()> {
        let mut is = Issues::default();
        if self.schema_version != SCHEMA_VERSION {
            is.push("schema_version", format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }

        let mut domains = BTreeSet::new();
        let mut assets = BTreeSet::new();
        let mut players = BTreeSet::new();
        let mut pools: BTreeMap<&PoolId, &Pool> = BTreeMap::new();
        let mut action_ids = BTreeSet::new();

        for (k, a) in self.assets.iter().enumerate() {
            if !assets.insert(a) {
                is.push(format!("assets[{k}]"), format!("duplicate asset id {a}"));
            }
        }
        if self.domains.is_empty() {
            is.push("domains", "at least one domain is required");
        }
        for (k, d) in self.domains.iter().enumerate() {
            if !domains.insert(&d.id) {
                is.push(format!("domains[{k}].id"), format!("duplicate domain id {}", d.id));
            }
            if !assets.contains(&d.native_asset) {
                is.push(format!("domains[{k}].native_asset"), format!("unknown asset {}", d.native_asset));
            }
        }
        for (k, p) in self.players.iter().enumerate() {
            if !players.insert(&p.id) {
                is.push(format!("players[{k}].id"), format!("duplicate player id {}", p.id));
            }
        }

        let dom = |is: &mut Issues, field: String, d: &DomainId| {
            if !domains.contains(d) {
                is.push(field, format!("unknown domain {d}"));
            }
        };
        let ast = |is: &mut Issues, field: String, a: &AssetId| {
            if !assets.contains(a) {
                is.push(field, format!("unknown asset {a}"));
            }
        };
        let ply = |is: &mut Issues, field: String, p: &PlayerId| {
            if !players.contains(p) {
                is.push(field, format!("unknown player {p}"));
            }
        };

        for (k, p) in self.players.iter().enumerate() {
            let mut slots = BTreeSet::new();
            for (m, b) in p.balances.iter().enumerate() {
                let f = format!("players[{k}].balances[{m}]");
                dom(&mut is, format!("{f}.domain"), &b.domain);
                ast(&mut is, format!("{f}.asset"), &b.asset);
                if b.amount.is_negative() {
                    is.push(format!("{f}.amount"), "balance must be non-negative");
                }
                if !slots.insert((&b.domain, &b.asset)) {
                    is.push(f, format!("duplicate balance entry for {}:{}", b.domain, b.asset));
                }
            }
            for (d, kinds) in &p.capabilities {
                dom(&mut is, format!("players[{k}].capabilities.{d}"), d);
                let uniq: BTreeSet<_> = kinds.iter().collect();
                if uniq.len() != kinds.len() {
                    is.push(format!("players[{k}].capabilities.{d}"), "duplicate action kind");
                }
            }
        }

        for (k, pool) in self.pools.iter().enumerate() {
            let f = format!("pools[{k}]");
            if pools.insert(pool.id(), pool).is_some() {
                is.push(format!("{f}.id"), format!("duplicate pool id {}", pool.id()));
            }
            dom(&mut is, format!("{f}.domain"), pool.domain());
            let (x, y) = pool.pair();
            ast(&mut is, format!("{f}.asset_x"), x);
            ast(&mut is, format!("{f}.asset_y"), y);
            if x == y {
                is.push(format!("{f}.asset_y"), "pool assets must differ");
            }
            match pool {
                Pool::ConstantProduct(cp) => {
                    if !cp.reserve_x.is_positive() {
                        is.push(format!("{f}.reserve_x"), "reserve must be positive");
                    }
                    if !cp.reserve_y.is_positive() {
                        is.push(format!("{f}.reserve_y"), "reserve must be positive");
                    }
                    if cp.fee_bps >= crate::venues::BPS_DENOMINATOR {
                        is.push(format!("{f}.fee_bps"), "fee must be below 10000 bps");
                    }
                }
                Pool::StylizedMidpoint(sp) => {
                    if !sp.price.is_positive() {
                        is.push(format!("{f}.price"), "price must be positive");
                    }
                }
            }
        }

        let mut claim = |is: &mut Issues, field: String, id: &ActionId| {
            if !action_ids.insert(id.clone()) {
                is.push(field, format!("duplicate action id {id}"));
            }
        };
        let pool_ref = |is: &mut Issues, field: String, id: &PoolId| -> Option<&Pool> {
            let p = pools.get(id).copied();
            if p.is_none() {
                is.push(field, format!("unknown pool {id}"));
            }
            p
        };

        for (k, s) in self.swaps.iter().enumerate() {
            let f = format!("swaps[{k}]");
            claim(&mut is, format!("{f}.id"), &s.id);
            if let Some(pool) = pool_ref(&mut is, format!("{f}.pool"), &s.pool) {
                if pool.as_constant_product().is_err() {
                    is.push(format!("{f}.pool"), format!("pool {} is not constant_product", s.pool));
                }
            }
            check_amount_spec(&mut is, &format!("{f}.amount"), &s.amount);
        }

        for (k, b) in self.bridges.iter().enumerate() {
            let f = format!("bridges[{k}]");
            claim(&mut is, format!("{f}.id"), &b.id);
            dom(&mut is, format!("{f}.from_domain"), &b.from_domain);
            dom(&mut is, format!("{f}.to_domain"), &b.to_domain);
            if b.from_domain == b.to_domain {
                is.push(format!("{f}.to_domain"), "bridge endpoints must be different domains");
            }
            ast(&mut is, format!("{f}.from_asset"), &b.from_asset);
            ast(&mut is, format!("{f}.to_asset"), &b.to_asset);
            if b.flat_fee.is_negative() {
                is.push(format!("{f}.flat_fee"), "fee must be non-negative");
            }
            check_amount_spec(&mut is, &format!("{f}.amount"), &b.amount);
        }

        for (k, tx) in self.mempool.iter().enumerate() {
            let f = format!("mempool[{k}]");
            claim(&mut is, format!("{f}.id"), &tx.id);
            dom(&mut is, format!("{f}.domain"), &tx.domain);
            ply(&mut is, format!("{f}.sender"), &tx.sender);
            let fe = format!("{f}.effect");
            let on_domain = |is: &mut Issues, pool: &Pool| {
                if pool.domain() != &tx.domain {
                    is.push(format!("{fe}.pool"), format!("pool {} is not on domain {}", pool.id(), tx.domain));
                }
            };
            match &tx.effect {
                TxEffect::PricePush { pool, price } => {
                    if let Some(p) = pool_ref(&mut is, format!("{fe}.pool"), pool) {
                        on_domain(&mut is, p);
                        if p.as_stylized().is_err() {
                            is.push(format!("{fe}.pool"), format!("pool {pool} is not stylized_midpoint"));
                        }
                    }
                    if !price.is_positive() {
                        is.push(format!("{fe}.price"), "price must be positive");
                    }
                }
                TxEffect::Swap { pool, amount_in, .. } => {
                    if let Some(p) = pool_ref(&mut is, format!("{fe}.pool"), pool) {
                        on_domain(&mut is, p);
                        if p.as_constant_product().is_err() {
                            is.push(format!("{fe}.pool"), format!("pool {pool} is not constant_product"));
                        }
                    }
                    if !amount_in.is_positive() {
                        is.push(format!("{fe}.amount_in"), "amount must be positive");
                    }
                }
                TxEffect::Transfer { asset, to, amount } => {
                    ast(&mut is, format!("{fe}.asset"), asset);
                    ply(&mut is, format!("{fe}.to"), to);
                    if !amount.is_positive() {
                        is.push(format!("{fe}.amount"), "amount must be positive");
                    }
                }
            }
        }

        for (k, arb) in self.stylized_arbs.iter().enumerate() {
            let f = format!("stylized_arbs[{k}]");
            claim(&mut is, format!("{f}.id"), &arb.id);
            let a = pool_ref(&mut is, format!("{f}.pool_a"), &arb.pool_a);
            let b = pool_ref(&mut is, format!("{f}.pool_b"), &arb.pool_b);
            if arb.pool_a == arb.pool_b {
                is.push(format!("{f}.pool_b"), "arbitrage needs two distinct pools");
            }
            let mut pool_domains = BTreeSet::new();
            for (name, p) in [("pool_a", a), ("pool_b", b)] {
                if let Some(p) = p {
                    pool_domains.insert(p.domain());
                    if p.as_stylized().is_err() {
                        is.push(format!("{f}.{name}"), format!("pool {} is not stylized_midpoint", p.id()));
                    }
                }
            }
            if let (Some(a), Some(b)) = (a, b) {
                if a.pair() != b.pair() {
                    is.push(format!("{f}.pool_b"), "pools must share the same asset pair");
                }
            }
            if arb.declared_profit.is_negative() {
                is.push(format!("{f}.declared_profit"), "profit must be non-negative");
            }
            ast(&mut is, format!("{f}.profit_asset"), &arb.profit_asset);
            dom(&mut is, format!("{f}.profit_domain"), &arb.profit_domain);
            if !pool_domains.is_empty() && !pool_domains.contains(&arb.profit_domain) {
                is.push(format!("{f}.profit_domain"), "profit must be credited on one of the pools' domains");
            }
            for (m, leg) in arb.legs.iter().enumerate() {
                claim(&mut is, format!("{f}.legs[{m}].id"), &leg.id);
                if leg.pool != arb.pool_a && leg.pool != arb.pool_b {
                    is.push(format!("{f}.legs[{m}].pool"), "leg must trade on pool_a or pool_b");
                }
            }
        }

        let mut prices = PriceMatrix::new();
        for (k, p) in self.prices.iter().enumerate() {
            let f = format!("prices[{k}]");
            ast(&mut is, format!("{f}.from"), &p.from);
            ast(&mut is, format!("{f}.to"), &p.to);
            if let Err(e) = prices.insert(p.from.clone(), p.to.clone(), p.rate) {
                is.push(format!("{f} ({}->{})", p.from, p.to), e.to_string());
            }
        }

        let d = &self.defaults;
        dom(&mut is, "defaults.base_domain".into(), &d.base_domain);
        ast(&mut is, "defaults.base_asset".into(), &d.base_asset);
        if d.max_sequence_length == 0 {
            is.push("defaults.max_sequence_length", "must be at least 1");
        }
        if d.alpha.is_negative() {
            is.push("defaults.alpha", "collusion cost must be non-negative");
        }
        if let Some(p) = &d.player {
            ply(&mut is, "defaults.player".into(), p);
        }
        for (k, dd) in self.domains.iter().enumerate() {
            if assets.contains(&dd.native_asset) && prices.rate(&dd.native_asset, &d.base_asset).is_err() {
                is.push(
                    format!("domains[{k}].native_asset"),
                    format!("no price from {} to base asset {}", dd.native_asset, d.base_asset),
                );
            }
        }

        if is.0.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(is.0))
        }
    }

    pub fn price_matrix(&self) -> Result<PriceMatrix> {
        let mut m = PriceMatrix::new();
        for p in &self.prices {
            m.insert(p.from.clone(), p.to.clone(), p.rate)?;
        }
        Ok(m)
    }

    /// Every declared action with the sequencer domains it needs.
    pub fn actions(&self) -> Vec<Action> {
        let pool_domain = |id: &PoolId| {
            self.pools.iter().find(|p| p.id() == id).map(|p| p.domain().clone())
        };
        let mut out = Vec::new();
        for tx in &self.mempool {
            out.push(Action {
                id: tx.id.clone(),
                domains: [tx.domain.clone()].into(),
                kind: ActionKind::ExecutePendingTx(tx.clone()),
            });
        }
        for s in &self.swaps {
            out.push(Action {
                id: s.id.clone(),
                domains: pool_domain(&s.pool).into_iter().collect(),
                kind: ActionKind::Swap { pool: s.pool.clone(), direction: s.direction, amount: s.amount },
            });
        }
        for arb in &self.stylized_arbs {
            let mut domains: BTreeSet<_> =
                [&arb.pool_a, &arb.pool_b].into_iter().filter_map(|p| pool_domain(p)).collect();
            domains.insert(arb.profit_domain.clone());
            out.push(Action { id: arb.id.clone(), domains, kind: ActionKind::StylizedArb(arb.clone()) });
        }
        for b in &self.bridges {
            out.push(Action {
                id: b.id.clone(),
                domains: [b.from_domain.clone(), b.to_domain.clone()].into(),
                kind: ActionKind::Bridge { bridge: b.spec(), amount: b.amount },
            });
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    /// Per-player action spaces derived from declared capabilities.
    pub fn action_space(&self) -> ActionSpace {
        let actions = self.actions();
        let mut space = ActionSpace::new(
            self.domains.iter().map(|d| d.id.clone()),
            self.players.iter().map(|p| p.id.clone()),
        );
        for p in &self.players {
            for a in &actions {
                let tag = a.tag();
                let allowed = !a.domains.is_empty()
                    && a.domains.iter().all(|d| p.capabilities.get(d).is_some_and(|ks| ks.contains(&tag)));
                if allowed {
                    space.insert(&p.id, a.clone());
                }
            }
        }
        space
    }

    pub fn default_player(&self) -> Option<PlayerId> {
        if let Some(p) = &self.defaults.player {
            return Some(p.clone());
        }
        self.players
            .iter()
            .find(|p| p.capabilities.values().any(|k| !k.is_empty()))
            .or_else(|| self.players.first())
            .map(|p| p.id.clone())
    }
}

/// A validated scenario compiled into engine inputs.
#[derive(Debug, Clone)]
pub struct World {
    pub scenario: Scenario,
    pub registry: Registry,
    pub prices: PriceMatrix,
    pub space: ActionSpace,
    pub initial: WorldState,
}

impl World {
    pub fn new(scenario: Scenario) -> Result<World> {
        scenario.validate()?;
        Ok(World {
            registry: scenario.registry(),
            prices: scenario.price_matrix()?,
            space: scenario.action_space(),
            initial: initial_state(&scenario),
            scenario,
        })
    }

    pub fn load(source: &str) -> Result<World> {
        World::new(load_scenario_source(source)?)
    }

    pub fn bundled(name: &str) -> Result<World> {
        let text = bundled(name).ok_or_else(|| Error::Io(format!("no bundled scenario {name}")))?;
        World::new(load_scenario(text)?)
    }

    pub fn default_player(&self) -> Result<PlayerId> {
        self.scenario
            .default_player()
            .ok_or_else(|| Error::InvalidQuery("scenario declares no players".into()))
    }

    pub fn domain_ids(&self) -> Vec<DomainId> {
        self.scenario.domains.iter().map(|d| d.id.clone()).collect()
    }

    pub fn domain(&self, s: &str) -> Result<DomainId> {
        let d = DomainId::new(s)?;
        self.registry.check_domain(&d)?;
        Ok(d)
    }

    pub fn player(&self, s: &str) -> Result<PlayerId> {
        let p = PlayerId::new(s)?;
        self.registry.check_player(&p)?;
        Ok(p)
    }

    pub fn asset(&self, s: &str) -> Result<AssetId> {
        let a = AssetId::new(s)?;
        self.registry.check_asset(&a)?;
        Ok(a)
    }

    pub fn base(&self) -> (DomainId, AssetId) {
        (self.scenario.defaults.base_domain.clone(), self.scenario.defaults.base_asset.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_scenario_loads_and_round_trips() {
        for (name, text) in BUNDLED {
            let s = load_scenario(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            let canon = to_canonical_json(&s);
            let again = load_scenario(&canon).unwrap();
            assert_eq!(s, again, "{name}");
            assert_eq!(canon, to_canonical_json(&again), "{name}");
            assert_eq!(initial_state(&s), initial_state(&again), "{name}");
            assert!(!canon.contains('\r'));
        }
    }

    #[test]
    fn bundled_files_are_stored_canonically() {
        for (name, text) in BUNDLED {
            let s = load_scenario(text).unwrap();
            assert_eq!(&to_canonical_json(&s), text, "{name} is not in canonical form");
        }
    }

    #[test]
    fn two_pool_shape() {
        let s = load_scenario(bundled("section3_2amm").unwrap()).unwrap();
        assert_eq!(s.domains.len(), 2);
        let stylized: Vec<_> = s.pools.iter().filter_map(|p| p.as_stylized().ok()).collect();
        assert_eq!(stylized.len(), 2);
        assert!(stylized.iter().all(|p| p.price == "20".parse().unwrap()));
        assert_eq!(s.mempool.len(), 1);
        assert_eq!(s.stylized_arbs.len(), 1);
        assert_eq!(s.stylized_arbs[0].declared_profit, "1".parse().unwrap());
    }

    #[test]
    fn four_pool_shape() {
        let s = load_scenario(bundled("appendix_b_4amm").unwrap()).unwrap();
        assert_eq!(s.domains.len(), 2);
        let names: BTreeSet<_> = s.pools.iter().map(|p| p.id().to_string()).collect();
        assert_eq!(names, ["sushiswap", "toroswap", "unagiswap", "uniswap"].map(String::from).into());
        let mut txs: Vec<String> = s.mempool.iter().map(|t| t.id.to_string()).collect();
        for arb in &s.stylized_arbs {
            txs.extend(arb.legs.iter().map(|l| l.id.to_string()));
        }
        txs.sort();
        assert_eq!(txs, ["tx1_i", "tx1_j", "tx2_i", "tx2_j", "tx3_i", "tx4_i", "tx5_i"]);
    }

    #[test]
    fn bridge_route_initial_balance() {
        let w = World::bundled("figure1_bridge").unwrap();
        let bal = crate::model::balance_of(
            &w.registry,
            &w.initial,
            &w.domain("ethereum").unwrap(),
            &w.player("P").unwrap(),
            &w.asset("MATIC").unwrap(),
        )
        .unwrap();
        assert_eq!(bal, "238172.18".parse().unwrap());
        assert!(w.initial.consumed().is_empty());
    }

    fn issues(text: &str) -> Vec<ValidationIssue> {
        match load_scenario(text) {
            Err(Error::Validation(v)) => v,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    fn mutate(name: &str, f: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(bundled(name).unwrap()).unwrap();
        f(&mut v);
        v.to_string()
    }

    #[test]
    fn non_reciprocal_prices_are_named() {
        let text = mutate("figure1_bridge", |v| {
            v["prices"] = serde_json::json!([
                {"from": "WMATIC", "to": "MATIC", "rate": "2"},
                {"from": "MATIC", "to": "WMATIC", "rate": "3/5"}
            ]);
        });
        let is = issues(&text);
        assert!(is.iter().any(|i| i.field.contains("MATIC->WMATIC")), "{is:?}");
    }

    #[test]
    fn dangling_pool_is_named() {
        let text = mutate("section3_2amm", |v| {
            v["stylized_arbs"][0]["pool_b"] = "nowhere".into();
        });
        let is = issues(&text);
        assert!(is.iter().any(|i| i.field == "stylized_arbs[0].pool_b" && i.message.contains("nowhere")), "{is:?}");
    }

    #[test]
    fn other_validation_failures() {
        let neg = mutate("figure1_bridge", |v| v["players"][0]["balances"][0]["amount"] = "-1".into());
        assert!(issues(&neg).iter().any(|i| i.field.ends_with(".amount")));
        let dup = mutate("section3_2amm", |v| v["pools"][1]["id"] = v["pools"][0]["id"].clone());
        assert!(issues(&dup).iter().any(|i| i.message.contains("duplicate pool")));
        let ver = mutate("section3_2amm", |v| v["schema_version"] = 2.into());
        assert!(issues(&ver).iter().any(|i| i.field == "schema_version"));
        let norate = mutate("figure1_bridge", |v| v["prices"] = serde_json::json!([]));
        assert!(issues(&norate).iter().any(|i| i.message.contains("no price")));
    }

    #[test]
    fn parse_errors_carry_position() {
        match load_scenario("{\n  \"schema_version\": 1,\n  oops\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let unknown = mutate("section3_2amm", |v| v["surprise"] = 1.into());
        assert!(matches!(load_scenario(&unknown), Err(Error::Parse { .. })));
    }

    #[test]
    fn empty_scenario_reads_zero_everywhere() {
        let text = r#"{"schema_version":1,"domains":[{"id":"i","native_asset":"ETH"}],"assets":["ETH"],
            "players":[{"id":"P"}],"defaults":{"base_domain":"i","base_asset":"ETH"}}"#;
        let s = load_scenario(text).unwrap();
        let st = initial_state(&s);
        assert_eq!(st.balances().count(), 0);
        assert_eq!(s.defaults.max_sequence_length, DEFAULT_MAX_SEQUENCE_LENGTH);
    }
}
