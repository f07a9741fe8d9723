//! Seeded generator of small valid scenarios, for property tests and fuzzing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{ActionKindTag, AmountSpec};
use crate::amount::{Amount, Rate};
use crate::ids::{ActionId, AssetId, DomainId, PlayerId, PoolId};
use crate::scenario::{
    BalanceDecl, BridgeDecl, Defaults, DomainDecl, PlayerDecl, PriceDecl, Scenario, SwapDecl, SCHEMA_VERSION,
};
use crate::venues::{
    ConstantProductPool, Direction, PendingTx, Pool, StylizedArbSpec, StylizedMidpointPool, TxEffect,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenOptions {
    pub min_domains: usize,
    pub max_domains: usize,
    pub max_actions: usize,
    pub bridges: bool,
    pub cross_domain_arbs: bool,
    /// Allow at most one action with a continuous amount.
    pub continuous: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            min_domains: 1,
            max_domains: 3,
            max_actions: 5,
            bridges: true,
            cross_domain_arbs: true,
            continuous: true,
        }
    }
}

impl GenOptions {
    /// No action touches more than one domain.
    pub fn separable() -> Self {
        GenOptions { min_domains: 2, bridges: false, cross_domain_arbs: false, ..Self::default() }
    }
}

const KINDS: [ActionKindTag; 4] =
    [ActionKindTag::ExecutePendingTx, ActionKindTag::Swap, ActionKindTag::StylizedArb, ActionKindTag::Bridge];

fn id<T: std::str::FromStr>(s: impl AsRef<str>) -> T
where
    T::Err: std::fmt::Debug,
{
    s.as_ref().parse().expect("generated ids are valid")
}

/// Decimal with two places in `[lo, hi]`.
fn cents(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Amount {
    let c = rng.gen_range(lo * 100..=hi * 100);
    Amount::from_int(c).checked_div(Amount::from_int(100)).expect("nonzero")
}

struct Builder {
    rng: ChaCha8Rng,
    opts: GenOptions,
    domains: Vec<DomainId>,
    s: Scenario,
    actions: usize,
    has_range: bool,
}

impl Builder {
    fn native(&self, k: usize) -> AssetId {
        self.s.domains[k].native_asset.clone()
    }

    fn amount_spec(&mut self, lo: i64, hi: i64) -> AmountSpec {
        let roll = self.rng.gen_range(0..10);
        if self.opts.continuous && !self.has_range && roll < 3 {
            self.has_range = true;
            AmountSpec::Range { lo: Amount::ZERO, hi: cents(&mut self.rng, hi / 2 + 1, hi) }
        } else if roll < 6 {
            AmountSpec::Fixed(cents(&mut self.rng, lo.max(1), hi))
        } else {
            AmountSpec::All
        }
    }

    fn cp_pools(&self) -> Vec<(usize, PoolId)> {
        self.s
            .pools
            .iter()
            .filter_map(|p| {
                let cp = p.as_constant_product().ok()?;
                Some((self.domains.iter().position(|d| *d == cp.domain)?, cp.id.clone()))
            })
            .collect()
    }

    fn stylized(&self) -> Vec<(usize, PoolId)> {
        self.s
            .pools
            .iter()
            .filter_map(|p| {
                let sp = p.as_stylized().ok()?;
                Some((self.domains.iter().position(|d| *d == sp.domain)?, sp.id.clone()))
            })
            .collect()
    }

    fn next_id(&mut self, prefix: &str) -> ActionId {
        self.actions += 1;
        id(format!("{prefix}_{}", self.actions))
    }

    fn add_swap(&mut self) -> bool {
        let pools = self.cp_pools();
        let Some((_, pool)) = pools.choose(&mut self.rng).cloned() else { return false };
        let direction = if self.rng.gen_bool(0.5) { Direction::XToY } else { Direction::YToX };
        let amount = self.amount_spec(1, 200);
        let id = self.next_id("swap");
        self.s.swaps.push(SwapDecl { id, pool, direction, amount });
        true
    }

    fn add_pending(&mut self) -> bool {
        let k = self.rng.gen_range(0..self.domains.len());
        let domain = self.domains[k].clone();
        let local = |v: Vec<(usize, PoolId)>| v.into_iter().filter(|(d, _)| *d == k).map(|(_, p)| p).collect::<Vec<_>>();
        let stylized = local(self.stylized());
        let cps = local(self.cp_pools());
        let effect = match self.rng.gen_range(0..3) {
            0 if !stylized.is_empty() => TxEffect::PricePush {
                pool: stylized.choose(&mut self.rng).expect("nonempty").clone(),
                price: cents(&mut self.rng, 5, 40),
            },
            1 if !cps.is_empty() => TxEffect::Swap {
                pool: cps.choose(&mut self.rng).expect("nonempty").clone(),
                direction: if self.rng.gen_bool(0.5) { Direction::XToY } else { Direction::YToX },
                amount_in: cents(&mut self.rng, 1, 100),
            },
            _ => TxEffect::Transfer {
                asset: self.native(k),
                to: id("P"),
                amount: cents(&mut self.rng, 1, 20),
            },
        };
        let id = self.next_id("tx");
        self.s.mempool.push(PendingTx { id, domain, sender: self::id("whale"), effect });
        true
    }

    fn add_arb(&mut self) -> bool {
        let pools = self.stylized();
        let mut pairs = Vec::new();
        for (i, (da, a)) in pools.iter().enumerate() {
            for (db, b) in &pools[i + 1..] {
                if da == db || self.opts.cross_domain_arbs {
                    pairs.push((*da, a.clone(), *db, b.clone()));
                }
            }
        }
        let Some((da, pool_a, db, pool_b)) = pairs.choose(&mut self.rng).cloned() else { return false };
        let pd = if self.rng.gen_bool(0.5) { da } else { db };
        let id = self.next_id("arb");
        self.s.stylized_arbs.push(StylizedArbSpec {
            id,
            pool_a,
            pool_b,
            declared_profit: cents(&mut self.rng, 0, 3),
            profit_asset: self.native(pd),
            profit_domain: self.domains[pd].clone(),
            legs: Vec::new(),
        });
        true
    }

    fn add_bridge(&mut self) -> bool {
        if !self.opts.bridges || self.domains.len() < 2 {
            return false;
        }
        let from = self.rng.gen_range(0..self.domains.len());
        let mut to = self.rng.gen_range(0..self.domains.len() - 1);
        if to >= from {
            to += 1;
        }
        let (from_asset, to_asset) = if self.rng.gen_bool(0.5) {
            (self.native(from), self.native(to))
        } else {
            (id("T"), id("T"))
        };
        let rate = Rate::new(self.rng.gen_range(5..=12), 10).expect("positive");
        let flat_fee = cents(&mut self.rng, 0, 1);
        let amount = self.amount_spec(2, 100);
        let id = self.next_id("bridge");
        self.s.bridges.push(BridgeDecl {
            id,
            from_domain: self.domains[from].clone(),
            to_domain: self.domains[to].clone(),
            from_asset,
            to_asset,
            rate,
            flat_fee,
            amount,
        });
        true
    }
}

/// A valid scenario with player `P` (the searcher) and `whale` (sender of
/// pending transactions), deterministic in `seed`.
pub fn random_scenario(seed: u64, opts: &GenOptions) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(opts.min_domains.max(1)..=opts.max_domains.max(opts.min_domains).max(1));
    let domains: Vec<DomainId> = (0..n).map(|k| id(format!("d{k}"))).collect();
    // Domains share a native asset about half the time.
    let natives: Vec<AssetId> = (0..n)
        .map(|k| if k > 0 && rng.gen_bool(0.5) { id("N0") } else { id(format!("N{k}")) })
        .collect();
    let mut assets: Vec<AssetId> = natives.clone();
    assets.extend([id("T"), id("Q")]);
    assets.sort();
    assets.dedup();

    let base: AssetId = id("N0");
    let mut prices = Vec::new();
    for a in &assets {
        if a.as_str().starts_with('N') && *a != base {
            let r = Rate::new(rng.gen_range(1..=9), rng.gen_range(1..=9)).expect("positive");
            prices.push(PriceDecl { from: a.clone(), to: base.clone(), rate: r });
        }
    }

    let mut s = Scenario {
        schema_version: SCHEMA_VERSION,
        description: format!("random scenario {seed}"),
        domains: domains
            .iter()
            .zip(&natives)
            .map(|(d, a)| DomainDecl { id: d.clone(), native_asset: a.clone() })
            .collect(),
        assets,
        players: Vec::new(),
        pools: Vec::new(),
        swaps: Vec::new(),
        bridges: Vec::new(),
        mempool: Vec::new(),
        stylized_arbs: Vec::new(),
        prices,
        defaults: Defaults {
            base_domain: domains[0].clone(),
            base_asset: base,
            max_sequence_length: 8,
            alpha: Amount::ZERO,
            player: Some(id("P")),
        },
    };

    let mut p_bal = Vec::new();
    let mut w_bal = Vec::new();
    let mut caps = BTreeMap::new();
    for (k, d) in domains.iter().enumerate() {
        for _ in 0..rng.gen_range(0..=2) {
            let x = cents(&mut rng, 50, 400);
            let price = cents(&mut rng, 1, 6);
            let y = x.mul(price);
            s.pools.push(Pool::ConstantProduct(ConstantProductPool {
                id: id(format!("cp{}", s.pools.len())),
                domain: d.clone(),
                asset_x: id("T"),
                asset_y: natives[k].clone(),
                reserve_x: x,
                reserve_y: y,
                fee_bps: *[0u32, 0, 30].choose(&mut rng).expect("nonempty"),
            }));
        }
        for _ in 0..rng.gen_range(0..=2) {
            s.pools.push(Pool::StylizedMidpoint(StylizedMidpointPool {
                id: id(format!("sp{}", s.pools.len())),
                domain: d.clone(),
                asset_x: id("T"),
                asset_y: id("Q"),
                price: cents(&mut rng, 10, 30),
            }));
        }
        if rng.gen_bool(0.8) {
            p_bal.push(BalanceDecl { domain: d.clone(), asset: natives[k].clone(), amount: cents(&mut rng, 0, 300) });
        }
        if rng.gen_bool(0.5) {
            p_bal.push(BalanceDecl { domain: d.clone(), asset: id("T"), amount: cents(&mut rng, 1, 50) });
        }
        w_bal.push(BalanceDecl { domain: d.clone(), asset: natives[k].clone(), amount: Amount::from_int(10_000) });
        w_bal.push(BalanceDecl { domain: d.clone(), asset: id("T"), amount: Amount::from_int(10_000) });
        let kinds: Vec<ActionKindTag> = KINDS.iter().copied().filter(|_| rng.gen_bool(0.85)).collect();
        caps.insert(d.clone(), kinds);
    }
    let dedup = |mut v: Vec<BalanceDecl>| {
        v.sort_by(|a, b| (&a.domain, &a.asset).cmp(&(&b.domain, &b.asset)));
        v.dedup_by(|a, b| a.domain == b.domain && a.asset == b.asset);
        v
    };
    s.players.push(PlayerDecl { id: id::<PlayerId>("P"), balances: dedup(p_bal), capabilities: caps });
    s.players.push(PlayerDecl { id: id::<PlayerId>("whale"), balances: dedup(w_bal), capabilities: BTreeMap::new() });

    let target = rng.gen_range(1..=opts.max_actions.max(1));
    let mut b = Builder { rng, opts: *opts, domains, s, actions: 0, has_range: false };
    let mut attempts = 0;
    while b.actions < target && attempts < 50 {
        attempts += 1;
        let _ = match b.rng.gen_range(0..4) {
            0 => b.add_swap(),
            1 => b.add_pending(),
            2 => b.add_arb(),
            _ => b.add_bridge(),
        };
    }
    let s = b.s;
    if let Err(e) = s.validate() {
        panic!("generator produced an invalid scenario for seed {seed}: {e}");
    }
    s
}

/// Property checks shared by the test suites. Each returns a description
/// of the first violation found.
pub mod checks {
    use std::collections::BTreeSet;

    use crate::amount::{Amount, Rate};
    use crate::collusion::classify_collusion;
    use crate::engine::{EngineConfig, MevQuery, MevResult, DEFAULT_GRID_POINTS};
    use crate::ids::{AssetId, DomainId};
    use crate::model::PriceMatrix;
    use crate::scenario::World;

    pub type Check = Result<(), String>;

    fn subsets(ds: &[DomainId]) -> Vec<Vec<DomainId>> {
        (1u32..(1 << ds.len()))
            .map(|m| ds.iter().enumerate().filter(|(k, _)| m & (1 << k) != 0).map(|(_, d)| d.clone()).collect())
            .collect()
    }

    fn run(w: &World, cfg: EngineConfig, act: &[DomainId], val: &[DomainId]) -> Result<MevResult, String> {
        let q = MevQuery::new(w, w.default_player().map_err(|e| e.to_string())?, act.iter().cloned(), val.iter().cloned());
        w.engine_with(cfg).mev(&q, &w.initial).map_err(|e| format!("mev({act:?}, {val:?}): {e}"))
    }

    /// `mev >= 0` for every pair of nonempty action and value domain sets.
    pub fn non_negative(w: &World, cfg: EngineConfig) -> Check {
        let ds = w.domain_ids();
        for a in subsets(&ds) {
            for v in subsets(&ds) {
                let r = run(w, cfg, &a, &v)?;
                if r.value.is_negative() {
                    return Err(format!("mev^{a:?}_{v:?} = {} < 0", r.value));
                }
            }
        }
        Ok(())
    }

    /// Growing the action domains never lowers the value.
    pub fn monotone(w: &World, cfg: EngineConfig) -> Check {
        let ds = w.domain_ids();
        let subs = subsets(&ds);
        for v in &subs {
            let values: Vec<(Vec<DomainId>, Amount)> =
                subs.iter().map(|a| Ok((a.clone(), run(w, cfg, a, v)?.value))).collect::<Result<_, String>>()?;
            for (a, va) in &values {
                for (b, vb) in &values {
                    let sub = a.iter().all(|d| b.contains(d));
                    if sub && va > vb {
                        return Err(format!("value domains {v:?}: mev with {a:?} = {va} > mev with {b:?} = {vb}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Without cross-domain actions the joint value is the sum of the
    /// per-domain values, priced to the same base.
    pub fn separable(w: &World, cfg: EngineConfig) -> Check {
        let ds = w.domain_ids();
        let joint = run(w, cfg, &ds, &ds)?.value;
        let mut sum = Amount::ZERO;
        for d in &ds {
            sum += run(w, cfg, std::slice::from_ref(d), std::slice::from_ref(d))?.value;
        }
        if joint != sum {
            return Err(format!("joint {joint} != sum of solo {sum}"));
        }
        Ok(())
    }

    /// Replaying the witness from the initial state reproduces the value
    /// and the final state.
    pub fn witness_replays(w: &World, cfg: EngineConfig) -> Check {
        let ds = w.domain_ids();
        let p = w.default_player().map_err(|e| e.to_string())?;
        let base = w.base().1;
        for a in subsets(&ds) {
            for v in subsets(&ds) {
                let r = run(w, cfg, &a, &v)?;
                let fin = w.space.apply_sequence(&w.initial, &p, &r.witness).map_err(|e| format!("replay failed: {e}"))?;
                let space = w.space.validate_sequence(&p, &a.iter().cloned().collect(), &w.initial, &r.witness);
                if let Err(v) = space {
                    return Err(format!("witness invalid: {v}"));
                }
                let mut total = Amount::ZERO;
                for d in &v {
                    let asset = w.registry.native_asset(d).map_err(|e| e.to_string())?;
                    let ev = fin.balance(d, &p, asset) - w.initial.balance(d, &p, asset);
                    total += w.prices.convert(asset, &base, ev).map_err(|e| e.to_string())?;
                }
                if total != r.value || fin != r.final_state {
                    return Err(format!("witness {:?} replays to {total}, reported {}", r.witness, r.value));
                }
            }
        }
        Ok(())
    }

    /// Raising alpha never improves the verdict, and margin = breakeven - alpha.
    pub fn verdict_monotone(w: &World, cfg: EngineConfig, alphas: &[Amount]) -> Check {
        let ds: BTreeSet<DomainId> = w.domain_ids().into_iter().collect();
        if ds.len() < 2 {
            return Ok(());
        }
        let p = w.default_player().map_err(|e| e.to_string())?;
        let mut alphas = alphas.to_vec();
        alphas.sort();
        let mut prev = None;
        for a in alphas {
            let r = classify_collusion(w, cfg, &p, &ds, a, w.scenario.defaults.max_sequence_length)
                .map_err(|e| e.to_string())?;
            if r.margin != r.breakeven - a {
                return Err(format!("margin {} != breakeven {} - alpha {a}", r.margin, r.breakeven));
            }
            if let Some(pv) = prev {
                if r.verdict < pv {
                    return Err(format!("verdict improved from {pv} to {} as alpha rose to {a}", r.verdict));
                }
            }
            prev = Some(r.verdict);
        }
        Ok(())
    }

    /// Discrete-only scenarios: oracle and search agree on value and witness.
    pub fn oracle_agrees(w: &World, cfg: EngineConfig) -> Check {
        let ds = w.domain_ids();
        let p = w.default_player().map_err(|e| e.to_string())?;
        let q = MevQuery::over(w, p, &ds);
        let e = w.engine_with(cfg);
        let a = e.mev(&q, &w.initial).map_err(|e| e.to_string())?;
        let b = e.mev_oracle(&q, &w.initial, DEFAULT_GRID_POINTS).map_err(|e| e.to_string())?;
        if (a.value, &a.witness) != (b.value, &b.witness) {
            return Err(format!("search {} {:?} vs oracle {} {:?}", a.value, a.witness, b.value, b.witness));
        }
        Ok(())
    }

    /// Scaling every rate into the base by a positive factor leaves the
    /// single-value-domain witness unchanged.
    pub fn witness_price_invariant(w: &World, cfg: EngineConfig, factor: i128) -> Check {
        let p = w.default_player().map_err(|e| e.to_string())?;
        let base = w.base().1;
        let scaled = w.prices.scaled_toward(&base, factor).map_err(|e| e.to_string())?;
        let ds = w.domain_ids();
        for d in &ds {
            let q = MevQuery::new(w, p.clone(), ds.iter().cloned(), [d.clone()]);
            let e = w.engine_with(cfg);
            let a = e.mev(&q, &w.initial).map_err(|e| e.to_string())?;
            let b = e.mev(&q.clone().with_prices(scaled.clone()), &w.initial).map_err(|e| e.to_string())?;
            if a.witness != b.witness {
                return Err(format!("value domain {d}: witness {:?} became {:?} under x{factor}", a.witness, b.witness));
            }
        }
        Ok(())
    }

    /// Worst-case error of `x -> x*r -> (x*r)/r` in units of 1e-18: each
    /// conversion rounds half-even, so the error is at most 1/(2r) + 1/2.
    pub fn round_trip_bound_ulps(r: &Rate) -> i128 {
        let (n, d) = r.parts();
        // ceil(d / (2n) + 1/2) = ceil((d + n) / (2n))
        (d + n + 2 * n - 1) / (2 * n)
    }

    /// Converting there and back lands within the rounding bound, and the
    /// declared reverse rate is the exact reciprocal.
    pub fn reciprocity(rate: Rate, amount: Amount) -> Check {
        let a = AssetId::new("A").map_err(|e| e.to_string())?;
        let b = AssetId::new("B").map_err(|e| e.to_string())?;
        let m = PriceMatrix::new().with("A", "B", &rate.to_string()).map_err(|e| e.to_string())?;
        let ab = m.rate(&a, &b).map_err(|e| e.to_string())?;
        let ba = m.rate(&b, &a).map_err(|e| e.to_string())?;
        if !ab.is_reciprocal_of(&ba) {
            return Err(format!("{ab} and {ba} are not reciprocal"));
        }
        let there = m.convert(&a, &b, amount).map_err(|e| e.to_string())?;
        let back = m.convert(&b, &a, there).map_err(|e| e.to_string())?;
        let err = (back - amount).abs().raw();
        let bound = round_trip_bound_ulps(&ab);
        if err > ethnum::I256::new(bound) {
            return Err(format!("{amount} via {ab} came back as {back}: {err} ulps > {bound}"));
        }
        if ab >= Rate::one() && err > ethnum::I256::ONE {
            return Err(format!("{amount} via {ab} came back as {back}: more than 1 ulp"));
        }
        Ok(())
    }
}
