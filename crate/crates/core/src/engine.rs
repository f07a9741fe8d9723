//! Extractable value, exhaustive MEV search and the brute-force oracle.
//!
//! The search walks every ordering of distinct actions up to the length cap.
//! Continuous amounts are optimized per id-ordering with a golden-section
//! search; the oracle instead samples them on a fixed grid and replays each
//! candidate from scratch.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use ethnum::I256;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionSequence, ActionSpace, Step};
use crate::amount::{big, big_quotient, mul_div, Amount, Rate, Rounding};
use crate::error::{Error, Result};
use crate::ids::{AssetId, DomainId, PlayerId, PoolId};
use crate::model::{PriceMatrix, Registry, WorldState};
use crate::scenario::World;
use crate::venues::{quote_swap, ConstantProductPool, Direction, BPS_DENOMINATOR};

pub const DEFAULT_CAP: u64 = 10_000_000;
pub const DEFAULT_GRID_POINTS: usize = 101;
pub const DEFAULT_REACHABLE_GRID: usize = 11;
pub const THREADS_ENV: &str = "XDMEV_THREADS";

/// 1/phi to 18 places.
const INV_PHI: Amount = Amount::from_raw_const(618_033_988_749_894_848);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    /// Worker threads for the search; 1 runs on the calling thread.
    pub threads: usize,
    /// Maximum number of candidate sequences evaluated per query.
    pub cap: u64,
    /// Grid size used for continuous amounts in `reachable_states`.
    pub reachable_grid: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            cap: DEFAULT_CAP,
            reachable_grid: DEFAULT_REACHABLE_GRID,
        }
    }
}

impl EngineConfig {
    /// Defaults, with the worker count taken from `XDMEV_THREADS` when set.
    pub fn from_env() -> Result<EngineConfig> {
        let mut cfg = EngineConfig::default();
        if let Ok(v) = std::env::var(THREADS_ENV) {
            match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => cfg.threads = n,
                _ => {
                    return Err(Error::InvalidQuery(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))
                }
            }
        }
        Ok(cfg)
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }
}

/// `mev^A_B`: which sequencers' actions may be used and where value is counted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MevQuery {
    pub player: PlayerId,
    pub action_domains: BTreeSet<DomainId>,
    /// Ordered; the first entry is the conventional B_1.
    pub value_domains: Vec<DomainId>,
    pub base: (DomainId, AssetId),
    pub prices: PriceMatrix,
    pub max_sequence_length: usize,
}

impl MevQuery {
    /// Query using the scenario's prices, base and length cap.
    pub fn new(
        world: &World,
        player: PlayerId,
        action_domains: impl IntoIterator<Item = DomainId>,
        value_domains: impl IntoIterator<Item = DomainId>,
    ) -> MevQuery {
        MevQuery {
            player,
            action_domains: action_domains.into_iter().collect(),
            value_domains: value_domains.into_iter().collect(),
            base: world.base(),
            prices: world.prices.clone(),
            max_sequence_length: world.scenario.defaults.max_sequence_length,
        }
    }

    /// `mev_D^D` for the given domains.
    pub fn over(world: &World, player: PlayerId, domains: &[DomainId]) -> MevQuery {
        MevQuery::new(world, player, domains.iter().cloned(), domains.iter().cloned())
    }

    pub fn with_max_len(mut self, n: usize) -> Self {
        self.max_sequence_length = n;
        self
    }

    pub fn with_prices(mut self, prices: PriceMatrix) -> Self {
        self.prices = prices;
        self
    }

    pub fn with_base(mut self, domain: DomainId, asset: AssetId) -> Self {
        self.base = (domain, asset);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exhaustive,
    Oracle,
}

/// Balance change in one value domain and its base-asset price.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DomainValue {
    pub domain: DomainId,
    pub asset: AssetId,
    pub ev: Amount,
    pub priced: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MevResult {
    pub value: Amount,
    pub witness: ActionSequence,
    pub final_state: WorldState,
    pub explored: u64,
    pub method: Method,
    pub breakdown: Vec<DomainValue>,
}

/// Objective of a candidate: priced sum, then the exact rational sum
/// (scaled to a common denominator) to separate rounding ties.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Score {
    value: Amount,
    exact: BigInt,
}

impl Score {
    fn zero() -> Score {
        Score { value: Amount::ZERO, exact: BigInt::zero() }
    }
}

struct Term {
    domain: DomainId,
    asset: AssetId,
    rate: Rate,
    weight: BigInt,
}

struct Valuer {
    terms: Vec<Term>,
}

impl Valuer {
    fn new(query: &MevQuery, registry: &Registry) -> Result<Valuer> {
        let mut terms = Vec::new();
        let mut lcm = BigInt::one();
        for d in &query.value_domains {
            let asset = registry.native_asset(d)?.clone();
            let rate = query.prices.rate(&asset, &query.base.1)?;
            lcm = lcm.lcm(&BigInt::from(rate.parts().1));
            terms.push(Term { domain: d.clone(), asset, rate, weight: BigInt::zero() });
        }
        for t in &mut terms {
            let (n, d) = t.rate.parts();
            t.weight = BigInt::from(n) * (&lcm / BigInt::from(d));
        }
        Ok(Valuer { terms })
    }

    fn ev(&self, t: &Term, origin: &WorldState, fin: &WorldState, player: &PlayerId) -> Amount {
        fin.balance(&t.domain, player, &t.asset) - origin.balance(&t.domain, player, &t.asset)
    }

    fn score(&self, origin: &WorldState, fin: &WorldState, player: &PlayerId) -> Score {
        let mut s = Score::zero();
        for t in &self.terms {
            let ev = self.ev(t, origin, fin, player);
            if ev.is_zero() {
                continue;
            }
            s.value += ev.mul_rate(&t.rate);
            s.exact += big(ev.raw()) * &t.weight;
        }
        s
    }

    fn breakdown(&self, origin: &WorldState, fin: &WorldState, player: &PlayerId) -> Vec<DomainValue> {
        self.terms
            .iter()
            .map(|t| {
                let ev = self.ev(t, origin, fin, player);
                DomainValue { domain: t.domain.clone(), asset: t.asset.clone(), ev, priced: ev.mul_rate(&t.rate) }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    score: Score,
    seq: ActionSequence,
    state: WorldState,
}

/// Total preference order; `Less` means `a` is preferred. Higher value
/// first, then shorter, then smaller id list, then smaller amounts.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .cmp(&a.score)
        .then(a.seq.len().cmp(&b.seq.len()))
        .then_with(|| a.seq.ids().cmp(b.seq.ids()))
        .then_with(|| {
            let am = |s: &ActionSequence| s.steps().iter().map(|x| x.amount).collect::<Vec<_>>();
            am(&a.seq).cmp(&am(&b.seq))
        })
}

fn keep_best(slot: &mut Option<Candidate>, c: Candidate) {
    match slot {
        Some(cur) if rank(&c, cur) != Ordering::Less => {}
        _ => *slot = Some(c),
    }
}

struct Budget {
    cap: u64,
    used: AtomicU64,
}

impl Budget {
    fn new(cap: u64) -> Budget {
        Budget { cap, used: AtomicU64::new(0) }
    }

    fn tick(&self) -> Result<()> {
        if self.used.fetch_add(1, AtomicOrdering::Relaxed) >= self.cap {
            return Err(Error::ExplosionGuard { cap: self.cap });
        }
        Ok(())
    }

    fn used(&self) -> u64 {
        self.used.load(AtomicOrdering::Relaxed)
    }
}

/// Golden-section maximization over `[lo, hi]` in fixed point. Stops once
/// the bracket is narrower than `hi * 1e-12` (or one unit). Both endpoints
/// are always evaluated and the best point seen is returned; `None`
/// objective values are treated as minus infinity. Ties go to the smaller
/// input.
pub(crate) fn golden_section<T>(
    lo: Amount,
    hi: Amount,
    mut f: impl FnMut(Amount) -> Result<Option<T>>,
    cmp: impl Fn(&T, &T) -> Ordering,
) -> Result<Option<(Amount, T)>> {
    golden_section_tol(lo, hi, tolerance(hi), &mut f, &cmp)
}

fn golden_section_tol<T>(
    lo: Amount,
    hi: Amount,
    tol: Amount,
    f: &mut impl FnMut(Amount) -> Result<Option<T>>,
    cmp: &impl Fn(&T, &T) -> Ordering,
) -> Result<Option<(Amount, T)>> {
    let mut seen: Vec<(Amount, Option<T>)> = Vec::new();
    let mut eval = |x: Amount, seen: &mut Vec<(Amount, Option<T>)>| -> Result<usize> {
        if let Some(i) = seen.iter().position(|(y, _)| *y == x) {
            return Ok(i);
        }
        let v = f(x)?;
        seen.push((x, v));
        Ok(seen.len() - 1)
    };
    // Greater means the first argument is at least as good a point to keep.
    let ge = |a: &Option<T>, b: &Option<T>| match (a, b) {
        (Some(a), Some(b)) => cmp(a, b) != Ordering::Less,
        (Some(_), None) => true,
        (None, Some(_)) => false,
        (None, None) => false,
    };

    eval(lo, &mut seen)?;
    eval(hi, &mut seen)?;
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let step = (b - a).mul_floor(INV_PHI);
        let (c, d) = (b - step, a + step);
        let (c, d) = (c.min(d), c.max(d));
        let ic = eval(c, &mut seen)?;
        let id = eval(d, &mut seen)?;
        if ge(&seen[ic].1, &seen[id].1) {
            b = d;
        } else {
            a = c;
        }
    }

    let mut best: Option<(Amount, T)> = None;
    for (x, v) in seen {
        let Some(v) = v else { continue };
        let replace = match &best {
            None => true,
            Some((bx, bv)) => match cmp(&v, bv) {
                Ordering::Greater => true,
                Ordering::Equal => x < *bx,
                Ordering::Less => false,
            },
        };
        if replace {
            best = Some((x, v));
        }
    }
    Ok(best)
}

const BRACKET_CELLS: i128 = 64;

/// Coarse scan of `[lo, hi]` on 65 points, then golden-section inside the
/// two cells around the best scan point. The scan keeps the search from
/// stalling when golden-section probes land in infeasible regions.
pub(crate) fn bracketed_maximize<T>(
    lo: Amount,
    hi: Amount,
    mut f: impl FnMut(Amount) -> Result<Option<T>>,
    cmp: impl Fn(&T, &T) -> Ordering,
) -> Result<Option<(Amount, T)>> {
    let width = (hi - lo).raw();
    let mut grid: Vec<Amount> = (0..=BRACKET_CELLS)
        .map(|k| lo + Amount::from_raw(mul_div(width, I256::new(k), I256::new(BRACKET_CELLS), Rounding::Floor)))
        .collect();
    grid.dedup();
    let mut best: Option<(usize, T)> = None;
    for (k, &x) in grid.iter().enumerate() {
        if let Some(v) = f(x)? {
            if best.as_ref().is_none_or(|(_, b)| cmp(&v, b) == Ordering::Greater) {
                best = Some((k, v));
            }
        }
    }
    let Some((k, scan_best)) = best else { return Ok(None) };
    let (a, b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let refined = if a < b { golden_section_tol(a, b, tolerance(hi), &mut f, &cmp)? } else { None };
    Ok(match refined {
        Some((x, v)) if cmp(&v, &scan_best) == Ordering::Greater || (cmp(&v, &scan_best) == Ordering::Equal && x < grid[k]) => {
            Some((x, v))
        }
        _ => Some((grid[k], scan_best)),
    })
}

fn tolerance(hi: Amount) -> Amount {
    Amount::from_raw((hi.raw() / I256::new(1_000_000_000_000)).max(I256::ONE))
}

struct Leaf {
    amounts: Vec<Option<crate::amount::Amount>>,
    state: WorldState,
    score: Score,
}

enum Node {
    /// Every action so far is discrete; state after the prefix.
    Concrete(WorldState),
    /// `order[from..]` contains a continuous action; `state` precedes it.
    Deferred { from: usize, state: WorldState },
}

struct Search<'a> {
    actions: Vec<&'a Action>,
    player: &'a PlayerId,
    origin: &'a WorldState,
    valuer: &'a Valuer,
    budget: &'a Budget,
    max_len: usize,
}

impl<'a> Search<'a> {
    fn candidate(&self, order: &[usize], from: usize, leaf: Leaf) -> Candidate {
        let steps = order
            .iter()
            .enumerate()
            .map(|(p, &i)| Step {
                action: self.actions[i].id.clone(),
                amount: if p < from { None } else { leaf.amounts[p - from] },
            })
            .collect();
        Candidate { score: leaf.score, seq: ActionSequence(steps), state: leaf.state }
    }

    /// Best amounts for `order[from..]` applied to `state`.
    fn optimize(&self, idxs: &[usize], mut state: WorldState, mut amounts: Vec<Option<Amount>>) -> Result<Option<Leaf>> {
        while amounts.len() < idxs.len() {
            let action = self.actions[idxs[amounts.len()]];
            if action.is_parametric() {
                let Some((lo, hi)) = action.feasible_range(&state, self.player) else {
                    return Ok(None);
                };
                let found = bracketed_maximize(
                    lo,
                    hi,
                    |x| {
                        let Ok(next) = action.apply(&state, self.player, Some(x)) else {
                            self.budget.tick()?;
                            return Ok(None);
                        };
                        let mut am = amounts.clone();
                        am.push(Some(x));
                        self.optimize(idxs, next, am)
                    },
                    |a: &Leaf, b: &Leaf| a.score.cmp(&b.score),
                )?;
                return Ok(found.map(|(_, leaf)| leaf));
            }
            match action.apply(&state, self.player, None) {
                Ok(next) => state = next,
                Err(_) => {
                    self.budget.tick()?;
                    return Ok(None);
                }
            }
            amounts.push(None);
        }
        self.budget.tick()?;
        let score = self.valuer.score(self.origin, &state, self.player);
        Ok(Some(Leaf { amounts, state, score }))
    }

    /// Extend `parent` by the last entry of `order`.
    fn expand(&self, parent: &Node, order: &[usize]) -> Result<Option<(Node, Candidate)>> {
        let last = *order.last().expect("nonempty order");
        let action = self.actions[last];
        let (from, state) = match parent {
            Node::Concrete(state) if !action.is_parametric() => {
                self.budget.tick()?;
                let Ok(next) = action.apply(state, self.player, None) else {
                    return Ok(None);
                };
                let score = self.valuer.score(self.origin, &next, self.player);
                let leaf = Leaf { amounts: Vec::new(), state: next.clone(), score };
                let cand = self.candidate(order, order.len(), leaf);
                return Ok(Some((Node::Concrete(next), cand)));
            }
            Node::Concrete(state) => (order.len() - 1, state),
            Node::Deferred { from, state } => (*from, state),
        };
        let Some(leaf) = self.optimize(&order[from..], state.clone(), Vec::new())? else {
            return Ok(None);
        };
        let cand = self.candidate(order, from, leaf);
        Ok(Some((Node::Deferred { from, state: state.clone() }, cand)))
    }

    fn visit(&self, order: &mut Vec<usize>, used: &mut [bool], node: &Node, best: &mut Option<Candidate>) -> Result<()> {
        if order.len() >= self.max_len {
            return Ok(());
        }
        for i in 0..self.actions.len() {
            if used[i] {
                continue;
            }
            order.push(i);
            used[i] = true;
            let step = self.expand(node, order);
            let res = match step {
                Ok(Some((child, cand))) => {
                    keep_best(best, cand);
                    self.visit(order, used, &child, best)
                }
                Ok(None) => Ok(()),
                Err(e) => Err(e),
            };
            order.pop();
            used[i] = false;
            res?;
        }
        Ok(())
    }

    fn branch(&self, first: usize) -> Result<Option<Candidate>> {
        let mut best = None;
        if self.max_len == 0 {
            return Ok(None);
        }
        let mut order = vec![first];
        let mut used = vec![false; self.actions.len()];
        used[first] = true;
        let root = Node::Concrete(self.origin.clone());
        if let Some((node, cand)) = self.expand(&root, &order)? {
            keep_best(&mut best, cand);
            self.visit(&mut order, &mut used, &node, &mut best)?;
        }
        Ok(best)
    }
}

fn run_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if threads <= 1 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidQuery(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Result of [`optimal_cp_arbitrage`]. Amounts of `asset_y` go in on
/// `buy_pool`, the `asset_x` received is sold on `sell_pool`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CpArbitrage {
    pub buy_pool: PoolId,
    pub sell_pool: PoolId,
    /// True when `pool_a` (the first argument) is the buy side.
    pub buy_first: bool,
    pub amount_in: Amount,
    pub amount_mid: Amount,
    pub amount_out: Amount,
    pub profit: Amount,
}

fn round_trip(buy: &ConstantProductPool, sell: &ConstantProductPool, dy: Amount) -> Option<(Amount, Amount)> {
    let dx = quote_swap(buy, Direction::YToX, dy).ok()?;
    let out = quote_swap(sell, Direction::XToY, dx).ok()?;
    Some((dx, out))
}

/// Profit-maximizing round trip between two pools of the same pair: buy
/// `asset_x` where it is cheaper, sell where it is dearer. Zero-fee pools
/// use the closed form; otherwise a golden-section search over the range
/// where the round trip can be profitable.
pub fn optimal_cp_arbitrage(pool_a: &ConstantProductPool, pool_b: &ConstantProductPool) -> Result<CpArbitrage> {
    if pool_a.asset_x != pool_b.asset_x || pool_a.asset_y != pool_b.asset_y {
        return Err(Error::MismatchedPools(pool_a.id.clone(), pool_b.id.clone()));
    }
    // y_a / x_a versus y_b / x_b
    let lhs = big(pool_a.reserve_y.raw()) * big(pool_b.reserve_x.raw());
    let rhs = big(pool_b.reserve_y.raw()) * big(pool_a.reserve_x.raw());
    let (buy, sell, buy_first) = match lhs.cmp(&rhs) {
        Ordering::Equal => return Err(Error::NoOpportunity),
        Ordering::Less => (pool_a, pool_b, true),
        Ordering::Greater => (pool_b, pool_a, false),
    };
    let (x1, y1) = (big(buy.reserve_x.raw()), big(buy.reserve_y.raw()));
    let (x2, y2) = (big(sell.reserve_x.raw()), big(sell.reserve_y.raw()));

    let dy = if buy.fee_bps == 0 && sell.fee_bps == 0 {
        // Round trip output is K dy / (L + M dy); the optimum solves
        // (L + M dy)^2 = K L.
        let k = &x1 * &y2;
        let l = &x2 * &y1;
        let m = &x1 + &x2;
        let root = (&k * &l).sqrt();
        big_quotient(&(root - &l), &m, Rounding::Floor)
    } else {
        // Profit is positive only below (A - B) / C with
        // A = g1 g2 x1 y2, B = x2 y1, C = g1 (x2 + g2 x1) in bps units.
        let bps = BigInt::from(BPS_DENOMINATOR);
        let g1 = BigInt::from(BPS_DENOMINATOR - buy.fee_bps);
        let g2 = BigInt::from(BPS_DENOMINATOR - sell.fee_bps);
        let a = &g1 * &g2 * &x1 * &y2;
        let b = &bps * &bps * &x2 * &y1;
        let c = &g1 * (&bps * &x2 + &g2 * &x1);
        let hi = if a > b { big_quotient(&(a - b), &c, Rounding::Floor) } else { I256::ZERO };
        let hi = Amount::from_raw(hi);
        if !hi.is_positive() {
            I256::ZERO
        } else {
            let found = golden_section(
                Amount::ZERO,
                hi,
                |dy| Ok(round_trip(buy, sell, dy).map(|(_, out)| out - dy)),
                |p: &Amount, q: &Amount| p.cmp(q),
            )?;
            found.map(|(dy, _)| dy.raw()).unwrap_or(I256::ZERO)
        }
    };
    let dy = Amount::from_raw(dy);
    let (dx, out) = match round_trip(buy, sell, dy) {
        Some((dx, out)) if out > dy => (dx, out),
        _ => (Amount::ZERO, Amount::ZERO),
    };
    let amount_in = if out.is_zero() { Amount::ZERO } else { dy };
    Ok(CpArbitrage {
        buy_pool: buy.id.clone(),
        sell_pool: sell.id.clone(),
        buy_first,
        amount_in,
        amount_mid: dx,
        amount_out: out,
        profit: out - amount_in,
    })
}

/// Search entry points bound to one scenario's action space.
pub struct Engine<'w> {
    space: &'w ActionSpace,
    registry: &'w Registry,
    config: EngineConfig,
}

impl World {
    pub fn engine(&self) -> Engine<'_> {
        Engine::new(&self.space, &self.registry, EngineConfig::default())
    }

    pub fn engine_with(&self, config: EngineConfig) -> Engine<'_> {
        Engine::new(&self.space, &self.registry, config)
    }
}

impl<'w> Engine<'w> {
    pub fn new(space: &'w ActionSpace, registry: &'w Registry, config: EngineConfig) -> Engine<'w> {
        Engine { space, registry, config }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Balance change of `asset` on `domain` caused by `seq`. May be negative.
    pub fn extractable_value(
        &self,
        state: &WorldState,
        player: &PlayerId,
        seq: &ActionSequence,
        domain: &DomainId,
        asset: &AssetId,
    ) -> Result<Amount> {
        self.registry.check_domain(domain)?;
        self.registry.check_asset(asset)?;
        self.registry.check_player(player)?;
        let fin = self.space.apply_sequence(state, player, seq)?;
        Ok(fin.balance(domain, player, asset) - state.balance(domain, player, asset))
    }

    /// Distinct states reachable with at most `max_len` actions drawn from
    /// `domains`. Continuous amounts are sampled on `reachable_grid` evenly
    /// spaced points of their declared interval.
    pub fn reachable_states(
        &self,
        state: &WorldState,
        player: &PlayerId,
        domains: &BTreeSet<DomainId>,
        max_len: usize,
    ) -> Result<BTreeSet<WorldState>> {
        let actions = self.space.actions(player, domains)?;
        let budget = Budget::new(self.config.cap);
        let grid = self.config.reachable_grid.max(2);
        let mut out = BTreeSet::new();
        let mut used = vec![false; actions.len()];
        fn walk(
            actions: &[&Action],
            player: &PlayerId,
            state: &WorldState,
            depth: usize,
            grid: usize,
            used: &mut [bool],
            budget: &Budget,
            out: &mut BTreeSet<WorldState>,
        ) -> Result<()> {
            out.insert(state.clone());
            if depth == 0 {
                return Ok(());
            }
            for i in 0..actions.len() {
                if used[i] {
                    continue;
                }
                let amounts: Vec<Option<Amount>> = match actions[i].range() {
                    Some((lo, hi)) => grid_points(lo, hi, grid).into_iter().map(Some).collect(),
                    None => vec![None],
                };
                used[i] = true;
                for x in amounts {
                    budget.tick()?;
                    if let Ok(next) = actions[i].apply(state, player, x) {
                        walk(actions, player, &next, depth - 1, grid, used, budget, out)?;
                    }
                }
                used[i] = false;
            }
            Ok(())
        }
        walk(&actions, player, state, max_len, grid, &mut used, &budget, &mut out)?;
        Ok(out)
    }

    fn check_query(&self, q: &MevQuery) -> Result<()> {
        self.registry.check_player(&q.player)?;
        if q.action_domains.is_empty() {
            return Err(Error::InvalidQuery("action domains must be nonempty".into()));
        }
        if q.value_domains.is_empty() {
            return Err(Error::InvalidQuery("value domains must be nonempty".into()));
        }
        for d in q.action_domains.iter().chain(&q.value_domains) {
            self.registry.check_domain(d)?;
        }
        let uniq: BTreeSet<_> = q.value_domains.iter().collect();
        if uniq.len() != q.value_domains.len() {
            return Err(Error::InvalidQuery("value domains must be distinct".into()));
        }
        self.registry.check_domain(&q.base.0)?;
        self.registry.check_asset(&q.base.1)?;
        if q.max_sequence_length == 0 {
            return Err(Error::InvalidQuery("max sequence length must be positive".into()));
        }
        Ok(())
    }

    fn finish(&self, q: &MevQuery, state: &WorldState, valuer: &Valuer, best: Candidate, explored: u64, method: Method) -> MevResult {
        MevResult {
            value: best.score.value,
            breakdown: valuer.breakdown(state, &best.state, &q.player),
            witness: best.seq,
            final_state: best.state,
            explored,
            method,
        }
    }

    fn empty_candidate(state: &WorldState) -> Candidate {
        Candidate { score: Score::zero(), seq: ActionSequence::empty(), state: state.clone() }
    }

    /// Maximal extractable value by exhaustive search.
    pub fn mev(&self, query: &MevQuery, state: &WorldState) -> Result<MevResult> {
        self.check_query(query)?;
        let valuer = Valuer::new(query, self.registry)?;
        let actions = self.space.actions(&query.player, &query.action_domains)?;
        let budget = Budget::new(self.config.cap);
        let search = Search {
            actions,
            player: &query.player,
            origin: state,
            valuer: &valuer,
            budget: &budget,
            max_len: query.max_sequence_length,
        };
        budget.tick()?;
        let n = search.actions.len();
        let branches: Vec<Result<Option<Candidate>>> =
            run_pool(self.config.threads, || (0..n).into_par_iter().map(|i| search.branch(i)).collect())?;
        let mut best = Some(Self::empty_candidate(state));
        for b in branches {
            if let Some(c) = b? {
                keep_best(&mut best, c);
            }
        }
        let best = best.expect("empty sequence is always a candidate");
        Ok(self.finish(query, state, &valuer, best, budget.used(), Method::Exhaustive))
    }

    /// `mev^{i,j}_{i,j}` priced in domain `i`'s native asset.
    pub fn mev_cross_two(
        &self,
        player: &PlayerId,
        domain_i: &DomainId,
        domain_j: &DomainId,
        prices: &PriceMatrix,
        state: &WorldState,
        max_len: usize,
    ) -> Result<MevResult> {
        let asset = self.registry.native_asset(domain_i)?.clone();
        let query = MevQuery {
            player: player.clone(),
            action_domains: [domain_i.clone(), domain_j.clone()].into(),
            value_domains: vec![domain_i.clone(), domain_j.clone()],
            base: (domain_i.clone(), asset),
            prices: prices.clone(),
            max_sequence_length: max_len,
        };
        self.mev(&query, state)
    }

    /// Brute force over every ordered subset of the action space, with
    /// continuous amounts on `grid_points` evenly spaced values. Each
    /// candidate is replayed from `state`.
    pub fn mev_oracle(&self, query: &MevQuery, state: &WorldState, grid_points: usize) -> Result<MevResult> {
        self.check_query(query)?;
        let valuer = Valuer::new(query, self.registry)?;
        let actions = self.space.actions(&query.player, &query.action_domains)?;
        if grid_points < 2 && actions.iter().any(|a| a.is_parametric()) {
            return Err(Error::InvalidQuery("grid needs at least 2 points".into()));
        }
        let weights: Vec<u128> =
            actions.iter().map(|a| if a.is_parametric() { grid_points as u128 } else { 1 }).collect();
        let total = candidate_count(&weights, query.max_sequence_length);
        if total > self.config.cap as u128 {
            return Err(Error::ExplosionGuard { cap: self.config.cap });
        }
        let grids: Vec<Vec<Amount>> = actions
            .iter()
            .map(|a| a.range().map(|(lo, hi)| grid_points_inclusive(lo, hi, grid_points)).unwrap_or_default())
            .collect();

        struct Oracle<'x> {
            space: &'x ActionSpace,
            actions: Vec<&'x Action>,
            grids: Vec<Vec<Amount>>,
            valuer: &'x Valuer,
            player: &'x PlayerId,
            origin: &'x WorldState,
            max_len: usize,
            explored: u64,
            best: Option<Candidate>,
        }
        impl Oracle<'_> {
            fn assign(&mut self, order: &[usize], steps: &mut Vec<Step>) {
                if steps.len() == order.len() {
                    self.explored += 1;
                    let seq = ActionSequence(steps.clone());
                    if let Ok(fin) = self.space.apply_sequence(self.origin, self.player, &seq) {
                        let score = self.valuer.score(self.origin, &fin, self.player);
                        keep_best(&mut self.best, Candidate { score, seq, state: fin });
                    }
                    return;
                }
                let i = order[steps.len()];
                let id = self.actions[i].id.clone();
                if self.actions[i].is_parametric() {
                    for k in 0..self.grids[i].len() {
                        steps.push(Step::with_amount(id.clone(), self.grids[i][k]));
                        self.assign(order, steps);
                        steps.pop();
                    }
                } else {
                    steps.push(Step::new(id));
                    self.assign(order, steps);
                    steps.pop();
                }
            }

            fn subsets(&mut self, order: &mut Vec<usize>, used: &mut [bool]) {
                self.assign(order, &mut Vec::new());
                if order.len() == self.max_len {
                    return;
                }
                for i in 0..self.actions.len() {
                    if !used[i] {
                        used[i] = true;
                        order.push(i);
                        self.subsets(order, used);
                        order.pop();
                        used[i] = false;
                    }
                }
            }
        }

        let n = actions.len();
        let mut o = Oracle {
            space: self.space,
            actions,
            grids,
            valuer: &valuer,
            player: &query.player,
            origin: state,
            max_len: query.max_sequence_length,
            explored: 0,
            best: None,
        };
        o.subsets(&mut Vec::new(), &mut vec![false; n]);
        let best = o.best.take().unwrap_or_else(|| Self::empty_candidate(state));
        let explored = o.explored;
        Ok(self.finish(query, state, &valuer, best, explored, Method::Oracle))
    }
}

/// Number of (ordered subset, grid assignment) pairs of length at most
/// `max_len`, saturating.
fn candidate_count(weights: &[u128], max_len: usize) -> u128 {
    let k_max = max_len.min(weights.len());
    let mut e = vec![0u128; k_max + 1];
    e[0] = 1;
    for &w in weights {
        for k in (1..=k_max).rev() {
            e[k] = e[k].saturating_add(e[k - 1].saturating_mul(w));
        }
    }
    let mut total = 0u128;
    let mut fact = 1u128;
    for (k, ek) in e.iter().enumerate() {
        if k > 0 {
            fact = fact.saturating_mul(k as u128);
        }
        total = total.saturating_add(ek.saturating_mul(fact));
    }
    total
}

/// `n` evenly spaced points from `lo` to `hi` inclusive, rounded down.
pub fn grid_points_inclusive(lo: Amount, hi: Amount, n: usize) -> Vec<Amount> {
    if n <= 1 {
        return vec![lo];
    }
    let width = (hi - lo).raw();
    let den = I256::new((n - 1) as i128);
    (0..n)
        .map(|k| lo + Amount::from_raw(mul_div(width, I256::new(k as i128), den, Rounding::Floor)))
        .collect()
}

fn grid_points(lo: Amount, hi: Amount, n: usize) -> Vec<Amount> {
    grid_points_inclusive(lo, hi, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(name: &str) -> World {
        World::bundled(name).unwrap()
    }

    fn d(s: &str) -> DomainId {
        DomainId::new(s).unwrap()
    }

    fn amt(s: &str) -> Amount {
        s.parse().unwrap()
    }

    fn mev(w: &World, act: &[&str], val: &[&str]) -> MevResult {
        let q = MevQuery::new(w, w.default_player().unwrap(), act.iter().map(|s| d(s)), val.iter().map(|s| d(s)));
        w.engine_with(EngineConfig::default().with_threads(2)).mev(&q, &w.initial).unwrap()
    }

    #[test]
    fn two_pool_values() {
        let w = world("section3_2amm");
        assert_eq!(mev(&w, &["i"], &["i"]).value, Amount::ZERO);
        assert_eq!(mev(&w, &["j"], &["j"]).value, Amount::ZERO);
        let joint = mev(&w, &["i", "j"], &["i", "j"]);
        assert_eq!(joint.value, Amount::one());
        assert_eq!(joint.witness, ActionSequence::of(&["buy_eth_uniswap", "arb_uniswap_toroswap"]).unwrap());
    }

    #[test]
    fn empty_witness_when_nothing_to_gain() {
        let w = world("section3_2amm");
        let r = mev(&w, &["i"], &["i"]);
        assert!(r.witness.is_empty());
        assert_eq!(r.final_state, w.initial);
    }

    #[test]
    fn four_pool_values() {
        let w = world("appendix_b_4amm");
        assert_eq!(mev(&w, &["i"], &["i"]).value, Amount::one());
        assert_eq!(mev(&w, &["j"], &["j"]).value, Amount::ZERO);
        let joint = mev(&w, &["i", "j"], &["i", "j"]);
        assert_eq!(joint.value, amt("1.6"));
        assert_eq!(joint.witness.len(), 4);
    }

    #[test]
    fn bridge_route_cross_two() {
        for (name, want) in [("figure1_bridge", "49860.96"), ("figure1_bridge_discount", "21057.646")] {
            let w = world(name);
            let p = w.default_player().unwrap();
            let r = w
                .engine()
                .mev_cross_two(&p, &d("ethereum"), &d("polygon"), &w.prices, &w.initial, 8)
                .unwrap();
            assert_eq!(r.value, amt(want), "{name}");
            assert_eq!(r.breakdown[0].ev, amt("-238172.18"));
            assert_eq!(r.breakdown[1].ev, amt("288033.14"));
        }
    }

    #[test]
    fn extractable_value_examples() {
        let w = world("section3_2amm");
        let e = w.engine();
        let p = w.default_player().unwrap();
        let eth = AssetId::new("ETH").unwrap();
        assert_eq!(e.extractable_value(&w.initial, &p, &ActionSequence::empty(), &d("i"), &eth).unwrap(), Amount::ZERO);
        let seq = ActionSequence::of(&["buy_eth_uniswap", "arb_uniswap_toroswap"]).unwrap();
        assert_eq!(e.extractable_value(&w.initial, &p, &seq, &d("i"), &eth).unwrap(), Amount::one());
    }

    #[test]
    fn reachable_states_examples() {
        let w = world("section3_2amm");
        let e = w.engine();
        let p = w.default_player().unwrap();
        let all: BTreeSet<_> = [d("i"), d("j")].into();
        assert_eq!(e.reachable_states(&w.initial, &p, &all, 0).unwrap(), [w.initial.clone()].into());
        let one = e.reachable_states(&w.initial, &p, &[d("i")].into(), 1).unwrap();
        assert_eq!(one.len(), 2);
        let two = e.reachable_states(&w.initial, &p, &all, 2).unwrap();
        let at_25 = two.iter().any(|s| {
            s.pools().all(|(_, pool)| pool.price() == amt("25"))
        });
        assert!(at_25);
    }

    #[test]
    fn oracle_matches_on_discrete_scenarios() {
        for name in ["section3_2amm", "appendix_b_4amm", "figure1_bridge", "separable_pair"] {
            let w = world(name);
            let q = MevQuery::over(&w, w.default_player().unwrap(), &w.domain_ids());
            let e = w.engine();
            let a = e.mev(&q, &w.initial).unwrap();
            let b = e.mev_oracle(&q, &w.initial, DEFAULT_GRID_POINTS).unwrap();
            assert_eq!((a.value, &a.witness), (b.value, &b.witness), "{name}");
        }
    }

    #[test]
    fn explosion_guard_trips() {
        let w = world("appendix_b_4amm");
        let q = MevQuery::over(&w, w.default_player().unwrap(), &w.domain_ids());
        let e = w.engine_with(EngineConfig::default().with_cap(5));
        assert_eq!(e.mev(&q, &w.initial).unwrap_err(), Error::ExplosionGuard { cap: 5 });
        assert_eq!(e.mev_oracle(&q, &w.initial, 2).unwrap_err(), Error::ExplosionGuard { cap: 5 });
    }

    #[test]
    fn candidate_counts() {
        // 3 discrete actions: 1 + 3 + 6 + 6
        assert_eq!(candidate_count(&[1, 1, 1], 8), 16);
        assert_eq!(candidate_count(&[1, 1, 1], 1), 4);
        // one grid of 5 and one discrete: 1 + (5 + 1) + 2 * 5
        assert_eq!(candidate_count(&[5, 1], 8), 17);
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = grid_points_inclusive(amt("0"), amt("1000"), 3);
        assert_eq!(g, vec![amt("0"), amt("500"), amt("1000")]);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let peak = amt("3.25");
        let found = golden_section(
            amt("0"),
            amt("10"),
            |x| Ok(Some(-((x - peak).mul(x - peak)))),
            |a: &Amount, b: &Amount| a.cmp(b),
        )
        .unwrap()
        .unwrap();
        assert!((found.0 - peak).abs() < amt("0.000001"), "{}", found.0);
    }

    #[test]
    fn bracketing_finds_narrow_feasible_region() {
        // Feasible only on [2, 6] of [0, 200]; plain golden-section probes
        // near 76 and 124 both fail there.
        let f = |x: Amount| {
            Ok((x >= amt("2") && x <= amt("6")).then(|| -((x - amt("5")).mul(x - amt("5")))))
        };
        let cmp = |a: &Amount, b: &Amount| a.cmp(b);
        let (x, _) = bracketed_maximize(amt("0"), amt("200"), f, cmp).unwrap().unwrap();
        assert!((x - amt("5")).abs() < amt("0.000001"), "{x}");
        assert!(golden_section(amt("0"), amt("200"), f, cmp).unwrap().is_none());
    }

    fn cp(id: &str, x: &str, y: &str, fee: u32) -> ConstantProductPool {
        ConstantProductPool {
            id: PoolId::new(id).unwrap(),
            domain: d("d"),
            asset_x: AssetId::new("ETH").unwrap(),
            asset_y: AssetId::new("DAI").unwrap(),
            reserve_x: amt(x),
            reserve_y: amt(y),
            fee_bps: fee,
        }
    }

    #[test]
    fn cp_arbitrage_closed_form() {
        let a = cp("a", "100", "2000", 0);
        let b = cp("b", "100", "3000", 0);
        let r = optimal_cp_arbitrage(&a, &b).unwrap();
        assert!(r.buy_first);
        assert!((r.amount_in.to_f64() - 224.744871).abs() < 1e-5, "{}", r.amount_in);
        assert!((r.profit.to_f64() - 50.510257).abs() < 1e-5, "{}", r.profit);
        let m = optimal_cp_arbitrage(&b, &a).unwrap();
        assert_eq!((m.profit, m.amount_in, m.buy_first), (r.profit, r.amount_in, false));
        assert_eq!(optimal_cp_arbitrage(&a, &a.clone()).unwrap_err(), Error::NoOpportunity);
    }

    #[test]
    fn cp_arbitrage_with_fee_is_below_fee_free() {
        let r0 = optimal_cp_arbitrage(&cp("a", "100", "2000", 0), &cp("b", "100", "3000", 0)).unwrap();
        let r = optimal_cp_arbitrage(&cp("a", "100", "2000", 30), &cp("b", "100", "3000", 30)).unwrap();
        assert!(r.profit.is_positive() && r.profit < r0.profit);
        // Möbius closed form with fees as a cross-check.
        let g = 0.997f64;
        let (a, b, c) = (g * g * 100.0 * 3000.0, 100.0 * 2000.0, g * (100.0 + g * 100.0));
        let dy = ((a * b).sqrt() - b) / c;
        assert!((r.amount_in.to_f64() - dy).abs() < 1e-6 * dy);
    }

    #[test]
    fn mismatched_pairs_are_rejected() {
        let mut b = cp("b", "100", "3000", 0);
        b.asset_y = AssetId::new("USDC").unwrap();
        assert!(matches!(optimal_cp_arbitrage(&cp("a", "1", "2", 0), &b), Err(Error::MismatchedPools(..))));
    }

    #[test]
    fn bad_queries() {
        let w = world("section3_2amm");
        let p = w.default_player().unwrap();
        let e = w.engine();
        let q = MevQuery::new(&w, p.clone(), [], [d("i")]);
        assert!(matches!(e.mev(&q, &w.initial), Err(Error::InvalidQuery(_))));
        let q = MevQuery::new(&w, p, [d("zz")], [d("i")]);
        assert!(matches!(e.mev(&q, &w.initial), Err(Error::UnknownId { .. })));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let w = world("appendix_b_4amm");
        let q = MevQuery::over(&w, w.default_player().unwrap(), &w.domain_ids());
        let one = w.engine_with(EngineConfig::default().with_threads(1)).mev(&q, &w.initial).unwrap();
        let many = w.engine_with(EngineConfig::default().with_threads(8)).mev(&q, &w.initial).unwrap();
        assert_eq!(one, many);
    }
}
