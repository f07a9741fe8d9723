//! Pools, bridges and pending transactions: the state-mutating machinery
//! behind every action.

use ethnum::I256;
use serde::{Deserialize, Serialize};

use crate::amount::{big, big_quotient, Amount, Rate, Rounding};
use crate::error::{Error, Result};
use crate::ids::{ActionId, AssetId, DomainId, PlayerId, PoolId};
use crate::model::WorldState;

pub const BPS_DENOMINATOR: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    XToY,
    YToX,
}

impl Direction {
    pub fn reverse(self) -> Direction {
        match self {
            Direction::XToY => Direction::YToX,
            Direction::YToX => Direction::XToY,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::XToY => "x_to_y",
            Direction::YToX => "y_to_x",
        }
    }
}

/// `x * y = k` pool with an optional basis-point fee on the input.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantProductPool {
    pub id: PoolId,
    pub domain: DomainId,
    pub asset_x: AssetId,
    pub asset_y: AssetId,
    pub reserve_x: Amount,
    pub reserve_y: Amount,
    pub fee_bps: u32,
}

impl ConstantProductPool {
    pub fn assets(&self, dir: Direction) -> (&AssetId, &AssetId) {
        match dir {
            Direction::XToY => (&self.asset_x, &self.asset_y),
            Direction::YToX => (&self.asset_y, &self.asset_x),
        }
    }

    pub fn reserves(&self, dir: Direction) -> (Amount, Amount) {
        match dir {
            Direction::XToY => (self.reserve_x, self.reserve_y),
            Direction::YToX => (self.reserve_y, self.reserve_x),
        }
    }

    /// Marginal price of x in units of y (e.g. DAI per ETH), before fees.
    pub fn marginal_price(&self) -> Amount {
        self.reserve_y.checked_div(self.reserve_x).unwrap_or(Amount::ZERO)
    }

    /// Reserves after swapping `amount_in` in direction `dir`.
    pub fn after_swap(&self, dir: Direction, amount_in: Amount) -> Result<(ConstantProductPool, Amount)> {
        let out = quote_swap(self, dir, amount_in)?;
        let mut next = self.clone();
        match dir {
            Direction::XToY => {
                next.reserve_x += amount_in;
                next.reserve_y -= out;
            }
            Direction::YToX => {
                next.reserve_y += amount_in;
                next.reserve_x -= out;
            }
        }
        Ok((next, out))
    }
}

/// Pedagogical pool that only tracks a quoted price; arbitrage between
/// two such pools moves both to the midpoint for a declared profit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StylizedMidpointPool {
    pub id: PoolId,
    pub domain: DomainId,
    pub asset_x: AssetId,
    pub asset_y: AssetId,
    /// Units of `asset_y` per unit of `asset_x`.
    pub price: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pool {
    ConstantProduct(ConstantProductPool),
    StylizedMidpoint(StylizedMidpointPool),
}

impl Pool {
    pub fn id(&self) -> &PoolId {
        match self {
            Pool::ConstantProduct(p) => &p.id,
            Pool::StylizedMidpoint(p) => &p.id,
        }
    }

    pub fn domain(&self) -> &DomainId {
        match self {
            Pool::ConstantProduct(p) => &p.domain,
            Pool::StylizedMidpoint(p) => &p.domain,
        }
    }

    pub fn pair(&self) -> (&AssetId, &AssetId) {
        match self {
            Pool::ConstantProduct(p) => (&p.asset_x, &p.asset_y),
            Pool::StylizedMidpoint(p) => (&p.asset_x, &p.asset_y),
        }
    }

    /// Quoted price of x in y: marginal for constant product pools.
    pub fn price(&self) -> Amount {
        match self {
            Pool::ConstantProduct(p) => p.marginal_price(),
            Pool::StylizedMidpoint(p) => p.price,
        }
    }

    pub fn as_constant_product(&self) -> Result<&ConstantProductPool> {
        match self {
            Pool::ConstantProduct(p) => Ok(p),
            _ => Err(Error::WrongPoolKind { pool: self.id().clone(), expected: "constant_product" }),
        }
    }

    pub fn as_stylized(&self) -> Result<&StylizedMidpointPool> {
        match self {
            Pool::StylizedMidpoint(p) => Ok(p),
            _ => Err(Error::WrongPoolKind { pool: self.id().clone(), expected: "stylized_midpoint" }),
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            Pool::ConstantProduct(_) => "constant_product",
            Pool::StylizedMidpoint(_) => "stylized_midpoint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Buy,
    Sell,
}

/// One named transaction inside a stylized arbitrage, e.g. the ETH-buy
/// on the cheaper pool.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArbLeg {
    pub id: ActionId,
    pub pool: PoolId,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StylizedArbSpec {
    pub id: ActionId,
    pub pool_a: PoolId,
    pub pool_b: PoolId,
    pub declared_profit: Amount,
    pub profit_asset: AssetId,
    pub profit_domain: DomainId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub legs: Vec<ArbLeg>,
}

/// Transfer route between two domains; `q` in arrives as `q * rate - flat_fee`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSpec {
    pub id: ActionId,
    pub from_domain: DomainId,
    pub to_domain: DomainId,
    pub from_asset: AssetId,
    pub to_asset: AssetId,
    pub rate: Rate,
    pub flat_fee: Amount,
}

/// Effect wrapped by a pending mempool transaction, executed on behalf of
/// its sender.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TxEffect {
    /// Move a stylized pool's quoted price, e.g. a large buy.
    PricePush { pool: PoolId, price: Amount },
    Swap { pool: PoolId, direction: Direction, amount_in: Amount },
    Transfer { asset: AssetId, to: PlayerId, amount: Amount },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendingTx {
    pub id: ActionId,
    pub domain: DomainId,
    pub sender: PlayerId,
    pub effect: TxEffect,
}

/// Output of a constant-product swap, rounded down.
///
/// `out = R_out * a * g / (R_in * 10000 + a * g)` with `g = 10000 - fee_bps`,
/// which equals `R_out - R_in * R_out / (R_in + a * (1 - fee))` exactly
/// before rounding.
pub fn quote_swap(pool: &ConstantProductPool, dir: Direction, amount_in: Amount) -> Result<Amount> {
    if !amount_in.is_positive() {
        return Err(Error::ZeroAmount);
    }
    let (r_in, r_out) = pool.reserves(dir);
    let g = I256::new((BPS_DENOMINATOR - pool.fee_bps.min(BPS_DENOMINATOR)) as i128);
    let bps = I256::new(BPS_DENOMINATOR as i128);
    let a = amount_in.raw();
    let fast = (|| {
        let num = r_out.raw().checked_mul(a)?.checked_mul(g)?;
        let den = r_in.raw().checked_mul(bps)?.checked_add(a.checked_mul(g)?)?;
        Some((num, den))
    })();
    let out = match fast {
        Some((num, den)) if den > 0 => num / den,
        _ => {
            let num = big(r_out.raw()) * big(a) * big(g);
            let den = big(r_in.raw()) * big(bps) + big(a) * big(g);
            if den <= num_bigint::BigInt::from(0) {
                return Err(Error::InsufficientLiquidity(pool.id.clone()));
            }
            big_quotient(&num, &den, Rounding::Floor)
        }
    };
    let out = Amount::from_raw(out);
    if !out.is_positive() || out >= r_out {
        return Err(Error::InsufficientLiquidity(pool.id.clone()));
    }
    Ok(out)
}

/// Swap on behalf of any account (the player or a pending tx sender).
fn swap_in_place(
    state: &mut WorldState,
    account: &PlayerId,
    pool_id: &PoolId,
    dir: Direction,
    amount_in: Amount,
) -> Result<()> {
    if !amount_in.is_positive() {
        return Err(Error::ZeroAmount);
    }
    let pool = state.pool(pool_id)?.as_constant_product()?.clone();
    let (asset_in, asset_out) = pool.assets(dir);
    let (next, out) = pool.after_swap(dir, amount_in)?;
    state.debit(&pool.domain, account, asset_in, amount_in)?;
    state.credit(&pool.domain, account, asset_out, out);
    *state.pool_mut(pool_id)? = Pool::ConstantProduct(next);
    Ok(())
}

pub fn apply_swap(
    state: &WorldState,
    player: &PlayerId,
    pool: &PoolId,
    dir: Direction,
    amount_in: Amount,
) -> Result<WorldState> {
    let mut next = state.clone();
    swap_in_place(&mut next, player, pool, dir, amount_in)?;
    Ok(next)
}

/// Move both stylized pools to their midpoint and credit the declared profit.
pub fn apply_stylized_arb(state: &WorldState, player: &PlayerId, spec: &StylizedArbSpec) -> Result<WorldState> {
    let a = state.pool(&spec.pool_a)?.as_stylized()?;
    let b = state.pool(&spec.pool_b)?.as_stylized()?;
    if (&a.asset_x, &a.asset_y) != (&b.asset_x, &b.asset_y) {
        return Err(Error::MismatchedPools(a.id.clone(), b.id.clone()));
    }
    if a.price == b.price {
        return Err(Error::PricesEqual { pool_a: a.id.clone(), pool_b: b.id.clone() });
    }
    let mid = a.price.midpoint(b.price);
    let mut next = state.clone();
    for id in [&spec.pool_a, &spec.pool_b] {
        if let Pool::StylizedMidpoint(p) = next.pool_mut(id)? {
            p.price = mid;
        }
    }
    next.credit(&spec.profit_domain, player, &spec.profit_asset, spec.declared_profit);
    Ok(next)
}

pub fn apply_pending_tx(state: &WorldState, tx: &PendingTx) -> Result<WorldState> {
    if state.is_consumed(&tx.id) {
        return Err(Error::AlreadyConsumed(tx.id.clone()));
    }
    let mut next = state.clone();
    match &tx.effect {
        TxEffect::PricePush { pool, price } => {
            if !price.is_positive() {
                return Err(Error::ZeroAmount);
            }
            let p = next.pool_mut(pool)?;
            match p {
                Pool::StylizedMidpoint(s) => s.price = *price,
                other => {
                    return Err(Error::WrongPoolKind { pool: other.id().clone(), expected: "stylized_midpoint" })
                }
            }
        }
        TxEffect::Swap { pool, direction, amount_in } => {
            swap_in_place(&mut next, &tx.sender, pool, *direction, *amount_in)?;
        }
        TxEffect::Transfer { asset, to, amount } => {
            if !amount.is_positive() {
                return Err(Error::ZeroAmount);
            }
            next.debit(&tx.domain, &tx.sender, asset, *amount)?;
            next.credit(&tx.domain, to, asset, *amount);
        }
    }
    next.mark_consumed(&tx.id);
    Ok(next)
}

/// Amount that arrives on the destination for `quantity` sent.
pub fn bridge_output(bridge: &BridgeSpec, quantity: Amount) -> Result<Amount> {
    let converted = quantity.mul_rate(&bridge.rate);
    if converted < bridge.flat_fee {
        return Err(Error::FeeExceedsOutput { bridge: bridge.id.clone() });
    }
    Ok(converted - bridge.flat_fee)
}

pub fn apply_bridge(state: &WorldState, player: &PlayerId, bridge: &BridgeSpec, quantity: Amount) -> Result<WorldState> {
    if !quantity.is_positive() {
        return Err(Error::ZeroAmount);
    }
    let mut next = state.clone();
    next.debit(&bridge.from_domain, player, &bridge.from_asset, quantity)?;
    let arrived = bridge_output(bridge, quantity)?;
    next.credit(&bridge.to_domain, player, &bridge.to_asset, arrived);
    Ok(next)
}
