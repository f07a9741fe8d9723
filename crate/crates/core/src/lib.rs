//! Cross-domain maximal extractable value: world model, venues, action
//! spaces, the search engine and collusion analysis.

pub mod action;
pub mod amount;
pub mod collusion;
pub mod engine;
pub mod error;
pub mod ids;
pub mod model;
pub mod scenario;
pub mod testkit;
pub mod venues;

pub use action::{Action, ActionKind, ActionKindTag, ActionSequence, ActionSpace, AmountSpec, Step, Violation};
pub use amount::{Amount, Rate};
pub use collusion::{alpha_breakeven, classify_collusion, CollusionReport, Verdict};
pub use engine::{optimal_cp_arbitrage, CpArbitrage, DomainValue, Engine, EngineConfig, Method, MevQuery, MevResult};
pub use error::{Error, Result, ValidationIssue};
pub use ids::{ActionId, AssetId, DomainId, PlayerId, PoolId};
pub use model::{balance_of, BalanceKey, PriceMatrix, Registry, WorldState};
pub use scenario::{initial_state, load_scenario, load_scenario_source, to_canonical_json, Scenario, World};
pub use venues::{BridgeSpec, ConstantProductPool, Direction, PendingTx, Pool, StylizedArbSpec, StylizedMidpointPool, TxEffect};
