//! Python bindings. Amounts cross the boundary as decimal strings so no
//! precision is lost; wrap them in `decimal.Decimal` on the Python side.

use std::collections::BTreeSet;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use xdmev_core::{
    classify_collusion, optimal_cp_arbitrage, Amount, ConstantProductPool, DomainId, EngineConfig, MevQuery,
    MevResult, PlayerId,
};

create_exception!(xdmev, XdmevError, PyException);

fn err(e: xdmev_core::Error) -> PyErr {
    XdmevError::new_err(e.to_string())
}

fn amount(s: &str) -> PyResult<Amount> {
    s.trim().parse().map_err(err)
}

fn config(threads: Option<usize>) -> PyResult<EngineConfig> {
    let cfg = EngineConfig::from_env().map_err(err)?;
    Ok(match threads {
        Some(n) => cfg.with_threads(n),
        None => cfg,
    })
}

/// One step of a witness: action id and, for continuous actions, the amount.
#[pyclass(frozen, get_all, skip_from_py_object, module = "xdmev")]
#[derive(Clone)]
struct Step {
    action: String,
    amount: Option<String>,
}

#[pymethods]
impl Step {
    fn __repr__(&self) -> String {
        match &self.amount {
            Some(a) => format!("Step({}, {a})", self.action),
            None => format!("Step({})", self.action),
        }
    }
}

#[pyclass(frozen, get_all, module = "xdmev")]
struct Mev {
    value: String,
    witness: Vec<Step>,
    explored: u64,
    method: String,
}

#[pymethods]
impl Mev {
    fn __repr__(&self) -> String {
        let ids: Vec<&str> = self.witness.iter().map(|s| s.action.as_str()).collect();
        format!("Mev(value={}, witness=[{}])", self.value, ids.join(", "))
    }
}

impl From<&MevResult> for Mev {
    fn from(r: &MevResult) -> Self {
        Mev {
            value: r.value.to_string(),
            witness: r
                .witness
                .steps()
                .iter()
                .map(|s| Step { action: s.action.to_string(), amount: s.amount.map(|a| a.to_string()) })
                .collect(),
            explored: r.explored,
            method: match r.method {
                xdmev_core::Method::Exhaustive => "exhaustive".into(),
                xdmev_core::Method::Oracle => "oracle".into(),
            },
        }
    }
}

#[pyclass(frozen, get_all, module = "xdmev")]
struct Collusion {
    alpha: String,
    solo_values: Vec<(String, String)>,
    joint_value: String,
    margin: String,
    verdict: String,
    breakeven: String,
}

#[pymethods]
impl Collusion {
    fn __repr__(&self) -> String {
        format!("Collusion(verdict={}, margin={}, breakeven={})", self.verdict, self.margin, self.breakeven)
    }
}

/// A loaded, validated scenario.
#[pyclass(frozen, module = "xdmev")]
struct World {
    inner: xdmev_core::World,
}

impl World {
    fn player(&self, name: Option<&str>) -> PyResult<PlayerId> {
        match name {
            Some(p) => self.inner.player(p).map_err(err),
            None => self.inner.default_player().map_err(err),
        }
    }

    fn domain_list(&self, names: Option<Vec<String>>) -> PyResult<Vec<DomainId>> {
        match names {
            None => Ok(self.inner.domain_ids()),
            Some(v) => v.iter().map(|s| self.inner.domain(s).map_err(err)).collect(),
        }
    }

    fn query(
        &self,
        player: Option<&str>,
        action_domains: Option<Vec<String>>,
        value_domains: Option<Vec<String>>,
        max_len: Option<usize>,
    ) -> PyResult<MevQuery> {
        let q = MevQuery::new(
            &self.inner,
            self.player(player)?,
            self.domain_list(action_domains)?,
            self.domain_list(value_domains)?,
        );
        Ok(match max_len {
            Some(n) => q.with_max_len(n),
            None => q,
        })
    }
}

#[pymethods]
impl World {
    /// Load a scenario file path or the name of a bundled scenario.
    #[staticmethod]
    fn load(source: &str) -> PyResult<Self> {
        Ok(World { inner: xdmev_core::World::load(source).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let s = xdmev_core::load_scenario(text).map_err(err)?;
        Ok(World { inner: xdmev_core::World::new(s).map_err(err)? })
    }

    fn to_json(&self) -> String {
        xdmev_core::to_canonical_json(&self.inner.scenario)
    }

    #[getter]
    fn domains(&self) -> Vec<String> {
        self.inner.domain_ids().iter().map(|d| d.to_string()).collect()
    }

    #[getter]
    fn players(&self) -> Vec<String> {
        self.inner.scenario.players.iter().map(|p| p.id.to_string()).collect()
    }

    #[getter]
    fn default_player(&self) -> PyResult<String> {
        Ok(self.inner.default_player().map_err(err)?.to_string())
    }

    #[pyo3(signature = (player=None, action_domains=None, value_domains=None, max_len=None, threads=None))]
    fn mev(
        &self,
        py: Python<'_>,
        player: Option<&str>,
        action_domains: Option<Vec<String>>,
        value_domains: Option<Vec<String>>,
        max_len: Option<usize>,
        threads: Option<usize>,
    ) -> PyResult<Mev> {
        let q = self.query(player, action_domains, value_domains, max_len)?;
        let cfg = config(threads)?;
        let r = py.detach(|| self.inner.engine_with(cfg).mev(&q, &self.inner.initial)).map_err(err)?;
        Ok(Mev::from(&r))
    }

    #[pyo3(signature = (grid_points=101, player=None, action_domains=None, value_domains=None, max_len=None))]
    fn mev_oracle(
        &self,
        py: Python<'_>,
        grid_points: usize,
        player: Option<&str>,
        action_domains: Option<Vec<String>>,
        value_domains: Option<Vec<String>>,
        max_len: Option<usize>,
    ) -> PyResult<Mev> {
        let q = self.query(player, action_domains, value_domains, max_len)?;
        let cfg = config(None)?;
        let r = py
            .detach(|| self.inner.engine_with(cfg).mev_oracle(&q, &self.inner.initial, grid_points))
            .map_err(err)?;
        Ok(Mev::from(&r))
    }

    /// Solo and joint values of a coalition of domains at collusion cost `alpha`.
    #[pyo3(signature = (alpha="0", domains=None, player=None, max_len=None))]
    fn collusion(
        &self,
        py: Python<'_>,
        alpha: &str,
        domains: Option<Vec<String>>,
        player: Option<&str>,
        max_len: Option<usize>,
    ) -> PyResult<Collusion> {
        let player = self.player(player)?;
        let members: BTreeSet<DomainId> = self.domain_list(domains)?.into_iter().collect();
        let alpha = amount(alpha)?;
        let max_len = max_len.unwrap_or(self.inner.scenario.defaults.max_sequence_length);
        let cfg = config(None)?;
        let r = py.detach(|| classify_collusion(&self.inner, cfg, &player, &members, alpha, max_len)).map_err(err)?;
        Ok(Collusion {
            alpha: r.alpha.to_string(),
            solo_values: r.solo_values.iter().map(|(d, v)| (d.to_string(), v.to_string())).collect(),
            joint_value: r.joint_value.to_string(),
            margin: r.margin.to_string(),
            verdict: r.verdict.as_str().into(),
            breakeven: r.breakeven.to_string(),
        })
    }

    fn __repr__(&self) -> String {
        format!("World(domains={:?})", self.domains())
    }
}

fn pool(id: &str, reserves: (&str, &str), fee_bps: u32) -> PyResult<ConstantProductPool> {
    let parse_id = |s: &str| s.parse().map_err(err);
    Ok(ConstantProductPool {
        id: parse_id(id)?,
        domain: "d".parse().map_err(err)?,
        asset_x: "X".parse().map_err(err)?,
        asset_y: "Y".parse().map_err(err)?,
        reserve_x: amount(reserves.0)?,
        reserve_y: amount(reserves.1)?,
        fee_bps,
    })
}

/// Optimal round trip between two constant-product pools of one pair,
/// given as `(reserve_x, reserve_y)`; profit is in the y asset.
#[pyfunction]
#[pyo3(signature = (pool_a, pool_b, fee_bps=0))]
fn cp_arbitrage<'py>(
    py: Python<'py>,
    pool_a: (String, String),
    pool_b: (String, String),
    fee_bps: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let a = pool("a", (&pool_a.0, &pool_a.1), fee_bps)?;
    let b = pool("b", (&pool_b.0, &pool_b.1), fee_bps)?;
    let r = optimal_cp_arbitrage(&a, &b).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("buy_pool", r.buy_pool.as_str())?;
    out.set_item("amount_in", r.amount_in.to_string())?;
    out.set_item("amount_mid", r.amount_mid.to_string())?;
    out.set_item("amount_out", r.amount_out.to_string())?;
    out.set_item("profit", r.profit.to_string())?;
    Ok(out)
}

#[pyfunction]
fn bundled_scenarios() -> Vec<&'static str> {
    xdmev_core::scenario::bundled_names().collect()
}

#[pymodule]
fn xdmev(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<World>()?;
    m.add_class::<Mev>()?;
    m.add_class::<Step>()?;
    m.add_class::<Collusion>()?;
    m.add_function(wrap_pyfunction!(cp_arbitrage, m)?)?;
    m.add_function(wrap_pyfunction!(bundled_scenarios, m)?)?;
    m.add("XdmevError", m.py().get_type::<XdmevError>())?;
    Ok(())
}
