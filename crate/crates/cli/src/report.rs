//! Report assembly. Every report is built as a JSON value first; the text
//! form is rendered from the same data so both carry the same numbers.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use xdmev_core::{ActionSequence, Amount, CollusionReport, MevResult, PlayerId, World, WorldState};

/// One witness step with the player's balance changes it caused.
pub fn trace(world: &World, player: &PlayerId, witness: &ActionSequence) -> Vec<Value> {
    let mut state = world.initial.clone();
    let mut out = Vec::new();
    for step in witness.steps() {
        let Some(action) = world.space.get(player, &step.action) else { break };
        let Ok(next) = action.apply(&state, player, step.amount) else { break };
        let deltas = balance_deltas(&state, &next, player);
        let mut entry = json!({
            "action": step.action.as_str(),
            "kind": action.tag().as_str(),
            "domains": action.domains.iter().map(|d| d.as_str()).collect::<Vec<_>>(),
            "deltas": deltas,
        });
        if let Some(a) = step.amount {
            entry["amount"] = json!(a.to_string());
        }
        out.push(entry);
        state = next;
    }
    out
}

fn balance_deltas(before: &WorldState, after: &WorldState, player: &PlayerId) -> Vec<Value> {
    let mut keys: BTreeMap<(String, String), ()> = BTreeMap::new();
    for (k, _) in before.balances().chain(after.balances()) {
        if &k.player == player {
            keys.insert((k.domain.to_string(), k.asset.to_string()), ());
        }
    }
    let mut out = Vec::new();
    for (d, a) in keys.keys() {
        let dom = d.parse().expect("state ids are valid");
        let asset = a.parse().expect("state ids are valid");
        let delta = after.balance(&dom, player, &asset) - before.balance(&dom, player, &asset);
        if !delta.is_zero() {
            out.push(json!({"domain": d, "asset": a, "delta": delta.to_string()}));
        }
    }
    out
}

pub fn mev_result(world: &World, player: &PlayerId, r: &MevResult) -> Value {
    json!({
        "value": r.value.to_string(),
        "method": match r.method { xdmev_core::Method::Exhaustive => "exhaustive", xdmev_core::Method::Oracle => "oracle" },
        "explored": r.explored,
        "breakdown": r.breakdown.iter().map(|b| json!({
            "domain": b.domain.as_str(),
            "asset": b.asset.as_str(),
            "ev": b.ev.to_string(),
            "priced": b.priced.to_string(),
        })).collect::<Vec<_>>(),
        "witness": trace(world, player, &r.witness),
    })
}

pub fn collusion(world: &World, player: &PlayerId, r: &CollusionReport) -> Value {
    json!({
        "alpha": r.alpha.to_string(),
        "solo_values": r.solo_values.iter().map(|(d, v)| (d.to_string(), json!(v.to_string()))).collect::<serde_json::Map<_, _>>(),
        "joint_value": r.joint_value.to_string(),
        "margin": r.margin.to_string(),
        "verdict": r.verdict.as_str(),
        "breakeven_alpha": r.breakeven.to_string(),
        "joint_witness": trace(world, player, &r.joint.witness),
        "solo_witness": r.solo.iter().map(|(d, m)| (d.to_string(), json!(trace(world, player, &m.witness)))).collect::<serde_json::Map<_, _>>(),
    })
}

pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn s(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn list(v: &Value) -> String {
    v.as_array().map(|a| a.iter().map(s).collect::<Vec<_>>().join(",")).unwrap_or_default()
}

fn witness_lines(out: &mut String, steps: &Value, indent: &str) {
    let steps = steps.as_array().cloned().unwrap_or_default();
    if steps.is_empty() {
        out.push_str(&format!("{indent}(empty sequence)\n"));
    }
    for (k, st) in steps.iter().enumerate() {
        let amount = st.get("amount").map(|a| format!(" amount={}", s(a))).unwrap_or_default();
        let deltas: Vec<String> = st["deltas"]
            .as_array()
            .into_iter()
            .flatten()
            .map(|d| {
                let delta = s(&d["delta"]);
                let sign = if delta.starts_with('-') { "" } else { "+" };
                format!("{}:{} {sign}{delta}", s(&d["domain"]), s(&d["asset"]))
            })
            .collect();
        out.push_str(&format!(
            "{indent}{}. {} [{}] {}{amount}{}\n",
            k + 1,
            s(&st["action"]),
            list(&st["domains"]),
            s(&st["kind"]),
            if deltas.is_empty() { String::new() } else { format!("  {}", deltas.join(", ")) }
        ));
    }
}

fn query_lines(out: &mut String, q: &Value) {
    let map = q.as_object().cloned().unwrap_or_default();
    for (k, v) in map {
        let shown = if v.is_array() { list(&v) } else { s(&v) };
        out.push_str(&format!("{}: {shown}\n", k.replace('_', " ")));
    }
}

pub fn mev_text(report: &Value) -> String {
    let mut out = String::new();
    query_lines(&mut out, &report["query"]);
    let r = &report["result"];
    out.push_str(&format!("mev: {} {}\n", s(&r["value"]), s(&report["query"]["base_asset"])));
    out.push_str(&format!("explored: {} candidate sequences ({})\n", s(&r["explored"]), s(&r["method"])));
    out.push_str("witness:\n");
    witness_lines(&mut out, &r["witness"], "  ");
    out.push_str("by value domain:\n");
    for b in r["breakdown"].as_array().into_iter().flatten() {
        out.push_str(&format!(
            "  {} ev {} {} -> {}\n",
            s(&b["domain"]),
            s(&b["ev"]),
            s(&b["asset"]),
            s(&b["priced"])
        ));
    }
    out
}

pub fn collusion_text(report: &Value) -> String {
    let mut out = String::new();
    query_lines(&mut out, &report["query"]);
    let r = &report["result"];
    let unit = s(&report["query"]["base_asset"]);
    for (d, v) in r["solo_values"].as_object().into_iter().flatten() {
        out.push_str(&format!("solo {d}: {} {unit}\n", s(v)));
    }
    out.push_str(&format!("joint: {} {unit}\n", s(&r["joint_value"])));
    out.push_str(&format!("margin: {} {unit}\n", s(&r["margin"])));
    out.push_str(&format!("verdict: {}\n", s(&r["verdict"])));
    out.push_str(&format!("breakeven alpha: {} {unit}\n", s(&r["breakeven_alpha"])));
    out.push_str("joint witness:\n");
    witness_lines(&mut out, &r["joint_witness"], "  ");
    for (d, w) in r["solo_witness"].as_object().into_iter().flatten() {
        out.push_str(&format!("solo witness {d}:\n"));
        witness_lines(&mut out, w, "  ");
    }
    out
}

pub fn oracle_text(report: &Value) -> String {
    let mut out = String::new();
    query_lines(&mut out, &report["query"]);
    for side in ["search", "oracle"] {
        let r = &report[side];
        out.push_str(&format!("{side}: {} (explored {})\n", s(&r["value"]), s(&r["explored"])));
        witness_lines(&mut out, &r["witness"], "  ");
    }
    out.push_str(&format!("difference: {}\n", s(&report["difference"])));
    out.push_str(&format!("tolerance: {}\n", s(&report["tolerance"])));
    out.push_str(&format!("agree: {}\n", s(&report["agree"])));
    if let Some(n) = report.get("note") {
        out.push_str(&format!("note: {}\n", s(n)));
    }
    out
}

pub fn amount(v: Amount) -> Value {
    json!(v.to_string())
}
