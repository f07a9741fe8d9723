//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use xdmev_core::scenario::bundled_names;
use xdmev_core::testkit::{checks, random_scenario, GenOptions};
use xdmev_core::{
    classify_collusion, alpha_breakeven, optimal_cp_arbitrage, ActionKind, Amount, DomainId, EngineConfig, MevQuery,
    PoolId, Rate, Verdict, World,
};

type Outcome = Result<String, String>;

const SEEDS: u64 = 200;

fn amt(s: &str) -> Amount {
    s.parse().expect("literal amounts parse")
}

fn cfg() -> EngineConfig {
    EngineConfig::default()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn solo_and_joint(name: &str) -> Result<(World, [Amount; 3], Vec<String>), String> {
    let w = World::bundled(name).map_err(|e| e.to_string())?;
    let p = w.default_player().map_err(|e| e.to_string())?;
    let ds = w.domain_ids();
    let e = w.engine_with(cfg());
    let run = |d: &[DomainId]| e.mev(&MevQuery::over(&w, p.clone(), d), &w.initial).map_err(|e| e.to_string());
    let i = run(&ds[..1])?.value;
    let j = run(&ds[1..2])?.value;
    let joint = run(&ds)?;
    let witness = joint.witness.ids().map(|a| a.to_string()).collect();
    Ok((w, [i, j, joint.value], witness))
}

fn within_time(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn two_pool() -> Outcome {
    let start = Instant::now();
    let (_, v, _) = solo_and_joint("section3_2amm")?;
    let took = within_time(start, Duration::from_secs(1))?;
    ensure(v == [amt("0"), amt("0"), amt("1")], || format!("values {v:?}"))?;
    Ok(format!("0 / 0 / 1 ETH in {took:?}"))
}

fn four_pool() -> Outcome {
    let start = Instant::now();
    let (w, v, witness) = solo_and_joint("appendix_b_4amm")?;
    let took = within_time(start, Duration::from_secs(5))?;
    ensure(v == [amt("1"), amt("0"), amt("1.6")], || format!("values {v:?}"))?;

    let s = &w.scenario;
    let mut declared: BTreeSet<String> = s.mempool.iter().map(|t| t.id.to_string()).collect();
    for arb in &s.stylized_arbs {
        declared.extend(arb.legs.iter().map(|l| l.id.to_string()));
    }
    let mut used = BTreeSet::new();
    for id in &witness {
        if let Some(arb) = s.stylized_arbs.iter().find(|a| a.id.as_str() == id) {
            used.extend(arb.legs.iter().map(|l| l.id.to_string()));
        } else {
            used.insert(id.clone());
        }
    }
    ensure(declared.len() == 7, || format!("{} declared transactions", declared.len()))?;
    ensure(used == declared, || format!("witness covers {used:?}, declared {declared:?}"))?;
    Ok(format!("1 / 0 / 1.6 ETH, witness {} covers all 7 transactions, {took:?}", witness.join(",")))
}

fn bridge_route() -> Outcome {
    let mut shown = Vec::new();
    for (name, want, tol) in [("figure1_bridge", "49860.96", "0.01"), ("figure1_bridge_discount", "21057.646", "1")] {
        let w = World::bundled(name).map_err(|e| e.to_string())?;
        let q = MevQuery::over(&w, w.default_player().map_err(|e| e.to_string())?, &w.domain_ids());
        let v = w.engine_with(cfg()).mev(&q, &w.initial).map_err(|e| e.to_string())?.value;
        ensure((v - amt(want)).abs() <= amt(tol), || format!("{name}: {v}, want {want} +- {tol}"))?;
        shown.push(format!("{name} {v}"));
    }
    Ok(shown.join(", "))
}

fn collusion() -> Outcome {
    let w = World::bundled("section3_2amm").map_err(|e| e.to_string())?;
    let p = w.default_player().map_err(|e| e.to_string())?;
    let ds: BTreeSet<DomainId> = w.domain_ids().into_iter().collect();
    let want = [("0", Verdict::Profitable), ("1", Verdict::Indifferent), ("2", Verdict::Unprofitable)];
    for (alpha, verdict) in want {
        let r = classify_collusion(&w, cfg(), &p, &ds, amt(alpha), 8).map_err(|e| e.to_string())?;
        ensure(r.verdict == verdict, || format!("alpha {alpha}: {}", r.verdict))?;
    }
    let b = alpha_breakeven(&w, cfg(), &p, &ds, 8).map_err(|e| e.to_string())?;
    ensure(b == amt("1"), || format!("breakeven {b}"))?;
    Ok("profitable / indifferent / unprofitable at alpha 0 / 1 / 2, breakeven 1 ETH".into())
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut checked = Vec::new();
    for name in bundled_names() {
        let w = World::bundled(name).map_err(|e| e.to_string())?;
        let p = w.default_player().map_err(|e| e.to_string())?;
        let q = MevQuery::over(&w, p.clone(), &w.domain_ids());
        let actions = w.space.actions(&p, &q.action_domains).map_err(|e| e.to_string())?;
        if actions.len() > 6 {
            continue;
        }
        let discrete = actions.iter().all(|a| !a.is_parametric());
        let grid = if name == "cp_arbitrage_small" { 100_001 } else { xdmev_core::engine::DEFAULT_GRID_POINTS };
        let e = w.engine_with(cfg());
        let s = e.mev(&q, &w.initial).map_err(|e| format!("{name}: {e}"))?;
        let o = e.mev_oracle(&q, &w.initial, grid).map_err(|e| format!("{name}: {e}"))?;
        if discrete {
            ensure(s.value == o.value && s.witness == o.witness, || {
                format!("{name}: search {} {:?}, oracle {} {:?}", s.value, s.witness, o.value, o.witness)
            })?;
        } else {
            ensure((s.value - o.value).abs() <= amt("0.000001"), || {
                format!("{name}: search {}, oracle {}", s.value, o.value)
            })?;
        }
        checked.push(name);
    }
    let took = within_time(start, Duration::from_secs(60))?;
    ensure(checked.len() >= 2, || format!("only {checked:?} have at most 6 actions"))?;
    Ok(format!("{} scenarios ({}) in {took:?}", checked.len(), checked.join(",")))
}

fn properties() -> Outcome {
    let one = EngineConfig::default().with_threads(1);
    let alphas: Vec<Amount> = ["0", "0.25", "0.5", "1", "2", "5"].iter().map(|s| amt(s)).collect();
    let mut two = GenOptions::default();
    two.min_domains = 2;
    let mut reciprocal_pairs = 0;
    for seed in 0..SEEDS {
        let w = World::new(random_scenario(seed, &GenOptions::default())).map_err(|e| e.to_string())?;
        ensure(w.domain_ids().len() <= 3 && w.scenario.actions().len() <= 5, || format!("seed {seed}: too large"))?;
        let tag = |name: &str, r: checks::Check| r.map_err(|e| format!("{name}, seed {seed}: {e}"));
        tag("non-negativity", checks::non_negative(&w, one))?;
        tag("monotonicity", checks::monotone(&w, one))?;
        tag("witness replay", checks::witness_replays(&w, one))?;

        let sep = World::new(random_scenario(seed, &GenOptions::separable())).map_err(|e| e.to_string())?;
        ensure(sep.scenario.bridges.is_empty(), || format!("seed {seed}: separable scenario has a bridge"))?;
        tag("separability", checks::separable(&sep, one))?;

        let multi = World::new(random_scenario(seed, &two)).map_err(|e| e.to_string())?;
        tag("verdict monotonicity", checks::verdict_monotone(&multi, one, &alphas))?;

        for decl in &w.scenario.prices {
            reciprocal_pairs += 1;
            let back = w.prices.rate(&decl.to, &decl.from).map_err(|e| e.to_string())?;
            ensure(decl.rate.is_reciprocal_of(&back), || format!("seed {seed}: {} vs {back}", decl.rate))?;
            let up = if decl.rate >= Rate::one() { decl.rate.clone() } else { back };
            for raw in [1i64, 7, 123_456_789, 10i64.pow(18) / 3, 9_999_999_999_999_999] {
                let x = Amount::from_raw_const(raw as i128 * 1_000_003);
                tag("reciprocity", checks::reciprocity(up, x))?;
            }
        }
    }
    Ok(format!(
        "{SEEDS} seeds x 5 properties, {reciprocal_pairs} price pairs exactly reciprocal and round trips within 1 ulp"
    ))
}

fn cp_checks() -> Outcome {
    let w = World::bundled("cp_arbitrage_small").map_err(|e| e.to_string())?;
    let pool = |id: &str| -> Result<xdmev_core::ConstantProductPool, String> {
        let id: PoolId = id.parse().map_err(|e| format!("{e:?}"))?;
        Ok(w.initial.pool(&id).map_err(|e| e.to_string())?.as_constant_product().map_err(|e| e.to_string())?.clone())
    };
    let (a, b) = (pool("pool_a")?, pool("pool_b")?);

    // Zero-fee swaps: the rounded output reserve sits within one unit of k / x'.
    let mut swaps = 0;
    for p in [&a, &b] {
        for dir in [xdmev_core::Direction::XToY, xdmev_core::Direction::YToX] {
            for s in ["0.000000000000000001", "0.3", "1", "17.25", "99.999999999999999999", "1234.5678"] {
                let Ok((next, _)) = p.after_swap(dir, amt(s)) else { continue };
                let (x0, y0) = (p.reserve_x.raw(), p.reserve_y.raw());
                let (x1, y1) = (next.reserve_x.raw(), next.reserve_y.raw());
                let slack = (x1 * y1 - x0 * y0).abs();
                let bound = match dir {
                    xdmev_core::Direction::XToY => x1,
                    xdmev_core::Direction::YToX => y1,
                };
                ensure(slack <= bound, || format!("{} {dir:?} {s}: |x'y' - xy| = {slack} > {bound}", p.id))?;
                swaps += 1;
            }
        }
    }

    let arb = optimal_cp_arbitrage(&a, &b).map_err(|e| e.to_string())?;
    let (buy, sell) = if arb.buy_first { (&a, &b) } else { (&b, &a) };
    let (buy2, mid) = buy.after_swap(xdmev_core::Direction::YToX, arb.amount_in).map_err(|e| e.to_string())?;
    let (sell2, _) = sell.after_swap(xdmev_core::Direction::XToY, mid).map_err(|e| e.to_string())?;
    let pa = buy2.reserve_y.to_f64() / buy2.reserve_x.to_f64();
    let pb = sell2.reserve_y.to_f64() / sell2.reserve_x.to_f64();
    let gap = (pa - pb).abs() / pa.max(pb);
    ensure(gap <= 1e-9, || format!("post-trade prices {pa} and {pb}, relative gap {gap:e}"))?;

    // Independent floating-point grid over the declared input range.
    let f = |dy: f64| -> f64 {
        let (x1, y1) = (buy.reserve_x.to_f64(), buy.reserve_y.to_f64());
        let (x2, y2) = (sell.reserve_x.to_f64(), sell.reserve_y.to_f64());
        let dx = x1 * dy / (y1 + dy);
        y2 * dx / (x2 + dx) - dy
    };
    let hi = 1000.0;
    let n = 1_000_000;
    let grid = (0..n).map(|k| f(hi * k as f64 / (n - 1) as f64)).fold(f64::MIN, f64::max);
    let got = arb.profit.to_f64();
    let rel = (got - grid).abs() / grid;
    ensure(rel <= 1e-9, || format!("closed form {got}, grid {grid}, relative {rel:e}"))?;

    let q = MevQuery::over(&w, w.default_player().map_err(|e| e.to_string())?, &w.domain_ids());
    let mev = w.engine_with(cfg()).mev(&q, &w.initial).map_err(|e| e.to_string())?.value.to_f64();
    let rel_mev = (mev - grid).abs() / grid;
    ensure(rel_mev <= 1e-9, || format!("search {mev}, grid {grid}, relative {rel_mev:e}"))?;

    let legs = w.space.actions(&q.player, &q.action_domains).map_err(|e| e.to_string())?;
    ensure(legs.iter().any(|a| matches!(a.kind, ActionKind::Swap { .. })), || "no swap actions".into())?;
    Ok(format!(
        "{swaps} zero-fee swaps within slack, price gap {gap:.1e}, profit {} vs grid {grid:.9} (rel {rel:.1e})",
        arb.profit
    ))
}

fn cli(threads: &str, args: &[&str]) -> Result<(Vec<u8>, Option<i32>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_xdmev"))
        .args(args)
        .env("XDMEV_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.stdout, out.status.code()))
}

fn determinism() -> Outcome {
    let mut runs = 0;
    for name in bundled_names() {
        let w = World::bundled(name).map_err(|e| e.to_string())?;
        let mut commands: Vec<Vec<&str>> = vec![
            vec!["validate", "--scenario", name, "--format", "json"],
            vec!["mev", "--scenario", name, "--format", "json"],
            vec!["oracle-check", "--scenario", name, "--format", "json"],
        ];
        if w.domain_ids().len() >= 2 {
            commands.push(vec!["collusion", "--scenario", name, "--format", "json"]);
        }
        for args in commands {
            let first = cli("1", &args)?;
            let again = cli("1", &args)?;
            let wide = cli("8", &args)?;
            ensure(!first.0.is_empty(), || format!("{args:?}: empty report, exit {:?}", first.1))?;
            ensure(first == again && first == wide, || format!("{args:?}: reports differ"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} command lines byte-identical across runs and thread counts"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("two-pool reproduction", two_pool),
        ("four-pool reproduction", four_pool),
        ("bridge arithmetic", bridge_route),
        ("collusion trichotomy", collusion),
        ("oracle equivalence", oracle_equivalence),
        ("property suite", properties),
        ("constant-product checks", cp_checks),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
