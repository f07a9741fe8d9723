mod report;

use std::collections::BTreeSet;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use xdmev_core::{
    classify_collusion, load_scenario_source, Amount, AssetId, DomainId, EngineConfig, Error, MevQuery, World,
};

const EXIT_INPUT: u8 = 2;
const EXIT_GUARD: u8 = 3;
const EXIT_DISAGREE: u8 = 4;

#[derive(Parser)]
#[command(name = "xdmev", version, about = "Cross-domain maximal extractable value on declarative scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximal extractable value for one query.
    Mev(MevArgs),
    /// Compare joint and solo values of a sequencer coalition.
    Collusion(CollusionArgs),
    /// Cross-check the search against the brute-force oracle.
    OracleCheck(OracleArgs),
    /// Load and validate a scenario.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    player: Option<String>,
    /// Domains whose sequencers' actions may be used (default: all).
    #[arg(long, value_delimiter = ',')]
    action_domains: Option<Vec<String>>,
    /// Domains whose balance changes are counted; the first is B_1 (default: all).
    #[arg(long, value_delimiter = ',')]
    value_domains: Option<Vec<String>>,
    /// Base for pricing, as domain:asset.
    #[arg(long)]
    base: Option<String>,
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Args)]
struct MevArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    query: QueryArgs,
}

#[derive(Args)]
struct CollusionArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    player: Option<String>,
    /// Coalition members (default: all domains).
    #[arg(long, value_delimiter = ',')]
    domains: Option<Vec<String>>,
    /// Collusion cost in the base asset (default: scenario value).
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, default_value_t = xdmev_core::engine::DEFAULT_GRID_POINTS)]
    grid_points: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
}

enum Failure {
    Core(Error),
    Disagree,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root_cause() {
        Error::ExplosionGuard { .. } => EXIT_GUARD,
        _ => EXIT_INPUT,
    }
}

fn domains(world: &World, names: &Option<Vec<String>>) -> Result<Vec<DomainId>, Error> {
    match names {
        None => Ok(world.domain_ids()),
        Some(v) => v.iter().map(|s| world.domain(s.trim())).collect(),
    }
}

fn build_query(world: &World, q: &QueryArgs) -> Result<MevQuery, Error> {
    let player = match &q.player {
        Some(p) => world.player(p)?,
        None => world.default_player()?,
    };
    let mut query = MevQuery::new(world, player, domains(world, &q.action_domains)?, domains(world, &q.value_domains)?);
    if let Some(b) = &q.base {
        let (d, a) = b
            .split_once(':')
            .ok_or_else(|| Error::InvalidQuery(format!("--base expects domain:asset, got {b:?}")))?;
        query = query.with_base(world.domain(d)?, world.asset(a)?);
    }
    if let Some(n) = q.max_len {
        query = query.with_max_len(n);
    }
    Ok(query)
}

fn query_echo(scenario: &str, q: &MevQuery) -> Value {
    json!({
        "scenario": scenario,
        "player": q.player.as_str(),
        "action_domains": q.action_domains.iter().map(|d| d.as_str()).collect::<Vec<_>>(),
        "value_domains": q.value_domains.iter().map(|d| d.as_str()).collect::<Vec<_>>(),
        "base_domain": q.base.0.as_str(),
        "base_asset": q.base.1.as_str(),
        "max_sequence_length": q.max_sequence_length,
    })
}

fn emit(format: Format, value: &Value, text: fn(&Value) -> String) {
    match format {
        Format::Json => print!("{}", report::to_json(value)),
        Format::Text => print!("{}", text(value)),
    }
}

fn cmd_mev(a: &MevArgs, cfg: EngineConfig) -> Result<(), Failure> {
    let world = World::load(&a.common.scenario)?;
    let q = build_query(&world, &a.query)?;
    let r = world.engine_with(cfg).mev(&q, &world.initial)?;
    let out = json!({
        "command": "mev",
        "query": query_echo(&a.common.scenario, &q),
        "result": report::mev_result(&world, &q.player, &r),
    });
    emit(a.common.format, &out, report::mev_text);
    Ok(())
}

fn cmd_collusion(a: &CollusionArgs, cfg: EngineConfig) -> Result<(), Failure> {
    let world = World::load(&a.common.scenario)?;
    let player = match &a.player {
        Some(p) => world.player(p)?,
        None => world.default_player()?,
    };
    let members: BTreeSet<DomainId> = domains(&world, &a.domains)?.into_iter().collect();
    let alpha = match &a.alpha {
        Some(s) => s.trim().parse::<Amount>()?,
        None => world.scenario.defaults.alpha,
    };
    let max_len = a.max_len.unwrap_or(world.scenario.defaults.max_sequence_length);
    let r = classify_collusion(&world, cfg, &player, &members, alpha, max_len)?;
    let (base_domain, base_asset): (DomainId, AssetId) = world.base();
    let out = json!({
        "command": "collusion",
        "query": {
            "scenario": a.common.scenario,
            "player": player.as_str(),
            "domains": members.iter().map(|d| d.as_str()).collect::<Vec<_>>(),
            "alpha": alpha.to_string(),
            "base_domain": base_domain.as_str(),
            "base_asset": base_asset.as_str(),
            "max_sequence_length": max_len,
        },
        "result": report::collusion(&world, &player, &r),
    });
    emit(a.common.format, &out, report::collusion_text);
    Ok(())
}

fn cmd_oracle(a: &OracleArgs, cfg: EngineConfig) -> Result<(), Failure> {
    let world = World::load(&a.common.scenario)?;
    let q = build_query(&world, &a.query)?;
    let engine = world.engine_with(cfg);
    let search = engine.mev(&q, &world.initial)?;
    let oracle = engine.mev_oracle(&q, &world.initial, a.grid_points)?;
    let discrete = world.space.actions(&q.player, &q.action_domains)?.iter().all(|x| !x.is_parametric());
    let tolerance: Amount = if discrete { Amount::ZERO } else { "0.000001".parse()? };
    let diff = search.value - oracle.value;
    let agree = if discrete {
        search.value == oracle.value && search.witness == oracle.witness
    } else {
        diff.abs() <= tolerance
    };
    let mut echo = query_echo(&a.common.scenario, &q);
    echo["grid_points"] = json!(a.grid_points);
    let mut out = json!({
        "command": "oracle-check",
        "query": echo,
        "search": report::mev_result(&world, &q.player, &search),
        "oracle": report::mev_result(&world, &q.player, &oracle),
        "discrete_only": discrete,
        "tolerance": report::amount(tolerance),
        "difference": report::amount(diff),
        "agree": agree,
    });
    if !agree && !discrete && diff.is_positive() {
        out["note"] = json!(format!(
            "oracle is below the search by {diff}; a {}-point grid is too coarse for the continuous optimum",
            a.grid_points
        ));
    }
    emit(a.common.format, &out, report::oracle_text);
    if agree {
        Ok(())
    } else {
        Err(Failure::Disagree)
    }
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), Failure> {
    let res = load_scenario_source(&a.common.scenario);
    let issues: Vec<Value> = match &res {
        Ok(_) => Vec::new(),
        Err(Error::Validation(v)) => v.iter().map(|i| json!({"field": i.field, "message": i.message})).collect(),
        Err(e) => vec![json!({"field": "", "message": e.to_string()})],
    };
    if let Format::Json = a.common.format {
        let mut out = json!({"command": "validate", "scenario": a.common.scenario, "valid": res.is_ok(), "issues": issues});
        if let Ok(s) = &res {
            out["domains"] = json!(s.domains.len());
            out["actions"] = json!(s.actions().len());
        }
        print!("{}", report::to_json(&out));
    }
    match res {
        Ok(s) => {
            if let Format::Text = a.common.format {
                println!("ok: {} ({} domains, {} actions)", a.common.scenario, s.domains.len(), s.actions().len());
            }
            Ok(())
        }
        Err(e) => Err(Failure::Core(e)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match EngineConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let res = match &cli.command {
        Command::Mev(a) => cmd_mev(a, cfg),
        Command::Collusion(a) => cmd_collusion(a, cfg),
        Command::OracleCheck(a) => cmd_oracle(a, cfg),
        Command::Validate(a) => cmd_validate(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Disagree) => {
            eprintln!("error: search and oracle disagree");
            ExitCode::from(EXIT_DISAGREE)
        }
        Err(Failure::Core(Error::Validation(issues))) => {
            for i in &issues {
                eprintln!("error: {i}");
            }
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
