use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use c4bandit::harness::{expand_grid, parse_override_value};
use c4bandit::io::{run_file_name, summarize, write_csv, write_summary};
use c4bandit::{
    run_single, theoretical_bound, BaselineKnowledge, BoundParams, ExperimentConfig, PolicyKind, RunSummary,
};

#[derive(Parser)]
#[command(name = "c4bandit", version, about = "Conservative contextual combinatorial cascading bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded (policy x parameter) grid and write one CSV per run.
    Run(RunArgs),
    /// Evaluate the regret bound for a configuration.
    Bound(BoundArgs),
    /// Aggregate a directory of run files into one row per grid point.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat JSON config; missing keys take their defaults.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// `key=v1,v2,...`; repeat the flag for a product grid.
    #[arg(long, value_name = "KEY=VALUES")]
    grid: Vec<String>,
    /// Comma list (`1,2,5`) or half-open range (`0..20`).
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory; defaults to `output_path` from the config, then `runs`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<u64>,
    /// T = 40000 with stale lower bounds.
    #[arg(long)]
    full_scale: bool,
    /// Override any config key, e.g. `--set u0=0.5`.
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    pstar: f64,
    #[arg(long)]
    dl: f64,
    #[arg(long)]
    dh: f64,
    /// Defaults to `unknown` for the unknown-baseline policies.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    horizon: Option<u64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Mode {
    Known,
    Unknown,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn read_config(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if !value.is_object() {
        bail!("{}: config must be a JSON object", path.display());
    }
    Ok(value)
}

fn split_assignment(raw: &str) -> Result<(&str, &str)> {
    raw.split_once('=')
        .filter(|(k, _)| !k.is_empty())
        .with_context(|| format!("expected KEY=VALUE, got `{raw}`"))
}

fn parse_seeds(raw: &str) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = raw.split_once("..") {
        let lo: u64 = lo.trim().parse().context("seed range start")?;
        let hi: u64 = hi.trim().parse().context("seed range end")?;
        if lo >= hi {
            bail!("empty seed range {raw}");
        }
        return Ok((lo..hi).collect());
    }
    raw.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed `{s}`")))
        .collect()
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut base = read_config(&args.config)?;
    let map: &mut Map<String, Value> = base.as_object_mut().expect("checked above");
    if args.full_scale {
        let preset = ExperimentConfig::default().full_scale();
        map.insert("horizon".into(), json!(preset.horizon));
        map.insert("refresh_mode".into(), serde_json::to_value(preset.refresh_mode)?);
    }
    for raw in &args.set {
        let (k, v) = split_assignment(raw)?;
        map.insert(k.to_string(), parse_override_value(v));
    }
    if let Some(p) = args.policy {
        map.insert("policy".into(), serde_json::to_value(p)?);
    }
    if let Some(h) = args.horizon {
        map.insert("horizon".into(), json!(h));
    }
    if let Some(s) = &args.seeds {
        map.insert("seeds".into(), json!(parse_seeds(s)?));
    }

    let grid = args
        .grid
        .iter()
        .map(|raw| {
            let (k, vs) = split_assignment(raw)?;
            Ok((k.to_string(), vs.split(',').map(parse_override_value).collect()))
        })
        .collect::<Result<Vec<(String, Vec<Value>)>>>()?;
    let points = expand_grid(&base, &grid)?;

    let out_dir = args
        .out
        .or_else(|| points[0].1.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let jobs: Vec<(&str, &ExperimentConfig, u64)> = points
        .iter()
        .flat_map(|(label, cfg)| {
            let mut seeds = cfg.seeds.clone();
            seeds.sort_unstable();
            seeds.dedup();
            seeds.into_iter().map(move |s| (label.as_str(), cfg, s))
        })
        .collect();
    eprintln!("{} runs over {} grid points -> {}", jobs.len(), points.len(), out_dir.display());

    // Each worker writes its own file and keeps only the summary.
    let mut done: Vec<(String, RunSummary)> = jobs
        .par_iter()
        .map(|&(label, cfg, seed)| -> Result<(String, RunSummary)> {
            let outcome = run_single(cfg, seed).with_context(|| format!("{label} seed {seed}"))?;
            let path = out_dir.join(run_file_name(label, seed));
            write_csv(&outcome.records, &path)?;
            Ok((label.to_string(), outcome.summary))
        })
        .collect::<Result<_>>()?;
    done.sort_by(|a, b| c4bandit::io::compare_labels(&a.0, &b.0).then(a.1.seed.cmp(&b.1.seed)));

    for (label, s) in &done {
        println!(
            "{label} seed={} T={} cum_regret={:.4} n_ucb={} n_cons={} coverage={:.4} budget_violations={}",
            s.seed, s.horizon, s.cum_regret, s.n_ucb, s.n_cons, s.coverage, s.budget_violations
        );
    }
    Ok(())
}

fn cmd_bound(args: BoundArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_value(read_config(&args.config)?)?;
    if let Some(h) = args.horizon {
        config.horizon = h;
    }
    config.validate()?;
    let mode = match args.mode {
        Some(Mode::Known) => BaselineKnowledge::Known,
        Some(Mode::Unknown) => BaselineKnowledge::Unknown,
        None => match config.policy {
            PolicyKind::C4UnknownScalar | PolicyKind::C4UnknownLinear => BaselineKnowledge::Unknown,
            _ => BaselineKnowledge::Known,
        },
    };
    let params = BoundParams::from_config(&config, args.pstar, args.dl, args.dh)?;
    let value = theoretical_bound(&params, config.horizon, mode)?;
    let report = json!({
        "horizon": config.horizon,
        "mode": mode,
        "params": params,
        "regret_bound": value.regret_bound,
        "omega": value.omega,
        "d_t_bound": value.d_t_bound,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> Result<()> {
    let rows = summarize(&args.input)?;
    write_summary(&rows, &args.out)?;
    for r in &rows {
        println!(
            "{:<40} seeds={:<3} T={:<6} cum_regret={:.3} ± {:.3} n_ucb={:.1} n_cons={:.1}",
            r.label, r.n_seeds, r.horizon, r.mean_cum_regret, r.ci95_cum_regret, r.mean_n_ucb, r.mean_n_cons
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run(a) => cmd_run(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Summarize(a) => cmd_summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
