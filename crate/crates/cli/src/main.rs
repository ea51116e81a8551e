//! `hierex` command line: generate domains, run policies, sweep budgets,
//! evaluate the gain estimators and inspect populations.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hierex::harness::eval::{summarize, write_rows};
use hierex::harness::run::write_sweep;
use hierex::harness::{
    eval_estimators, inspect, run_experiment, sweep, EvalConfig, GeneratorSpec, PopularityLaw, RunConfig, TreeShape,
};
use hierex::policy::parse_configs;
use hierex::{load_domain, CostModel, Domain, Elimination, Policy, PolicySettings};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hierex", version, about = "Budgeted entity extraction over hierarchical domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic domain file.
    Gen(GenArgs),
    /// Run one policy at one budget over several seeds.
    Run(RunArgs),
    /// Run a grid of policies, budgets and seeds.
    Sweep(SweepArgs),
    /// Compare estimator predictions with the true expected gain.
    EvalEstimators(EvalArgs),
    /// Population sizes and Jaccard overlaps of the largest nodes.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Per-attribute `BRANCHINGxDEPTH`, comma separated. Defaults to the standard fixture.
    #[arg(long)]
    attributes: Option<String>,
    #[arg(long)]
    entities: Option<u32>,
    /// Share of leaves that receive entities.
    #[arg(long)]
    fraction: Option<f64>,
    /// Zipf exponent; ignored with `--uniform`.
    #[arg(long)]
    zipf: Option<f64>,
    /// Popularities uniform in (0, 10].
    #[arg(long, conflicts_with = "zipf")]
    uniform: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SettingsArgs {
    /// Query configurations as `k:l,k:l,...`.
    #[arg(long)]
    configs: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Bootstrap resamples per estimate.
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Bad-action rule: `gain`, `gain-per-cost` or `off`.
    #[arg(long)]
    elimination: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long)]
    policy: String,
    #[arg(long, allow_negative_numbers = true)]
    budget: f64,
    /// Seeds as `a,b,c` or a half-open range `a..b`.
    #[arg(long, default_value = "0..10")]
    seeds: String,
    #[command(flatten)]
    settings: SettingsArgs,
    /// Directory for `summary.json` and one `transcript_<seed>.csv` per seed; the summary goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    domain: PathBuf,
    /// Comma-separated policy names.
    #[arg(long, default_value = "GSChao,GSHwang,GSNewR,Rand,RandL,BFS,RootChao")]
    policies: String,
    /// Comma-separated ascending budgets.
    #[arg(long)]
    budgets: String,
    #[arg(long, default_value = "0..10")]
    seeds: String,
    #[command(flatten)]
    settings: SettingsArgs,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long)]
    configs: Option<String>,
    /// Restrict to these nodes (`attr=value;...`), repeatable.
    #[arg(long = "node")]
    nodes: Vec<String>,
    #[arg(long, default_value_t = 300)]
    min_population: usize,
    /// Monte Carlo responses per true-gain evaluation.
    #[arg(long, default_value_t = 2000)]
    draws: usize,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-trial CSV; the per-configuration summary always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe))
}

/// The error chain, skipping causes whose text the previous message already carries.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::EvalEstimators(a) => eval(a),
        Command::Inspect(a) => cmd_inspect(a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let mut spec = GeneratorSpec::standard(a.seed);
    if let Some(text) = &a.attributes {
        spec.attributes = parse_shapes(text)?;
    }
    if let Some(n) = a.entities {
        spec.entities = n;
    }
    if let Some(f) = a.fraction {
        spec.populated_fraction = f;
    }
    if a.uniform {
        spec.popularity = PopularityLaw::Uniform;
    } else if let Some(s) = a.zipf {
        spec.popularity = PopularityLaw::Zipf { s };
    }
    let file = spec.generate()?;
    let json = serde_json::to_string_pretty(&file)?;
    emit(a.out.as_deref(), |w| Ok(writeln!(w, "{json}")?))
}

fn run(a: RunArgs) -> Result<()> {
    let domain = open_domain(&a.domain)?;
    let cfg = RunConfig {
        policy: parse_policy(&a.policy)?,
        budget: a.budget,
        seeds: parse_seeds(&a.seeds)?,
        settings: settings(&domain, &a.settings)?,
    };
    let (transcripts, summary) = run_experiment(&domain, &cfg)?;
    let json = serde_json::to_string_pretty(&summary)?;
    match &a.out {
        None => emit(None, |w| Ok(writeln!(w, "{json}")?))?,
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (seed, t) in &transcripts {
                let path = dir.join(format!("transcript_{seed}.csv"));
                emit(Some(&path), |w| Ok(t.write_csv(&domain, w)?))?;
            }
            emit(Some(&dir.join("summary.json")), |w| Ok(writeln!(w, "{json}")?))?;
        }
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let domain = open_domain(&a.domain)?;
    let policies = a.policies.split(',').map(parse_policy).collect::<Result<Vec<_>>>()?;
    let budgets = parse_list::<f64>(&a.budgets, "budget")?;
    let seeds = parse_seeds(&a.seeds)?;
    let rows = sweep(&domain, &policies, &budgets, &seeds, &settings(&domain, &a.settings)?)?;
    emit(a.out.as_deref(), |w| Ok(write_sweep(&rows, w)?))
}

fn eval(a: EvalArgs) -> Result<()> {
    let domain = open_domain(&a.domain)?;
    let mut cfg = EvalConfig {
        trials: a.trials,
        min_population: a.min_population,
        draws: a.draws,
        seed: a.seed,
        ..EvalConfig::default()
    };
    if let Some(text) = &a.configs {
        cfg.configs = parse_configs(text)?;
    }
    if let Some(b) = a.bootstrap {
        cfg.estimator.bootstrap = b;
    }
    if !a.nodes.is_empty() {
        let nodes = a.nodes.iter().map(|n| domain.poset.parse_node(n)).collect::<Result<Vec<_>, _>>()?;
        cfg.nodes = Some(nodes);
    }
    let report = eval_estimators(&domain, &cfg)?;
    for note in &report.skipped {
        eprintln!("skipped: {note}");
    }
    if let Some(path) = &a.out {
        emit(Some(path), |w| Ok(write_rows(&report.rows, w)?))?;
    }
    let json = serde_json::to_string_pretty(&summarize(&report.rows))?;
    emit(None, |w| Ok(writeln!(w, "{json}")?))
}

fn cmd_inspect(a: InspectArgs) -> Result<()> {
    let domain = open_domain(&a.domain)?;
    let json = serde_json::to_string_pretty(&inspect(&domain, a.top))?;
    emit(a.out.as_deref(), |w| Ok(writeln!(w, "{json}")?))
}

fn open_domain(path: &Path) -> Result<Domain> {
    load_domain(path).with_context(|| format!("loading domain {}", path.display()))
}

fn settings(domain: &Domain, a: &SettingsArgs) -> Result<PolicySettings> {
    let mut s = PolicySettings::standard(domain);
    if let Some(text) = &a.configs {
        s.configs = parse_configs(text)?;
    }
    let std_cost = s.cost;
    s.cost = CostModel::for_configs(
        a.alpha.unwrap_or(std_cost.alpha),
        a.beta.unwrap_or(std_cost.beta),
        a.gamma.unwrap_or(std_cost.gamma),
        &s.configs,
        domain.poset.dims(),
    )?;
    if let Some(b) = a.bootstrap {
        s.estimator.bootstrap = b;
    }
    if let Some(e) = &a.elimination {
        s.elimination = e.parse::<Elimination>()?;
    }
    s.validate()?;
    Ok(s)
}

fn parse_policy(s: &str) -> Result<Policy> {
    Ok(s.parse()?)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',').map(|t| t.trim().parse::<T>().ok().with_context(|| format!("bad {what} {t:?}"))).collect()
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let seeds = match text.split_once("..") {
        Some((lo, hi)) => {
            let lo: u64 = lo.trim().parse().with_context(|| format!("bad seed range {text:?}"))?;
            let hi: u64 = hi.trim().parse().with_context(|| format!("bad seed range {text:?}"))?;
            (lo..hi).collect()
        }
        None => parse_list(text, "seed")?,
    };
    if seeds.is_empty() {
        bail!("seed list {text:?} is empty");
    }
    Ok(seeds)
}

fn parse_shapes(text: &str) -> Result<Vec<TreeShape>> {
    text.split(',')
        .map(|t| {
            let (b, d) = t.trim().split_once('x').with_context(|| format!("bad attribute shape {t:?}, want BxD"))?;
            Ok(TreeShape {
                branching: b.parse().with_context(|| format!("bad branching in {t:?}"))?,
                depth: d.parse().with_context(|| format!("bad depth in {t:?}"))?,
            })
        })
        .collect()
}

/// Writes through `body` to `path`, or to stdout.
fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}
