//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Failing criteria are reported
//! but only turn into a nonzero exit code with `ACCEPTANCE_STRICT=1`, so that
//! the rest of the workspace tests still run.

use hierex::estimators::{chao92_f0, direct_gain, good_turing_p1, k_exact, shen_gain, EstimatorConfig, GainMethod};
use hierex::harness::eval::summarize;
use hierex::harness::inspect::populations;
use hierex::harness::{
    eval_estimators, exact_gain, mean_std, monte_carlo_gain, EvalConfig, GeneratorSpec, PopularityLaw, TreeShape,
};
use hierex::policy::{sigma, DEFAULT_CONFIGS};
use hierex::{
    run_policy, simulate, CostModel, CrowdOracle, Domain, EntityId, FrequencyStats, NodeId, Policy, PolicySettings,
    QueryConfig, Run,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

const FIXTURE_SEED: u64 = 7;
const SEEDS: u64 = 10;
const GS: [Policy; 3] = [Policy::GSChao, Policy::GSHwang, Policy::GSNewR];
const BASELINES: [Policy; 3] = [Policy::Rand, Policy::RandL, Policy::BFS];

// Pinned tolerances.
const DOMINANCE_RATIO: f64 = 1.3;
const EXACT_GAP_RATIO: f64 = 0.5;
const ROOT_ROUNDS_RATIO: f64 = 1.5;
const K_MONOTONE_SLACK: f64 = 1e-12;
const FORMULA_REL_TOL: f64 = 1e-4;
const ORACLE_SE: f64 = 4.0;

struct Verdict {
    pass: bool,
    detail: Vec<String>,
}

/// Per-policy outcomes of `SEEDS` runs at one budget.
struct Cell {
    unique: Vec<f64>,
    runs: Vec<Run>,
}

impl Cell {
    fn mean(&self) -> f64 {
        mean_std(&self.unique).0
    }

    fn stderr(&self) -> f64 {
        mean_std(&self.unique).1 / (self.unique.len() as f64).sqrt()
    }
}

struct Experiments {
    domain: Domain,
    settings: PolicySettings,
    cells: HashMap<(Policy, u64), Cell>,
}

impl Experiments {
    fn new() -> Self {
        let domain = Domain::from_file(&GeneratorSpec::standard(FIXTURE_SEED).generate().unwrap()).unwrap();
        let settings = PolicySettings::standard(&domain);
        Self { domain, settings, cells: HashMap::new() }
    }

    fn cell(&mut self, policy: Policy, budget: u64) -> &Cell {
        if !self.cells.contains_key(&(policy, budget)) {
            let runs: Vec<Run> = (0..SEEDS)
                .map(|seed| simulate(policy, &self.domain, budget as f64, seed, &self.settings).unwrap())
                .collect();
            let unique = runs.iter().map(|r| r.transcript.unique() as f64).collect();
            self.cells.insert((policy, budget), Cell { unique, runs });
        }
        &self.cells[&(policy, budget)]
    }
}

fn baseline_dominance(x: &mut Experiments) -> Verdict {
    let budget = 50;
    let mut detail = Vec::new();
    for p in Policy::ALL {
        let c = x.cell(p, budget);
        detail.push(format!("{p:<8} mean unique {:>7.1} (se {:.1})", c.mean(), c.stderr()));
    }
    let best_baseline = BASELINES.iter().map(|&p| x.cell(p, budget).mean()).fold(0.0, f64::max);
    let root = x.cell(Policy::RootChao, budget).mean();
    let mut pass = true;
    for p in GS {
        let m = x.cell(p, budget).mean();
        let (vs_base, vs_root) = (m / best_baseline.max(1e-9), m / root.max(1e-9));
        let ok = vs_base >= DOMINANCE_RATIO && vs_root >= DOMINANCE_RATIO;
        pass &= ok;
        detail.push(format!(
            "{p}: {vs_base:.2}x best baseline, {vs_root:.2}x RootChao (need {DOMINANCE_RATIO}x both){}",
            if ok { "" } else { "  <- short" }
        ));
    }
    Verdict { pass, detail }
}

fn near_optimal_gap(x: &mut Experiments) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for budget in [10, 50] {
        let (em, ese) = {
            let e = x.cell(Policy::GSExact, budget);
            (e.mean(), e.stderr())
        };
        detail.push(format!("budget {budget}: GSExact {em:.1} (se {ese:.1})"));
        for p in GS {
            let (m, se) = {
                let c = x.cell(p, budget);
                (c.mean(), c.stderr())
            };
            let pooled = (se * se + ese * ese).sqrt();
            let ratio_ok = m >= EXACT_GAP_RATIO * em;
            let order_ok = em >= m - pooled;
            pass &= ratio_ok && order_ok;
            detail.push(format!(
                "  {p:<8} {m:>7.1}  ratio {:.2} (>= {EXACT_GAP_RATIO}: {ratio_ok})  GSExact >= it within {pooled:.1}: {order_ok}",
                m / em.max(1e-9)
            ));
        }
    }
    Verdict { pass, detail }
}

fn rootchao_saturation(x: &mut Experiments) -> Verdict {
    let budget = 80;
    let root: Vec<_> = x.cell(Policy::RootChao, budget).runs.iter().map(|r| r.transcript.clone()).collect();
    let newr: Vec<_> = x.cell(Policy::GSNewR, budget).runs.iter().map(|r| r.transcript.clone()).collect();
    let mut detail = Vec::new();
    let mut verdict_ratio = 0.0;
    for fraction in [0.25, 0.5, 0.75, 1.0] {
        let (mut r_rounds, mut n_rounds) = (Vec::new(), Vec::new());
        for (a, b) in root.iter().zip(&newr) {
            let target = ((a.unique().min(b.unique()) as f64) * fraction).ceil() as u64;
            r_rounds.push(a.rounds_to_reach(target).unwrap() as f64);
            n_rounds.push(b.rounds_to_reach(target).unwrap() as f64);
        }
        let (rm, nm) = (mean_std(&r_rounds).0, mean_std(&n_rounds).0);
        let ratio = rm / nm.max(1e-9);
        detail.push(format!(
            "target {:>3.0}% of common reach: RootChao {rm:.1} rounds, GSNewR {nm:.1} rounds, ratio {ratio:.2}",
            fraction * 100.0
        ));
        if fraction == 1.0 {
            verdict_ratio = ratio;
        }
    }
    detail.push(format!("judged at the full common reach: need >= {ROOT_ROUNDS_RATIO}"));
    Verdict { pass: verdict_ratio >= ROOT_ROUNDS_RATIO, detail }
}

fn estimator_bias(x: &mut Experiments) -> Verdict {
    let cfg = EvalConfig { trials: 200, seed: 11, ..EvalConfig::default() };
    let report = eval_estimators(&x.domain, &cfg).unwrap();
    let summary = summarize(&report.rows);
    let mut table: BTreeMap<(u32, u32), BTreeMap<GainMethod, f64>> = BTreeMap::new();
    for s in &summary {
        table.entry((s.k, s.l)).or_default().insert(s.method, s.mean_abs_rel_error);
    }
    let mut detail = vec![format!(
        "{} trials, n/S in [{}, {}]; mean |rel err| Chao92Shen / HwangShen / NewRegr",
        cfg.trials, cfg.sample_ratio.0, cfg.sample_ratio.1
    )];
    let mut pass = true;
    for ((k, l), m) in &table {
        let (c, h, n) = (m[&GainMethod::Chao92Shen], m[&GainMethod::HwangShen], m[&GainMethod::NewRegr]);
        let judged = matches!((k, l), (10, 5) | (20, 5));
        let ok = n <= c && n <= h;
        if judged {
            pass &= ok;
        }
        detail.push(format!(
            "({k},{l}): {c:.3} / {h:.3} / {n:.3}{}",
            if judged { format!("  judged: {}", if ok { "ok" } else { "NewRegr not lowest" }) } else { String::new() }
        ));
    }
    Verdict { pass, detail }
}

fn k_monotonicity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut violations, mut checks, mut worst) = (0usize, 0usize, 0.0f64);
    for _ in 0..1000 {
        let s = rng.gen_range(1..=10);
        let raw: Vec<f64> = (0..s).map(|_| rng.gen_range(1e-3..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        for n in 1..=20u32 {
            let base = k_exact(&p, n);
            for m in 1..=20u32 {
                let drop = base - k_exact(&p, n + m);
                checks += 1;
                worst = worst.max(drop);
                if drop > K_MONOTONE_SLACK {
                    violations += 1;
                }
            }
        }
    }
    Verdict {
        pass: violations == 0,
        detail: vec![format!("{checks} checks, {violations} violations, largest decrease {worst:.2e}")],
    }
}

fn formula_suite() -> Verdict {
    let cost = CostModel::standard(&DEFAULT_CONFIGS, 3).unwrap();
    let chao = chao92_f0::<f64>(&FrequencyStats::from_counts([1, 1, 2]), &EstimatorConfig::default()).unwrap().value;
    let p1 = good_turing_p1::<f64>(10, 4, 2);
    let cases: [(&str, f64, f64); 7] = [
        ("shen_gain(10, 0.8, 5)", shen_gain(10.0f64, 0.8, 5).value, 10.0 * (1.0 - 0.98f64.powi(5))),
        ("p1(n=10, f1=4, f2=2)", p1, 0.1),
        ("sigma(0.01, 1, t=2)", sigma(0.01f64, 1, 2), (0.01 * 3.0f64.ln()).sqrt()),
        ("cost(5, 0, s=0)", cost.cost(QueryConfig::new(5, 0), 0), 0.25),
        ("cost(10, 5, s=1)", cost.cost(QueryConfig::new(10, 5), 1), 0.5 + 2.5 + 1.0 / 3.0),
        (
            "direct gain (n=10, m=5, f1=4, K=K'=1)",
            direct_gain(1.0f64, 1.0, 4, 10, p1, 5),
            (15.0 / 16.0) * (0.4 - 4.0 * 0.9f64.powi(5) / 15.0),
        ),
        ("chao92 f0 (n=4, D=3, f1=2, f2=1)", chao, 3.0),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, got, want) in cases {
        let rel = (got - want).abs() / want.abs();
        let ok = rel <= FORMULA_REL_TOL;
        pass &= ok;
        detail.push(format!("{name}: {got:.6} vs {want:.6} (rel {rel:.1e})"));
    }
    let (mut mono_checks, mut mono_fail) = (0, 0);
    for s in 0..=3 {
        for k in 1..=20u32 {
            for l in 0..=10u32 {
                let c = cost.cost(QueryConfig::new(k, l), s);
                if k < 20 {
                    mono_checks += 1;
                    mono_fail += (cost.cost(QueryConfig::new(k + 1, l), s) <= c) as usize;
                }
                if l < 10 {
                    mono_checks += 1;
                    mono_fail += (cost.cost(QueryConfig::new(k, l + 1), s) <= c) as usize;
                }
            }
        }
    }
    pass &= mono_fail == 0;
    detail.push(format!(
        "cost monotonicity over k in 1..=20, l in 0..=10, s in 0..=3: {mono_checks} checks, {mono_fail} failures"
    ));
    Verdict { pass, detail }
}

fn mini_domain(rng: &mut ChaCha8Rng) -> Domain {
    let attributes = loop {
        let dims = rng.gen_range(1..=3);
        let shapes: Vec<TreeShape> =
            (0..dims).map(|_| TreeShape { branching: rng.gen_range(1..=3), depth: rng.gen_range(1..=2) }).collect();
        let nodes: u64 =
            shapes.iter().map(|s| (0..=s.depth).map(|d| (s.branching as u64).pow(d)).sum::<u64>()).product();
        if nodes <= 200 {
            break shapes;
        }
    };
    let spec = GeneratorSpec {
        attributes,
        entities: rng.gen_range(3..=80),
        populated_fraction: rng.gen_range(0.2..=1.0),
        popularity: if rng.gen_bool(0.5) {
            PopularityLaw::Uniform
        } else {
            PopularityLaw::Zipf { s: rng.gen_range(0.5..1.5) }
        },
        seed: rng.gen(),
    };
    Domain::from_file(&spec.generate().unwrap()).unwrap()
}

fn corpus() -> Vec<Domain> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..50).map(|_| mini_domain(&mut rng)).collect()
}

/// Violated invariant names for one run.
fn run_violations(policy: Policy, domain: &Domain, budget: f64, seed: u64) -> Vec<&'static str> {
    let settings = PolicySettings::standard(domain);
    let go = || {
        let mut oracle = CrowdOracle::new(domain, seed);
        run_policy(policy, domain, &mut oracle, budget, seed, &settings).unwrap()
    };
    let run = go();
    let mut bad = Vec::new();
    if run.transcript.cost() > budget + 1e-9 || run.transcript.rows.iter().any(|r| r.cumulative_cost > budget + 1e-9) {
        bad.push("budget safety");
    }
    let mut negative: Vec<NodeId> = Vec::new();
    let mut valid = true;
    for row in &run.transcript.rows {
        let pop: BTreeSet<EntityId> = domain.population(&row.node).members.iter().copied().collect();
        let ex: BTreeSet<EntityId> = row.exclude.iter().copied().collect();
        let got: BTreeSet<EntityId> = row.returned.iter().copied().collect();
        valid &= got.len() == row.returned.len()
            && got.is_disjoint(&ex)
            && got.is_subset(&pop)
            && got.len() == pop.difference(&ex).count().min(row.config.k as usize);
        if row.returned.is_empty() {
            negative.push(row.node.clone());
        }
    }
    if !valid {
        bad.push("response validity");
    }
    let mut histo = true;
    let mut dead = true;
    for v in domain.poset.all_nodes() {
        let stats = run.store.stats(&v);
        histo &= stats.histogram().map(|(i, f)| i as u64 * f).sum::<u64>() == stats.n
            && stats.histogram().map(|(_, f)| f).sum::<u64>() == stats.distinct;
        dead &= run.store.is_dead(domain, &v) == negative.iter().any(|d| domain.poset.generalizes(d, &v));
    }
    if !histo {
        bad.push("histogram identity");
    }
    if !dead {
        bad.push("dead propagation");
    }
    let csv = |r: &Run| {
        let mut out = Vec::new();
        r.transcript.write_csv(domain, &mut out).unwrap();
        out
    };
    if csv(&run) != csv(&go()) {
        bad.push("determinism");
    }
    bad
}

fn invariant_suite(corpus: &[Domain]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut runs = 0;
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    let mut nodes = 0u128;
    for domain in corpus {
        nodes = nodes.max(domain.poset.node_count());
        let budget = rng.gen_range(2.0..15.0);
        let seed = rng.gen();
        for p in Policy::ALL {
            runs += 1;
            for v in run_violations(p, domain, budget, seed) {
                *tally.entry(v).or_default() += 1;
            }
        }
    }
    let mut detail = vec![format!("{} domains (largest {nodes} nodes), {runs} runs", corpus.len())];
    for name in ["budget safety", "response validity", "histogram identity", "dead propagation", "determinism"] {
        detail.push(format!("{name}: {} violating runs", tally.get(name).copied().unwrap_or(0)));
    }
    Verdict { pass: tally.is_empty(), detail }
}

fn oracle_cross_check(corpus: &[Domain]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut checks, mut misses, mut worst) = (0, 0, 0.0f64);
    for domain in corpus {
        let mut seen: BTreeSet<Vec<EntityId>> = BTreeSet::new();
        for (_, members) in populations(domain) {
            if members.len() > 12 || members.len() < 2 || !seen.insert(members.clone()) {
                continue;
            }
            let k = rng.gen_range(1..members.len().min(5) as u32 + 1).min(members.len() as u32 - 1).max(1);
            let mut shuffled = members.clone();
            shuffled.shuffle(&mut rng);
            let known: BTreeSet<EntityId> = shuffled.iter().take(rng.gen_range(0..members.len())).copied().collect();
            let pool: Vec<(f64, bool)> =
                members.iter().map(|&id| (domain.catalog.get(id).popularity, !known.contains(&id))).collect();
            let exact = exact_gain(&pool, k);
            let mc = monte_carlo_gain(&pool, k, 4000, rng.gen());
            checks += 1;
            let diff = (mc.mean - exact).abs();
            let ok = if mc.stderr == 0.0 { diff < 1e-9 } else { diff <= ORACLE_SE * mc.stderr };
            if mc.stderr > 0.0 {
                worst = worst.max(diff / mc.stderr);
            }
            misses += (!ok) as usize;
        }
    }
    Verdict {
        pass: misses == 0 && checks > 0,
        detail: vec![format!(
            "{checks} distinct populations of size 2..=12, {misses} outside {ORACLE_SE} standard errors (largest {worst:.2} se)"
        )],
    }
}

fn main() {
    let started = Instant::now();
    let mut x = Experiments::new();
    let corpus = corpus();
    let mut failures = 0;
    let mut report = |id: u32, name: &str, v: Verdict, t: Instant| {
        println!("{} {id}. {name} ({:.1}s)", if v.pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
        for line in v.detail {
            println!("       {line}");
        }
        failures += (!v.pass) as usize;
    };
    let t = Instant::now();
    report(1, "baseline dominance", baseline_dominance(&mut x), t);
    let t = Instant::now();
    report(2, "near-optimal gap", near_optimal_gap(&mut x), t);
    let t = Instant::now();
    report(3, "RootChao saturation", rootchao_saturation(&mut x), t);
    let t = Instant::now();
    report(4, "estimator bias ordering", estimator_bias(&mut x), t);
    let t = Instant::now();
    report(5, "K monotonicity", k_monotonicity(), t);
    let t = Instant::now();
    report(6, "formula unit suite", formula_suite(), t);
    let t = Instant::now();
    report(7, "invariant suite", invariant_suite(&corpus), t);
    let t = Instant::now();
    report(8, "oracle cross-check", oracle_cross_check(&corpus), t);
    println!("acceptance: {} of 8 criteria passed in {:.1}s", 8 - failures, started.elapsed().as_secs_f64());
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
