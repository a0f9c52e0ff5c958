//! Command-line entry point: world generation, estimator training, one-shot
//! planning, object-search evaluation, single trials, and batch benchmarks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use findplan::bench::{
    aligned_table, object_search_eval, results_jsonl, run_batch, search_eval_csv, sign_test_less,
    summary_csv,
};
use findplan::estimator::Estimator;
use findplan::executive::{run_trial, Strategy};
use findplan::lios::CostModel;
use findplan::tasks::{build_scenario, ScenarioName};
use findplan::world::{default_config, generate_world, WorldConfig, WorldModel};
use findplan_pddl::{
    ground, parse_domain, parse_problem, solve, validate, SearchConfig, SolveFailure,
};

#[derive(Parser)]
#[command(
    name = "findplan",
    version,
    about = "Household task planning with expected-cost object search"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate seeded worlds and write them as text files.
    GenWorlds {
        /// World generator config (TOML); the built-in catalog when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        count: u64,
        /// Base seed; world i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for world_<seed>.txt files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the placement estimator on a directory of world files.
    Train {
        #[arg(long)]
        worlds: PathBuf,
        /// Laplace smoothing constant.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse, ground, and solve a PDDL task; print the plan and its cost.
    Plan {
        domain: PathBuf,
        problem: PathBuf,
        /// Heuristic weight; 1.0 is plain A*.
        #[arg(long, default_value_t = 2.0)]
        weight: f64,
        /// Search budget in seconds.
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Paired Greedy-vs-LIOS object search over fresh worlds; write CSV rows.
    SearchEval {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trained estimator file; uniform probabilities when omitted.
        #[arg(long)]
        est: Option<PathBuf>,
        /// Ignore the estimator and use uniform probabilities (ablation).
        #[arg(long)]
        uniform: bool,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scenario trial on the world generated from --seed.
    RunTrial {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: ScenarioName,
        #[arg(long)]
        strategy: Strategy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        est: Option<PathBuf>,
    },
    /// Batch trials over scenarios x strategies x seeds; write logs and a table.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        est: Option<PathBuf>,
        /// Comma-separated scenario names, or "all".
        #[arg(long, default_value = "all")]
        scenarios: String,
        /// Comma-separated strategy names, or "all".
        #[arg(long, default_value = "all")]
        strategies: String,
        /// Trial count per (scenario, strategy) cell when --seeds is absent.
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Base seed for the trial seed range when --seeds is absent.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// File with one trial seed per line; overrides --trials/--seed.
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Worker threads for trial-level parallelism.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory for results.jsonl, summary.csv, table.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<WorldConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(WorldConfig::from_toml(&text)?)
        }
        None => Ok(default_config()),
    }
}

fn load_estimator(path: &Option<PathBuf>, uniform: bool) -> Result<Estimator> {
    if uniform {
        return Ok(Estimator::uniform());
    }
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(Estimator::from_text(&text)?)
        }
        None => Ok(Estimator::uniform()),
    }
}

fn load_worlds_dir(dir: &Path) -> Result<Vec<WorldModel>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .txt world files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            WorldModel::from_text(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}

fn parse_scenarios(arg: &str) -> Result<Vec<ScenarioName>> {
    if arg == "all" {
        return Ok(ScenarioName::ALL.to_vec());
    }
    arg.split(',')
        .map(|s| s.trim().parse::<ScenarioName>().map_err(anyhow::Error::msg))
        .collect()
}

fn parse_strategies(arg: &str) -> Result<Vec<Strategy>> {
    if arg == "all" {
        return Ok(Strategy::ALL.to_vec());
    }
    arg.split(',')
        .map(|s| s.trim().parse::<Strategy>().map_err(anyhow::Error::msg))
        .collect()
}

fn read_seed_file(path: &Path) -> Result<Vec<u64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut seeds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        seeds.push(
            line.parse::<u64>()
                .with_context(|| format!("{}:{}: bad seed '{line}'", path.display(), i + 1))?,
        );
    }
    if seeds.is_empty() {
        bail!("no seeds in {}", path.display());
    }
    Ok(seeds)
}

fn cmd_plan(domain: &Path, problem: &Path, weight: f64, timeout: Option<f64>) -> Result<ExitCode> {
    let dom_text =
        fs::read_to_string(domain).with_context(|| format!("reading {}", domain.display()))?;
    let prob_text =
        fs::read_to_string(problem).with_context(|| format!("reading {}", problem.display()))?;
    let dom = parse_domain(&dom_text)?;
    let prob = parse_problem(&prob_text, &dom)?;
    let task = ground(&dom, &prob)?;
    let cfg = SearchConfig {
        weight,
        timeout: timeout.map(Duration::from_secs_f64),
    };
    match solve(&task, &cfg) {
        Ok(plan) => {
            let checked = validate(&task, &plan.steps)?;
            for name in plan.action_names(&task) {
                println!("{name}");
            }
            println!("cost: {checked}");
            Ok(ExitCode::SUCCESS)
        }
        Err(SolveFailure::Unsolvable) => {
            println!("unsolvable");
            Ok(ExitCode::from(3))
        }
        Err(SolveFailure::Timeout) => {
            println!("timeout");
            Ok(ExitCode::from(4))
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::GenWorlds {
            config,
            count,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            fs::create_dir_all(&out)?;
            for i in 0..count {
                let s = seed.wrapping_add(i);
                let world = generate_world(s, &cfg)?;
                let path = out.join(format!("world_{s:08}.txt"));
                fs::write(&path, world.to_text())?;
            }
            println!("wrote {count} worlds to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Train { worlds, alpha, out } => {
            let corpus = load_worlds_dir(&worlds)?;
            let est = Estimator::train(&corpus, alpha)?;
            fs::write(&out, est.to_text())?;
            println!("trained on {} worlds -> {}", corpus.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Plan {
            domain,
            problem,
            weight,
            timeout,
        } => cmd_plan(&domain, &problem, weight, timeout),
        Cmd::SearchEval {
            config,
            est,
            uniform,
            trials,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let est = load_estimator(&est, uniform)?;
            let costs = CostModel::default();
            let rows = object_search_eval(&cfg, &est, &costs, trials, seed)?;
            if let Some(path) = out {
                fs::write(&path, search_eval_csv(&rows))?;
            }
            let greedy: Vec<f64> = rows.iter().map(|r| r.greedy_cost).collect();
            let lios: Vec<f64> = rows.iter().map(|r| r.lios_cost).collect();
            let n = rows.len() as f64;
            let mg = greedy.iter().sum::<f64>() / n;
            let ml = lios.iter().sum::<f64>() / n;
            let t = sign_test_less(&lios, &greedy);
            println!(
                "trials: {} mean greedy: {mg:.3} mean lios: {ml:.3} improvement: {:.1}% wins: {} p: {:.4}",
                rows.len(),
                (mg - ml) / mg * 100.0,
                t.wins,
                t.p_value
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::RunTrial {
            config,
            scenario,
            strategy,
            seed,
            est,
        } => {
            let cfg = load_config(&config)?;
            let est = load_estimator(&est, false)?;
            let costs = CostModel::default();
            let world = generate_world(seed, &cfg)?;
            let spec = build_scenario(scenario, &world, seed)?;
            let record = run_trial(&world, &spec, strategy, &est, &costs, seed)?;
            println!("{}", serde_json::to_string(&record)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bench {
            config,
            est,
            scenarios,
            strategies,
            trials,
            seed,
            seeds,
            jobs,
            out,
        } => {
            let cfg = load_config(&config)?;
            let est = load_estimator(&est, false)?;
            let costs = CostModel::default();
            let scenarios = parse_scenarios(&scenarios)?;
            let strategies = parse_strategies(&strategies)?;
            let seed_list = match seeds {
                Some(path) => read_seed_file(&path)?,
                None => (0..trials).map(|i| seed.wrapping_add(i)).collect(),
            };
            let results = run_batch(
                &cfg,
                &est,
                &costs,
                &scenarios,
                &strategies,
                &seed_list,
                jobs.max(1),
            )?;
            let table = aligned_table(&results.summary);
            print!("{table}");
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("results.jsonl"), results_jsonl(&results.records))?;
                fs::write(dir.join("summary.csv"), summary_csv(&results.summary))?;
                fs::write(dir.join("table.txt"), &table)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
