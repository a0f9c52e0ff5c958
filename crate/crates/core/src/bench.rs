//! Benchmark harness: paired object-search evaluation, scenario batches, and
//! deterministic result writers.
//!
//! Pairing: each trial seed fixes the world and the scenario draws, so every
//! strategy sees identical conditions and per-seed differences are meaningful.
//! Result logs exclude wall-clock measurements, so a repeated run with the
//! same seeds is byte-identical.

use std::fmt::Write as _;

use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};
use thiserror::Error;

use crate::estimator::{Estimator, EstimatorError};
use crate::executive::{run_trial, BeliefState, ExecError, Strategy, TrialRecord};
use crate::lios::{greedy_find_policy, optimal_find_policy, CostModel, LiosError, K_MAX};
use crate::tasks::{build_scenario, ScenarioName, TaskError};
use crate::world::{generate_world, mix_seed, WorldConfig, WorldError, WorldModel};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Lios(#[from] LiosError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Generates `count` training worlds with seeds `base_seed..base_seed+count`.
pub fn gen_worlds(
    config: &WorldConfig,
    count: u64,
    base_seed: u64,
) -> Result<Vec<WorldModel>, WorldError> {
    (0..count)
        .map(|i| generate_world(base_seed.wrapping_add(i), config))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchEvalRow {
    pub seed: u64,
    pub object_type: String,
    pub greedy_cost: f64,
    pub lios_cost: f64,
}

/// Paired find-with-return trials: in a fresh world, search for one randomly
/// chosen object type from a random start container, exiting back at the
/// start. Both policies run against the same world from the same start.
pub fn object_search_eval(
    config: &WorldConfig,
    est: &Estimator,
    costs: &CostModel,
    n_trials: u64,
    base_seed: u64,
) -> Result<Vec<SearchEvalRow>, BenchError> {
    use rand::{Rng, SeedableRng};
    const EVAL_SALT: u64 = 0x0b5e;
    let mut rows = Vec::with_capacity(n_trials as usize);
    for i in 0..n_trials {
        let seed = mix_seed(base_seed, i);
        let world = generate_world(seed, config)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(seed, EVAL_SALT));
        let start = &world.containers[rng.gen_range(0..world.containers.len())];
        let types: Vec<&str> = world.object_types().into_iter().collect();
        let ty = types[rng.gen_range(0..types.len())];

        let mut greedy_belief = BeliefState::at(start.pose);
        let greedy_policy = greedy_find_policy(&world, &greedy_belief, ty, start.pose, costs)?;
        let greedy =
            crate::executive::execute_find(&world, &mut greedy_belief, &greedy_policy, costs, est)?;

        let mut lios_belief = BeliefState::at(start.pose);
        let lios_policy = optimal_find_policy(
            &world,
            &lios_belief,
            ty,
            start.pose,
            start.pose,
            est,
            costs,
            K_MAX,
        )?;
        let lios =
            crate::executive::execute_find(&world, &mut lios_belief, &lios_policy, costs, est)?;

        rows.push(SearchEvalRow {
            seed,
            object_type: ty.to_string(),
            greedy_cost: greedy.cost,
            lios_cost: lios.cost,
        });
    }
    Ok(rows)
}

pub fn search_eval_csv(rows: &[SearchEvalRow]) -> String {
    let mut out = String::from("seed,object_type,greedy_cost,lios_cost\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{:.3},{:.3}",
            r.seed, r.object_type, r.greedy_cost, r.lios_cost
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    pub p_value: f64,
}

/// One-sided paired sign test for H1: x tends to be smaller than y. Ties are
/// dropped; the p-value is the binomial tail P(wins' >= wins | fair coin).
pub fn sign_test_less(xs: &[f64], ys: &[f64]) -> SignTest {
    assert_eq!(xs.len(), ys.len(), "sign test needs paired samples");
    let mut wins = 0u64;
    let mut losses = 0u64;
    let mut ties = 0u64;
    for (x, y) in xs.iter().zip(ys) {
        if x < y {
            wins += 1;
        } else if x > y {
            losses += 1;
        } else {
            ties += 1;
        }
    }
    let n = wins + losses;
    let p_value = if n == 0 || wins == 0 {
        1.0
    } else {
        Binomial::new(0.5, n).unwrap().sf(wins - 1)
    };
    SignTest {
        wins,
        losses,
        ties,
        p_value,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub strategy: String,
    pub trials: u64,
    pub successes: u64,
    pub mean_cost: f64,
    pub mean_searched: f64,
    pub mean_planner_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResults {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Runs the full cross product scenarios x strategies x seeds. Records come
/// back in that order regardless of parallelism.
pub fn run_batch(
    config: &WorldConfig,
    est: &Estimator,
    costs: &CostModel,
    scenarios: &[ScenarioName],
    strategies: &[Strategy],
    seeds: &[u64],
    jobs: usize,
) -> Result<BatchResults, BenchError> {
    let mut tuples: Vec<(ScenarioName, Strategy, u64)> = Vec::new();
    for &sc in scenarios {
        for &st in strategies {
            for &seed in seeds {
                tuples.push((sc, st, seed));
            }
        }
    }
    let run_one =
        |&(sc, st, seed): &(ScenarioName, Strategy, u64)| -> Result<TrialRecord, BenchError> {
            let world = generate_world(seed, config)?;
            let scenario = build_scenario(sc, &world, seed)?;
            Ok(run_trial(&world, &scenario, st, est, costs, seed)?)
        };
    let records: Vec<TrialRecord> = if jobs == 1 {
        tuples.iter().map(run_one).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("rayon pool");
        pool.install(|| tuples.par_iter().map(run_one).collect::<Result<_, _>>())?
    };

    let mut summary: Vec<SummaryRow> = Vec::new();
    for &sc in scenarios {
        for &st in strategies {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.scenario == sc.as_str() && r.strategy == st.as_str())
                .collect();
            let n = group.len() as u64;
            let successes = group.iter().filter(|r| r.success).count() as u64;
            let mean = |f: &dyn Fn(&TrialRecord) -> f64| -> f64 {
                if group.is_empty() {
                    0.0
                } else {
                    group.iter().map(|r| f(r)).sum::<f64>() / group.len() as f64
                }
            };
            summary.push(SummaryRow {
                scenario: sc.as_str().to_string(),
                strategy: st.as_str().to_string(),
                trials: n,
                successes,
                mean_cost: mean(&|r| r.cost),
                mean_searched: mean(&|r| r.containers_searched as f64),
                mean_planner_s: mean(&|r| r.planner_wall_s),
            });
        }
    }
    Ok(BatchResults { records, summary })
}

/// One JSON record per line, in batch order. Timing fields are omitted by the
/// record's serialization, so this is stable across runs.
pub fn results_jsonl(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trial record serializes"));
        out.push('\n');
    }
    out
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut out =
        String::from("scenario,strategy,trials,successes,success_rate,mean_cost,mean_searched\n");
    for s in summary {
        let rate = if s.trials == 0 {
            0.0
        } else {
            s.successes as f64 / s.trials as f64
        };
        writeln!(
            out,
            "{},{},{},{},{:.4},{:.3},{:.3}",
            s.scenario, s.strategy, s.trials, s.successes, rate, s.mean_cost, s.mean_searched
        )
        .unwrap();
    }
    out
}

/// Human-facing summary, one aligned block per scenario. Includes planner
/// wall time, which is why it is not part of the persisted logs.
pub fn aligned_table(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    let mut scenarios: Vec<&str> = Vec::new();
    for s in summary {
        if !scenarios.contains(&s.scenario.as_str()) {
            scenarios.push(&s.scenario);
        }
    }
    for sc in scenarios {
        let rows: Vec<&SummaryRow> = summary.iter().filter(|s| s.scenario == sc).collect();
        let trials = rows.first().map_or(0, |r| r.trials);
        writeln!(out, "scenario: {sc} ({trials} trials per strategy)").unwrap();
        writeln!(
            out,
            "  {:<12} {:>10} {:>9} {:>9} {:>10}",
            "strategy", "mean-cost", "success", "searched", "planner-s"
        )
        .unwrap();
        for r in rows {
            let rate = if r.trials == 0 {
                0.0
            } else {
                100.0 * r.successes as f64 / r.trials as f64
            };
            writeln!(
                out,
                "  {:<12} {:>10.2} {:>8.1}% {:>9.2} {:>10.3}",
                r.strategy, r.mean_cost, rate, r.mean_searched, r.mean_planner_s
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}
