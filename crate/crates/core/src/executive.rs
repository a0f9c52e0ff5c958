//! Trial executive: closed-loop plan/execute cycle over a belief state.
//!
//! Each replan emits a PDDL task from the current belief, solves it, and
//! executes the plan step by step. Executing a `find` runs the stochastic
//! search process against ground truth and triggers a replan, so later plan
//! steps never reference a stale synthetic object.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use findplan_pddl::{ground, parse_domain, parse_problem, SearchConfig, SolveFailure};

use crate::estimator::Estimator;
use crate::lios::{
    greedy_find_policy, optimal_find_policy, CostModel, FindPolicy, LiosError, K_MAX,
};
use crate::tasks::{emit_pddl, FindCostTable, ScenarioSpec, TaskError};
use crate::world::{search_container, Cell, DistanceCache, SearchOutcome, WorldError, WorldModel};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Lios(#[from] LiosError),
    #[error("pddl: {0}")]
    Pddl(#[from] findplan_pddl::PddlError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("object type '{0}' is absent from the world")]
    ObjectUnavailable(String),
    #[error("executive invariant violated: {0}")]
    Internal(String),
}

/// What the robot believes about the world. Object locations recorded here
/// are always true: searches are truthful and the robot tracks its own
/// placements separately in `placed_overrides`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BeliefState {
    pub robot_pose: Cell,
    /// Objects revealed by searches, mapped to the container they were seen in.
    pub known_objects: BTreeMap<String, String>,
    pub searched: BTreeSet<String>,
    pub holding: Option<String>,
    /// Objects the robot moved itself, mapped to where it put them.
    pub placed_overrides: BTreeMap<String, String>,
    /// Ground task fluents accrued so far, e.g. `(boiled egg_0)`.
    pub task_fluents: BTreeSet<String>,
}

impl BeliefState {
    pub fn at(pose: Cell) -> BeliefState {
        BeliefState {
            robot_pose: pose,
            ..Default::default()
        }
    }

    /// Where the robot believes object `id` currently is, if anywhere.
    pub fn object_loc(&self, id: &str) -> Option<&str> {
        if self.holding.as_deref() == Some(id) {
            return None;
        }
        self.placed_overrides
            .get(id)
            .or_else(|| self.known_objects.get(id))
            .map(|s| s.as_str())
    }

    /// All objects with a believed location, as (object id, container id).
    pub fn located_objects(&self) -> BTreeMap<&str, &str> {
        let mut out: BTreeMap<&str, &str> = BTreeMap::new();
        for (o, c) in &self.known_objects {
            out.insert(o, c);
        }
        for (o, c) in &self.placed_overrides {
            out.insert(o, c);
        }
        if let Some(h) = &self.holding {
            out.remove(h.as_str());
        }
        out
    }

    /// Folds a search observation in, ignoring objects the robot has moved
    /// (their revealed location is stale) or is holding.
    pub fn merge_observation(&mut self, obs: &crate::world::Observation) {
        self.searched.insert(obs.searched_container.clone());
        for id in &obs.revealed_objects {
            if self.placed_overrides.contains_key(id) || self.holding.as_deref() == Some(id) {
                continue;
            }
            self.known_objects
                .insert(id.clone(), obs.searched_container.clone());
        }
    }

    pub fn unsearched<'w>(&self, world: &'w WorldModel) -> Vec<&'w crate::world::Container> {
        world
            .containers
            .iter()
            .filter(|c| !self.searched.contains(&c.id))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CostKind {
    Optimistic,
    Pessimistic,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SearchKind {
    Greedy,
    Lios,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    OptGreedy,
    PesGreedy,
    OptLios,
    PesLios,
    ModelLios,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::OptGreedy,
        Strategy::PesGreedy,
        Strategy::OptLios,
        Strategy::PesLios,
        Strategy::ModelLios,
    ];

    pub fn cost_kind(self) -> CostKind {
        match self {
            Strategy::OptGreedy | Strategy::OptLios => CostKind::Optimistic,
            Strategy::PesGreedy | Strategy::PesLios => CostKind::Pessimistic,
            Strategy::ModelLios => CostKind::Model,
        }
    }

    pub fn search_kind(self) -> SearchKind {
        match self {
            Strategy::OptGreedy | Strategy::PesGreedy => SearchKind::Greedy,
            Strategy::OptLios | Strategy::PesLios | Strategy::ModelLios => SearchKind::Lios,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::OptGreedy => "opt-greedy",
            Strategy::PesGreedy => "pes-greedy",
            Strategy::OptLios => "opt-lios",
            Strategy::PesLios => "pes-lios",
            Strategy::ModelLios => "model-lios",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Strategy, String> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown strategy '{s}', expected one of: {}",
                    Strategy::ALL.map(|k| k.as_str()).join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub action: String,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: String,
    pub strategy: String,
    pub seed: u64,
    pub cost: f64,
    pub success: bool,
    /// Wall-clock planning time; measured but kept out of the serialized
    /// record so result logs stay byte-identical across runs.
    #[serde(skip)]
    pub planner_wall_s: f64,
    pub containers_searched: u32,
    pub replans: u32,
    pub trace: Vec<TraceStep>,
}

impl TrialRecord {
    fn failure(
        scenario: &ScenarioSpec,
        strategy: Strategy,
        seed: u64,
        state: &RunState,
    ) -> TrialRecord {
        TrialRecord {
            scenario: scenario.name.as_str().to_string(),
            strategy: strategy.as_str().to_string(),
            seed,
            cost: scenario.r_fail,
            success: false,
            planner_wall_s: state.planner_wall_s,
            containers_searched: state.containers_searched,
            replans: state.replans,
            trace: state.trace.clone(),
        }
    }
}

struct RunState {
    trace: Vec<TraceStep>,
    accrued: f64,
    containers_searched: u32,
    replans: u32,
    planner_wall_s: f64,
}

impl RunState {
    fn step(&mut self, action: String, cost: f64) {
        self.accrued += cost;
        self.trace.push(TraceStep { action, cost });
    }
}

/// Runs one trial from an empty belief: nothing searched, no objects known,
/// robot at the scenario's start container.
pub fn run_trial(
    world: &WorldModel,
    scenario: &ScenarioSpec,
    strategy: Strategy,
    est: &Estimator,
    costs: &CostModel,
    seed: u64,
) -> Result<TrialRecord, ExecError> {
    let start = world.container(&scenario.start).ok_or_else(|| {
        ExecError::Internal(format!("unknown start container '{}'", scenario.start))
    })?;
    run_trial_from(
        world,
        scenario,
        strategy,
        est,
        costs,
        seed,
        BeliefState::at(start.pose),
    )
}

/// As `run_trial`, but from a caller-provided belief (used by tests that
/// pre-seed known objects).
pub fn run_trial_from(
    world: &WorldModel,
    scenario: &ScenarioSpec,
    strategy: Strategy,
    est: &Estimator,
    costs: &CostModel,
    seed: u64,
    mut belief: BeliefState,
) -> Result<TrialRecord, ExecError> {
    const MAX_REPLANS: u32 = 60;
    let mut state = RunState {
        trace: Vec::new(),
        accrued: 0.0,
        containers_searched: 0,
        replans: 0,
        planner_wall_s: 0.0,
    };
    let mut cache = DistanceCache::new(&world.grid);

    loop {
        if state.replans >= MAX_REPLANS {
            return Ok(TrialRecord::failure(scenario, strategy, seed, &state));
        }
        state.replans += 1;

        let find_costs =
            build_find_costs(world, &belief, scenario, strategy, est, costs, &mut cache)?;
        let (domain_text, problem_text) =
            emit_pddl(world, &belief, scenario, &find_costs, costs, &mut cache)?;
        let t0 = Instant::now();
        let domain = parse_domain(&domain_text)?;
        let problem = parse_problem(&problem_text, &domain)?;
        let task = ground(&domain, &problem)?;
        let plan = findplan_pddl::solve(
            &task,
            &SearchConfig {
                timeout: Some(Duration::from_secs_f64(scenario.t_max)),
                ..Default::default()
            },
        );
        state.planner_wall_s += t0.elapsed().as_secs_f64();
        let plan = match plan {
            Ok(p) => p,
            Err(SolveFailure::Unsolvable) | Err(SolveFailure::Timeout) => {
                return Ok(TrialRecord::failure(scenario, strategy, seed, &state));
            }
        };

        let mut replanned = false;
        for step in plan.action_names(&task) {
            let parts: Vec<&str> = step
                .trim_matches(|c| c == '(' || c == ')')
                .split_whitespace()
                .collect();
            match parts[0] {
                "move" => {
                    let to = world.container(parts[2]).ok_or_else(|| {
                        ExecError::Internal(format!("move to unknown '{}'", parts[2]))
                    })?;
                    let d = cache.dist(belief.robot_pose, to.pose)?;
                    belief.robot_pose = to.pose;
                    state.step(step.to_string(), d);
                }
                "pick" => {
                    let obj = parts[1];
                    if belief.object_loc(obj).is_none() || belief.holding.is_some() {
                        return Err(ExecError::Internal(format!("bad pick of '{obj}'")));
                    }
                    belief.known_objects.remove(obj);
                    belief.placed_overrides.remove(obj);
                    belief.holding = Some(obj.to_string());
                    state.step(step.to_string(), costs.r_pick);
                }
                "place" => {
                    let obj = parts[1];
                    if belief.holding.as_deref() != Some(obj) {
                        return Err(ExecError::Internal(format!("bad place of '{obj}'")));
                    }
                    belief.holding = None;
                    belief
                        .placed_overrides
                        .insert(obj.to_string(), parts[2].to_string());
                    state.step(step.to_string(), costs.r_place);
                }
                "find" => {
                    let object_type = find_costs.object_type(parts[1]).ok_or_else(|| {
                        ExecError::Internal(format!("find of unknown '{}'", parts[1]))
                    })?;
                    let target = world.container(parts[3]).ok_or_else(|| {
                        ExecError::Internal(format!("find target '{}'", parts[3]))
                    })?;
                    let policy = build_policy(
                        world,
                        &belief,
                        strategy.search_kind(),
                        est,
                        costs,
                        object_type,
                        belief.robot_pose,
                        target.pose,
                    )?;
                    let outcome = execute_find(world, &mut belief, &policy, costs, est)?;
                    state.containers_searched += outcome.searched;
                    state.accrued += outcome.cost;
                    state.trace.extend(outcome.trace);
                    replanned = true;
                }
                _ => {
                    apply_task_op(&mut belief, &parts, costs, &mut state)?;
                }
            }
            if replanned {
                break;
            }
        }
        if replanned {
            continue;
        }

        if !scenario
            .goal_fluents()
            .iter()
            .all(|g| belief.task_fluents.contains(g))
        {
            return Err(ExecError::Internal(
                "plan completed but goal fluents missing".into(),
            ));
        }
        return Ok(TrialRecord {
            scenario: scenario.name.as_str().to_string(),
            strategy: strategy.as_str().to_string(),
            seed,
            cost: state.accrued,
            success: true,
            planner_wall_s: state.planner_wall_s,
            containers_searched: state.containers_searched,
            replans: state.replans,
            trace: state.trace,
        });
    }
}

/// Applies a scenario operator (boil, peel, toast, pour-water, make-coffee,
/// serve-*, deliver-*, finish-*) to the belief's task fluents.
fn apply_task_op(
    belief: &mut BeliefState,
    parts: &[&str],
    costs: &CostModel,
    state: &mut RunState,
) -> Result<(), ExecError> {
    let name = parts[0];
    let fluent = match name {
        "boil" => format!("(boiled {})", parts[1]),
        "peel" => format!("(peeled {})", parts[1]),
        "toast" => format!("(toasted {})", parts[1]),
        "pour-water" => format!("(has-water {})", parts[2]),
        "make-coffee" => format!("(has-coffee {})", parts[2]),
        "serve-boiled" | "serve-peeled" | "serve-toasted" => "(served-breakfast)".to_string(),
        "serve-coffee" => "(served-coffee)".to_string(),
        _ if name.starts_with("deliver-slot") => {
            let obj = parts[1];
            if belief.holding.as_deref() != Some(obj) {
                return Err(ExecError::Internal(format!("bad {name} of '{obj}'")));
            }
            belief.holding = None;
            belief
                .placed_overrides
                .insert(obj.to_string(), parts[2].to_string());
            let slot: String = name["deliver-slot".len()..].to_string();
            format!("(slot{slot}-done)")
        }
        _ if name.starts_with("finish") => {
            let obj = parts[1];
            if belief.holding.as_deref() != Some(obj) {
                return Err(ExecError::Internal(format!("bad {name} of '{obj}'")));
            }
            belief.holding = None;
            belief
                .placed_overrides
                .insert(obj.to_string(), parts[2].to_string());
            "(retrieved)".to_string()
        }
        other => {
            return Err(ExecError::Internal(format!(
                "unknown plan operator '{other}'"
            )));
        }
    };
    belief.task_fluents.insert(fluent);
    state.step(format!("({})", parts.join(" ")), costs.fixed_op_cost);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_policy(
    world: &WorldModel,
    belief: &BeliefState,
    kind: SearchKind,
    est: &Estimator,
    costs: &CostModel,
    object_type: &str,
    q_from: Cell,
    q_to: Cell,
) -> Result<FindPolicy, ExecError> {
    let policy = match kind {
        SearchKind::Greedy => greedy_find_policy(world, belief, object_type, q_from, costs)?
            .with_target(world, costs, q_to)?,
        SearchKind::Lios => {
            optimal_find_policy(world, belief, object_type, q_from, q_to, est, costs, K_MAX)?
        }
    };
    Ok(policy)
}

/// Result of running one find process against ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct FindOutcome {
    pub binding: String,
    pub cost: f64,
    pub searched: u32,
    pub trace: Vec<TraceStep>,
}

/// Walks the policy's container sequence against ground truth: move, search,
/// and on success pick the object and move to the policy's target. If the
/// sequence is exhausted the policy is recomputed over the remaining
/// unsearched containers (same flavor: greedy policies stay greedy, LIOS
/// policies re-optimize) and the walk continues.
pub fn execute_find(
    world: &WorldModel,
    belief: &mut BeliefState,
    policy: &FindPolicy,
    costs: &CostModel,
    est: &Estimator,
) -> Result<FindOutcome, ExecError> {
    if belief.holding.is_some() {
        return Err(ExecError::Internal(
            "find started while holding an object".into(),
        ));
    }
    let mut cache = DistanceCache::new(&world.grid);
    let mut cost = 0.0;
    let mut searched = 0u32;
    let mut trace: Vec<TraceStep> = Vec::new();
    let mut seq: Vec<String> = policy.sequence.clone();
    let kind = if policy.model_based {
        SearchKind::Lios
    } else {
        SearchKind::Greedy
    };

    loop {
        for cid in &seq {
            let c = world.container(cid).ok_or_else(|| {
                ExecError::Internal(format!("policy names unknown container '{cid}'"))
            })?;
            let d = cache.dist(belief.robot_pose, c.pose)?;
            belief.robot_pose = c.pose;
            cost += d;
            trace.push(TraceStep {
                action: format!("(go {cid})"),
                cost: d,
            });
            match search_container(world, belief, cid)? {
                SearchOutcome::AlreadySearched => {
                    return Err(ExecError::Internal(format!(
                        "policy revisits searched '{cid}'"
                    )));
                }
                SearchOutcome::Revealed(obs) => {
                    belief.merge_observation(&obs);
                }
            }
            cost += costs.r_search;
            searched += 1;
            trace.push(TraceStep {
                action: format!("(search {cid})"),
                cost: costs.r_search,
            });
            // Smallest-id object of the target type just revealed here.
            let binding = belief
                .known_objects
                .iter()
                .filter(|(_, loc)| loc.as_str() == cid.as_str())
                .map(|(id, _)| id.clone())
                .find(|id| {
                    world
                        .objects
                        .iter()
                        .any(|o| &o.id == id && o.type_name == policy.object_type)
                });
            if let Some(binding) = binding {
                belief.known_objects.remove(&binding);
                belief.holding = Some(binding.clone());
                cost += costs.r_pick;
                trace.push(TraceStep {
                    action: format!("(pick {binding} {cid})"),
                    cost: costs.r_pick,
                });
                let d_out = cache.dist(belief.robot_pose, policy.q_to)?;
                belief.robot_pose = policy.q_to;
                cost += d_out;
                let target_name = world
                    .container_at(policy.q_to)
                    .map(|c| c.id.clone())
                    .unwrap_or_else(|| format!("{},{}", policy.q_to.0, policy.q_to.1));
                trace.push(TraceStep {
                    action: format!("(go {target_name})"),
                    cost: d_out,
                });
                return Ok(FindOutcome {
                    binding,
                    cost,
                    searched,
                    trace,
                });
            }
        }
        // Subset exhausted: the object was not in the committed candidates.
        if belief.unsearched(world).is_empty() {
            return Err(ExecError::ObjectUnavailable(policy.object_type.clone()));
        }
        let next = build_policy(
            world,
            belief,
            kind,
            est,
            costs,
            &policy.object_type,
            belief.robot_pose,
            policy.q_to,
        )?;
        seq = next.sequence;
    }
}

/// One expected-cost entry per (missing goal-relevant type, goal location),
/// with the start pinned to the robot's current container.
pub fn build_find_costs(
    world: &WorldModel,
    belief: &BeliefState,
    scenario: &ScenarioSpec,
    strategy: Strategy,
    est: &Estimator,
    costs: &CostModel,
    cache: &mut DistanceCache,
) -> Result<FindCostTable, ExecError> {
    let mut table = FindCostTable::default();
    let mut known_ids: BTreeSet<&str> = belief.located_objects().keys().copied().collect();
    if let Some(h) = &belief.holding {
        known_ids.insert(h.as_str());
    }
    let known_types: BTreeSet<&str> = known_ids
        .iter()
        .filter_map(|id| world.objects.iter().find(|o| o.id == *id))
        .map(|o| o.type_name.as_str())
        .collect();
    let cur = world
        .container_at(belief.robot_pose)
        .ok_or_else(|| ExecError::Internal("robot is not at a container".into()))?;
    for ty in scenario.relevant_types() {
        if known_types.contains(ty.as_str()) {
            continue;
        }
        for target_id in scenario.goal_locations() {
            let target = world
                .container(&target_id)
                .ok_or_else(|| ExecError::Internal(format!("goal location '{target_id}'")))?;
            let cost = match strategy.cost_kind() {
                CostKind::Optimistic => crate::lios::optimistic_cost(
                    world,
                    belief,
                    ty,
                    belief.robot_pose,
                    target.pose,
                    costs,
                    cache,
                )?,
                CostKind::Pessimistic => crate::lios::pessimistic_cost(
                    world,
                    belief,
                    ty,
                    belief.robot_pose,
                    target.pose,
                    costs,
                    cache,
                )?,
                CostKind::Model => {
                    optimal_find_policy(
                        world,
                        belief,
                        ty,
                        belief.robot_pose,
                        target.pose,
                        est,
                        costs,
                        K_MAX,
                    )?
                    .expected_cost
                }
            };
            table.insert(ty, &cur.id, &target.id, cost);
        }
    }
    Ok(table)
}
