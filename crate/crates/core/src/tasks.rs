//! Scenario construction and PDDL emission.
//!
//! A scenario fixes a goal, a time budget, and a failure cost. Emission
//! translates the current belief into a domain/problem pair: every container
//! is a location, known objects sit at their believed locations, and each
//! missing goal-relevant object type contributes one synthetic object that
//! can only be obtained through a `find` action. Find actions are restricted
//! to the robot's current location via a static `find-option` guard, with
//! expected costs bound through the `find-cost` function.
//!
//! Disjunctive recipes (boil or peel or toast; any brewing vessel) compile to
//! alternative operators achieving a common goal fluent, with vessel choice
//! expressed through the type hierarchy (`pot` and `kettle` are `boiler`s,
//! and every `boiler` plus the `coffee_machine` is a `brewer`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::executive::BeliefState;
use crate::lios::CostModel;
use crate::world::{mix_seed, Container, DistanceCache, WorldError, WorldModel};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("scenario infeasible: {0}")]
    Infeasible(String),
    #[error("emit: {0}")]
    Emit(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioName {
    Deliver3,
    Breakfast,
    Coffee,
    BreakfastCoffee,
    AnyOfThree,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::Deliver3,
        ScenarioName::Breakfast,
        ScenarioName::Coffee,
        ScenarioName::BreakfastCoffee,
        ScenarioName::AnyOfThree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Deliver3 => "deliver3",
            ScenarioName::Breakfast => "breakfast",
            ScenarioName::Coffee => "coffee",
            ScenarioName::BreakfastCoffee => "breakfast-coffee",
            ScenarioName::AnyOfThree => "any-of-three",
        }
    }

    /// Planner budget per call, seconds.
    pub fn t_max(self) -> f64 {
        match self {
            ScenarioName::Deliver3 | ScenarioName::Breakfast | ScenarioName::AnyOfThree => 120.0,
            ScenarioName::Coffee | ScenarioName::BreakfastCoffee => 240.0,
        }
    }

    /// Cost charged for a failed trial.
    pub fn r_fail(self) -> f64 {
        match self {
            ScenarioName::Deliver3 | ScenarioName::Breakfast => 400.0,
            ScenarioName::Coffee | ScenarioName::BreakfastCoffee => 450.0,
            ScenarioName::AnyOfThree => 100.0,
        }
    }
}

impl std::str::FromStr for ScenarioName {
    type Err = String;

    fn from_str(s: &str) -> Result<ScenarioName, String> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown scenario '{s}', expected one of: {}",
                    ScenarioName::ALL.map(|n| n.as_str()).join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioGoal {
    /// Three (object type, target container) deliveries.
    Deliver3 {
        slots: Vec<(String, String)>,
    },
    Breakfast {
        serve_loc: String,
    },
    Coffee {
        serve_loc: String,
    },
    BreakfastCoffee {
        breakfast_loc: String,
        coffee_loc: String,
    },
    /// Retrieve any one of three object types back to the start container.
    AnyOfThree {
        options: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub t_max: f64,
    pub r_fail: f64,
    /// Container the robot starts at; also the retrieval target.
    pub start: String,
    pub goal: ScenarioGoal,
    /// Object types the goal can involve, restricted to types that exist in
    /// the world (the household inventory is known, locations are not).
    relevant: Vec<String>,
}

const BREAKFAST_TYPES: [&str; 11] = [
    "egg", "pot", "kettle", "bowl", "potato", "tomato", "apple", "knife", "plate", "bread",
    "toaster",
];
const COFFEE_TYPES: [&str; 6] = [
    "coffee_grinds",
    "water_bottle",
    "pot",
    "kettle",
    "coffee_machine",
    "mug",
];

impl ScenarioSpec {
    pub fn relevant_types(&self) -> &[String] {
        &self.relevant
    }

    /// Locations the goal refers to; targets for emitted find actions.
    pub fn goal_locations(&self) -> Vec<String> {
        let locs: Vec<&String> = match &self.goal {
            ScenarioGoal::Deliver3 { slots } => slots.iter().map(|(_, l)| l).collect(),
            ScenarioGoal::Breakfast { serve_loc } | ScenarioGoal::Coffee { serve_loc } => {
                vec![serve_loc]
            }
            ScenarioGoal::BreakfastCoffee {
                breakfast_loc,
                coffee_loc,
            } => vec![breakfast_loc, coffee_loc],
            ScenarioGoal::AnyOfThree { .. } => vec![&self.start],
        };
        let mut out = Vec::new();
        for l in locs {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }

    /// Ground fluents that must all hold for the trial to count as a success.
    pub fn goal_fluents(&self) -> Vec<String> {
        match &self.goal {
            ScenarioGoal::Deliver3 { .. } => vec![
                "(slot0-done)".into(),
                "(slot1-done)".into(),
                "(slot2-done)".into(),
            ],
            ScenarioGoal::Breakfast { .. } => vec!["(served-breakfast)".into()],
            ScenarioGoal::Coffee { .. } => vec!["(served-coffee)".into()],
            ScenarioGoal::BreakfastCoffee { .. } => {
                vec!["(served-breakfast)".into(), "(served-coffee)".into()]
            }
            ScenarioGoal::AnyOfThree { .. } => vec!["(retrieved)".into()],
        }
    }
}

fn sample_distinct<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], k: usize) -> Vec<&'a str> {
    let mut pool: Vec<&str> = pool.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let i = rng.gen_range(0..pool.len());
        out.push(pool.swap_remove(i));
    }
    out
}

fn breakfast_possible(types: &BTreeSet<&str>) -> bool {
    let boiled = types.contains("egg")
        && (types.contains("pot") || types.contains("kettle"))
        && types.contains("bowl");
    let peeled = (types.contains("potato") || types.contains("tomato") || types.contains("apple"))
        && types.contains("knife")
        && types.contains("plate");
    let toasted = types.contains("bread") && types.contains("toaster") && types.contains("plate");
    boiled || peeled || toasted
}

fn coffee_possible(types: &BTreeSet<&str>) -> bool {
    types.contains("coffee_grinds")
        && types.contains("water_bottle")
        && (types.contains("pot") || types.contains("kettle") || types.contains("coffee_machine"))
        && types.contains("mug")
}

const SCENARIO_SALT: u64 = 0x5ce0;

/// Instantiates a scenario on a world: picks the start container, the goal
/// bindings, and the goal locations, all from a ChaCha stream derived from
/// `seed`. The same (world, seed) pair always yields the same scenario.
pub fn build_scenario(
    name: ScenarioName,
    world: &WorldModel,
    seed: u64,
) -> Result<ScenarioSpec, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, SCENARIO_SALT));
    let types: BTreeSet<&str> = world.object_types();
    let type_list: Vec<&str> = types.iter().copied().collect();
    let container_ids: Vec<&str> = world.containers.iter().map(|c| c.id.as_str()).collect();
    let start = container_ids[rng.gen_range(0..container_ids.len())].to_string();

    let present = |list: &[&str]| -> Vec<String> {
        list.iter()
            .filter(|t| types.contains(**t))
            .map(|t| t.to_string())
            .collect()
    };

    let (goal, relevant) = match name {
        ScenarioName::Deliver3 => {
            if type_list.len() < 3 {
                return Err(TaskError::Infeasible(
                    "deliver3 needs three distinct object types".into(),
                ));
            }
            if container_ids.len() < 3 {
                return Err(TaskError::Infeasible(
                    "deliver3 needs three target containers".into(),
                ));
            }
            let picked = sample_distinct(&mut rng, &type_list, 3);
            let targets = sample_distinct(&mut rng, &container_ids, 3);
            let slots: Vec<(String, String)> = picked
                .iter()
                .zip(&targets)
                .map(|(t, l)| (t.to_string(), l.to_string()))
                .collect();
            let relevant = picked.iter().map(|t| t.to_string()).collect();
            (ScenarioGoal::Deliver3 { slots }, relevant)
        }
        ScenarioName::Breakfast => {
            if !breakfast_possible(&types) {
                return Err(TaskError::Infeasible(
                    "no complete breakfast recipe in this world".into(),
                ));
            }
            let serve_loc = container_ids[rng.gen_range(0..container_ids.len())].to_string();
            (
                ScenarioGoal::Breakfast { serve_loc },
                present(&BREAKFAST_TYPES),
            )
        }
        ScenarioName::Coffee => {
            if !coffee_possible(&types) {
                return Err(TaskError::Infeasible(
                    "coffee ingredients are incomplete in this world".into(),
                ));
            }
            let serve_loc = container_ids[rng.gen_range(0..container_ids.len())].to_string();
            (ScenarioGoal::Coffee { serve_loc }, present(&COFFEE_TYPES))
        }
        ScenarioName::BreakfastCoffee => {
            if !breakfast_possible(&types) || !coffee_possible(&types) {
                return Err(TaskError::Infeasible(
                    "breakfast or coffee is impossible in this world".into(),
                ));
            }
            let breakfast_loc = container_ids[rng.gen_range(0..container_ids.len())].to_string();
            let coffee_loc = container_ids[rng.gen_range(0..container_ids.len())].to_string();
            let mut relevant = present(&BREAKFAST_TYPES);
            for t in present(&COFFEE_TYPES) {
                if !relevant.contains(&t) {
                    relevant.push(t);
                }
            }
            (
                ScenarioGoal::BreakfastCoffee {
                    breakfast_loc,
                    coffee_loc,
                },
                relevant,
            )
        }
        ScenarioName::AnyOfThree => {
            if type_list.len() < 3 {
                return Err(TaskError::Infeasible(
                    "any-of-three needs three distinct object types".into(),
                ));
            }
            let picked = sample_distinct(&mut rng, &type_list, 3);
            let relevant = picked.iter().map(|t| t.to_string()).collect();
            (
                ScenarioGoal::AnyOfThree {
                    options: picked.iter().map(|t| t.to_string()).collect(),
                },
                relevant,
            )
        }
    };

    Ok(ScenarioSpec {
        name,
        t_max: name.t_max(),
        r_fail: name.r_fail(),
        start,
        goal,
        relevant,
    })
}

/// Expected find costs for the current replan, keyed by synthetic object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FindCostTable {
    entries: BTreeMap<(String, String, String), f64>,
    types: BTreeMap<String, String>,
}

impl FindCostTable {
    pub fn synthetic_name(object_type: &str) -> String {
        format!("missing-{object_type}")
    }

    pub fn insert(&mut self, object_type: &str, start: &str, target: &str, cost: f64) {
        let synthetic = FindCostTable::synthetic_name(object_type);
        self.types
            .insert(synthetic.clone(), object_type.to_string());
        self.entries
            .insert((synthetic, start.to_string(), target.to_string()), cost);
    }

    pub fn object_type(&self, synthetic: &str) -> Option<&str> {
        self.types.get(synthetic).map(|s| s.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, &str, f64)> {
        self.entries
            .iter()
            .map(|((o, s, t), &c)| (o.as_str(), s.as_str(), t.as_str(), c))
    }

    /// (synthetic object, object type) pairs, sorted.
    pub fn synthetic_objects(&self) -> impl Iterator<Item = (&str, &str)> {
        self.types.iter().map(|(s, t)| (s.as_str(), t.as_str()))
    }
}

/// Parent of each special type; anything else is a plain `movable`.
fn type_parent(ty: &str) -> &'static str {
    match ty {
        "brewer" | "peelable" => "movable",
        "boiler" => "brewer",
        "pot" | "kettle" => "boiler",
        "coffee_machine" => "brewer",
        "potato" | "tomato" | "apple" => "peelable",
        _ => "movable",
    }
}

fn format_cost(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Writes the scenario's domain and problem for the current belief.
pub fn emit_pddl(
    world: &WorldModel,
    belief: &BeliefState,
    scenario: &ScenarioSpec,
    find_costs: &FindCostTable,
    costs: &CostModel,
    cache: &mut DistanceCache,
) -> Result<(String, String), TaskError> {
    let cur = world
        .container_at(belief.robot_pose)
        .ok_or_else(|| TaskError::Emit("robot is not at a container".into()))?;
    let op5 = format_cost(costs.fixed_op_cost);
    let pick_cost = format_cost(costs.r_pick);
    let place_cost = format_cost(costs.r_place);

    // Object types to declare: everything in the world, everything the
    // scenario's operators mention, all synthetics, and ancestor closure.
    let mut obj_types: BTreeSet<String> =
        world.objects.iter().map(|o| o.type_name.clone()).collect();
    for t in scenario.relevant_types() {
        obj_types.insert(t.clone());
    }
    for (_, t) in find_costs.synthetic_objects() {
        obj_types.insert(t.to_string());
    }
    match &scenario.goal {
        ScenarioGoal::Breakfast { .. } => {
            obj_types.extend(BREAKFAST_TYPES.iter().map(|t| t.to_string()));
        }
        ScenarioGoal::Coffee { .. } => {
            obj_types.extend(COFFEE_TYPES.iter().map(|t| t.to_string()));
        }
        ScenarioGoal::BreakfastCoffee { .. } => {
            obj_types.extend(BREAKFAST_TYPES.iter().map(|t| t.to_string()));
            obj_types.extend(COFFEE_TYPES.iter().map(|t| t.to_string()));
        }
        ScenarioGoal::Deliver3 { .. } | ScenarioGoal::AnyOfThree { .. } => {}
    }
    let mut closed: BTreeSet<String> = BTreeSet::new();
    for t in &obj_types {
        let mut t = t.as_str();
        while t != "movable" {
            closed.insert(t.to_string());
            t = type_parent(t);
        }
    }

    let mut d = String::new();
    writeln!(d, "(define (domain household)").unwrap();
    writeln!(d, "  (:requirements :strips :typing :action-costs)").unwrap();
    writeln!(d, "  (:types").unwrap();
    writeln!(d, "    location - object").unwrap();
    writeln!(d, "    movable - object").unwrap();
    for t in &closed {
        writeln!(d, "    {t} - {}", type_parent(t)).unwrap();
    }
    writeln!(d, "  )").unwrap();
    writeln!(d, "  (:predicates").unwrap();
    writeln!(d, "    (rob-at ?l - location)").unwrap();
    writeln!(d, "    (obj-at ?o - movable ?l - location)").unwrap();
    writeln!(d, "    (holding ?o - movable)").unwrap();
    writeln!(d, "    (hand-is-free)").unwrap();
    writeln!(d, "    (connected ?a - location ?b - location)").unwrap();
    writeln!(
        d,
        "    (find-option ?o - movable ?a - location ?b - location)"
    )
    .unwrap();
    for p in scenario_predicates(&scenario.goal) {
        writeln!(d, "    {p}").unwrap();
    }
    writeln!(d, "  )").unwrap();
    writeln!(d, "  (:functions").unwrap();
    writeln!(d, "    (total-cost)").unwrap();
    writeln!(d, "    (move-cost ?a - location ?b - location)").unwrap();
    writeln!(
        d,
        "    (find-cost ?o - movable ?a - location ?b - location)"
    )
    .unwrap();
    writeln!(d, "  )").unwrap();
    writeln!(
        d,
        "  (:action move
    :parameters (?from - location ?to - location)
    :precondition (and (rob-at ?from) (connected ?from ?to))
    :effect (and (not (rob-at ?from)) (rob-at ?to)
                 (increase (total-cost) (move-cost ?from ?to))))"
    )
    .unwrap();
    writeln!(
        d,
        "  (:action pick
    :parameters (?obj - movable ?loc - location)
    :precondition (and (rob-at ?loc) (obj-at ?obj ?loc) (hand-is-free))
    :effect (and (not (obj-at ?obj ?loc)) (not (hand-is-free)) (holding ?obj)
                 (increase (total-cost) {pick_cost})))"
    )
    .unwrap();
    writeln!(
        d,
        "  (:action place
    :parameters (?obj - movable ?loc - location)
    :precondition (and (rob-at ?loc) (holding ?obj))
    :effect (and (not (holding ?obj)) (hand-is-free) (obj-at ?obj ?loc)
                 (increase (total-cost) {place_cost})))"
    )
    .unwrap();
    writeln!(
        d,
        "  (:action find
    :parameters (?obj - movable ?start - location ?target - location)
    :precondition (and (rob-at ?start) (hand-is-free)
                       (find-option ?obj ?start ?target))
    :effect (and (not (rob-at ?start)) (rob-at ?target)
                 (not (hand-is-free)) (holding ?obj)
                 (increase (total-cost) (find-cost ?obj ?start ?target))))"
    )
    .unwrap();
    for a in scenario_actions(&scenario.goal, &op5) {
        writeln!(d, "{a}").unwrap();
    }
    writeln!(d, ")").unwrap();

    // Problem pruning: the plan only ever stands at the current container,
    // a goal location, or a container holding a goal-relevant object, and
    // grid distances are a metric, so intermediate stops never pay off.
    // Everything else stays out of the problem to keep grounding small.
    let located = belief.located_objects();
    let relevant: BTreeSet<&str> = scenario
        .relevant_types()
        .iter()
        .map(|s| s.as_str())
        .collect();
    let resolve_type = |id: &str| -> Result<&str, TaskError> {
        world
            .objects
            .iter()
            .find(|o| o.id == id)
            .map(|o| o.type_name.as_str())
            .ok_or_else(|| TaskError::Emit(format!("belief references unknown object '{id}'")))
    };
    let mut declared: BTreeMap<&str, &str> = BTreeMap::new();
    for &id in located.keys() {
        let ty = resolve_type(id)?;
        if relevant.contains(ty) {
            declared.insert(id, ty);
        }
    }
    if let Some(h) = &belief.holding {
        declared.insert(h.as_str(), resolve_type(h)?);
    }
    let goal_locs = scenario.goal_locations();
    let mut locs: BTreeSet<&str> = BTreeSet::new();
    locs.insert(cur.id.as_str());
    for l in &goal_locs {
        locs.insert(l.as_str());
    }
    for id in declared.keys() {
        if let Some(loc) = located.get(id) {
            locs.insert(loc);
        }
    }
    let sites: Vec<&Container> = world
        .containers
        .iter()
        .filter(|c| locs.contains(c.id.as_str()))
        .collect();

    let mut p = String::new();
    writeln!(p, "(define (problem household-trial)").unwrap();
    writeln!(p, "  (:domain household)").unwrap();
    writeln!(p, "  (:objects").unwrap();
    for c in &sites {
        writeln!(p, "    {} - location", c.id).unwrap();
    }
    for (id, ty) in &declared {
        writeln!(p, "    {id} - {ty}").unwrap();
    }
    for (synthetic, ty) in find_costs.synthetic_objects() {
        writeln!(p, "    {synthetic} - {ty}").unwrap();
    }
    writeln!(p, "  )").unwrap();
    writeln!(p, "  (:init").unwrap();
    writeln!(p, "    (rob-at {})", cur.id).unwrap();
    match &belief.holding {
        Some(h) => writeln!(p, "    (holding {h})").unwrap(),
        None => writeln!(p, "    (hand-is-free)").unwrap(),
    }
    for (id, loc) in &located {
        if declared.contains_key(id) {
            writeln!(p, "    (obj-at {id} {loc})").unwrap();
        }
    }
    for a in &sites {
        for b in &sites {
            if a.id != b.id {
                writeln!(p, "    (connected {} {})", a.id, b.id).unwrap();
            }
        }
    }
    for (o, s, t, _) in find_costs.entries() {
        writeln!(p, "    (find-option {o} {s} {t})").unwrap();
    }
    for atom in scenario_static_atoms(&scenario.goal, &scenario.start) {
        writeln!(p, "    {atom}").unwrap();
    }
    for f in &belief.task_fluents {
        writeln!(p, "    {f}").unwrap();
    }
    writeln!(p, "    (= (total-cost) 0)").unwrap();
    for a in &sites {
        for b in &sites {
            if a.id != b.id {
                let dist = cache.dist(a.pose, b.pose)?;
                writeln!(
                    p,
                    "    (= (move-cost {} {}) {})",
                    a.id,
                    b.id,
                    format_cost(dist)
                )
                .unwrap();
            }
        }
    }
    for (o, s, t, c) in find_costs.entries() {
        writeln!(p, "    (= (find-cost {o} {s} {t}) {})", format_cost(c)).unwrap();
    }
    writeln!(p, "  )").unwrap();
    let fluents = scenario.goal_fluents();
    if fluents.len() == 1 {
        writeln!(p, "  (:goal {})", fluents[0]).unwrap();
    } else {
        writeln!(p, "  (:goal (and {}))", fluents.join(" ")).unwrap();
    }
    writeln!(p, "  (:metric minimize (total-cost))").unwrap();
    writeln!(p, ")").unwrap();

    Ok((d, p))
}

fn scenario_predicates(goal: &ScenarioGoal) -> Vec<String> {
    match goal {
        ScenarioGoal::Deliver3 { .. } => (0..3)
            .flat_map(|i| {
                [
                    format!("(slot{i}-loc ?l - location)"),
                    format!("(slot{i}-done)"),
                ]
            })
            .collect(),
        ScenarioGoal::Breakfast { .. } => breakfast_predicates(),
        ScenarioGoal::Coffee { .. } => coffee_predicates(),
        ScenarioGoal::BreakfastCoffee { .. } => {
            let mut v = breakfast_predicates();
            v.extend(coffee_predicates());
            v
        }
        ScenarioGoal::AnyOfThree { .. } => {
            vec!["(retrieval-loc ?l - location)".into(), "(retrieved)".into()]
        }
    }
}

fn breakfast_predicates() -> Vec<String> {
    vec![
        "(boiled ?e - egg)".into(),
        "(peeled ?f - peelable)".into(),
        "(toasted ?b - bread)".into(),
        "(breakfast-loc ?l - location)".into(),
        "(served-breakfast)".into(),
    ]
}

fn coffee_predicates() -> Vec<String> {
    vec![
        "(has-water ?b - brewer)".into(),
        "(has-coffee ?b - brewer)".into(),
        "(coffee-loc ?l - location)".into(),
        "(served-coffee)".into(),
    ]
}

fn scenario_static_atoms(goal: &ScenarioGoal, start: &str) -> Vec<String> {
    match goal {
        ScenarioGoal::Deliver3 { slots } => slots
            .iter()
            .enumerate()
            .map(|(i, (_, loc))| format!("(slot{i}-loc {loc})"))
            .collect(),
        ScenarioGoal::Breakfast { serve_loc } => vec![format!("(breakfast-loc {serve_loc})")],
        ScenarioGoal::Coffee { serve_loc } => vec![format!("(coffee-loc {serve_loc})")],
        ScenarioGoal::BreakfastCoffee {
            breakfast_loc,
            coffee_loc,
        } => vec![
            format!("(breakfast-loc {breakfast_loc})"),
            format!("(coffee-loc {coffee_loc})"),
        ],
        ScenarioGoal::AnyOfThree { .. } => vec![format!("(retrieval-loc {start})")],
    }
}

fn scenario_actions(goal: &ScenarioGoal, op5: &str) -> Vec<String> {
    match goal {
        ScenarioGoal::Deliver3 { slots } => slots
            .iter()
            .enumerate()
            .map(|(i, (ty, _))| {
                format!(
                    "  (:action deliver-slot{i}
    :parameters (?o - {ty} ?l - location)
    :precondition (and (rob-at ?l) (holding ?o) (slot{i}-loc ?l))
    :effect (and (not (holding ?o)) (hand-is-free) (obj-at ?o ?l) (slot{i}-done)
                 (increase (total-cost) {op5})))"
                )
            })
            .collect(),
        ScenarioGoal::Breakfast { .. } => breakfast_actions(op5),
        ScenarioGoal::Coffee { .. } => coffee_actions(op5),
        ScenarioGoal::BreakfastCoffee { .. } => {
            let mut v = breakfast_actions(op5);
            v.extend(coffee_actions(op5));
            v
        }
        ScenarioGoal::AnyOfThree { options } => options
            .iter()
            .enumerate()
            .map(|(i, ty)| {
                format!(
                    "  (:action finish{i}
    :parameters (?o - {ty} ?l - location)
    :precondition (and (rob-at ?l) (holding ?o) (retrieval-loc ?l))
    :effect (and (not (holding ?o)) (hand-is-free) (obj-at ?o ?l) (retrieved)
                 (increase (total-cost) {op5})))"
                )
            })
            .collect(),
    }
}

fn breakfast_actions(op5: &str) -> Vec<String> {
    vec![
        format!(
            "  (:action boil
    :parameters (?e - egg ?b - boiler ?l - location)
    :precondition (and (rob-at ?l) (obj-at ?e ?l) (obj-at ?b ?l))
    :effect (and (boiled ?e) (increase (total-cost) {op5})))"
        ),
        format!(
            "  (:action peel
    :parameters (?f - peelable ?k - knife ?l - location)
    :precondition (and (rob-at ?l) (obj-at ?f ?l) (obj-at ?k ?l))
    :effect (and (peeled ?f) (increase (total-cost) {op5})))"
        ),
        format!(
            "  (:action toast
    :parameters (?b - bread ?t - toaster ?l - location)
    :precondition (and (rob-at ?l) (obj-at ?b ?l) (obj-at ?t ?l))
    :effect (and (toasted ?b) (increase (total-cost) {op5})))"
        ),
        format!(
            "  (:action serve-boiled
    :parameters (?e - egg ?d - bowl ?l - location)
    :precondition (and (rob-at ?l) (breakfast-loc ?l) (boiled ?e)
                       (obj-at ?e ?l) (obj-at ?d ?l))
    :effect (and (served-breakfast) (increase (total-cost) {op5})))"
        ),
        format!(
            "  (:action serve-peeled
    :parameters (?f - peelable ?d - plate ?l - location)
    :precondition (and (rob-at ?l) (breakfast-loc ?l) (peeled ?f)
                       (obj-at ?f ?l) (obj-at ?d ?l))
    :effect (and (served-breakfast) (increase (total-cost) {op5})))"
        ),
        format!(
            "  (:action serve-toasted
    :parameters (?b - bread ?d - plate ?l - location)
    :precondition (and (rob-at ?l) (breakfast-loc ?l) (toasted ?b)
                       (obj-at ?b ?l) (obj-at ?d ?l))
    :effect (and (served-breakfast) (increase (total-cost) {op5})))"
        ),
    ]
}

fn coffee_actions(op5: &str) -> Vec<String> {
    vec![
        format!(
            "  (:action pour-water
    :parameters (?w - water_bottle ?b - brewer ?l - location)
    :precondition (and (rob-at ?l) (obj-at ?w ?l) (obj-at ?b ?l))
    :effect (and (has-water ?b) (increase (total-cost) {op5})))"
        ),
        format!(
            "  (:action make-coffee
    :parameters (?g - coffee_grinds ?b - brewer ?l - location)
    :precondition (and (rob-at ?l) (obj-at ?g ?l) (obj-at ?b ?l) (has-water ?b))
    :effect (and (has-coffee ?b) (increase (total-cost) {op5})))"
        ),
        format!(
            "  (:action serve-coffee
    :parameters (?b - brewer ?m - mug ?l - location)
    :precondition (and (rob-at ?l) (coffee-loc ?l) (has-coffee ?b)
                       (obj-at ?b ?l) (obj-at ?m ?l))
    :effect (and (served-coffee) (increase (total-cost) {op5})))"
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::Estimator;
    use crate::executive::{build_find_costs, BeliefState, Strategy};
    use crate::world::{default_config, generate_world, DistanceCache, WorldConfig};
    use findplan_pddl::{ground, parse_domain, parse_problem, solve, SearchConfig};

    fn peel_only_config() -> WorldConfig {
        WorldConfig::from_toml(
            r#"
            room_width = 4
            room_height = 4
            rooms_min = 2
            rooms_max = 2
            containers_per_room_min = 2
            containers_per_room_max = 2
            room_types = ["kitchen", "living_room"]

            [container_weights.kitchen]
            countertop = 2.0
            cabinet = 1.0

            [container_weights.living_room]
            shelf = 1.0

            [[objects]]
            type = "potato"
            weights = [["countertop", "kitchen", 1.0], ["shelf", "living_room", 1.0]]

            [[objects]]
            type = "knife"
            weights = [["cabinet", "kitchen", 1.0], ["shelf", "living_room", 1.0]]

            [[objects]]
            type = "plate"
            weights = [["countertop", "kitchen", 1.0], ["shelf", "living_room", 1.0]]
            "#,
        )
        .unwrap()
    }

    #[test]
    fn scenario_budget_table_is_wired_through() {
        let cfg = default_config();
        let world = generate_world(11, &cfg).unwrap();
        let expect = [
            (ScenarioName::Deliver3, 120.0, 400.0),
            (ScenarioName::Breakfast, 120.0, 400.0),
            (ScenarioName::Coffee, 240.0, 450.0),
            (ScenarioName::BreakfastCoffee, 240.0, 450.0),
            (ScenarioName::AnyOfThree, 120.0, 100.0),
        ];
        for (name, t_max, r_fail) in expect {
            let s = build_scenario(name, &world, 11).unwrap();
            assert_eq!(s.t_max, t_max, "{name:?}");
            assert_eq!(s.r_fail, r_fail, "{name:?}");
            assert_eq!(name.as_str().parse::<ScenarioName>().unwrap(), name);
        }
    }

    #[test]
    fn scenarios_are_deterministic_per_world_and_seed() {
        let cfg = default_config();
        let world = generate_world(21, &cfg).unwrap();
        for name in ScenarioName::ALL {
            let a = build_scenario(name, &world, 33).unwrap();
            let b = build_scenario(name, &world, 33).unwrap();
            assert_eq!(a, b, "{name:?}");
        }
        let a = build_scenario(ScenarioName::Deliver3, &world, 33).unwrap();
        let b = build_scenario(ScenarioName::Deliver3, &world, 34).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn deliver3_slots_are_distinct_and_relevant() {
        let cfg = default_config();
        for seed in 0..8 {
            let world = generate_world(seed, &cfg).unwrap();
            let s = build_scenario(ScenarioName::Deliver3, &world, seed).unwrap();
            let ScenarioGoal::Deliver3 { slots } = &s.goal else {
                panic!("wrong goal kind");
            };
            assert_eq!(slots.len(), 3);
            let types: BTreeSet<&String> = slots.iter().map(|(t, _)| t).collect();
            let locs: BTreeSet<&String> = slots.iter().map(|(_, l)| l).collect();
            assert_eq!(types.len(), 3, "duplicate slot types");
            assert_eq!(locs.len(), 3, "duplicate slot targets");
            let mut rel: Vec<&str> = s.relevant_types().iter().map(|t| t.as_str()).collect();
            rel.sort_unstable();
            let mut want: Vec<&str> = slots.iter().map(|(t, _)| t.as_str()).collect();
            want.sort_unstable();
            assert_eq!(rel, want);
        }
    }

    #[test]
    fn impossible_recipes_are_rejected() {
        let world = generate_world(4, &peel_only_config()).unwrap();
        assert!(build_scenario(ScenarioName::Breakfast, &world, 0).is_ok());
        assert!(matches!(
            build_scenario(ScenarioName::Coffee, &world, 0),
            Err(TaskError::Infeasible(_))
        ));
        assert!(build_scenario(ScenarioName::BreakfastCoffee, &world, 0).is_err());
        assert!(build_scenario(ScenarioName::Deliver3, &world, 0).is_ok());
    }

    #[test]
    fn fully_known_belief_emits_no_find_facts() {
        let cfg = default_config();
        let world = generate_world(17, &cfg).unwrap();
        let scenario = build_scenario(ScenarioName::Breakfast, &world, 17).unwrap();
        let start = world.container(&scenario.start).unwrap();
        let mut belief = BeliefState::at(start.pose);
        for o in &world.objects {
            belief
                .known_objects
                .insert(o.id.clone(), o.true_container.clone());
        }
        let est = Estimator::uniform();
        let costs = CostModel::default();
        let mut cache = DistanceCache::new(&world.grid);
        let table = build_find_costs(
            &world,
            &belief,
            &scenario,
            Strategy::ModelLios,
            &est,
            &costs,
            &mut cache,
        )
        .unwrap();
        assert!(table.is_empty());
        let (domain, problem) =
            emit_pddl(&world, &belief, &scenario, &table, &costs, &mut cache).unwrap();
        assert!(!problem.contains("missing-"));
        assert!(!problem.contains("(find-option"));
        assert!(domain.contains("(:action find"));
    }

    #[test]
    fn one_missing_type_and_two_targets_ground_two_finds() {
        let cfg = default_config();
        let world = generate_world(29, &cfg).unwrap();
        let scenario = build_scenario(ScenarioName::BreakfastCoffee, &world, 2).unwrap();
        let start = world.container(&scenario.start).unwrap();
        let mut belief = BeliefState::at(start.pose);
        for o in &world.objects {
            belief
                .known_objects
                .insert(o.id.clone(), o.true_container.clone());
        }
        let locs = scenario.goal_locations();
        assert!(!locs.is_empty());
        let mut table = FindCostTable::default();
        table.insert("mug", &scenario.start, &locs[0], 21.0);
        if let Some(second) = locs.get(1) {
            table.insert("mug", &scenario.start, second, 23.5);
        }
        let costs = CostModel::default();
        let mut cache = DistanceCache::new(&world.grid);
        let (dom_text, prob_text) =
            emit_pddl(&world, &belief, &scenario, &table, &costs, &mut cache).unwrap();
        let domain = parse_domain(&dom_text).unwrap();
        let problem = parse_problem(&prob_text, &domain).unwrap();
        let task = ground(&domain, &problem).unwrap();
        let finds: Vec<&str> = task
            .actions
            .iter()
            .map(|a| a.name.as_str())
            .filter(|n| n.starts_with("(find "))
            .collect();
        assert_eq!(finds.len(), locs.len().min(2));
        for n in &finds {
            assert!(n.contains("missing-mug"), "{n}");
            assert!(n.contains(&scenario.start), "{n}");
        }
    }

    #[test]
    fn emitted_pddl_survives_a_print_parse_round_trip() {
        let cfg = default_config();
        let world = generate_world(13, &cfg).unwrap();
        let scenario = build_scenario(ScenarioName::Coffee, &world, 13).unwrap();
        let start = world.container(&scenario.start).unwrap();
        let belief = BeliefState::at(start.pose);
        let est = Estimator::uniform();
        let costs = CostModel::default();
        let mut cache = DistanceCache::new(&world.grid);
        let table = build_find_costs(
            &world,
            &belief,
            &scenario,
            Strategy::ModelLios,
            &est,
            &costs,
            &mut cache,
        )
        .unwrap();
        let (dom_text, prob_text) =
            emit_pddl(&world, &belief, &scenario, &table, &costs, &mut cache).unwrap();
        let domain = parse_domain(&dom_text).unwrap();
        let problem = parse_problem(&prob_text, &domain).unwrap();
        let domain2 = parse_domain(&domain.to_string()).unwrap();
        let problem2 = parse_problem(&problem.to_string(), &domain2).unwrap();
        assert_eq!(domain, domain2);
        assert_eq!(problem, problem2);
    }

    #[test]
    fn every_scenario_is_solvable_from_an_empty_belief() {
        let cfg = default_config();
        let costs = CostModel::default();
        let est = Estimator::uniform();
        for seed in [3u64, 15] {
            let world = generate_world(seed, &cfg).unwrap();
            let mut cache = DistanceCache::new(&world.grid);
            for name in ScenarioName::ALL {
                let scenario = build_scenario(name, &world, seed).unwrap();
                let start = world.container(&scenario.start).unwrap();
                let belief = BeliefState::at(start.pose);
                let table = build_find_costs(
                    &world,
                    &belief,
                    &scenario,
                    Strategy::ModelLios,
                    &est,
                    &costs,
                    &mut cache,
                )
                .unwrap();
                let (dom_text, prob_text) =
                    emit_pddl(&world, &belief, &scenario, &table, &costs, &mut cache).unwrap();
                let domain = parse_domain(&dom_text).unwrap();
                let problem = parse_problem(&prob_text, &domain).unwrap();
                let task = ground(&domain, &problem).unwrap();
                let plan = solve(&task, &SearchConfig::default())
                    .unwrap_or_else(|e| panic!("{name:?} seed {seed}: {e:?}"));
                assert!(plan.cost > 0.0, "{name:?} seed {seed}");
                if name == ScenarioName::Coffee {
                    let finds = plan
                        .action_names(&task)
                        .iter()
                        .filter(|n| n.starts_with("(find "))
                        .count();
                    assert!(finds >= 4, "{name:?} seed {seed}: only {finds} finds");
                }
            }
        }
    }

    #[test]
    fn breakfast_falls_back_to_the_peel_recipe() {
        let world = generate_world(4, &peel_only_config()).unwrap();
        let scenario = build_scenario(ScenarioName::Breakfast, &world, 1).unwrap();
        let start = world.container(&scenario.start).unwrap();
        let mut belief = BeliefState::at(start.pose);
        for o in &world.objects {
            belief
                .known_objects
                .insert(o.id.clone(), o.true_container.clone());
        }
        let costs = CostModel::default();
        let mut cache = DistanceCache::new(&world.grid);
        let table = FindCostTable::default();
        let (dom_text, prob_text) =
            emit_pddl(&world, &belief, &scenario, &table, &costs, &mut cache).unwrap();
        let domain = parse_domain(&dom_text).unwrap();
        let problem = parse_problem(&prob_text, &domain).unwrap();
        let task = ground(&domain, &problem).unwrap();
        let plan = solve(&task, &SearchConfig::default()).unwrap();
        let names = plan.action_names(&task);
        assert!(names.iter().any(|n| n.starts_with("(peel ")), "{names:?}");
        assert!(
            names.iter().any(|n| n.starts_with("(serve-peeled ")),
            "{names:?}"
        );
        assert!(!names.iter().any(|n| n.starts_with("(find ")));
    }
}
