//! Grounding: schemas x objects -> propositional actions over interned atoms.
//!
//! The pipeline strips literals of static predicates (those no action adds or
//! deletes), prunes actions unreachable under the delete relaxation, resolves
//! numeric costs for the survivors, and renumbers atoms so that equal inputs
//! always produce an identical task.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::error::PddlError;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundAction {
    /// Canonical name, e.g. `(move loc-a loc-b)`.
    pub name: String,
    pub pre_pos: Vec<u32>,
    pub pre_neg: Vec<u32>,
    pub add: Vec<u32>,
    pub del: Vec<u32>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTask {
    /// Atom id -> canonical text, sorted lexicographically.
    pub atoms: Vec<String>,
    /// Sorted by name.
    pub actions: Vec<GroundAction>,
    pub init: Vec<u32>,
    pub goal_pos: Vec<u32>,
    pub goal_neg: Vec<u32>,
    /// Set when a goal literal is already impossible at grounding time.
    pub unsolvable: bool,
}

impl GroundTask {
    pub fn atom_index(&self, text: &str) -> Option<u32> {
        self.atoms
            .binary_search_by(|a| a.as_str().cmp(text))
            .ok()
            .map(|i| i as u32)
    }
}

fn atom_text(pred: &str, args: &[&str]) -> String {
    let mut s = String::from("(");
    s.push_str(pred);
    for a in args {
        s.push(' ');
        s.push_str(a);
    }
    s.push(')');
    s
}

fn ground_args<'a>(args: &'a [Term], subst: &BTreeMap<&str, &'a str>) -> Vec<&'a str> {
    args.iter()
        .map(|t| match t {
            Term::Var(v) => subst[v.as_str()],
            Term::Const(c) => c.as_str(),
        })
        .collect()
}

#[derive(Default)]
struct Interner {
    ids: BTreeMap<String, u32>,
    texts: Vec<String>,
}

impl Interner {
    fn intern(&mut self, text: String) -> u32 {
        if let Some(&id) = self.ids.get(&text) {
            return id;
        }
        let id = self.texts.len() as u32;
        self.ids.insert(text.clone(), id);
        self.texts.push(text);
        id
    }
}

struct RawAction {
    name: String,
    pre_pos: Vec<u32>,
    pre_neg: Vec<u32>,
    add: Vec<u32>,
    del: Vec<u32>,
    increases: Vec<NumAmount>,
}

enum NumAmount {
    Literal(f64),
    Fn(String),
}

pub fn ground(domain: &PddlDomain, problem: &PddlProblem) -> Result<GroundTask, PddlError> {
    if problem.domain_name != domain.name {
        return Err(PddlError::Semantic(format!(
            "problem '{}' is for domain '{}', not '{}'",
            problem.name, problem.domain_name, domain.name
        )));
    }
    let types = TypeTable::new(&domain.types);

    let mut static_preds: BTreeSet<&str> =
        domain.predicates.iter().map(|p| p.name.as_str()).collect();
    for a in &domain.actions {
        let (add, del, _) = a.effect.parts();
        for atom in add.iter().chain(del.iter()) {
            static_preds.remove(atom.pred.as_str());
        }
    }

    let mut init_atoms: BTreeSet<String> = BTreeSet::new();
    let mut fn_values: BTreeMap<String, f64> = BTreeMap::new();
    for e in &problem.init {
        match e {
            InitElem::Atom(a) => {
                let args: Vec<&str> = a.args.iter().map(|t| t.text()).collect();
                init_atoms.insert(atom_text(&a.pred, &args));
            }
            InitElem::FnAssign(t, v) => {
                let args: Vec<&str> = t.args.iter().map(|x| x.text()).collect();
                let text = atom_text(&t.name, &args);
                if let Some(old) = fn_values.insert(text.clone(), *v) {
                    if old != *v {
                        return Err(PddlError::Semantic(format!(
                            "conflicting init values for '{}'",
                            text
                        )));
                    }
                }
            }
        }
    }

    let mut candidates_by_type: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for schema in &domain.actions {
        for p in &schema.params {
            candidates_by_type.entry(p.ty.as_str()).or_insert_with(|| {
                problem
                    .objects
                    .iter()
                    .filter(|o| types.is_subtype(&o.ty, &p.ty))
                    .map(|o| o.name.as_str())
                    .collect()
            });
        }
    }

    let mut interner = Interner::default();
    let mut raw: Vec<RawAction> = Vec::new();

    for schema in &domain.actions {
        let pools: Vec<&[&str]> = schema
            .params
            .iter()
            .map(|p| candidates_by_type[p.ty.as_str()].as_slice())
            .collect();
        if pools.iter().any(|p| p.is_empty()) {
            continue;
        }
        let nparams = pools.len();
        let mut idx = vec![0usize; nparams];
        'bindings: loop {
            let bound: Vec<&str> = (0..nparams).map(|k| pools[k][idx[k]]).collect();
            let subst: BTreeMap<&str, &str> = schema
                .params
                .iter()
                .zip(&bound)
                .map(|(p, &o)| (p.name.as_str(), o))
                .collect();
            if let Some(r) = instantiate(
                schema,
                &subst,
                &bound,
                &static_preds,
                &init_atoms,
                &mut interner,
            ) {
                raw.push(r);
            }
            let mut k = nparams;
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                if idx[k] < pools[k].len() {
                    continue 'bindings;
                }
                idx[k] = 0;
            }
            break;
        }
    }

    let mut init_ids: Vec<u32> = Vec::new();
    for text in &init_atoms {
        if !static_preds.contains(pred_of(text)) {
            init_ids.push(interner.intern(text.clone()));
        }
    }
    init_ids.sort_unstable();
    init_ids.dedup();

    let mut unsolvable = false;
    let (gpos, gneg) = problem.goal.literals();
    let mut goal_pos: Vec<u32> = Vec::new();
    let mut goal_neg: Vec<u32> = Vec::new();
    for atom in gpos {
        let args: Vec<&str> = atom.args.iter().map(|t| t.text()).collect();
        let text = atom_text(&atom.pred, &args);
        if static_preds.contains(atom.pred.as_str()) {
            if !init_atoms.contains(&text) {
                unsolvable = true;
            }
        } else {
            goal_pos.push(interner.intern(text));
        }
    }
    for atom in gneg {
        let args: Vec<&str> = atom.args.iter().map(|t| t.text()).collect();
        let text = atom_text(&atom.pred, &args);
        if static_preds.contains(atom.pred.as_str()) {
            if init_atoms.contains(&text) {
                unsolvable = true;
            }
        } else {
            goal_neg.push(interner.intern(text));
        }
    }
    goal_pos.sort_unstable();
    goal_pos.dedup();
    goal_neg.sort_unstable();
    goal_neg.dedup();

    let n_atoms = interner.texts.len();
    let reached = relaxed_reachable(n_atoms, &init_ids, &raw);

    let mut kept: Vec<RawAction> = Vec::new();
    for mut a in raw {
        if !a.pre_pos.iter().all(|&p| reached[p as usize]) {
            continue;
        }
        a.pre_neg.retain(|&p| reached[p as usize]);
        a.del.retain(|&p| reached[p as usize]);
        kept.push(a);
    }
    if !goal_pos.iter().all(|&g| reached[g as usize]) {
        unsolvable = true;
    }
    goal_neg.retain(|&g| reached[g as usize]);

    let mut actions: Vec<GroundAction> = Vec::with_capacity(kept.len());
    for a in kept {
        let mut cost = 0.0;
        for inc in &a.increases {
            cost += match inc {
                NumAmount::Literal(v) => *v,
                NumAmount::Fn(text) => *fn_values.get(text).ok_or_else(|| {
                    PddlError::Ground(format!(
                        "unresolved function term '{}' in action '{}'",
                        text, a.name
                    ))
                })?,
            };
        }
        actions.push(GroundAction {
            name: a.name,
            pre_pos: a.pre_pos,
            pre_neg: a.pre_neg,
            add: a.add,
            del: a.del,
            cost,
        });
    }

    // Renumber over the atoms still referenced, in lexicographic text order.
    let mut used = vec![false; n_atoms];
    {
        let mut mark = |ids: &[u32]| {
            for &i in ids {
                used[i as usize] = true;
            }
        };
        mark(&init_ids);
        mark(&goal_pos);
        mark(&goal_neg);
        for a in &actions {
            mark(&a.pre_pos);
            mark(&a.pre_neg);
            mark(&a.add);
            mark(&a.del);
        }
    }
    let mut atom_texts: Vec<(String, u32)> = interner
        .texts
        .into_iter()
        .enumerate()
        .filter(|(i, _)| used[*i])
        .map(|(i, t)| (t, i as u32))
        .collect();
    atom_texts.sort();
    let mut remap = vec![u32::MAX; n_atoms];
    for (new_id, (_, old_id)) in atom_texts.iter().enumerate() {
        remap[*old_id as usize] = new_id as u32;
    }
    let fix = |ids: &mut Vec<u32>| {
        for i in ids.iter_mut() {
            *i = remap[*i as usize];
        }
        ids.sort_unstable();
    };
    let mut task = GroundTask {
        atoms: atom_texts.into_iter().map(|(t, _)| t).collect(),
        actions,
        init: init_ids,
        goal_pos,
        goal_neg,
        unsolvable,
    };
    fix(&mut task.init);
    fix(&mut task.goal_pos);
    fix(&mut task.goal_neg);
    for a in &mut task.actions {
        fix(&mut a.pre_pos);
        fix(&mut a.pre_neg);
        fix(&mut a.add);
        fix(&mut a.del);
    }
    task.actions.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(task)
}

fn pred_of(text: &str) -> &str {
    let inner = &text[1..text.len() - 1];
    inner.split(' ').next().unwrap_or(inner)
}

fn instantiate(
    schema: &ActionSchema,
    subst: &BTreeMap<&str, &str>,
    bound: &[&str],
    static_preds: &BTreeSet<&str>,
    init_atoms: &BTreeSet<String>,
    interner: &mut Interner,
) -> Option<RawAction> {
    let name = atom_text(&schema.name, bound);
    let (pos, neg) = schema.precondition.literals();
    let mut pre_pos = Vec::new();
    let mut pre_neg = Vec::new();
    for atom in pos {
        let text = atom_text(&atom.pred, &ground_args(&atom.args, subst));
        if static_preds.contains(atom.pred.as_str()) {
            if !init_atoms.contains(&text) {
                return None;
            }
        } else {
            pre_pos.push(interner.intern(text));
        }
    }
    for atom in neg {
        let text = atom_text(&atom.pred, &ground_args(&atom.args, subst));
        if static_preds.contains(atom.pred.as_str()) {
            if init_atoms.contains(&text) {
                return None;
            }
        } else {
            pre_neg.push(interner.intern(text));
        }
    }
    pre_pos.sort_unstable();
    pre_pos.dedup();
    pre_neg.sort_unstable();
    pre_neg.dedup();
    if pre_pos.iter().any(|p| pre_neg.binary_search(p).is_ok()) {
        return None;
    }
    let (add_atoms, del_atoms, incs) = schema.effect.parts();
    let mut add = Vec::new();
    let mut del = Vec::new();
    for atom in add_atoms {
        add.push(interner.intern(atom_text(&atom.pred, &ground_args(&atom.args, subst))));
    }
    for atom in del_atoms {
        del.push(interner.intern(atom_text(&atom.pred, &ground_args(&atom.args, subst))));
    }
    add.sort_unstable();
    add.dedup();
    del.sort_unstable();
    del.dedup();
    let increases = incs
        .iter()
        .map(|(_, amount)| match amount {
            NumExpr::Literal(v) => NumAmount::Literal(*v),
            NumExpr::Fn(t) => NumAmount::Fn(atom_text(&t.name, &ground_args(&t.args, subst))),
        })
        .collect();
    Some(RawAction {
        name,
        pre_pos,
        pre_neg,
        add,
        del,
        increases,
    })
}

/// Atoms reachable from init when delete lists and negative preconditions are
/// ignored. Sound for pruning: anything unreachable here is unreachable in the
/// real task.
fn relaxed_reachable(n_atoms: usize, init: &[u32], actions: &[RawAction]) -> Vec<bool> {
    let mut reached = vec![false; n_atoms];
    let mut watchers: Vec<Vec<u32>> = vec![Vec::new(); n_atoms];
    let mut missing: Vec<u32> = Vec::with_capacity(actions.len());
    let mut fired = vec![false; actions.len()];
    let mut queue: Vec<u32> = Vec::new();
    for &a in init {
        if !reached[a as usize] {
            reached[a as usize] = true;
            queue.push(a);
        }
    }
    fn fire(
        i: usize,
        actions: &[RawAction],
        fired: &mut [bool],
        reached: &mut [bool],
        queue: &mut Vec<u32>,
    ) {
        if fired[i] {
            return;
        }
        fired[i] = true;
        for &a in &actions[i].add {
            if !reached[a as usize] {
                reached[a as usize] = true;
                queue.push(a);
            }
        }
    }
    for (i, act) in actions.iter().enumerate() {
        let mut need = 0;
        for &p in &act.pre_pos {
            if !reached[p as usize] {
                need += 1;
                watchers[p as usize].push(i as u32);
            }
        }
        missing.push(need);
        if need == 0 {
            fire(i, actions, &mut fired, &mut reached, &mut queue);
        }
    }
    while let Some(a) = queue.pop() {
        let ws = std::mem::take(&mut watchers[a as usize]);
        for i in ws {
            let i = i as usize;
            missing[i] -= 1;
            if missing[i] == 0 {
                fire(i, actions, &mut fired, &mut reached, &mut queue);
            }
        }
    }
    reached
}
