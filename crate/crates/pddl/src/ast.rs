//! Abstract syntax for the supported PDDL subset:
//! `:strips :typing :negative-preconditions :action-costs`.
//!
//! The printer emits a canonical lowercase form; parsing the printed text
//! yields an equal AST (round-trip fixpoint).

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    Strips,
    Typing,
    NegativePreconditions,
    ActionCosts,
}

impl Requirement {
    pub fn flag(self) -> &'static str {
        match self {
            Requirement::Strips => ":strips",
            Requirement::Typing => ":typing",
            Requirement::NegativePreconditions => ":negative-preconditions",
            Requirement::ActionCosts => ":action-costs",
        }
    }

    pub fn from_flag(s: &str) -> Option<Requirement> {
        match s {
            ":strips" => Some(Requirement::Strips),
            ":typing" => Some(Requirement::Typing),
            ":negative-preconditions" => Some(Requirement::NegativePreconditions),
            ":action-costs" => Some(Requirement::ActionCosts),
            _ => None,
        }
    }
}

/// A `name - type` entry (type declarations and problem objects).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

/// A `?var - type` parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateSchema {
    pub name: String,
    pub params: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSchema {
    pub name: String,
    pub params: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn text(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    And(Vec<Condition>),
    Not(Atom),
    Atom(Atom),
}

impl Condition {
    /// Flattens the tree into positive and negative literal lists.
    pub fn literals(&self) -> (Vec<&Atom>, Vec<&Atom>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        self.collect(&mut pos, &mut neg);
        (pos, neg)
    }

    fn collect<'a>(&'a self, pos: &mut Vec<&'a Atom>, neg: &mut Vec<&'a Atom>) {
        match self {
            Condition::And(cs) => cs.iter().for_each(|c| c.collect(pos, neg)),
            Condition::Not(a) => neg.push(a),
            Condition::Atom(a) => pos.push(a),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnTerm {
    pub name: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NumExpr {
    Literal(f64),
    Fn(FnTerm),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    And(Vec<Effect>),
    Add(Atom),
    Del(Atom),
    Increase(FnTerm, NumExpr),
}

impl Effect {
    pub fn parts(&self) -> (Vec<&Atom>, Vec<&Atom>, Vec<(&FnTerm, &NumExpr)>) {
        let mut add = Vec::new();
        let mut del = Vec::new();
        let mut inc = Vec::new();
        self.collect(&mut add, &mut del, &mut inc);
        (add, del, inc)
    }

    fn collect<'a>(
        &'a self,
        add: &mut Vec<&'a Atom>,
        del: &mut Vec<&'a Atom>,
        inc: &mut Vec<(&'a FnTerm, &'a NumExpr)>,
    ) {
        match self {
            Effect::And(es) => es.iter().for_each(|e| e.collect(add, del, inc)),
            Effect::Add(a) => add.push(a),
            Effect::Del(a) => del.push(a),
            Effect::Increase(f, n) => inc.push((f, n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub precondition: Condition,
    pub effect: Effect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PddlDomain {
    pub name: String,
    pub requirements: Vec<Requirement>,
    pub types: Vec<TypedName>,
    pub predicates: Vec<PredicateSchema>,
    pub functions: Vec<FunctionSchema>,
    pub actions: Vec<ActionSchema>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitElem {
    Atom(Atom),
    FnAssign(FnTerm, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PddlProblem {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<TypedName>,
    pub init: Vec<InitElem>,
    pub goal: Condition,
    /// `(:metric minimize <fn>)` when present.
    pub metric: Option<FnTerm>,
}

/// Type subsumption table; `object` is the implicit root.
pub struct TypeTable {
    parent: BTreeMap<String, String>,
}

impl TypeTable {
    pub fn new(types: &[TypedName]) -> TypeTable {
        let parent = types
            .iter()
            .map(|t| (t.name.clone(), t.ty.clone()))
            .collect();
        TypeTable { parent }
    }

    pub fn is_declared(&self, ty: &str) -> bool {
        ty == "object" || self.parent.contains_key(ty)
    }

    /// True when `ty` is `ancestor` or one of its descendants.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        if ancestor == "object" {
            return true;
        }
        let mut cur = ty;
        loop {
            if cur == ancestor {
                return true;
            }
            match self.parent.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }
}

fn fmt_params(f: &mut fmt::Formatter<'_>, params: &[Param]) -> fmt::Result {
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            write!(f, " ")?;
        }
        write!(f, "{} - {}", p.name, p.ty)?;
    }
    Ok(())
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.pred)?;
        for a in &self.args {
            write!(f, " {}", a.text())?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for FnTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {}", a.text())?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::And(cs) => {
                write!(f, "(and")?;
                for c in cs {
                    write!(f, " {}", c)?;
                }
                write!(f, ")")
            }
            Condition::Not(a) => write!(f, "(not {})", a),
            Condition::Atom(a) => write!(f, "{}", a),
        }
    }
}

impl fmt::Display for NumExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumExpr::Literal(v) => write!(f, "{}", v),
            NumExpr::Fn(t) => write!(f, "{}", t),
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::And(es) => {
                write!(f, "(and")?;
                for e in es {
                    write!(f, " {}", e)?;
                }
                write!(f, ")")
            }
            Effect::Add(a) => write!(f, "{}", a),
            Effect::Del(a) => write!(f, "(not {})", a),
            Effect::Increase(t, n) => write!(f, "(increase {} {})", t, n),
        }
    }
}

impl fmt::Display for PddlDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (domain {})", self.name)?;
        if !self.requirements.is_empty() {
            write!(f, "  (:requirements")?;
            for r in &self.requirements {
                write!(f, " {}", r.flag())?;
            }
            writeln!(f, ")")?;
        }
        if !self.types.is_empty() {
            writeln!(f, "  (:types")?;
            for t in &self.types {
                writeln!(f, "    {} - {}", t.name, t.ty)?;
            }
            writeln!(f, "  )")?;
        }
        if !self.predicates.is_empty() {
            writeln!(f, "  (:predicates")?;
            for p in &self.predicates {
                write!(f, "    ({}", p.name)?;
                if !p.params.is_empty() {
                    write!(f, " ")?;
                    fmt_params(f, &p.params)?;
                }
                writeln!(f, ")")?;
            }
            writeln!(f, "  )")?;
        }
        if !self.functions.is_empty() {
            writeln!(f, "  (:functions")?;
            for p in &self.functions {
                write!(f, "    ({}", p.name)?;
                if !p.params.is_empty() {
                    write!(f, " ")?;
                    fmt_params(f, &p.params)?;
                }
                writeln!(f, ")")?;
            }
            writeln!(f, "  )")?;
        }
        for a in &self.actions {
            writeln!(f, "  (:action {}", a.name)?;
            write!(f, "    :parameters (")?;
            fmt_params(f, &a.params)?;
            writeln!(f, ")")?;
            writeln!(f, "    :precondition {}", a.precondition)?;
            writeln!(f, "    :effect {}", a.effect)?;
            writeln!(f, "  )")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for PddlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (problem {})", self.name)?;
        writeln!(f, "  (:domain {})", self.domain_name)?;
        if !self.objects.is_empty() {
            writeln!(f, "  (:objects")?;
            for o in &self.objects {
                writeln!(f, "    {} - {}", o.name, o.ty)?;
            }
            writeln!(f, "  )")?;
        }
        writeln!(f, "  (:init")?;
        for e in &self.init {
            match e {
                InitElem::Atom(a) => writeln!(f, "    {}", a)?,
                InitElem::FnAssign(t, v) => writeln!(f, "    (= {} {})", t, v)?,
            }
        }
        writeln!(f, "  )")?;
        writeln!(f, "  (:goal {})", self.goal)?;
        if let Some(m) = &self.metric {
            writeln!(f, "  (:metric minimize {})", m)?;
        }
        write!(f, ")")
    }
}
