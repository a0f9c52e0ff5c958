//! A small STRIPS planner for the `:strips :typing :negative-preconditions
//! :action-costs` PDDL subset: parser, grounder, weighted-A* search with a
//! relaxed-plan heuristic, and a plan validator.
//!
//! Costs come from a single `total-cost` function increased by action effects,
//! either by literals or by static cost functions bound in `:init`.

pub mod ast;
pub mod error;
pub mod ground;
pub mod lexer;
pub mod parser;
pub mod search;
pub mod validate;

pub use ast::{PddlDomain, PddlProblem};
pub use error::PddlError;
pub use ground::{ground, GroundAction, GroundTask};
pub use parser::{parse_domain, parse_problem};
pub use search::{solve, Plan, SearchConfig, SolveFailure};
pub use validate::{validate, ValidationError};
