//! Task planning with object search: deterministic PDDL plans whose `find`
//! actions wrap a stochastic search process, costed by the expected cost of
//! the search policy that will execute them.

pub mod bench;
pub mod estimator;
pub mod executive;
pub mod lios;
pub mod tasks;
pub mod world;
