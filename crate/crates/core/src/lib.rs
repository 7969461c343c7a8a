//! Constraint-based test data generation for programs given as control-flow
//! graphs over fixed-width integers.
//!
//! A [`Program`] is searched for a path to a coverage goal; the path
//! constraints are solved exactly over the integers and a concrete input
//! vector is reported, or the goal is shown unreachable within a path bound.

pub mod cfg;
pub mod interval;
pub mod omega;
pub mod path;
pub mod solver;
pub mod symexec;
pub mod term;

pub use cfg::{
    execute_concrete, expand_short_circuit, parse_bool_expr, parse_program, BoolExpr, CfgError, ExecError, ExecOutcome,
    Execution, IntType, NodeId, Program, Value,
};
pub use omega::{satisfiable, Budget, Satisfiability, System};
pub use path::{
    construct_path, replay_witness, EngineError, GoalSpec, SearchConfig, SearchOutcome, SearchResult, SearchStats,
    Strategy, Target, Witness,
};
pub use solver::{Store, Verdict};
pub use term::{Constraint, LinearTerm, Relation, VarId};
