//! Branching bisimilarity for extended pushdown processes.

mod graph;
mod intern;

pub mod equivalence;
pub mod game;
pub mod lts;
pub mod ncm;
pub mod parse;
pub mod system;
pub mod tableau;
pub mod term;

pub use game::{Config, GameError, GameOptions, Side, StutterCap};
pub use lts::{accepts, reachable_lts, Exceeded, Explore, Lts, Outcome};
pub use parse::{parse_constant, parse_system, parse_term, print_system, print_term, ParseError, Printer};
pub use system::{
    ActionId, Flavor, FlavorTag, Label, PdaSystem, Pruner, Rule, SystemBuilder, SystemConstants, SystemError,
};
pub use term::{
    compose, compose_constants, cut, cut_tuple, ln, ln_constant, validate_rec_const, Constant, Cut, Node, Process,
    RecConstDef, RecName, RecTable, RecViolation, StateId, SymbolId, TermError, Tuple,
};
