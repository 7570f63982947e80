//! A reasoning engine for a first-order logic of transitions over forests of
//! linked bounded trees: parsing, evaluation on explicit finite structures,
//! the change order and its circumscription, a guarded deduction system, and
//! small-model satisfiability for the exists*forall* fragment.

pub mod change;
pub mod deduction;
pub mod circumscription;
pub mod cli;
pub mod fixtures;
pub mod knowledge;
pub mod model;
pub mod semantics;
pub mod solver;
pub mod syntax;

pub use model::Transition;
