//! Levelwise discovery of frequent conjunctive queries and association rules
//! between them over a relational instance.

pub mod canonical;
pub mod containment;
pub mod eval;
pub mod miner;
pub mod parse;
pub mod query;
pub mod random;
pub mod relational;
pub mod sql;

pub use canonical::{canonical_form, canonical_key, render_query, Canonical};
pub use containment::{
    find_containment_mapping, is_contained, is_diagonally_contained, is_equivalent, minimize,
    HeadArityMismatch, Mapping,
};
pub use eval::{evaluate, support, support_grouped, AnswerSet, EvalError, GroupedSupport};
pub use miner::{
    antecedent_generalizations, immediate_generalizations, initial_candidates, prune_candidates,
    run_phase1, run_phase2, specializations, AssociationRule, MinerConfig, MinerError, MinerState,
    QueryRecord, RuleConfig,
};
pub use parse::{parse_key_atom, parse_query, ParseError};
pub use query::{Atom, ConjunctiveQuery, QueryError, Term};
pub use relational::{load_instance, load_schema, Constant, Instance, LoadError, Schema};
pub use sql::emit_sql;
