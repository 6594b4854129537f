//! Levelwise mining of frequent conjunctive queries (phase 1) and of
//! confident association rules between them (phase 2).

mod ops;
mod phase1;
mod phase2;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::canonical::canonical_form;
use crate::eval::{EvalError, GroupedSupport};
use crate::parse::{parse_key_atom, ParseError};
use crate::query::{ConjunctiveQuery, Term};
use crate::relational::{Constant, Schema};

pub use ops::{immediate_generalizations, initial_candidates, specializations};
pub use phase1::{prune_candidates, run_phase1};
pub use phase2::{antecedent_generalizations, run_phase2, AssociationRule, RuleConfig};

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("minsup must be at least 1")]
    ZeroMinsup,
    #[error("max_atoms must be at least 1")]
    ZeroMaxAtoms,
    #[error("minconf must lie in (0, 1], got {0}")]
    Minconf(f64),
    #[error("invalid key atom: {0}")]
    KeyAtom(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinerConfig {
    /// Absolute support threshold; a query is frequent when support >= minsup.
    pub minsup: usize,
    /// Bound on the number of atoms of the minimized body.
    pub max_atoms: usize,
    /// Allow selections (symbolic constants).
    pub enable_constants: bool,
    /// Obligatory atom pattern such as `visits(_,_)`; fixes the head to its variables.
    pub key_atom: Option<String>,
    /// Treat queries differing only in head order as the same pattern.
    pub modulo_head_permutation: bool,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            minsup: 2,
            max_atoms: 2,
            enable_constants: true,
            key_atom: None,
            modulo_head_permutation: true,
        }
    }
}

impl MinerConfig {
    /// Checks the thresholds and resolves the key atom to a relation name.
    pub fn validate(&self, schema: &Schema) -> Result<Option<String>, MinerError> {
        if self.minsup == 0 {
            return Err(MinerError::ZeroMinsup);
        }
        if self.max_atoms == 0 {
            return Err(MinerError::ZeroMaxAtoms);
        }
        self.key_atom
            .as_deref()
            .map(|k| parse_key_atom(k, schema))
            .transpose()
            .map_err(MinerError::from)
    }
}

/// A frequent query. Plain queries carry `support`; queries with symbolic
/// constants carry the support of every frequent assignment instead.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryRecord {
    pub query: ConjunctiveQuery,
    pub key: String,
    pub level: usize,
    pub support: Option<usize>,
    pub frequent_constants: GroupedSupport,
}

impl QueryRecord {
    pub fn is_symbolic(&self) -> bool {
        self.support.is_none()
    }

    /// Plain record as-is, or one instantiated query per frequent assignment.
    pub fn instances(&self) -> Vec<(ConjunctiveQuery, usize)> {
        match self.support {
            Some(s) => vec![(self.query.clone(), s)],
            None => self
                .frequent_constants
                .iter()
                .map(|(key, &n)| {
                    let assignment = crate::eval::assignment(&self.query, key);
                    (self.query.instantiate(&assignment), n)
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Level {
    /// Candidates in key order.
    pub candidates: Vec<ConjunctiveQuery>,
    /// Keys of the frequent candidates.
    pub frequent: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct MinerState {
    pub config: MinerConfig,
    pub levels: Vec<Level>,
    pub frequent_index: BTreeMap<String, QueryRecord>,
    pub infrequent_index: BTreeSet<String>,
}

impl MinerState {
    pub fn records(&self) -> impl Iterator<Item = &QueryRecord> {
        self.frequent_index.values()
    }

    pub fn key(&self, q: &ConjunctiveQuery) -> String {
        canonical_form(q, self.config.modulo_head_permutation).key
    }

    /// Support of a query that may contain constants, if it is known to be
    /// frequent: constants are abstracted to symbolic constants and the
    /// matching assignment is looked up.
    pub fn known_support(&self, q: &ConjunctiveQuery) -> Option<usize> {
        let (abstracted, values) = abstract_constants(q);
        let canon = canonical_form(&abstracted, self.config.modulo_head_permutation);
        let record = self.frequent_index.get(&canon.key)?;
        if let Some(s) = record.support {
            return values.is_empty().then_some(s);
        }
        let mut key = vec![None; values.len()];
        for (orig, value) in values.into_iter().enumerate() {
            let slot = *canon.sym_renaming.get(&(orig as u32))? as usize;
            *key.get_mut(slot)? = Some(value);
        }
        let key: Vec<Constant> = key.into_iter().collect::<Option<_>>()?;
        record.frequent_constants.get(&key).copied()
    }
}

/// Replaces each distinct constant by a fresh symbolic constant, returning the
/// constants in symbolic-constant id order. `q` must not contain symbolic constants.
pub(crate) fn abstract_constants(q: &ConjunctiveQuery) -> (ConjunctiveQuery, Vec<Constant>) {
    let mut values: Vec<Constant> = Vec::new();
    let abstracted = q.map_terms(q.head().to_vec(), |t| match t {
        Term::Const(c) => {
            let id = values.iter().position(|v| v == c).unwrap_or_else(|| {
                values.push(c.clone());
                values.len() - 1
            });
            Term::Sym(id as u32)
        }
        other => other.clone(),
    });
    (abstracted, values)
}
