//! Conjunctive queries: a head of distinct variables over a set of atoms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::relational::{Constant, Schema};

/// A body term. Variables and symbolic constants are numbered per query.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(u32),
    /// Placeholder for one unknown constant, shared by all its occurrences.
    Sym(u32),
    Const(Constant),
}

impl Term {
    pub fn constant(value: &str) -> Term {
        Term::Const(Constant::new(value))
    }

    pub fn as_var(&self) -> Option<u32> {
        match self {
            Term::Var(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub relation: Arc<str>,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(relation: &str, args: Vec<Term>) -> Self {
        Atom {
            relation: Arc::from(relation),
            args,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = u32> + '_ {
        self.args.iter().filter_map(Term::as_var)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query body is empty")]
    EmptyBody,
    #[error("head variable x{} does not occur in the body", .0 + 1)]
    UnsafeHead(u32),
    #[error("head variable x{} is repeated", .0 + 1)]
    DuplicateHeadVar(u32),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}` has arity {expected}, atom has {found} arguments")]
    Arity {
        relation: String,
        expected: usize,
        found: usize,
    },
}

/// `head :- body`. The body is kept sorted and free of duplicate atoms, so
/// two queries with the same atom set compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConjunctiveQuery {
    head: Vec<u32>,
    body: Vec<Atom>,
}

impl ConjunctiveQuery {
    /// Builds a validated query: non-empty body, distinct and safe head.
    pub fn new(head: Vec<u32>, body: Vec<Atom>) -> Result<Self, QueryError> {
        let q = Self::from_parts(head, body);
        q.validate()?;
        Ok(q)
    }

    /// Builds without validation; body is sorted and deduplicated.
    pub(crate) fn from_parts(head: Vec<u32>, mut body: Vec<Atom>) -> Self {
        body.sort();
        body.dedup();
        ConjunctiveQuery { head, body }
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if self.body.is_empty() {
            return Err(QueryError::EmptyBody);
        }
        let vars = self.body_vars();
        let mut seen = BTreeSet::new();
        for &h in &self.head {
            if !seen.insert(h) {
                return Err(QueryError::DuplicateHeadVar(h));
            }
            if !vars.contains(&h) {
                return Err(QueryError::UnsafeHead(h));
            }
        }
        Ok(())
    }

    pub fn check_schema(&self, schema: &Schema) -> Result<(), QueryError> {
        for atom in &self.body {
            let expected = schema
                .arity(&atom.relation)
                .ok_or_else(|| QueryError::UnknownRelation(atom.relation.to_string()))?;
            if expected != atom.args.len() {
                return Err(QueryError::Arity {
                    relation: atom.relation.to_string(),
                    expected,
                    found: atom.args.len(),
                });
            }
        }
        Ok(())
    }

    pub fn head(&self) -> &[u32] {
        &self.head
    }

    pub fn body(&self) -> &[Atom] {
        &self.body
    }

    pub fn arity(&self) -> usize {
        self.head.len()
    }

    pub fn body_vars(&self) -> BTreeSet<u32> {
        self.body.iter().flat_map(Atom::vars).collect()
    }

    pub fn syms(&self) -> BTreeSet<u32> {
        self.terms()
            .filter_map(|t| match t {
                Term::Sym(s) => Some(*s),
                _ => None,
            })
            .collect()
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        self.terms()
            .filter_map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn has_syms(&self) -> bool {
        self.terms().any(|t| matches!(t, Term::Sym(_)))
    }

    pub fn has_constants(&self) -> bool {
        self.terms().any(|t| matches!(t, Term::Const(_)))
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.body.iter().flat_map(|a| a.args.iter())
    }

    pub fn is_head_var(&self, v: u32) -> bool {
        self.head.contains(&v)
    }

    /// One past the largest variable id in use.
    pub fn var_bound(&self) -> u32 {
        self.head
            .iter()
            .copied()
            .chain(self.terms().filter_map(Term::as_var))
            .max()
            .map_or(0, |m| m + 1)
    }

    /// One past the largest symbolic-constant id in use.
    pub fn sym_bound(&self) -> u32 {
        self.syms().into_iter().max().map_or(0, |m| m + 1)
    }

    /// Number of occurrences of each variable in the body.
    pub fn occurrences(&self) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        for v in self.terms().filter_map(Term::as_var) {
            *counts.entry(v).or_insert(0) += 1;
        }
        counts
    }

    pub fn with_head(&self, head: Vec<u32>) -> Self {
        ConjunctiveQuery {
            head,
            body: self.body.clone(),
        }
    }

    pub(crate) fn with_body(&self, body: Vec<Atom>) -> Self {
        Self::from_parts(self.head.clone(), body)
    }

    /// Rewrites every body term.
    pub(crate) fn map_terms(&self, head: Vec<u32>, mut f: impl FnMut(&Term) -> Term) -> Self {
        let body = self
            .body
            .iter()
            .map(|a| Atom {
                relation: a.relation.clone(),
                args: a.args.iter().map(&mut f).collect(),
            })
            .collect();
        Self::from_parts(head, body)
    }

    /// Replaces each symbolic constant by the constant `assignment` gives it.
    pub fn instantiate(&self, assignment: &BTreeMap<u32, Constant>) -> Self {
        self.map_terms(self.head.clone(), |t| match t {
            Term::Sym(s) => assignment
                .get(s)
                .map(|c| Term::Const(c.clone()))
                .unwrap_or_else(|| t.clone()),
            other => other.clone(),
        })
    }
}

/// Raw printing: variable `i` as `x{i+1}`, symbolic constant `i` as `$c{i+1}`.
/// [`crate::render_query`] first renames into canonical order.
impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Q(")?;
        for (i, v) in self.head.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "x{}", v + 1)?;
        }
        f.write_str(") :- ")?;
        for (i, atom) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{atom}")?;
        }
        f.write_str(".")
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "x{}", v + 1),
            Term::Sym(s) => write!(f, "$c{}", s + 1),
            Term::Const(c) => write!(f, "'{}'", c.as_str().replace('\'', "''")),
        }
    }
}
