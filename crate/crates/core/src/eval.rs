//! In-memory evaluation of conjunctive queries by backtracking over body atoms.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::query::{ConjunctiveQuery, QueryError, Term};
use crate::relational::{Constant, Instance, RelationData};

/// Distinct answer tuples, width = head arity.
pub type AnswerSet = BTreeSet<Vec<Constant>>;

/// Support per assignment of the symbolic constants, listed in id order.
pub type GroupedSupport = BTreeMap<Vec<Constant>, usize>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error(transparent)]
    Schema(#[from] QueryError),
    #[error("query has symbolic constants; use grouped evaluation")]
    SymbolicConstants,
    #[error("query has no symbolic constants")]
    NoSymbolicConstants,
}

#[derive(Clone, Copy)]
enum Slot {
    Bound(u32),
    Var(usize),
}

struct PlanAtom<'i> {
    relation: &'i RelationData,
    args: Vec<Slot>,
}

struct Plan<'i> {
    atoms: Vec<PlanAtom<'i>>,
    /// Slots whose values make up one output row.
    output: Vec<usize>,
    width: usize,
}

impl<'i> Plan<'i> {
    /// `None` when some constant never occurs in the instance, so nothing matches.
    fn compile(q: &ConjunctiveQuery, inst: &'i Instance, output_syms: bool) -> Result<Option<Self>, EvalError> {
        q.check_schema(inst.schema())?;
        let nvars = q.var_bound() as usize;
        let width = nvars + q.sym_bound() as usize;
        let mut atoms = Vec::with_capacity(q.body().len());
        for atom in q.body() {
            let mut args = Vec::with_capacity(atom.args.len());
            for t in &atom.args {
                args.push(match t {
                    Term::Var(v) => Slot::Var(*v as usize),
                    Term::Sym(s) => Slot::Var(nvars + *s as usize),
                    Term::Const(c) => match inst.dictionary().id(c) {
                        Some(id) => Slot::Bound(id),
                        None => return Ok(None),
                    },
                });
            }
            atoms.push(PlanAtom {
                relation: inst.relation(&atom.relation).expect("schema checked"),
                args,
            });
        }
        let mut output: Vec<usize> = q.head().iter().map(|&v| v as usize).collect();
        if output_syms {
            output.extend(q.syms().into_iter().map(|s| nvars + s as usize));
        }
        Ok(Some(Plan {
            atoms,
            output,
            width,
        }))
    }
}

struct Matcher<'p, 'i> {
    plan: &'p Plan<'i>,
    values: Vec<Option<u32>>,
    done: Vec<bool>,
}

impl<'p, 'i> Matcher<'p, 'i> {
    fn new(plan: &'p Plan<'i>) -> Self {
        Matcher {
            plan,
            values: vec![None; plan.width],
            done: vec![false; plan.atoms.len()],
        }
    }

    fn value(&self, slot: Slot) -> Option<u32> {
        match slot {
            Slot::Bound(v) => Some(v),
            Slot::Var(i) => self.values[i],
        }
    }

    /// Candidate rows for an atom under the current bindings: the shortest
    /// index list among bound positions, or every row.
    fn candidates(&self, atom: &PlanAtom<'i>) -> Candidates<'i> {
        let mut best: Option<&'i [u32]> = None;
        for (col, &slot) in atom.args.iter().enumerate() {
            if let Some(v) = self.value(slot) {
                let rows = atom.relation.rows_with(col, v);
                if best.map_or(true, |b| rows.len() < b.len()) {
                    best = Some(rows);
                }
            }
        }
        match best {
            Some(rows) => Candidates::Rows(rows),
            None => Candidates::All(atom.relation.len()),
        }
    }

    fn pick(&self) -> Option<(usize, Candidates<'i>)> {
        let mut best: Option<(usize, Candidates<'i>)> = None;
        for (i, atom) in self.plan.atoms.iter().enumerate() {
            if self.done[i] {
                continue;
            }
            let c = self.candidates(atom);
            if best.as_ref().map_or(true, |(_, b)| c.len() < b.len()) {
                best = Some((i, c));
            }
        }
        best
    }

    /// Binds the unbound positions of atom `i` to `row`; returns the newly bound
    /// slots, or `None` (with nothing bound) when the row is inconsistent.
    fn bind(&mut self, i: usize, row: &[u32]) -> Option<Vec<usize>> {
        let mut fresh = Vec::new();
        for (&slot, &val) in self.plan.atoms[i].args.iter().zip(row) {
            let ok = match slot {
                Slot::Bound(v) => v == val,
                Slot::Var(s) => match self.values[s] {
                    Some(v) => v == val,
                    None => {
                        self.values[s] = Some(val);
                        fresh.push(s);
                        true
                    }
                },
            };
            if !ok {
                self.unbind(&fresh);
                return None;
            }
        }
        Some(fresh)
    }

    fn unbind(&mut self, slots: &[usize]) {
        for &s in slots {
            self.values[s] = None;
        }
    }

    fn output_bound(&self) -> bool {
        self.plan.output.iter().all(|&s| self.values[s].is_some())
    }

    fn output_row(&self) -> Vec<u32> {
        self.plan
            .output
            .iter()
            .map(|&s| self.values[s].expect("bound"))
            .collect()
    }

    /// Calls `emit` once per distinct output row reached by some matching.
    fn run(&mut self, seen: &mut HashSet<Vec<u32>>) {
        if self.output_bound() {
            let row = self.output_row();
            if !seen.contains(&row) && self.exists() {
                seen.insert(row);
            }
            return;
        }
        let Some((i, cands)) = self.pick() else {
            return;
        };
        let relation = self.plan.atoms[i].relation;
        self.done[i] = true;
        for r in cands.iter() {
            if let Some(fresh) = self.bind(i, relation.tuple(r)) {
                self.run(seen);
                self.unbind(&fresh);
            }
        }
        self.done[i] = false;
    }

    /// Whether the remaining atoms can be matched under the current bindings.
    fn exists(&mut self) -> bool {
        let Some((i, cands)) = self.pick() else {
            return true;
        };
        let relation = self.plan.atoms[i].relation;
        self.done[i] = true;
        let mut found = false;
        for r in cands.iter() {
            if let Some(fresh) = self.bind(i, relation.tuple(r)) {
                found = self.exists();
                self.unbind(&fresh);
                if found {
                    break;
                }
            }
        }
        self.done[i] = false;
        found
    }
}

#[derive(Clone, Copy)]
enum Candidates<'i> {
    Rows(&'i [u32]),
    All(usize),
}

impl<'i> Candidates<'i> {
    fn len(&self) -> usize {
        match self {
            Candidates::Rows(r) => r.len(),
            Candidates::All(n) => *n,
        }
    }

    fn iter(self) -> Box<dyn Iterator<Item = u32> + 'i> {
        match self {
            Candidates::Rows(r) => Box::new(r.iter().copied()),
            Candidates::All(n) => Box::new(0..n as u32),
        }
    }
}

fn distinct_rows(q: &ConjunctiveQuery, inst: &Instance, output_syms: bool) -> Result<HashSet<Vec<u32>>, EvalError> {
    let mut seen = HashSet::new();
    if let Some(plan) = Plan::compile(q, inst, output_syms)? {
        Matcher::new(&plan).run(&mut seen);
    }
    Ok(seen)
}

/// `q(I)`: the distinct head tuples over all matchings of `q` on `inst`.
pub fn evaluate(q: &ConjunctiveQuery, inst: &Instance) -> Result<AnswerSet, EvalError> {
    if q.has_syms() {
        return Err(EvalError::SymbolicConstants);
    }
    let dict = inst.dictionary();
    Ok(distinct_rows(q, inst, false)?
        .into_iter()
        .map(|row| row.into_iter().map(|v| dict.value(v).clone()).collect())
        .collect())
}

/// Number of distinct answer tuples.
pub fn support(q: &ConjunctiveQuery, inst: &Instance) -> Result<usize, EvalError> {
    if q.has_syms() {
        return Err(EvalError::SymbolicConstants);
    }
    Ok(distinct_rows(q, inst, false)?.len())
}

/// Support of `q` for every assignment of its symbolic constants, computed in
/// one pass; assignments with support below `minsup` are dropped.
pub fn support_grouped(q: &ConjunctiveQuery, inst: &Instance, minsup: usize) -> Result<GroupedSupport, EvalError> {
    if !q.has_syms() {
        return Err(EvalError::NoSymbolicConstants);
    }
    let arity = q.arity();
    let mut counts: HashMap<Vec<u32>, usize> = HashMap::new();
    for row in distinct_rows(q, inst, true)? {
        *counts.entry(row[arity..].to_vec()).or_insert(0) += 1;
    }
    let dict = inst.dictionary();
    Ok(counts
        .into_iter()
        .filter(|&(_, n)| n >= minsup)
        .map(|(key, n)| (key.into_iter().map(|v| dict.value(v).clone()).collect(), n))
        .collect())
}

/// Turns a grouped-support key back into a symbolic-constant assignment.
pub fn assignment(q: &ConjunctiveQuery, key: &[Constant]) -> BTreeMap<u32, Constant> {
    q.syms().into_iter().zip(key.iter().cloned()).collect()
}
