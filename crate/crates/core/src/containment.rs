//! Containment mappings (homomorphisms) between conjunctive queries.
//!
//! `q1 ⊆ q2` holds iff there is a mapping from the terms of `q2` to the terms
//! of `q1` that fixes constants, sends every body atom of `q2` onto a body
//! atom of `q1`, and sends the head of `q2` pointwise onto the head of `q1`.
//!
//! Symbolic constants behave as parameters: one may map to a constant or to a
//! symbolic constant of the target, never to a variable, and two symbolic
//! constants never share a symbolic target.

use std::collections::BTreeMap;

use crate::query::{Atom, ConjunctiveQuery, Term};

/// How symbolic constants of the source may be mapped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymPolicy {
    /// Injective onto target symbolic constants, or onto constants.
    Parameter,
    /// Every symbolic constant maps to itself.
    Identity,
}

/// A witness: images of the source's variables and symbolic constants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mapping {
    pub vars: BTreeMap<u32, Term>,
    pub syms: BTreeMap<u32, Term>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("head arities differ ({0} vs {1})")]
pub struct HeadArityMismatch(pub usize, pub usize);

struct Search<'a> {
    policy: SymPolicy,
    vars: Vec<Option<Term>>,
    syms: Vec<Option<Term>>,
    used_target_syms: Vec<bool>,
    order: Vec<(&'a Atom, Vec<&'a Atom>)>,
}

impl<'a> Search<'a> {
    fn new(source: &'a ConjunctiveQuery, target: &'a ConjunctiveQuery, policy: SymPolicy) -> Self {
        let mut order: Vec<(&Atom, Vec<&Atom>)> = source
            .body()
            .iter()
            .map(|a| {
                let cands = target
                    .body()
                    .iter()
                    .filter(|b| b.relation == a.relation && b.args.len() == a.args.len())
                    .filter(|b| {
                        a.args.iter().zip(&b.args).all(|(s, t)| match s {
                            Term::Const(_) => s == t,
                            Term::Sym(_) => !matches!(t, Term::Var(_)),
                            Term::Var(_) => true,
                        })
                    })
                    .collect();
                (a, cands)
            })
            .collect();
        order.sort_by_key(|(_, c)| c.len());
        Search {
            policy,
            vars: vec![None; source.var_bound() as usize],
            syms: vec![None; source.sym_bound() as usize],
            used_target_syms: vec![false; target.sym_bound() as usize],
            order,
        }
    }

    /// Tries to extend the mapping with `s -> t`; pushes undo entries onto `trail`.
    fn bind(&mut self, s: &Term, t: &Term, trail: &mut Vec<Term>) -> bool {
        match s {
            Term::Const(_) => s == t,
            Term::Var(v) => match &self.vars[*v as usize] {
                Some(img) => img == t,
                None => {
                    self.vars[*v as usize] = Some(t.clone());
                    trail.push(s.clone());
                    true
                }
            },
            Term::Sym(c) => match &self.syms[*c as usize] {
                Some(img) => img == t,
                None => {
                    let ok = match (self.policy, t) {
                        (_, Term::Var(_)) => false,
                        (SymPolicy::Identity, _) => t == s,
                        (SymPolicy::Parameter, Term::Sym(d)) => !self.used_target_syms[*d as usize],
                        (SymPolicy::Parameter, Term::Const(_)) => true,
                    };
                    if ok {
                        if let Term::Sym(d) = t {
                            self.used_target_syms[*d as usize] = true;
                        }
                        self.syms[*c as usize] = Some(t.clone());
                        trail.push(s.clone());
                    }
                    ok
                }
            },
        }
    }

    fn undo(&mut self, trail: &mut Vec<Term>, keep: usize) {
        while trail.len() > keep {
            match trail.pop() {
                Some(Term::Var(v)) => self.vars[v as usize] = None,
                Some(Term::Sym(c)) => {
                    if let Some(Term::Sym(d)) = self.syms[c as usize].take() {
                        self.used_target_syms[d as usize] = false;
                    }
                }
                _ => {}
            }
        }
    }

    fn solve(&mut self, depth: usize, trail: &mut Vec<Term>) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let (atom, cands) = (self.order[depth].0, self.order[depth].1.clone());
        for cand in cands {
            let mark = trail.len();
            let ok = atom
                .args
                .iter()
                .zip(&cand.args)
                .all(|(s, t)| self.bind(s, t, trail));
            if ok && self.solve(depth + 1, trail) {
                return true;
            }
            self.undo(trail, mark);
        }
        false
    }
}

/// Searches for a mapping from `source` into `target`, head position `i` of
/// `source` going to head position `i` of `target`.
pub fn find_mapping_with(
    source: &ConjunctiveQuery,
    target: &ConjunctiveQuery,
    policy: SymPolicy,
) -> Result<Option<Mapping>, HeadArityMismatch> {
    if source.arity() != target.arity() {
        return Err(HeadArityMismatch(source.arity(), target.arity()));
    }
    let mut search = Search::new(source, target, policy);
    if search.order.iter().any(|(_, c)| c.is_empty()) {
        return Ok(None);
    }
    let mut trail = Vec::new();
    for (&s, &t) in source.head().iter().zip(target.head()) {
        if !search.bind(&Term::Var(s), &Term::Var(t), &mut trail) {
            return Ok(None);
        }
    }
    if !search.solve(0, &mut trail) {
        return Ok(None);
    }
    let collect = |m: &[Option<Term>]| {
        m.iter()
            .enumerate()
            .filter_map(|(i, t)| t.clone().map(|t| (i as u32, t)))
            .collect()
    };
    Ok(Some(Mapping {
        vars: collect(&search.vars),
        syms: collect(&search.syms),
    }))
}

/// A containment mapping from `q2` into `q1`, witnessing `q1 ⊆ q2`.
pub fn find_containment_mapping(
    q2: &ConjunctiveQuery,
    q1: &ConjunctiveQuery,
) -> Result<Option<Mapping>, HeadArityMismatch> {
    find_mapping_with(q2, q1, SymPolicy::Parameter)
}

/// `q1 ⊆ q2`. False when head arities differ.
pub fn is_contained(q1: &ConjunctiveQuery, q2: &ConjunctiveQuery) -> bool {
    matches!(find_containment_mapping(q2, q1), Ok(Some(_)))
}

pub fn is_equivalent(q1: &ConjunctiveQuery, q2: &ConjunctiveQuery) -> bool {
    is_contained(q1, q2) && is_contained(q2, q1)
}

/// `q1 ⊆Δ q2`: `q1` is contained in `q2` with its head cut down to some
/// selection of distinct head positions, in any order.
pub fn is_diagonally_contained(q1: &ConjunctiveQuery, q2: &ConjunctiveQuery) -> bool {
    let k = q1.arity();
    if k > q2.arity() {
        return false;
    }
    let mut chosen = Vec::with_capacity(k);
    let mut used = vec![false; q2.arity()];
    diagonal_search(q1, q2, &mut chosen, &mut used)
}

fn diagonal_search(
    q1: &ConjunctiveQuery,
    q2: &ConjunctiveQuery,
    chosen: &mut Vec<u32>,
    used: &mut [bool],
) -> bool {
    if chosen.len() == q1.arity() {
        return is_contained(q1, &q2.with_head(chosen.clone()));
    }
    for i in 0..q2.arity() {
        if used[i] {
            continue;
        }
        used[i] = true;
        chosen.push(q2.head()[i]);
        let found = diagonal_search(q1, q2, chosen, used);
        chosen.pop();
        used[i] = false;
        if found {
            return true;
        }
    }
    false
}

/// Computes the core: removes body atoms while the query stays equivalent
/// (head and symbolic constants fixed). Idempotent.
pub fn minimize(q: &ConjunctiveQuery) -> ConjunctiveQuery {
    let mut current = q.clone();
    'outer: loop {
        for i in 0..current.body().len() {
            let mut body = current.body().to_vec();
            body.remove(i);
            if body.is_empty() {
                continue;
            }
            let smaller = current.with_body(body);
            if smaller.validate().is_err() {
                continue;
            }
            if let Ok(Some(_)) = find_mapping_with(&current, &smaller, SymPolicy::Identity) {
                current = smaller;
                continue 'outer;
            }
        }
        return current;
    }
}
