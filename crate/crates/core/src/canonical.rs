//! Canonical forms: a representative per isomorphism class of queries.
//!
//! Body atoms are grouped by relation; within each group every ordering is
//! tried, variables and symbolic constants are renumbered by first occurrence,
//! and the least encoding wins. Isomorphic queries produce the same set of
//! candidate encodings, so they share the minimum. Because the key is taken
//! after minimization, and equivalent cores are isomorphic, equal keys
//! coincide with equivalence.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::containment::minimize;
use crate::query::{Atom, ConjunctiveQuery, Term};

/// A canonically renamed query plus the renaming of symbolic constants.
#[derive(Clone, Debug)]
pub struct Canonical {
    pub query: ConjunctiveQuery,
    pub key: String,
    /// Original symbolic-constant id to canonical id.
    pub sym_renaming: BTreeMap<u32, u32>,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Encoding {
    head: Vec<u32>,
    atoms: Vec<(Arc<str>, Vec<Term>)>,
}

/// Renames `q` into canonical layout without minimizing it.
///
/// With `modulo_head_permutation` the head is treated as a set: variables are
/// numbered from the body alone and the head is listed in ascending order.
pub fn canonical_layout(q: &ConjunctiveQuery, modulo_head_permutation: bool) -> Canonical {
    let mut groups: Vec<Vec<&Atom>> = Vec::new();
    for atom in q.body() {
        match groups.last_mut() {
            Some(g) if g[0].relation == atom.relation => g.push(atom),
            _ => groups.push(vec![atom]),
        }
    }
    let mut best: Option<(Encoding, BTreeMap<u32, u32>)> = None;
    let mut perms: Vec<Vec<&Atom>> = groups.iter().map(|g| g.clone()).collect();
    let mut counters: Vec<Vec<usize>> = groups.iter().map(|g| vec![0; g.len()]).collect();
    loop {
        let order: Vec<&Atom> = perms.iter().flatten().copied().collect();
        let candidate = encode(q, &order, modulo_head_permutation);
        if best.as_ref().map_or(true, |(b, _)| candidate.0 < *b) {
            best = Some(candidate);
        }
        // advance the mixed-radix odometer of per-group permutations (Heap's algorithm)
        if !advance(&mut perms, &mut counters) {
            break;
        }
    }
    let (enc, sym_renaming) = best.expect("at least one ordering");
    let body = enc
        .atoms
        .into_iter()
        .map(|(relation, args)| Atom { relation, args })
        .collect();
    let query = ConjunctiveQuery::from_parts(enc.head, body);
    let key = query.to_string();
    Canonical {
        query,
        key,
        sym_renaming,
    }
}

fn encode(
    q: &ConjunctiveQuery,
    order: &[&Atom],
    modulo_head_permutation: bool,
) -> (Encoding, BTreeMap<u32, u32>) {
    let mut vars: BTreeMap<u32, u32> = BTreeMap::new();
    let mut syms: BTreeMap<u32, u32> = BTreeMap::new();
    if !modulo_head_permutation {
        for &h in q.head() {
            let next = vars.len() as u32;
            vars.entry(h).or_insert(next);
        }
    }
    let atoms = order
        .iter()
        .map(|a| {
            let args = a
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => {
                        let next = vars.len() as u32;
                        Term::Var(*vars.entry(*v).or_insert(next))
                    }
                    Term::Sym(s) => {
                        let next = syms.len() as u32;
                        Term::Sym(*syms.entry(*s).or_insert(next))
                    }
                    c => c.clone(),
                })
                .collect();
            (a.relation.clone(), args)
        })
        .collect();
    let mut head: Vec<u32> = q.head().iter().map(|h| vars[h]).collect();
    if modulo_head_permutation {
        head.sort_unstable();
    }
    (Encoding { head, atoms }, syms)
}

/// Heap's algorithm, one step per group, carrying into the next group when a
/// group wraps around. Returns false once every combination has been produced.
fn advance<T>(perms: &mut [Vec<T>], counters: &mut [Vec<usize>]) -> bool {
    for (perm, c) in perms.iter_mut().zip(counters.iter_mut()) {
        let n = perm.len();
        let mut i = 1;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                c[i] += 1;
                return true;
            }
            c[i] = 0;
            i += 1;
        }
        // group exhausted: Heap's algorithm leaves it in a fixed permutation, and
        // a full cycle has been seen, so move on to the next group.
    }
    false
}

/// Minimizes and canonicalizes.
pub fn canonical_form(q: &ConjunctiveQuery, modulo_head_permutation: bool) -> Canonical {
    canonical_layout(&minimize(q), modulo_head_permutation)
}

/// Equal keys iff the queries are equivalent (up to head reordering when
/// `modulo_head_permutation` is set).
pub fn canonical_key(q: &ConjunctiveQuery, modulo_head_permutation: bool) -> String {
    canonical_form(q, modulo_head_permutation).key
}

/// Deterministic text for `q`: variables renamed `x1, x2, ...` head first,
/// atoms in canonical order. Does not minimize.
pub fn render_query(q: &ConjunctiveQuery) -> String {
    canonical_layout(q, false).key
}
