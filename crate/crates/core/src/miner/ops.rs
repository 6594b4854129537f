//! The specialization operations (extension, join, selection, projection),
//! their inverses, and the bounded mining language they stay within.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use crate::canonical::{canonical_layout, Canonical};
use crate::containment::{is_diagonally_contained, minimize};
use crate::query::{Atom, ConjunctiveQuery, Term};
use crate::relational::Schema;

use super::{MinerConfig, MinerError};

/// A generalization of some query `s`, with the correspondence between its
/// symbolic constants and those of `s`.
#[derive(Clone, Debug)]
pub(crate) struct Generalization {
    pub canon: Canonical,
    /// `sym_origin[i]` is the symbolic constant of `s` that became canonical
    /// symbolic constant `i` of the generalization.
    pub sym_origin: Vec<u32>,
}

pub(crate) struct Ops<'a> {
    config: &'a MinerConfig,
    schema: &'a Schema,
    key_relation: Option<String>,
    spec_cache: Mutex<HashMap<String, Arc<BTreeSet<String>>>>,
}

impl<'a> Ops<'a> {
    pub fn new(schema: &'a Schema, config: &'a MinerConfig) -> Result<Self, MinerError> {
        let key_relation = config.validate(schema)?;
        Ok(Ops {
            config,
            schema,
            key_relation,
            spec_cache: Mutex::new(HashMap::new()),
        })
    }

    fn keyed(&self) -> bool {
        self.key_relation.is_some()
    }

    /// Membership in the mining language, for an already minimized query.
    pub fn admits(&self, q: &ConjunctiveQuery) -> bool {
        if q.validate().is_err() || q.head().is_empty() || q.body().len() > self.config.max_atoms {
            return false;
        }
        if q.has_constants() || (!self.config.enable_constants && q.has_syms()) {
            return false;
        }
        match &self.key_relation {
            None => true,
            Some(key) => {
                let head: BTreeSet<u32> = q.head().iter().copied().collect();
                q.body().iter().any(|a| {
                    &*a.relation == key.as_str()
                        && a.args.len() == head.len()
                        && a.vars().count() == a.args.len()
                        && a.vars().collect::<BTreeSet<_>>() == head
                })
            }
        }
    }

    /// Minimizes, filters by language membership, and canonicalizes.
    fn finish(&self, q: &ConjunctiveQuery) -> Option<(ConjunctiveQuery, Canonical)> {
        if q.validate().is_err() {
            return None;
        }
        let m = minimize(q);
        if !self.admits(&m) {
            return None;
        }
        let canon = canonical_layout(&m, self.config.modulo_head_permutation);
        Some((m, canon))
    }

    pub fn initial(&self) -> BTreeMap<String, Canonical> {
        let mut out = BTreeMap::new();
        let relations = self.schema.relations();
        if let Some(key) = &self.key_relation {
            let arity = self.schema.arity(key).expect("validated");
            let vars: Vec<u32> = (0..arity as u32).collect();
            let q = ConjunctiveQuery::from_parts(
                vars.clone(),
                vec![Atom::new(key, vars.into_iter().map(Term::Var).collect())],
            );
            if let Some((_, c)) = self.finish(&q) {
                out.insert(c.key.clone(), c);
            }
            return out;
        }
        // multisets of relations of size max_atoms, as non-decreasing index sequences
        let mut choice = vec![0usize; self.config.max_atoms];
        loop {
            let mut next = 0u32;
            let body: Vec<Atom> = choice
                .iter()
                .map(|&r| {
                    let rel = &relations[r];
                    let args = (0..rel.arity())
                        .map(|_| {
                            next += 1;
                            Term::Var(next - 1)
                        })
                        .collect();
                    Atom::new(&rel.name, args)
                })
                .collect();
            let q = ConjunctiveQuery::from_parts((0..next).collect(), body);
            if let Some((_, c)) = self.finish(&q) {
                out.insert(c.key.clone(), c);
            }
            let Some(i) = (0..choice.len()).rev().find(|&i| choice[i] + 1 < relations.len()) else {
                break;
            };
            let v = choice[i] + 1;
            for c in &mut choice[i..] {
                *c = v;
            }
        }
        out
    }

    /// Join and selection steps on `q`.
    fn join_and_select(&self, q: &ConjunctiveQuery, out: &mut Vec<ConjunctiveQuery>) {
        let vars: Vec<u32> = q.body_vars().into_iter().collect();
        let head = q.head();
        // join: every occurrence of v becomes u
        for &u in &vars {
            for &v in &vars {
                if u == v {
                    continue;
                }
                let (hu, hv) = (q.is_head_var(u), q.is_head_var(v));
                if hu && hv && self.keyed() {
                    continue;
                }
                let new_head: Vec<u32> = if hu && hv {
                    head.iter().copied().filter(|&h| h != v).collect()
                } else {
                    head.iter().map(|&h| if h == v { u } else { h }).collect()
                };
                out.push(q.map_terms(new_head, |t| match t {
                    Term::Var(x) if *x == v => Term::Var(u),
                    other => other.clone(),
                }));
            }
        }

        // selection: every occurrence of v becomes a fresh symbolic constant
        if self.config.enable_constants {
            let sym = q.sym_bound();
            for &v in &vars {
                if q.is_head_var(v) && (self.keyed() || head.len() == 1) {
                    continue;
                }
                let new_head: Vec<u32> = head.iter().copied().filter(|&h| h != v).collect();
                out.push(q.map_terms(new_head, |t| match t {
                    Term::Var(x) if *x == v => Term::Sym(sym),
                    other => other.clone(),
                }));
            }
        }
    }

    /// Single-operation specializations before minimization.
    fn raw_specializations(&self, q: &ConjunctiveQuery) -> Vec<ConjunctiveQuery> {
        let mut out = Vec::new();
        let head = q.head();
        let fresh = q.var_bound();

        // extension: a new atom over fresh variables, outside the head
        if q.body().len() < self.config.max_atoms {
            for rel in self.schema.relations() {
                let mut body = q.body().to_vec();
                body.push(Atom::new(
                    &rel.name,
                    (0..rel.arity() as u32).map(|i| Term::Var(fresh + i)).collect(),
                ));
                let extended = q.with_body(body);
                // a redundant atom can still be joined or selected on
                if minimize(&extended).body().len() == q.body().len() {
                    self.join_and_select(&extended, &mut out);
                }
                out.push(extended);
            }
        }

        self.join_and_select(q, &mut out);

        // projection
        if !self.keyed() && head.len() > 1 {
            for &v in head {
                out.push(q.with_head(head.iter().copied().filter(|&h| h != v).collect()));
            }
        }
        out
    }

    /// Canonical specializations of `q`, each strictly diagonally contained in it.
    pub fn specializations(&self, q: &ConjunctiveQuery) -> BTreeMap<String, Canonical> {
        let mut out = BTreeMap::new();
        for s in self.raw_specializations(q) {
            let Some((m, canon)) = self.finish(&s) else {
                continue;
            };
            if out.contains_key(&canon.key) {
                continue;
            }
            if is_diagonally_contained(&m, q) && !is_diagonally_contained(q, &m) {
                out.insert(canon.key.clone(), canon);
            }
        }
        out
    }

    fn specialization_keys(&self, g: &Canonical) -> Arc<BTreeSet<String>> {
        if let Some(hit) = self.spec_cache.lock().unwrap().get(&g.key) {
            return hit.clone();
        }
        let keys: Arc<BTreeSet<String>> =
            Arc::new(self.specializations(&g.query).into_keys().collect());
        self.spec_cache
            .lock()
            .unwrap()
            .entry(g.key.clone())
            .or_insert(keys)
            .clone()
    }

    fn head_variants(&self, head: &[u32], w: u32) -> Vec<Vec<u32>> {
        if self.config.modulo_head_permutation {
            let mut h = head.to_vec();
            h.push(w);
            return vec![h];
        }
        (0..=head.len())
            .map(|i| {
                let mut h = head.to_vec();
                h.insert(i, w);
                h
            })
            .collect()
    }

    /// Single-step inverse operations before minimization.
    fn raw_generalizations(&self, s: &ConjunctiveQuery) -> Vec<ConjunctiveQuery> {
        let mut out = Vec::new();
        let head = s.head();
        let fresh = s.var_bound();
        let occurrences = s.occurrences();

        // inverse extension: drop an atom of distinct variables used nowhere else
        for (i, atom) in s.body().iter().enumerate() {
            let own: BTreeSet<u32> = atom.vars().collect();
            let isolated = own.len() == atom.args.len()
                && own.iter().all(|v| occurrences[v] == 1 && !s.is_head_var(*v));
            if isolated && s.body().len() > 1 {
                let mut body = s.body().to_vec();
                body.remove(i);
                out.push(s.with_body(body));
            }
        }

        // inverse join: a proper subset of a variable's occurrences gets a fresh variable
        let positions: Vec<(usize, usize)> = s
            .body()
            .iter()
            .enumerate()
            .flat_map(|(i, a)| (0..a.args.len()).map(move |j| (i, j)))
            .collect();
        for (&v, &count) in &occurrences {
            if count < 2 {
                continue;
            }
            let occ: Vec<(usize, usize)> = positions
                .iter()
                .copied()
                .filter(|&(i, j)| s.body()[i].args[j] == Term::Var(v))
                .collect();
            for mask in 1u64..(1u64 << occ.len()) - 1 {
                let mut body = s.body().to_vec();
                for (bit, &(i, j)) in occ.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        body[i].args[j] = Term::Var(fresh);
                    }
                }
                let split = ConjunctiveQuery::from_parts(head.to_vec(), body);
                if s.is_head_var(v) && !self.keyed() {
                    for h in self.head_variants(head, fresh) {
                        out.push(split.with_head(h));
                    }
                }
                out.push(split);
            }
        }

        // inverse selection: a symbolic constant becomes a fresh variable
        for c in s.syms() {
            let relaxed = s.map_terms(head.to_vec(), |t| match t {
                Term::Sym(x) if *x == c => Term::Var(fresh),
                other => other.clone(),
            });
            if !self.keyed() {
                for h in self.head_variants(head, fresh) {
                    out.push(relaxed.with_head(h));
                }
            }
            out.push(relaxed);
        }

        // inverse projection
        if !self.keyed() {
            for v in s.body_vars() {
                if !s.is_head_var(v) {
                    for h in self.head_variants(head, v) {
                        out.push(s.with_head(h));
                    }
                }
            }
        }
        out
    }

    /// Canonical in-language results of one inverse operation on `s` that
    /// are strictly more general than `s`.
    fn more_general(&self, s: &ConjunctiveQuery) -> BTreeMap<String, Generalization> {
        let mut out: BTreeMap<String, Generalization> = BTreeMap::new();
        for g in self.raw_generalizations(s) {
            let Some((m, canon)) = self.finish(&g) else {
                continue;
            };
            if out.contains_key(&canon.key) {
                continue;
            }
            if !is_diagonally_contained(s, &m) || is_diagonally_contained(&m, s) {
                continue;
            }
            let mut sym_origin = vec![0; canon.sym_renaming.len()];
            for (&orig, &new) in &canon.sym_renaming {
                sym_origin[new as usize] = orig;
            }
            out.insert(canon.key.clone(), Generalization { canon, sym_origin });
        }
        out
    }

    /// The in-language queries one inverse operation away from `s` that are
    /// strictly more general and from which `s` is generated by a forward
    /// operation.
    pub fn generalizations(&self, s: &ConjunctiveQuery) -> Vec<Generalization> {
        let own = canonical_layout(s, self.config.modulo_head_permutation).key;
        self.more_general(s)
            .into_values()
            .filter(|g| self.specialization_keys(&g.canon).contains(&own))
            .collect()
    }

    /// The generalizations of `s` for which `known` holds, or `None` when some
    /// generalization is not known. Known queries need no forward check since
    /// every query more general than a frequent one is frequent.
    pub fn known_generalizations(&self, s: &ConjunctiveQuery, known: impl Fn(&str) -> bool) -> Option<Vec<Generalization>> {
        let own = canonical_layout(s, self.config.modulo_head_permutation).key;
        let mut out = Vec::new();
        for g in self.more_general(s).into_values() {
            if known(&g.canon.key) {
                out.push(g);
            } else if self.specialization_keys(&g.canon).contains(&own) {
                return None;
            }
        }
        Some(out)
    }
}

/// The most general queries of the language: cross products of `max_atoms`
/// atoms over distinct variables, all in the head, or the key atom alone.
pub fn initial_candidates(schema: &Schema, config: &MinerConfig) -> Result<Vec<ConjunctiveQuery>, MinerError> {
    Ok(Ops::new(schema, config)?
        .initial()
        .into_values()
        .map(|c| c.query)
        .collect())
}

/// Canonical single-operation specializations of `q`.
pub fn specializations(
    q: &ConjunctiveQuery,
    schema: &Schema,
    config: &MinerConfig,
) -> Result<Vec<ConjunctiveQuery>, MinerError> {
    let ops = Ops::new(schema, config)?;
    let m = minimize(q);
    Ok(ops.specializations(&m).into_values().map(|c| c.query).collect())
}

/// Canonical immediate generalizations of `q` within the language.
pub fn immediate_generalizations(
    q: &ConjunctiveQuery,
    schema: &Schema,
    config: &MinerConfig,
) -> Result<Vec<ConjunctiveQuery>, MinerError> {
    let ops = Ops::new(schema, config)?;
    let m = minimize(q);
    Ok(ops.generalizations(&m).into_iter().map(|g| g.canon.query).collect())
}
