//! Brute-force reference implementations used to check the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cqmine::{
    canonical_key, minimize, AssociationRule, Atom, ConjunctiveQuery, Constant,
    Instance, MinerState, Schema, Term,
};

pub fn beer_schema() -> Schema {
    Schema::parse("likes(drinker, beer)\nvisits(drinker, bar)\nserves(bar, beer)").unwrap()
}

pub fn beer_instance() -> Instance {
    let schema = beer_schema();
    let mut b = Instance::builder(&schema);
    let rows: [(&str, [&str; 2]); 18] = [
        ("likes", ["Allen", "Duvel"]),
        ("likes", ["Allen", "Trappist"]),
        ("likes", ["Carol", "Duvel"]),
        ("likes", ["Bill", "Duvel"]),
        ("likes", ["Bill", "Trappist"]),
        ("likes", ["Bill", "Jupiler"]),
        ("visits", ["Allen", "Cheers"]),
        ("visits", ["Allen", "California"]),
        ("visits", ["Carol", "Cheers"]),
        ("visits", ["Carol", "California"]),
        ("visits", ["Carol", "Old Dutch"]),
        ("visits", ["Bill", "Cheers"]),
        ("serves", ["Cheers", "Duvel"]),
        ("serves", ["Cheers", "Trappist"]),
        ("serves", ["Cheers", "Jupiler"]),
        ("serves", ["California", "Duvel"]),
        ("serves", ["California", "Jupiler"]),
        ("serves", ["Old Dutch", "Trappist"]),
    ];
    for (rel, t) in rows {
        b.insert(rel, t).unwrap();
    }
    b.finish()
}

fn tuple_set(inst: &Instance) -> BTreeMap<String, BTreeSet<Vec<Constant>>> {
    inst.schema()
        .relations()
        .iter()
        .map(|r| (r.name.clone(), inst.tuples(&r.name).unwrap()))
        .collect()
}

fn vars_of(q: &ConjunctiveQuery) -> Vec<u32> {
    q.body_vars().into_iter().collect()
}

fn ground(t: &Term, val: &BTreeMap<u32, Constant>) -> Constant {
    match t {
        Term::Var(v) => val[v].clone(),
        Term::Const(c) => c.clone(),
        Term::Sym(_) => panic!("oracle works on queries without symbolic constants"),
    }
}

/// Every valuation of the query's variables over `domain` that is a matching.
pub fn matchings(
    q: &ConjunctiveQuery,
    tables: &BTreeMap<String, BTreeSet<Vec<Constant>>>,
    domain: &[Constant],
) -> Vec<BTreeMap<u32, Constant>> {
    let vars = vars_of(q);
    let mut out = Vec::new();
    let mut idx = vec![0usize; vars.len()];
    if domain.is_empty() && !vars.is_empty() {
        return out;
    }
    loop {
        let val: BTreeMap<u32, Constant> = vars
            .iter()
            .zip(&idx)
            .map(|(&v, &i)| (v, domain[i].clone()))
            .collect();
        let ok = q.body().iter().all(|a| {
            let t: Vec<Constant> = a.args.iter().map(|x| ground(x, &val)).collect();
            tables[&*a.relation].contains(&t)
        });
        if ok {
            out.push(val);
        }
        // odometer
        let mut k = 0;
        loop {
            if k == idx.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < domain.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Answer set by exhaustive enumeration of all valuations over the active domain.
pub fn brute_answers(q: &ConjunctiveQuery, inst: &Instance) -> BTreeSet<Vec<Constant>> {
    let tables = tuple_set(inst);
    let domain: Vec<Constant> = inst.all_constants().into_iter().collect();
    matchings(q, &tables, &domain)
        .into_iter()
        .map(|m| q.head().iter().map(|v| m[v].clone()).collect())
        .collect()
}

/// `q1 ⊆ q2` decided on the canonical database of `q1`: freeze its variables
/// into fresh constants and check that `q2` returns the frozen head.
pub fn canonical_db_contained(q1: &ConjunctiveQuery, q2: &ConjunctiveQuery) -> bool {
    if q1.arity() != q2.arity() {
        return false;
    }
    let frozen = |v: u32| Constant::new(format!("\u{1}frozen{v}"));
    let mut tables: BTreeMap<String, BTreeSet<Vec<Constant>>> = BTreeMap::new();
    for a in q1.body().iter().chain(q2.body()) {
        tables.entry(a.relation.to_string()).or_default();
    }
    for a in q1.body() {
        let t = a
            .args
            .iter()
            .map(|x| match x {
                Term::Var(v) => frozen(*v),
                Term::Const(c) => c.clone(),
                Term::Sym(_) => panic!("no symbolic constants"),
            })
            .collect();
        tables.get_mut(&*a.relation).unwrap().insert(t);
    }
    let target: Vec<Constant> = q1.head().iter().map(|&v| frozen(v)).collect();
    // join enumeration: pick one tuple per atom of q2
    fn search(
        atoms: &[Atom],
        tables: &BTreeMap<String, BTreeSet<Vec<Constant>>>,
        val: &mut BTreeMap<u32, Constant>,
        head: &[u32],
        target: &[Constant],
    ) -> bool {
        let Some((a, rest)) = atoms.split_first() else {
            return head.iter().zip(target).all(|(v, c)| &val[v] == c);
        };
        for t in &tables[&*a.relation] {
            let mut bound = Vec::new();
            let mut ok = true;
            for (x, c) in a.args.iter().zip(t) {
                match x {
                    Term::Const(k) => ok &= k == c,
                    Term::Var(v) => match val.get(v) {
                        Some(w) => ok &= w == c,
                        None => {
                            val.insert(*v, c.clone());
                            bound.push(*v);
                        }
                    },
                    Term::Sym(_) => unreachable!(),
                }
                if !ok {
                    break;
                }
            }
            if ok && search(rest, tables, val, head, target) {
                return true;
            }
            for v in bound {
                val.remove(&v);
            }
        }
        false
    }
    search(q2.body(), &tables, &mut BTreeMap::new(), q2.head(), &target)
}

/// Frequent mining-language query over the beer schema with its support.
#[derive(Clone, Debug)]
pub struct OracleQuery {
    pub query: ConjunctiveQuery,
    pub support: usize,
}

/// All queries of at most `max_atoms` (1 or 2) atoms over the beer schema,
/// with at most four variables (numbered by first occurrence), constants from
/// the column's active domain, and every non-empty head of distinct body
/// variables. Supports come from exhaustive valuation enumeration; the result
/// holds those with support >= minsup, keyed by equivalence class modulo head
/// permutation.
pub fn frequent_queries(inst: &Instance, minsup: usize, with_constants: bool) -> BTreeMap<String, OracleQuery> {
    let schema = inst.schema();
    let tables = tuple_set(inst);
    let domain: Vec<Constant> = inst.all_constants().into_iter().collect();
    let mut relation_lists: Vec<Vec<usize>> = Vec::new();
    let nrel = schema.relations().len();
    for a in 0..nrel {
        relation_lists.push(vec![a]);
        for b in a..nrel {
            relation_lists.push(vec![a, b]);
        }
    }
    let mut out: BTreeMap<String, OracleQuery> = BTreeMap::new();
    for rels in relation_lists {
        // column domains for every argument position
        let mut slots: Vec<(usize, usize)> = Vec::new();
        for (i, &r) in rels.iter().enumerate() {
            for c in 0..schema.relations()[r].arity() {
                slots.push((i, c));
            }
        }
        let col_domains: Vec<Vec<Constant>> = slots
            .iter()
            .map(|&(i, c)| {
                if with_constants {
                    inst.active_domain(&schema.relations()[rels[i]].name, c)
                        .unwrap()
                        .into_iter()
                        .collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let mut terms: Vec<Term> = Vec::new();
        fill(&slots, &col_domains, 0, 0, &mut terms, &mut |terms: &[Term]| {
            let mut pos = 0;
            let body: Vec<Atom> = rels
                .iter()
                .map(|&r| {
                    let rel = &schema.relations()[r];
                    let args = terms[pos..pos + rel.arity()].to_vec();
                    pos += rel.arity();
                    Atom::new(&rel.name, args)
                })
                .collect();
            let full = ConjunctiveQuery::new(Vec::new(), body).unwrap();
            let vars = vars_of(&full);
            if vars.is_empty() {
                return;
            }
            let ms = matchings(&full, &tables, &domain);
            for mask in 1u32..(1 << vars.len()) {
                let head: Vec<u32> = vars
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &v)| v)
                    .collect();
                let answers: BTreeSet<Vec<&Constant>> = ms
                    .iter()
                    .map(|m| head.iter().map(|v| &m[v]).collect())
                    .collect();
                if answers.len() < minsup {
                    continue;
                }
                let q = full.with_head(head);
                let key = canonical_key(&q, true);
                out.entry(key).or_insert(OracleQuery {
                    query: minimize(&q),
                    support: answers.len(),
                });
            }
        });
    }
    out
}

/// Restricted-growth assignment of terms to argument slots.
fn fill(
    slots: &[(usize, usize)],
    col_domains: &[Vec<Constant>],
    at: usize,
    used_vars: u32,
    terms: &mut Vec<Term>,
    emit: &mut dyn FnMut(&[Term]),
) {
    if at == slots.len() {
        emit(terms);
        return;
    }
    for v in 0..=used_vars.min(3) {
        terms.push(Term::Var(v));
        fill(slots, col_domains, at + 1, used_vars.max(v + 1), terms, emit);
        terms.pop();
    }
    for c in &col_domains[at] {
        terms.push(Term::Const(c.clone()));
        fill(slots, col_domains, at + 1, used_vars, terms, emit);
        terms.pop();
    }
}

/// Every frequent query the miner reports, instantiating symbolic records,
/// keyed by equivalence class modulo head permutation.
pub fn miner_frequent(state: &MinerState) -> BTreeMap<String, (ConjunctiveQuery, usize)> {
    let mut out = BTreeMap::new();
    for r in state.records() {
        for (q, n) in r.instances() {
            out.insert(canonical_key(&q, true), (minimize(&q), n));
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn permute(q: &ConjunctiveQuery, perm: &[usize]) -> ConjunctiveQuery {
    q.with_head(perm.iter().map(|&i| q.head()[i]).collect())
}

/// Identity of a rule up to equivalence of both sides and simultaneous
/// reordering of their heads.
pub fn rule_key(antecedent: &ConjunctiveQuery, consequent: &ConjunctiveQuery) -> (String, String) {
    permutations(consequent.arity())
        .into_iter()
        .map(|p| {
            (
                canonical_key(&permute(consequent, &p), false),
                canonical_key(&permute(antecedent, &p), false),
            )
        })
        .min()
        .unwrap()
}

/// Rules `A => Q` over all pairs of frequent classes with `Q ⊆ A` (for some
/// alignment of A's head), `A` not equivalent to `Q`, and confidence >= minconf.
/// Maps rule identity to (consequent support, antecedent support).
pub fn rules(frequent: &BTreeMap<String, OracleQuery>, minconf: f64) -> BTreeMap<(String, String), (usize, usize)> {
    let list: Vec<&OracleQuery> = frequent.values().collect();
    let mut out = BTreeMap::new();
    for q in &list {
        for a in &list {
            if a.query.arity() != q.query.arity() || a.support < q.support {
                continue;
            }
            if (q.support as f64) < minconf * a.support as f64 - 1e-9 {
                continue;
            }
            for p in permutations(a.query.arity()) {
                let pa = permute(&a.query, &p);
                if canonical_db_contained(&q.query, &pa) && !canonical_db_contained(&pa, &q.query) {
                    out.insert(rule_key(&pa, &q.query), (q.support, a.support));
                }
            }
        }
    }
    out
}

pub fn miner_rules(rules: &[AssociationRule]) -> BTreeMap<(String, String), (usize, usize)> {
    rules
        .iter()
        .map(|r| (rule_key(&r.antecedent, &r.consequent), (r.support, r.antecedent_support)))
        .collect()
}
