//! Phase 2: confident association rules `A => Q` with `Q ⊆ A`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::canonical::{canonical_layout, render_query};
use crate::containment::{is_contained, minimize};
use crate::eval::support;
use crate::query::{Atom, ConjunctiveQuery, Term};
use crate::relational::{Instance, Schema};

use super::ops::Ops;
use super::{abstract_constants, MinerConfig, MinerError, MinerState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuleConfig {
    pub minconf: f64,
    pub include_trivial: bool,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            minconf: 1.0,
            include_trivial: false,
        }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<(), MinerError> {
        if self.minconf > 0.0 && self.minconf <= 1.0 {
            Ok(())
        } else {
            Err(MinerError::Minconf(self.minconf))
        }
    }

    fn confident(&self, consequent: usize, antecedent: usize) -> bool {
        consequent as f64 >= self.minconf * antecedent as f64 - 1e-9
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssociationRule {
    pub antecedent: ConjunctiveQuery,
    pub consequent: ConjunctiveQuery,
    /// Support of the consequent.
    pub support: usize,
    pub antecedent_support: usize,
    pub confidence: f64,
}

impl AssociationRule {
    fn new(antecedent: ConjunctiveQuery, consequent: ConjunctiveQuery, support: usize, antecedent_support: usize) -> Self {
        AssociationRule {
            antecedent,
            consequent,
            support,
            antecedent_support,
            confidence: support as f64 / antecedent_support as f64,
        }
    }

    /// `A => Q` with both sides rendered.
    pub fn text(&self) -> String {
        format!("{} => {}", render_query(&self.antecedent), render_query(&self.consequent))
    }

    /// Descending confidence, compared exactly.
    pub fn confidence_order(&self, other: &Self) -> Ordering {
        let lhs = self.support as u128 * other.antecedent_support as u128;
        let rhs = other.support as u128 * self.antecedent_support as u128;
        rhs.cmp(&lhs)
    }

    /// Descending confidence, then rule text.
    pub fn report_order(&self, other: &Self) -> Ordering {
        self.confidence_order(other).then_with(|| self.text().cmp(&other.text()))
    }
}

/// Positions in the body where `pred` holds.
fn positions(q: &ConjunctiveQuery, pred: impl Fn(&Term) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in q.body().iter().enumerate() {
        for (j, t) in a.args.iter().enumerate() {
            if pred(t) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Every way of giving a non-empty subset of `occ` a fresh variable; proper
/// subsets only when `proper` is set.
fn split(q: &ConjunctiveQuery, occ: &[(usize, usize)], proper: bool, out: &mut Vec<ConjunctiveQuery>) {
    let fresh = q.var_bound();
    let full = (1u64 << occ.len()) - 1;
    for mask in 1..=full {
        if proper && mask == full {
            continue;
        }
        let mut body = q.body().to_vec();
        for (bit, &(i, j)) in occ.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                body[i].args[j] = Term::Var(fresh);
            }
        }
        out.push(ConjunctiveQuery::from_parts(q.head().to_vec(), body));
    }
}

/// Inverse join and inverse selection steps.
fn relax(q: &ConjunctiveQuery, out: &mut Vec<ConjunctiveQuery>) {
    for (v, n) in q.occurrences() {
        if n >= 2 {
            split(q, &positions(q, |t| *t == Term::Var(v)), true, out);
        }
    }
    for c in q.constants() {
        let c = Term::Const(c);
        split(q, &positions(q, |t| *t == c), false, out);
    }
}

fn raw_antecedent_generalizations(q: &ConjunctiveQuery) -> Vec<ConjunctiveQuery> {
    let mut out = Vec::new();
    // inverse extension
    for i in 0..q.body().len() {
        let mut body = q.body().to_vec();
        body.remove(i);
        out.push(q.with_body(body));
    }
    relax(q, &mut out);
    // The same steps on an equivalent body carrying an extra copy of one atom
    // with some of its variables renamed apart; a core alone cannot be
    // relaxed into a query whose core maps two atoms onto one.
    let fresh = q.var_bound();
    for atom in q.body() {
        let vars: Vec<u32> = atom.vars().collect::<BTreeSet<_>>().into_iter().collect();
        for mask in 1u64..(1u64 << vars.len()) {
            let renamed: BTreeMap<u32, u32> = vars
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .enumerate()
                .map(|(k, (_, &v))| (v, fresh + k as u32))
                .collect();
            let copy = Atom {
                relation: atom.relation.clone(),
                args: atom
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => Term::Var(*renamed.get(v).unwrap_or(v)),
                        other => other.clone(),
                    })
                    .collect(),
            };
            let mut body = q.body().to_vec();
            body.push(copy);
            relax(&q.with_body(body), &mut out);
        }
    }
    out
}

fn generalizations_with(ops: &Ops, q: &ConjunctiveQuery) -> BTreeMap<String, ConjunctiveQuery> {
    let mut out = BTreeMap::new();
    let mut raw_seen = HashSet::new();
    for g in raw_antecedent_generalizations(q) {
        if g.body().is_empty() || g.validate().is_err() || !raw_seen.insert(g.to_string()) {
            continue;
        }
        let m = minimize(&g);
        if !ops.admits(&abstract_constants(&m).0) {
            continue;
        }
        let canon = canonical_layout(&m, false);
        if out.contains_key(&canon.key) {
            continue;
        }
        if is_contained(q, &m) && !is_contained(&m, q) {
            out.insert(canon.key, canon.query);
        }
    }
    out
}

/// Single inverse extension, join or selection steps on `q` that keep its
/// head, minimized and strictly more general. Head positions line up with
/// those of `q`.
pub fn antecedent_generalizations(
    q: &ConjunctiveQuery,
    schema: &Schema,
    config: &MinerConfig,
) -> Result<Vec<ConjunctiveQuery>, MinerError> {
    let ops = Ops::new(schema, config)?;
    let base = canonical_layout(&minimize(q), false).query;
    Ok(generalizations_with(&ops, &base).into_values().collect())
}

/// Every frequent query as a consequent: plain records and each frequent
/// instantiation of symbolic ones, minimized and deduplicated.
fn consequents(state: &MinerState) -> Vec<(ConjunctiveQuery, usize)> {
    let mut out: BTreeMap<String, (ConjunctiveQuery, usize)> = BTreeMap::new();
    for record in state.records() {
        for (q, n) in record.instances() {
            let m = minimize(&q);
            out.entry(state.key(&m))
                .or_insert_with(|| (canonical_layout(&m, false).query, n));
        }
    }
    out.into_values().collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for k in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (0..=p.len()).map(move |i| {
                    let mut q = p.clone();
                    q.insert(i, k);
                    q
                })
            })
            .collect();
    }
    out
}

fn permute_head(q: &ConjunctiveQuery, perm: &[usize]) -> ConjunctiveQuery {
    q.with_head(perm.iter().map(|&i| q.head()[i]).collect())
}

/// Head reorderings that map `q` onto itself.
fn automorphisms(q: &ConjunctiveQuery) -> Vec<Vec<usize>> {
    let own = canonical_layout(q, false).key;
    permutations(q.arity())
        .into_iter()
        .filter(|p| canonical_layout(&permute_head(q, p), false).key == own)
        .collect()
}

/// Identifies an antecedent up to equivalence and up to the symmetries of the
/// consequent's head, so `A => Q` and `πA => πQ = Q` count once.
fn antecedent_key(a: &ConjunctiveQuery, symmetries: &[Vec<usize>]) -> String {
    symmetries
        .iter()
        .map(|p| canonical_layout(&permute_head(a, p), false).key)
        .min()
        .expect("identity is a symmetry")
}

/// For each frequent query, a breadth-first walk over ever more general
/// antecedents, expanding only those whose rule is confident.
pub fn run_phase2(
    state: &MinerState,
    instance: &Instance,
    config: &RuleConfig,
) -> Result<Vec<AssociationRule>, MinerError> {
    config.validate()?;
    let ops = Ops::new(instance.schema(), &state.config)?;
    let memo: Mutex<HashMap<String, usize>> = Mutex::new(HashMap::new());
    // antecedents recur across consequents; they arrive in canonical layout
    let steps: Mutex<HashMap<String, Arc<Vec<ConjunctiveQuery>>>> = Mutex::new(HashMap::new());
    let generalize = |a: &ConjunctiveQuery| -> Arc<Vec<ConjunctiveQuery>> {
        let key = a.to_string();
        if let Some(g) = steps.lock().unwrap().get(&key) {
            return g.clone();
        }
        let g: Arc<Vec<ConjunctiveQuery>> = Arc::new(generalizations_with(&ops, a).into_values().collect());
        steps.lock().unwrap().insert(key, g.clone());
        g
    };
    let support_of = |a: &ConjunctiveQuery| -> Result<usize, MinerError> {
        if let Some(n) = state.known_support(a) {
            return Ok(n);
        }
        let key = canonical_layout(a, true).key;
        if let Some(&n) = memo.lock().unwrap().get(&key) {
            return Ok(n);
        }
        let n = support(a, instance)?;
        memo.lock().unwrap().insert(key, n);
        Ok(n)
    };

    let per_consequent: Vec<Vec<AssociationRule>> = consequents(state)
        .par_iter()
        .map(|(q, sq)| {
            let mut rules = Vec::new();
            if config.include_trivial {
                rules.push(AssociationRule::new(q.clone(), q.clone(), *sq, *sq));
            }
            let symmetries = automorphisms(q);
            let mut visited: BTreeSet<String> = BTreeSet::new();
            visited.insert(antecedent_key(q, &symmetries));
            let mut frontier = vec![q.clone()];
            while !frontier.is_empty() {
                let mut next = Vec::new();
                for a in &frontier {
                    for g in generalize(a).iter() {
                        if !visited.insert(antecedent_key(g, &symmetries)) {
                            continue;
                        }
                        let sg = support_of(g)?;
                        if config.confident(*sq, sg) {
                            rules.push(AssociationRule::new(g.clone(), q.clone(), *sq, sg));
                            next.push(g.clone());
                        }
                    }
                }
                frontier = next;
            }
            Ok(rules)
        })
        .collect::<Result<_, MinerError>>()?;

    let mut rules: Vec<AssociationRule> = per_consequent.into_iter().flatten().collect();
    rules.sort_by_cached_key(|r| r.text());
    rules.sort_by(|a, b| a.confidence_order(b));
    Ok(rules)
}
