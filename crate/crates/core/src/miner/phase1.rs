//! Phase 1: levelwise search for all frequent queries.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;

use crate::canonical::Canonical;
use crate::containment::minimize;
use crate::eval::{support, support_grouped, GroupedSupport};
use crate::query::ConjunctiveQuery;
use crate::relational::{Constant, Instance, Schema};

use super::ops::Ops;
use super::{Level, MinerConfig, MinerError, MinerState, QueryRecord};

/// Assignments of some symbolic constants of a candidate that a frequent
/// generalization permits.
struct Constraint {
    syms: Vec<u32>,
    allowed: HashSet<Vec<Constant>>,
}

impl Constraint {
    fn permits(&self, q: &ConjunctiveQuery, key: &[Constant]) -> bool {
        let order: Vec<u32> = q.syms().into_iter().collect();
        let projected: Vec<Constant> = self
            .syms
            .iter()
            .map(|s| key[order.iter().position(|o| o == s).expect("symbol of q")].clone())
            .collect();
        self.allowed.contains(&projected)
    }
}

/// Whether some assignment satisfies every constraint at once.
fn satisfiable(constraints: &[Constraint]) -> bool {
    let mut partials: Vec<BTreeMap<u32, Constant>> = vec![BTreeMap::new()];
    for c in constraints {
        let mut next = Vec::new();
        for p in &partials {
            for tuple in &c.allowed {
                let consistent = c
                    .syms
                    .iter()
                    .zip(tuple)
                    .all(|(s, v)| p.get(s).map_or(true, |w| w == v));
                if consistent {
                    let mut merged = p.clone();
                    merged.extend(c.syms.iter().copied().zip(tuple.iter().cloned()));
                    next.push(merged);
                }
            }
        }
        next.sort();
        next.dedup();
        if next.is_empty() {
            return false;
        }
        partials = next;
    }
    true
}

/// `Some(constraints)` when every immediate generalization of `s` is frequent
/// (and the symbolic ones admit a common assignment), `None` otherwise.
fn admissible(ops: &Ops, index: &BTreeMap<String, QueryRecord>, s: &ConjunctiveQuery) -> Option<Vec<Constraint>> {
    let mut constraints = Vec::new();
    for g in ops.known_generalizations(s, |k| index.contains_key(k))? {
        let record = &index[&g.canon.key];
        if record.is_symbolic() {
            constraints.push(Constraint {
                syms: g.sym_origin,
                allowed: record.frequent_constants.keys().cloned().collect(),
            });
        }
    }
    satisfiable(&constraints).then_some(constraints)
}

/// Keeps the generated queries whose immediate generalizations are all
/// frequent in `state` and that were never candidates before.
pub fn prune_candidates(
    generated: &[ConjunctiveQuery],
    state: &MinerState,
    schema: &Schema,
) -> Result<Vec<ConjunctiveQuery>, MinerError> {
    let ops = Ops::new(schema, &state.config)?;
    let earlier: HashSet<String> = state
        .levels
        .iter()
        .flat_map(|l| l.candidates.iter().map(|q| state.key(q)))
        .collect();
    let mut out = BTreeMap::new();
    for q in generated {
        let m = minimize(q);
        let key = state.key(&m);
        if earlier.contains(&key) || out.contains_key(&key) {
            continue;
        }
        if admissible(&ops, &state.frequent_index, &m).is_some() {
            out.insert(key, m);
        }
    }
    Ok(out.into_values().collect())
}

enum Outcome {
    Plain(usize),
    Grouped(GroupedSupport),
}

/// Runs the levelwise search to exhaustion.
pub fn run_phase1(instance: &Instance, config: &MinerConfig) -> Result<MinerState, MinerError> {
    let ops = Ops::new(instance.schema(), config)?;
    let mut state = MinerState {
        config: config.clone(),
        levels: Vec::new(),
        frequent_index: BTreeMap::new(),
        infrequent_index: BTreeSet::new(),
    };
    let mut seen: HashSet<String> = HashSet::new();
    let mut current: Vec<(Canonical, Vec<Constraint>)> =
        ops.initial().into_values().map(|c| (c, Vec::new())).collect();

    while !current.is_empty() {
        let level_no = state.levels.len() + 1;
        seen.extend(current.iter().map(|(c, _)| c.key.clone()));

        let outcomes: Vec<Outcome> = current
            .par_iter()
            .map(|(c, constraints)| {
                let q = &c.query;
                if q.has_syms() {
                    let mut grouped = support_grouped(q, instance, config.minsup)?;
                    grouped.retain(|key, _| constraints.iter().all(|k| k.permits(q, key)));
                    Ok(Outcome::Grouped(grouped))
                } else {
                    Ok(Outcome::Plain(support(q, instance)?))
                }
            })
            .collect::<Result<_, MinerError>>()?;

        let mut level = Level::default();
        for ((c, _), outcome) in current.into_iter().zip(outcomes) {
            let (support, frequent_constants, frequent) = match outcome {
                Outcome::Plain(n) => (Some(n), GroupedSupport::new(), n >= config.minsup),
                Outcome::Grouped(g) => {
                    let f = !g.is_empty();
                    (None, g, f)
                }
            };
            if frequent {
                level.frequent.push(c.key.clone());
                state.frequent_index.insert(
                    c.key.clone(),
                    QueryRecord {
                        query: c.query.clone(),
                        key: c.key,
                        level: level_no,
                        support,
                        frequent_constants,
                    },
                );
            } else {
                state.infrequent_index.insert(c.key);
            }
            level.candidates.push(c.query);
        }

        let generated: Vec<BTreeMap<String, Canonical>> = level
            .frequent
            .par_iter()
            .map(|k| ops.specializations(&state.frequent_index[k].query))
            .collect();
        let mut fresh: BTreeMap<String, Canonical> = BTreeMap::new();
        for specs in generated {
            for (k, c) in specs {
                if !seen.contains(&k) {
                    fresh.entry(k).or_insert(c);
                }
            }
        }
        let index = &state.frequent_index;
        current = fresh
            .into_values()
            .collect::<Vec<_>>()
            .into_par_iter()
            .filter_map(|c| admissible(&ops, index, &c.query).map(|k| (c, k)))
            .collect();
        state.levels.push(level);
    }
    Ok(state)
}
