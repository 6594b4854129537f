//! Random schemas, queries and instances for property checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::query::{Atom, ConjunctiveQuery, Term};
use crate::relational::{Constant, Instance, Schema};

/// Size limits for generated queries.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_atoms: usize,
    pub max_vars: u32,
    /// Probability that an argument is a constant rather than a variable.
    pub constant_prob: f64,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_atoms: 3,
            max_vars: 4,
            constant_prob: 0.15,
        }
    }
}

/// `r(a,b)`, `s(a,b)`, `t(a)`.
pub fn small_schema() -> Schema {
    Schema::parse("r(a, b)\ns(a, b)\nt(a)").expect("valid schema")
}

pub fn small_domain() -> Vec<Constant> {
    ["a", "b", "c", "d"].into_iter().map(Constant::new).collect()
}

/// A query with 1..=max_atoms atoms and a random head of distinct variables
/// (possibly empty).
pub fn random_query<R: Rng>(rng: &mut R, schema: &Schema, domain: &[Constant], shape: &Shape) -> ConjunctiveQuery {
    let natoms = rng.gen_range(1..=shape.max_atoms);
    let body: Vec<Atom> = (0..natoms)
        .map(|_| {
            let rel = schema.relations().choose(rng).expect("non-empty schema");
            let args = (0..rel.arity())
                .map(|_| {
                    if rng.gen_bool(shape.constant_prob) {
                        Term::Const(domain.choose(rng).expect("non-empty domain").clone())
                    } else {
                        Term::Var(rng.gen_range(0..shape.max_vars))
                    }
                })
                .collect();
            Atom::new(&rel.name, args)
        })
        .collect();
    let mut vars: Vec<u32> = body
        .iter()
        .flat_map(|a| a.vars().collect::<Vec<_>>())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    vars.shuffle(rng);
    let k = rng.gen_range(0..=vars.len().min(3));
    vars.truncate(k);
    ConjunctiveQuery::new(vars, body).expect("head drawn from body variables")
}

/// Same as [`random_query`] but with `arity` head variables when the body
/// has that many; retries otherwise.
pub fn random_query_with_arity<R: Rng>(
    rng: &mut R,
    schema: &Schema,
    domain: &[Constant],
    shape: &Shape,
    arity: usize,
) -> ConjunctiveQuery {
    loop {
        let q = random_query(rng, schema, domain, shape);
        let mut vars: Vec<u32> = q.body_vars().into_iter().collect();
        if vars.len() < arity {
            continue;
        }
        vars.shuffle(rng);
        vars.truncate(arity);
        return q.with_head(vars);
    }
}

/// A random specialization of `q` with the same head: a few joins of
/// non-head variables into other variables, selections of non-head variables,
/// or extra atoms.
pub fn random_specialization<R: Rng>(rng: &mut R, q: &ConjunctiveQuery, schema: &Schema, domain: &[Constant], shape: &Shape) -> ConjunctiveQuery {
    let mut current = q.clone();
    for _ in 0..rng.gen_range(1..=2) {
        let vars: Vec<u32> = current.body_vars().into_iter().collect();
        let free: Vec<u32> = vars.iter().copied().filter(|v| !current.is_head_var(*v)).collect();
        match rng.gen_range(0..3) {
            0 if !free.is_empty() => {
                let v = *free.choose(rng).unwrap();
                let u = *vars.choose(rng).unwrap();
                current = current.map_terms(current.head().to_vec(), |t| match t {
                    Term::Var(x) if *x == v => Term::Var(u),
                    other => other.clone(),
                });
            }
            1 if !free.is_empty() => {
                let v = *free.choose(rng).unwrap();
                let c = domain.choose(rng).unwrap().clone();
                current = current.map_terms(current.head().to_vec(), |t| match t {
                    Term::Var(x) if *x == v => Term::Const(c.clone()),
                    other => other.clone(),
                });
            }
            _ => {
                let extra = random_query(rng, schema, domain, &Shape { max_atoms: 1, ..*shape });
                let shift = current.var_bound();
                let mut body = current.body().to_vec();
                for a in extra.body() {
                    body.push(Atom {
                        relation: a.relation.clone(),
                        args: a
                            .args
                            .iter()
                            .map(|t| match t {
                                // reuse an existing variable half of the time
                                Term::Var(x) if rng.gen_bool(0.5) && !vars.is_empty() => {
                                    Term::Var(vars[*x as usize % vars.len()])
                                }
                                Term::Var(x) => Term::Var(x + shift),
                                other => other.clone(),
                            })
                            .collect(),
                    });
                }
                current = current.with_body(body);
            }
        }
    }
    current
}

/// Up to `max_tuples` random tuples per relation over `domain`.
pub fn random_instance<R: Rng>(rng: &mut R, schema: &Schema, domain: &[Constant], max_tuples: usize) -> Instance {
    let mut b = Instance::builder(schema);
    for rel in schema.relations() {
        for _ in 0..rng.gen_range(0..=max_tuples) {
            let t: Vec<Constant> = (0..rel.arity())
                .map(|_| domain.choose(rng).expect("non-empty domain").clone())
                .collect();
            b.insert(&rel.name, t).expect("relation from schema");
        }
    }
    b.finish()
}
