//! Randomized self-checks of the query engine.

use std::fmt::Write as _;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use cqmine::random::{random_instance, random_query, random_query_with_arity, random_specialization, small_domain, small_schema, Shape};
use cqmine::{
    evaluate, is_contained, is_diagonally_contained, is_equivalent, minimize, support, ConjunctiveQuery, Constant,
    Instance, Schema, Term,
};

#[derive(Debug, Default)]
pub struct Property {
    pub name: &'static str,
    pub checked: usize,
    pub held: usize,
}

#[derive(Debug, Default)]
pub struct Summary {
    pub properties: Vec<Property>,
    pub failures: Vec<String>,
}

impl Summary {
    fn record(&mut self, name: &'static str, ok: bool, detail: impl FnOnce() -> String) {
        let i = match self.properties.iter().position(|p| p.name == name) {
            Some(i) => i,
            None => {
                self.properties.push(Property { name, ..Property::default() });
                self.properties.len() - 1
            }
        };
        self.properties[i].checked += 1;
        if ok {
            self.properties[i].held += 1;
        } else if self.failures.len() < 20 {
            self.failures.push(format!("{name}: {}", detail()));
        }
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        for p in &self.properties {
            writeln!(s, "{:<40} {}/{}", p.name, p.held, p.checked).unwrap();
        }
        for f in &self.failures {
            writeln!(s, "FAILED {f}").unwrap();
        }
        s
    }
}

/// The canonical database of `q`: its body with variables frozen to fresh
/// constants.
fn freeze(q: &ConjunctiveQuery, schema: &Schema) -> (Instance, Vec<Constant>) {
    let frozen = |v: u32| Constant::new(format!("\u{1}v{v}"));
    let mut b = Instance::builder(schema);
    for a in q.body() {
        let t: Vec<Constant> = a
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => frozen(*v),
                Term::Const(c) => c.clone(),
                Term::Sym(_) => unreachable!("random queries carry no symbolic constants"),
            })
            .collect();
        b.insert(&a.relation, t).expect("query over schema");
    }
    (b.finish(), q.head().iter().map(|&v| frozen(v)).collect())
}

/// `cases` random query pairs over a small schema, each checked against a
/// fresh random instance.
pub fn run(seed: u64, cases: usize) -> Summary {
    let mut rng = StdRng::seed_from_u64(seed);
    let schema = small_schema();
    let domain = small_domain();
    let shape = Shape::default();
    let mut summary = Summary::default();
    for _ in 0..cases {
        let q2 = random_query(&mut rng, &schema, &domain, &shape);
        let q1 = if rng.gen_bool(0.5) {
            random_specialization(&mut rng, &q2, &schema, &domain, &shape)
        } else {
            random_query_with_arity(&mut rng, &schema, &domain, &shape, q2.arity())
        };
        let inst = random_instance(&mut rng, &schema, &domain, 6);

        let (canonical_db, frozen_head) = freeze(&q1, &schema);
        let by_evaluation = evaluate(&q2, &canonical_db).expect("plain query").contains(&frozen_head);
        summary.record("containment matches canonical database", is_contained(&q1, &q2) == by_evaluation, || {
            format!("{q1} vs {q2}")
        });

        if is_contained(&q1, &q2) {
            let a1 = evaluate(&q1, &inst).expect("plain query");
            let a2 = evaluate(&q2, &inst).expect("plain query");
            summary.record("containment implies answer inclusion", a1.is_subset(&a2), || format!("{q1} vs {q2}"));
        }

        let keep = rng.gen_range(0..=q1.arity());
        let projected = q1.with_head(q1.head()[..keep].to_vec());
        for (a, b) in [(&q1, &q2), (&projected, &q2)] {
            if is_diagonally_contained(a, b) {
                let ok = support(a, &inst).expect("plain query") <= support(b, &inst).expect("plain query");
                summary.record("diagonal containment bounds support", ok, || format!("{a} vs {b}"));
            }
        }

        let m = minimize(&q2);
        summary.record("minimize preserves equivalence", is_equivalent(&m, &q2), || format!("{q2}"));
        summary.record("minimize is idempotent", minimize(&m) == m, || format!("{q2}"));
    }
    summary
}
