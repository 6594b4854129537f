use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::SeedableRng;
use rusqlite::Connection;

use cqmine::random::{random_instance, random_query, small_domain, small_schema, Shape};
use cqmine::{emit_sql, evaluate, parse_query, support_grouped, Constant, Instance, Schema};

fn load(inst: &Instance) -> Connection {
    let conn = Connection::open_in_memory().unwrap();
    for rel in inst.schema().relations() {
        conn.execute(&format!("CREATE TABLE {} ({})", rel.name, rel.columns.join(", ")), [])
            .unwrap();
        let marks = vec!["?"; rel.arity()].join(", ");
        let mut insert = conn
            .prepare(&format!("INSERT INTO {} VALUES ({marks})", rel.name))
            .unwrap();
        for t in inst.tuples(&rel.name).unwrap() {
            let values: Vec<&str> = t.iter().map(Constant::as_str).collect();
            insert.execute(rusqlite::params_from_iter(values)).unwrap();
        }
    }
    conn
}

fn rows(conn: &Connection, sql: &str, minsup: Option<usize>) -> Vec<Vec<String>> {
    let mut stmt = conn.prepare(sql).unwrap();
    let width = stmt.column_count();
    let map = |row: &rusqlite::Row| {
        (0..width)
            .map(|i| {
                let v: rusqlite::types::Value = row.get(i)?;
                Ok(match v {
                    rusqlite::types::Value::Text(s) => s,
                    rusqlite::types::Value::Integer(n) => n.to_string(),
                    other => format!("{other:?}"),
                })
            })
            .collect::<Result<Vec<String>, rusqlite::Error>>()
    };
    match minsup {
        Some(m) => stmt
            .query_map(rusqlite::named_params! {":minsup": m as i64}, map)
            .unwrap()
            .map(Result::unwrap)
            .collect(),
        None => stmt.query_map([], map).unwrap().map(Result::unwrap).collect(),
    }
}

fn check(q: &cqmine::ConjunctiveQuery, inst: &Instance, conn: &Connection) {
    let sql = emit_sql(q, inst.schema()).unwrap();
    if q.has_syms() {
        let minsup = 2;
        let expected: BTreeMap<Vec<String>, usize> = support_grouped(q, inst, minsup)
            .unwrap()
            .into_iter()
            .map(|(k, n)| (k.iter().map(|c| c.as_str().to_string()).collect(), n))
            .collect();
        let actual: BTreeMap<Vec<String>, usize> = rows(conn, &sql, Some(minsup))
            .into_iter()
            .map(|mut r| {
                let n = r.pop().unwrap().parse().unwrap();
                (r, n)
            })
            .collect();
        assert_eq!(actual, expected, "{q}\n{sql}");
    } else {
        let expected: BTreeSet<Vec<String>> = evaluate(q, inst)
            .unwrap()
            .into_iter()
            .map(|t| t.iter().map(|c| c.as_str().to_string()).collect())
            .collect();
        let mut actual: BTreeSet<Vec<String>> = rows(conn, &sql, None).into_iter().collect();
        if q.head().is_empty() && !actual.is_empty() {
            actual = BTreeSet::from([Vec::new()]);
        }
        assert_eq!(actual, expected, "{q}\n{sql}");
    }
}

#[test]
fn beer_queries_agree_with_sqlite() {
    let schema = Schema::parse("likes(drinker, beer)\nvisits(drinker, bar)\nserves(bar, beer)").unwrap();
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/beer");
    let inst = cqmine::load_instance(&schema, dir).unwrap();
    let conn = load(&inst);
    for text in [
        "Q(x) :- likes(x,'Duvel').",
        "Q(x,y) :- likes(x,'Duvel'), visits(x,y), serves(y,'Duvel').",
        "Q(x1) :- likes(x1,$c1).",
        "Q(x,y) :- likes(x,y), visits(x,$c1).",
        "Q(a,b,c,d) :- likes(a,b), serves(c,d).",
    ] {
        check(&parse_query(text, &schema).unwrap(), &inst, &conn);
    }
}

#[test]
fn random_queries_agree_with_sqlite() {
    let mut rng = StdRng::seed_from_u64(11);
    let schema = small_schema();
    let domain = small_domain();
    let shape = Shape::default();
    for _ in 0..20 {
        let inst = random_instance(&mut rng, &schema, &domain, 8);
        let conn = load(&inst);
        for _ in 0..25 {
            let q = random_query(&mut rng, &schema, &domain, &shape);
            check(&q, &inst, &conn);
            // the same query with its constants made symbolic
            let mut text = q.to_string();
            for (i, c) in q.constants().iter().enumerate() {
                text = text.replace(&format!("'{}'", c.as_str()), &format!("$c{}", i + 1));
            }
            let symbolic = parse_query(&text, &schema).unwrap();
            check(&symbolic, &inst, &conn);
        }
    }
}
