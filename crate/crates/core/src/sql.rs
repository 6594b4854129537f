//! SQL rendering of conjunctive queries.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::query::{ConjunctiveQuery, QueryError, Term};
use crate::relational::Schema;

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Renders `q` as SQL over the tables of `schema`, one alias `t<i>` per body atom.
///
/// Plain queries become `SELECT DISTINCT`. Queries with symbolic constants
/// become a grouped count per symbolic-constant assignment, filtered with
/// `HAVING COUNT(*) >= :minsup`.
pub fn emit_sql(q: &ConjunctiveQuery, schema: &Schema) -> Result<String, QueryError> {
    q.check_schema(schema)?;
    let mut first: BTreeMap<Term, String> = BTreeMap::new();
    let mut from = Vec::new();
    let mut preds = Vec::new();
    for (i, atom) in q.body().iter().enumerate() {
        let rel = schema.relation(&atom.relation).expect("schema checked");
        from.push(format!("{} t{i}", rel.name));
        for (col, t) in rel.columns.iter().zip(&atom.args) {
            let here = format!("t{i}.{col}");
            match t {
                Term::Const(c) => preds.push(format!("{here} = {}", quote(c.as_str()))),
                _ => match first.get(t) {
                    Some(prev) => preds.push(format!("{here} = {prev}")),
                    None => {
                        first.insert(t.clone(), here);
                    }
                },
            }
        }
    }
    let column = |t: Term| first[&t].clone();
    let head: Vec<String> = q
        .head()
        .iter()
        .map(|&v| format!("{} AS x{}", column(Term::Var(v)), v + 1))
        .collect();
    let syms: Vec<u32> = q.syms().into_iter().collect();
    let mut body = format!(" FROM {}", from.join(", "));
    if !preds.is_empty() {
        write!(body, " WHERE {}", preds.join(" AND ")).unwrap();
    }

    if syms.is_empty() {
        let select = if head.is_empty() { "1 AS matched".to_string() } else { head.join(", ") };
        return Ok(format!("SELECT DISTINCT {select}{body}"));
    }
    let sym_cols: Vec<String> = syms.iter().map(|&s| column(Term::Sym(s))).collect();
    let sym_names: Vec<String> = syms.iter().map(|s| format!("c{}", s + 1)).collect();
    let having = "HAVING COUNT(*) >= :minsup";
    if q.body_vars().iter().all(|&v| q.is_head_var(v)) {
        // every matching yields a distinct row, so rows can be counted directly
        let select: Vec<String> = sym_cols
            .iter()
            .zip(&sym_names)
            .map(|(c, n)| format!("{c} AS {n}"))
            .collect();
        return Ok(format!(
            "SELECT {}, COUNT(*) AS support{body} GROUP BY {} {having}",
            select.join(", "),
            sym_cols.join(", ")
        ));
    }
    let inner: Vec<String> = head
        .into_iter()
        .chain(sym_cols.iter().zip(&sym_names).map(|(c, n)| format!("{c} AS {n}")))
        .collect();
    Ok(format!(
        "SELECT {names}, COUNT(*) AS support FROM (SELECT DISTINCT {}{body}) answers GROUP BY {names} {having}",
        inner.join(", "),
        names = sym_names.join(", ")
    ))
}
