//! Relational schema and instance storage.
//!
//! An [`Instance`] keeps every relation as a set of tuples. Constants are
//! interned into dense ids so the evaluator can work on `u32` slices, and each
//! column carries a hash index from value to the rows holding it.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Serialize, Serializer};
use thiserror::Error;

/// An uninterpreted constant. Two constants are equal iff their text is.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constant(Arc<str>);

impl Constant {
    pub fn new(value: impl AsRef<str>) -> Self {
        Constant(Arc::from(value.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Constant {
    fn from(s: &str) -> Self {
        Constant::new(s)
    }
}

impl Serialize for Constant {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no relations declared")]
    Empty,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("relation `{0}` declared more than once")]
    DuplicateRelation(String),
    #[error("relation `{relation}` declares arity {arity} but lists {columns} column names")]
    ArityMismatch {
        relation: String,
        arity: usize,
        columns: usize,
    },
    #[error("relation `{0}` must have at least one column")]
    ZeroArity(String),
    #[error("missing data file for relation `{relation}` ({path})")]
    MissingData { relation: String, path: PathBuf },
    #[error("{path}, row {row}: relation `{relation}` has arity {arity} but row has {width} fields")]
    RowWidth {
        relation: String,
        path: PathBuf,
        row: usize,
        arity: usize,
        width: usize,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("column {column} out of range for relation `{relation}` of arity {arity}")]
    ColumnOutOfRange {
        relation: String,
        column: usize,
        arity: usize,
    },
    #[error("tuple of width {width} inserted into relation `{relation}` of arity {arity}")]
    TupleWidth {
        relation: String,
        arity: usize,
        width: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSchema {
    pub name: String,
    pub columns: Vec<String>,
}

impl RelationSchema {
    pub fn arity(&self) -> usize {
        self.columns.len()
    }
}

/// The set of relation names with their column names. Positional access is
/// authoritative; column names are only used for SQL output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    relations: Vec<RelationSchema>,
    by_name: HashMap<String, usize>,
}

impl Schema {
    pub fn new(relations: Vec<RelationSchema>) -> Result<Self, LoadError> {
        if relations.is_empty() {
            return Err(LoadError::Empty);
        }
        let mut by_name = HashMap::new();
        for (i, rel) in relations.iter().enumerate() {
            if rel.columns.is_empty() {
                return Err(LoadError::ZeroArity(rel.name.clone()));
            }
            if by_name.insert(rel.name.clone(), i).is_some() {
                return Err(LoadError::DuplicateRelation(rel.name.clone()));
            }
        }
        Ok(Schema { relations, by_name })
    }

    /// Builds a schema from `(name, arity)` pairs with generated column names.
    pub fn with_arities<'a>(
        relations: impl IntoIterator<Item = (&'a str, usize)>,
    ) -> Result<Self, LoadError> {
        Schema::new(
            relations
                .into_iter()
                .map(|(name, arity)| RelationSchema {
                    name: name.to_string(),
                    columns: (1..=arity).map(|i| format!("c{i}")).collect(),
                })
                .collect(),
        )
    }

    /// Parses the text form: one `name(col1, col2, ...)` per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, LoadError> {
        let mut relations = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: &str| LoadError::Syntax {
                line: line_no,
                message: message.to_string(),
            };
            let open = line.find('(').ok_or_else(|| syntax("expected `(`"))?;
            let line = line.strip_suffix('.').unwrap_or(line).trim_end();
            let close = line
                .strip_suffix(')')
                .ok_or_else(|| syntax("expected `)` at end of declaration"))?;
            let name = line[..open].trim();
            if !is_identifier(name) {
                return Err(syntax("invalid relation name"));
            }
            let inner = &close[open + 1..];
            let columns: Vec<String> = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(|c| c.trim().to_string()).collect()
            };
            if let Some(bad) = columns.iter().find(|c| !is_identifier(c)) {
                return Err(syntax(&format!("invalid column name `{bad}`")));
            }
            relations.push(RelationSchema {
                name: name.to_string(),
                columns,
            });
        }
        Schema::new(relations)
    }

    pub fn relations(&self) -> &[RelationSchema] {
        &self.relations
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn relation(&self, name: &str) -> Option<&RelationSchema> {
        self.index_of(name).map(|i| &self.relations[i])
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.relation(name).map(RelationSchema::arity)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema, LoadError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Schema::parse(&text)
}

/// Interned constant dictionary.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    values: Vec<Constant>,
    ids: HashMap<Constant, u32>,
}

impl Dictionary {
    pub fn intern(&mut self, c: &Constant) -> u32 {
        if let Some(&id) = self.ids.get(c) {
            return id;
        }
        let id = self.values.len() as u32;
        self.values.push(c.clone());
        self.ids.insert(c.clone(), id);
        id
    }

    pub fn id(&self, c: &Constant) -> Option<u32> {
        self.ids.get(c).copied()
    }

    pub fn value(&self, id: u32) -> &Constant {
        &self.values[id as usize]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Tuples of one relation plus a per-column value index.
#[derive(Debug, Clone)]
pub struct RelationData {
    arity: usize,
    tuples: Vec<Box<[u32]>>,
    members: HashSet<Box<[u32]>>,
    columns: Vec<HashMap<u32, Vec<u32>>>,
}

impl RelationData {
    fn new(arity: usize, mut tuples: Vec<Box<[u32]>>) -> Self {
        tuples.sort();
        tuples.dedup();
        let mut columns = vec![HashMap::new(); arity];
        for (row, t) in tuples.iter().enumerate() {
            for (col, &v) in t.iter().enumerate() {
                columns[col]
                    .entry(v)
                    .or_insert_with(Vec::new)
                    .push(row as u32);
            }
        }
        let members = tuples.iter().cloned().collect();
        RelationData {
            arity,
            tuples,
            members,
            columns,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuple(&self, row: u32) -> &[u32] {
        &self.tuples[row as usize]
    }

    pub fn tuples(&self) -> &[Box<[u32]>] {
        &self.tuples
    }

    pub fn contains(&self, t: &[u32]) -> bool {
        self.members.contains(t)
    }

    /// Rows whose `column` holds `value`.
    pub fn rows_with(&self, column: usize, value: u32) -> &[u32] {
        self.columns[column]
            .get(&value)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// A database instance: one tuple set per schema relation. Immutable once built.
#[derive(Debug, Clone)]
pub struct Instance {
    schema: Schema,
    dict: Dictionary,
    relations: Vec<RelationData>,
}

impl Instance {
    pub fn builder(schema: &Schema) -> InstanceBuilder {
        InstanceBuilder {
            schema: schema.clone(),
            dict: Dictionary::default(),
            rows: vec![Vec::new(); schema.relations().len()],
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn relation(&self, name: &str) -> Option<&RelationData> {
        self.schema.index_of(name).map(|i| &self.relations[i])
    }

    pub fn relation_at(&self, index: usize) -> &RelationData {
        &self.relations[index]
    }

    /// Decoded tuples of a relation, sorted.
    pub fn tuples(&self, name: &str) -> Option<BTreeSet<Vec<Constant>>> {
        let rel = self.relation(name)?;
        Some(
            rel.tuples
                .iter()
                .map(|t| t.iter().map(|&v| self.dict.value(v).clone()).collect())
                .collect(),
        )
    }

    /// The constants occurring in one column (0-based) of a relation.
    pub fn active_domain(&self, relation: &str, column: usize) -> Result<BTreeSet<Constant>, LoadError> {
        let rel = self
            .relation(relation)
            .ok_or_else(|| LoadError::UnknownRelation(relation.to_string()))?;
        if column >= rel.arity {
            return Err(LoadError::ColumnOutOfRange {
                relation: relation.to_string(),
                column,
                arity: rel.arity,
            });
        }
        Ok(rel.columns[column]
            .keys()
            .map(|&v| self.dict.value(v).clone())
            .collect())
    }

    /// Every constant occurring anywhere in the instance.
    pub fn all_constants(&self) -> BTreeSet<Constant> {
        self.relations
            .iter()
            .flat_map(|r| r.tuples.iter().flat_map(|t| t.iter()))
            .map(|&v| self.dict.value(v).clone())
            .collect()
    }

    /// Writes one headerless `<relation>.csv` per relation into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<(), LoadError> {
        let dir = dir.as_ref();
        for rel in self.schema.relations() {
            let path = dir.join(format!("{}.csv", rel.name));
            let mut writer = csv::WriterBuilder::new()
                .has_headers(false)
                .from_path(&path)
                .map_err(|source| LoadError::Csv {
                    path: path.clone(),
                    source,
                })?;
            for t in self.tuples(&rel.name).unwrap_or_default() {
                writer
                    .write_record(t.iter().map(Constant::as_str))
                    .map_err(|source| LoadError::Csv {
                        path: path.clone(),
                        source,
                    })?;
            }
            writer.flush().map_err(|source| LoadError::Io {
                path: path.clone(),
                source,
            })?;
        }
        Ok(())
    }
}

pub struct InstanceBuilder {
    schema: Schema,
    dict: Dictionary,
    rows: Vec<Vec<Box<[u32]>>>,
}

impl InstanceBuilder {
    pub fn insert<C: Into<Constant>>(
        &mut self,
        relation: &str,
        tuple: impl IntoIterator<Item = C>,
    ) -> Result<&mut Self, LoadError> {
        let idx = self
            .schema
            .index_of(relation)
            .ok_or_else(|| LoadError::UnknownRelation(relation.to_string()))?;
        let arity = self.schema.relations()[idx].arity();
        let ids: Box<[u32]> = tuple
            .into_iter()
            .map(|c| self.dict.intern(&c.into()))
            .collect();
        if ids.len() != arity {
            return Err(LoadError::TupleWidth {
                relation: relation.to_string(),
                arity,
                width: ids.len(),
            });
        }
        self.rows[idx].push(ids);
        Ok(self)
    }

    pub fn finish(self) -> Instance {
        let relations = self
            .schema
            .relations()
            .iter()
            .zip(self.rows)
            .map(|(rel, rows)| RelationData::new(rel.arity(), rows))
            .collect();
        Instance {
            schema: self.schema,
            dict: self.dict,
            relations,
        }
    }
}

/// Loads `<dir>/<relation>.csv` for every relation of the schema.
pub fn load_instance(schema: &Schema, dir: impl AsRef<Path>) -> Result<Instance, LoadError> {
    let dir = dir.as_ref();
    let mut builder = Instance::builder(schema);
    for rel in schema.relations() {
        let path = dir.join(format!("{}.csv", rel.name));
        if !path.is_file() {
            return Err(LoadError::MissingData {
                relation: rel.name.clone(),
                path,
            });
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|source| LoadError::Csv {
                path: path.clone(),
                source,
            })?;
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|source| LoadError::Csv {
                path: path.clone(),
                source,
            })?;
            if record.len() == 1 && record.get(0) == Some("") && rel.arity() != 1 {
                continue; // blank line
            }
            if record.len() != rel.arity() {
                return Err(LoadError::RowWidth {
                    relation: rel.name.clone(),
                    path: path.clone(),
                    row: i + 1,
                    arity: rel.arity(),
                    width: record.len(),
                });
            }
            builder.insert(&rel.name, record.iter().map(Constant::new))?;
        }
    }
    Ok(builder.finish())
}
