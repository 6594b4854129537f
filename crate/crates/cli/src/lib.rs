//! Command-line front end: mining, evaluation and ad-hoc query tools.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cqmine::canonical::canonical_layout;
use cqmine::eval::assignment;
use cqmine::{
    emit_sql, evaluate, is_contained, is_diagonally_contained, load_instance, load_schema, parse_query,
    render_query, run_phase1, run_phase2, support, support_grouped, AssociationRule, ConjunctiveQuery, Instance,
    MinerConfig, MinerState, RuleConfig, Schema,
};

pub mod check;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) | CliError::Io(_) => EXIT_INPUT,
        }
    }
}

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "cqmine", version, about = "Frequent conjunctive queries and association rules over relational data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine frequent queries, then confident rules between them.
    Mine(MineArgs),
    /// Print the answers and support of a query.
    Eval(EvalArgs),
    /// Compare two queries by containment.
    Contain(ContainArgs),
    /// Print the SQL form of a query.
    EmitSql(EmitSqlArgs),
    /// Run randomized consistency checks of the query engine.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Debug, Args)]
pub struct SchemaArg {
    /// Schema file, one `name(col, ...)` per line.
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[command(flatten)]
    pub schema: SchemaArg,
    /// Directory holding one `<relation>.csv` per relation.
    #[arg(long)]
    pub data: PathBuf,
    /// Minimum support, an absolute answer count.
    #[arg(long, default_value_t = 2)]
    pub minsup: usize,
    /// Minimum confidence in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub minconf: f64,
    /// Maximum number of body atoms.
    #[arg(long, default_value_t = 2)]
    pub max_atoms: usize,
    /// Mine without constants.
    #[arg(long)]
    pub no_constants: bool,
    /// Count only queries over this atom, e.g. `likes(_,_)`.
    #[arg(long)]
    pub key_atom: Option<String>,
    /// Also report the rules `Q => Q`.
    #[arg(long)]
    pub include_trivial: bool,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write frequent.txt, rules.txt, frequent.json and rules.json here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Format of the reports printed when no output directory is given.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub schema: SchemaArg,
    #[arg(long)]
    pub data: PathBuf,
    /// Threshold for the grouped table of a query with symbolic constants.
    #[arg(long, default_value_t = 1)]
    pub minsup: usize,
    pub query: String,
}

#[derive(Debug, Args)]
pub struct ContainArgs {
    #[command(flatten)]
    pub schema: SchemaArg,
    pub q1: String,
    pub q2: String,
}

#[derive(Debug, Args)]
pub struct EmitSqlArgs {
    #[command(flatten)]
    pub schema: SchemaArg,
    pub query: String,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random query pairs.
    #[arg(long, default_value_t = 1000)]
    pub cases: usize,
}

fn schema_of(arg: &SchemaArg) -> Result<Schema, CliError> {
    load_schema(&arg.schema).map_err(input("schema"))
}

fn query_of(text: &str, schema: &Schema) -> Result<ConjunctiveQuery, CliError> {
    parse_query(text, schema).map_err(input("query"))
}

/// Runs a parsed command, writing its output to `out`.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Mine(args) => cmd_mine(args, out),
        Command::Eval(args) => cmd_eval(args, out),
        Command::Contain(args) => cmd_contain(args, out),
        Command::EmitSql(args) => cmd_emit_sql(args, out),
        Command::Check(args) => {
            let summary = check::run(args.seed, args.cases);
            out.write_all(summary.report().as_bytes())?;
            Ok(if summary.failures.is_empty() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}

/// The four reports of a mining run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reports {
    pub query_count: usize,
    pub rule_count: usize,
    pub frequent_text: String,
    pub rules_text: String,
    pub frequent_json: String,
    pub rules_json: String,
}

impl Reports {
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("frequent.txt"), &self.frequent_text)?;
        fs::write(dir.join("rules.txt"), &self.rules_text)?;
        fs::write(dir.join("frequent.json"), &self.frequent_json)?;
        fs::write(dir.join("rules.json"), &self.rules_json)
    }
}

#[derive(Serialize)]
struct ConfigDump<'a> {
    minsup: usize,
    max_atoms: usize,
    enable_constants: bool,
    key_atom: Option<&'a str>,
    minconf: f64,
    include_trivial: bool,
}

#[derive(Serialize)]
struct AssignmentDump {
    /// Symbolic constant name to value.
    assignment: std::collections::BTreeMap<String, String>,
    support: usize,
}

#[derive(Serialize)]
struct QueryDump {
    level: usize,
    query: String,
    /// Absent for queries with symbolic constants.
    support: Option<usize>,
    constants: Vec<AssignmentDump>,
}

#[derive(Serialize)]
struct RuleDump {
    antecedent: String,
    consequent: String,
    support: usize,
    antecedent_support: usize,
    confidence: f64,
}

#[derive(Serialize)]
struct FrequentFile<'a> {
    config: ConfigDump<'a>,
    queries: Vec<QueryDump>,
}

#[derive(Serialize)]
struct RulesFile<'a> {
    config: ConfigDump<'a>,
    rules: Vec<RuleDump>,
}

fn query_dumps(state: &MinerState) -> Vec<QueryDump> {
    let mut dumps: Vec<QueryDump> = state
        .records()
        .map(|r| {
            // the printed layout may number symbolic constants differently
            let shown = canonical_layout(&r.query, false);
            let constants = r
                .frequent_constants
                .iter()
                .map(|(key, &support)| AssignmentDump {
                    assignment: assignment(&r.query, key)
                        .into_iter()
                        .map(|(s, c)| (format!("$c{}", shown.sym_renaming[&s] + 1), c.as_str().to_string()))
                        .collect(),
                    support,
                })
                .collect();
            QueryDump {
                level: r.level,
                query: shown.query.to_string(),
                support: r.support,
                constants,
            }
        })
        .collect();
    dumps.sort_by(|a, b| (a.level, &a.query).cmp(&(b.level, &b.query)));
    dumps
}

fn frequent_text(queries: &[QueryDump]) -> String {
    let mut s = String::new();
    for q in queries {
        match q.support {
            Some(n) => writeln!(s, "{n}\t{}", q.query).unwrap(),
            None => {
                writeln!(s, "*\t{}", q.query).unwrap();
                for a in &q.constants {
                    let values: Vec<String> = a
                        .assignment
                        .iter()
                        .map(|(k, v)| format!("{k}='{}'", v.replace('\'', "''")))
                        .collect();
                    writeln!(s, "{}\t  {}", a.support, values.join(", ")).unwrap();
                }
            }
        }
    }
    s
}

fn rule_dumps(rules: &[AssociationRule]) -> Vec<RuleDump> {
    rules
        .iter()
        .map(|r| RuleDump {
            antecedent: render_query(&r.antecedent),
            consequent: render_query(&r.consequent),
            support: r.support,
            antecedent_support: r.antecedent_support,
            confidence: r.confidence,
        })
        .collect()
}

fn rules_text(rules: &[RuleDump]) -> String {
    let mut s = String::new();
    for r in rules {
        writeln!(s, "{:.4}\t{}\t{} => {}", r.confidence, r.support, r.antecedent, r.consequent).unwrap();
    }
    s
}

/// Mines `instance` and renders every report.
pub fn mine(instance: &Instance, config: &MinerConfig, rule_config: &RuleConfig) -> Result<Reports, CliError> {
    let state = run_phase1(instance, config).map_err(input("mining"))?;
    let rules = run_phase2(&state, instance, rule_config).map_err(input("rules"))?;
    let dump_config = || ConfigDump {
        minsup: config.minsup,
        max_atoms: config.max_atoms,
        enable_constants: config.enable_constants,
        key_atom: config.key_atom.as_deref(),
        minconf: rule_config.minconf,
        include_trivial: rule_config.include_trivial,
    };
    let queries = query_dumps(&state);
    let rules = rule_dumps(&rules);
    let frequent_text = frequent_text(&queries);
    let rules_text = rules_text(&rules);
    Ok(Reports {
        query_count: queries.len(),
        rule_count: rules.len(),
        frequent_text,
        rules_text,
        frequent_json: to_json(&FrequentFile { config: dump_config(), queries }),
        rules_json: to_json(&RulesFile { config: dump_config(), rules }),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn cmd_mine(args: &MineArgs, out: &mut dyn std::io::Write) -> Result<i32, CliError> {
    if args.minsup == 0 {
        return Err(CliError::Usage("--minsup must be at least 1".into()));
    }
    if args.max_atoms == 0 {
        return Err(CliError::Usage("--max-atoms must be at least 1".into()));
    }
    if !(args.minconf > 0.0 && args.minconf <= 1.0) {
        return Err(CliError::Usage(format!("--minconf must lie in (0, 1], got {}", args.minconf)));
    }
    if args.max_atoms > 3 {
        eprintln!("warning: --max-atoms {}; the search space grows combinatorially above 3", args.max_atoms);
    }
    if let Some(jobs) = args.jobs {
        // a second call fails once a pool exists; the first pool stays in use
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    let schema = schema_of(&args.schema)?;
    let instance = load_instance(&schema, &args.data).map_err(input("data"))?;
    let config = MinerConfig {
        minsup: args.minsup,
        max_atoms: args.max_atoms,
        enable_constants: !args.no_constants,
        key_atom: args.key_atom.clone(),
        modulo_head_permutation: true,
    };
    config.validate(&schema).map_err(|e| CliError::Usage(e.to_string()))?;
    let rule_config = RuleConfig {
        minconf: args.minconf,
        include_trivial: args.include_trivial,
    };
    let reports = mine(&instance, &config, &rule_config)?;
    match &args.out_dir {
        Some(dir) => {
            reports.write_to(dir)?;
            writeln!(
                out,
                "{} frequent queries, {} rules written to {}",
                reports.query_count,
                reports.rule_count,
                dir.display()
            )?;
        }
        None => match args.format {
            Format::Text => {
                writeln!(out, "# frequent queries")?;
                out.write_all(reports.frequent_text.as_bytes())?;
                writeln!(out, "# rules")?;
                out.write_all(reports.rules_text.as_bytes())?;
            }
            Format::Structured => {
                out.write_all(reports.frequent_json.as_bytes())?;
                out.write_all(reports.rules_json.as_bytes())?;
            }
        },
    }
    Ok(EXIT_OK)
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn std::io::Write) -> Result<i32, CliError> {
    let schema = schema_of(&args.schema)?;
    let instance = load_instance(&schema, &args.data).map_err(input("data"))?;
    let q = query_of(&args.query, &schema)?;
    if q.has_syms() {
        if args.minsup == 0 {
            return Err(CliError::Usage("--minsup must be at least 1".into()));
        }
        let grouped = support_grouped(&q, &instance, args.minsup).map_err(input("evaluation"))?;
        let names: Vec<String> = q.syms().iter().map(|s| format!("$c{}", s + 1)).collect();
        writeln!(out, "{}\tsupport", names.join("\t"))?;
        for (key, n) in &grouped {
            let values: Vec<&str> = key.iter().map(|c| c.as_str()).collect();
            writeln!(out, "{}\t{n}", values.join("\t"))?;
        }
    } else {
        let answers = evaluate(&q, &instance).map_err(input("evaluation"))?;
        for t in &answers {
            let values: Vec<&str> = t.iter().map(|c| c.as_str()).collect();
            writeln!(out, "{}", values.join("\t"))?;
        }
        let n = support(&q, &instance).map_err(input("evaluation"))?;
        writeln!(out, "support {n}")?;
    }
    Ok(EXIT_OK)
}

/// The verdict printed by `contain`.
pub fn compare(q1: &ConjunctiveQuery, q2: &ConjunctiveQuery) -> &'static str {
    match (is_contained(q1, q2), is_contained(q2, q1)) {
        (true, true) => "equivalent",
        (true, false) => "q1 ⊂ q2",
        (false, true) => "q2 ⊂ q1",
        (false, false) => {
            if is_diagonally_contained(q1, q2) {
                "q1 ⊂Δ q2 (diagonal only)"
            } else if is_diagonally_contained(q2, q1) {
                "q2 ⊂Δ q1 (diagonal only)"
            } else {
                "incomparable"
            }
        }
    }
}

fn cmd_contain(args: &ContainArgs, out: &mut dyn std::io::Write) -> Result<i32, CliError> {
    let schema = schema_of(&args.schema)?;
    let q1 = query_of(&args.q1, &schema)?;
    let q2 = query_of(&args.q2, &schema)?;
    writeln!(out, "{}", compare(&q1, &q2))?;
    Ok(EXIT_OK)
}

fn cmd_emit_sql(args: &EmitSqlArgs, out: &mut dyn std::io::Write) -> Result<i32, CliError> {
    let schema = schema_of(&args.schema)?;
    let q = query_of(&args.query, &schema)?;
    let sql = emit_sql(&q, &schema).map_err(input("query"))?;
    writeln!(out, "{sql}")?;
    Ok(EXIT_OK)
}
