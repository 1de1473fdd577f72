//! `nullvl`: evaluate, translate, analyze and fuzz relational algebra with nulls.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use nullvl_core::algebra::{parse_expression, render_expression, Expression};
use nullvl_core::analyze::analyze;
use nullvl_core::fuzz::FuzzConfig;
use nullvl_core::harness::{replay, run_differential, Bundle, Family, Outcome};
use nullvl_core::kernel::{
    kernel_2vl, kernel_2vl_syntactic, kernel_3vl, kernel_4vl_example, kernel_grounded, parse_grounding, parse_kernel, Grounding,
    LogicKernel,
};
use nullvl_core::sql::{emit_sql, sql_to_algebra};
use nullvl_core::translate::Direction;
use nullvl_core::{eval, Database, Environment, EvalConfig};

#[derive(Parser)]
#[command(name = "nullvl", version, about = "Relational algebra with nulls under many logics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an expression over a database.
    Eval {
        /// 3vl, 2vl, 2vl-syn, grounded:<syntactic|le|empty|FILE> or mvl:<4vl|FILE>.
        #[arg(long, default_value = "3vl")]
        semantics: String,
        /// Expression text or a file holding it.
        expr: String,
        /// Database JSON file.
        db: PathBuf,
        /// Read the expression as SQL.
        #[arg(long)]
        sql: bool,
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
        /// Iteration cap for recursion.
        #[arg(long, default_value_t = nullvl_core::eval::DEFAULT_RECURSION_CAP)]
        recursion_cap: usize,
    },
    /// Translate an expression between semantics.
    Translate {
        /// 2to3, 3to2, gr-to-3, 3-to-gr or mvl-to-3.
        #[arg(long)]
        direction: String,
        expr: String,
        /// Database or schema JSON file.
        #[arg(long)]
        db: PathBuf,
        /// Grounding for gr-to-3 and 3-to-gr: syntactic, le, empty or a file.
        #[arg(long, default_value = "syntactic")]
        grounding: String,
        /// Kernel for mvl-to-3: 4vl or a file.
        #[arg(long, default_value = "4vl")]
        kernel: String,
        #[arg(long)]
        sql: bool,
        /// Print the result as SQL.
        #[arg(long)]
        emit_sql: bool,
        /// Print the rule trace and size ratio to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Report nullable attributes, null-free selections and the coincidence certificate.
    Analyze {
        expr: String,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        sql: bool,
        #[arg(long)]
        json: bool,
    },
    /// Lower a SQL query to the algebra.
    Sql2ra {
        file: String,
        #[arg(long)]
        db: PathBuf,
    },
    /// Rewrite a SQL query written for one logic into SQL for another.
    Rewrite {
        #[arg(long, default_value = "2vl")]
        from: String,
        #[arg(long, default_value = "3vl")]
        to: String,
        /// Only `generic` is supported.
        #[arg(long, default_value = "generic")]
        dialect: String,
        file: String,
        #[arg(long)]
        db: PathBuf,
    },
    /// Run a differential property family over a random corpus.
    Fuzz {
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 500)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        max_depth: usize,
        #[arg(long, default_value_t = 0.3)]
        null_rate: f64,
        #[arg(long, default_value_t = 6)]
        rows: usize,
        /// Directory for counterexample bundles.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Re-run a counterexample bundle.
    Replay { bundle: PathBuf },
}

fn text_arg(s: &str) -> Result<String> {
    let p = Path::new(s);
    if p.is_file() {
        fs::read_to_string(p).with_context(|| format!("reading {s}"))
    } else {
        Ok(s.to_string())
    }
}

fn load_db(p: &Path) -> Result<Database> {
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(Database::from_json_str(&text)?)
}

fn load_expr(s: &str, sql: bool, db: &Database) -> Result<Expression> {
    let text = text_arg(s)?;
    Ok(if sql { sql_to_algebra(&text, &db.schema)? } else { parse_expression(&text)? })
}

fn grounding(s: &str) -> Result<Grounding> {
    Ok(match s {
        "syntactic" => Grounding::syntactic_equality(),
        "le" => Grounding::le_example(),
        "empty" => Grounding::empty(),
        file => parse_grounding(&fs::read_to_string(file).with_context(|| format!("reading {file}"))?)?,
    })
}

fn mvl_kernel(s: &str) -> Result<LogicKernel> {
    Ok(match s {
        "4vl" => kernel_4vl_example(),
        "3vl" => kernel_3vl(),
        file => parse_kernel(&fs::read_to_string(file).with_context(|| format!("reading {file}"))?)?,
    })
}

fn semantics(s: &str) -> Result<LogicKernel> {
    Ok(match s {
        "3vl" => kernel_3vl(),
        "2vl" => kernel_2vl(),
        "2vl-syn" => kernel_2vl_syntactic(),
        _ => match s.split_once(':') {
            Some(("grounded", g)) => kernel_grounded(grounding(g)?)?,
            Some(("mvl", k)) => mvl_kernel(k)?,
            _ => bail!("unknown semantics `{s}`"),
        },
    })
}

fn direction(name: &str, g: &str, k: &str) -> Result<Direction> {
    Ok(match name {
        "2to3" => Direction::TwoToThree,
        "3to2" => Direction::ThreeToTwo,
        "gr-to-3" => Direction::GroundedToThree(grounding(g)?),
        "3-to-gr" => Direction::ThreeToGrounded(grounding(g)?),
        "mvl-to-3" => Direction::MvlToThree(mvl_kernel(k)?),
        _ => bail!("unknown direction `{name}`"),
    })
}

/// Runs a command; `Ok(false)` reports a property failure.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Eval { semantics: s, expr, db, sql, json, recursion_cap } => {
            let db = load_db(&db)?;
            let e = load_expr(&expr, sql, &db)?;
            let cfg = EvalConfig::new(semantics(&s)?).with_cap(recursion_cap);
            let bag = eval(&e, &db, &Environment::new(), &cfg)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&bag.to_json())?);
            } else {
                print!("{}", bag.canonical_text());
            }
        }
        Command::Translate { direction: d, expr, db, grounding: g, kernel: k, sql, emit_sql: as_sql, trace } => {
            let db = load_db(&db)?;
            let e = load_expr(&expr, sql, &db)?;
            let r = direction(&d, &g, &k)?.translate(&e, &db.schema)?;
            if as_sql {
                println!("{}", emit_sql(&r.output, &db.schema)?);
            } else {
                println!("{}", render_expression(&r.output));
            }
            if trace {
                for t in &r.provenance {
                    eprintln!("{}: {}", t.rule, t.source);
                }
                eprintln!("size ratio: {:.3}", r.size_ratio);
            }
        }
        Command::Analyze { expr, db, sql, json } => {
            let db = load_db(&db)?;
            let e = load_expr(&expr, sql, &db)?;
            let report = analyze(&e, &db.schema)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_table());
            }
        }
        Command::Sql2ra { file, db } => {
            let db = load_db(&db)?;
            println!("{}", render_expression(&sql_to_algebra(&text_arg(&file)?, &db.schema)?));
        }
        Command::Rewrite { from, to, dialect, file, db } => {
            if dialect != "generic" {
                bail!("unsupported dialect `{dialect}`");
            }
            let db = load_db(&db)?;
            let e = sql_to_algebra(&text_arg(&file)?, &db.schema)?;
            let dir = match (from.as_str(), to.as_str()) {
                ("2vl", "3vl") => Direction::TwoToThree,
                ("3vl", "2vl") => Direction::ThreeToTwo,
                _ => bail!("unsupported rewrite from {from} to {to}"),
            };
            println!("{}", emit_sql(&dir.translate(&e, &db.schema)?.output, &db.schema)?);
        }
        Command::Fuzz { family, cases, seed, max_depth, null_rate, rows, out, json } => {
            let family: Family = family.parse()?;
            let cfg = FuzzConfig { seed, cases, max_depth, null_rate, rows_per_relation: rows, ..FuzzConfig::default() };
            let summary = run_differential(family, &cfg);
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                for b in &summary.counterexamples {
                    fs::write(dir.join(format!("{}-{}-{}.json", b.family, b.seed, b.case)), b.to_json())?;
                }
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                println!("{summary}");
                for b in &summary.counterexamples {
                    println!("case {}: {}", b.case, b.message);
                }
            }
            return Ok(summary.ok());
        }
        Command::Replay { bundle } => {
            let text = fs::read_to_string(&bundle).with_context(|| format!("reading {}", bundle.display()))?;
            let b = Bundle::from_json(&text)?;
            return Ok(match replay(&b)? {
                Outcome::Pass { .. } => {
                    println!("pass");
                    true
                }
                Outcome::Skip { reason } => {
                    println!("skip: {reason}");
                    true
                }
                Outcome::Fail { message, left, right } => {
                    println!("fail: {message}");
                    if let (Some(l), Some(r)) = (left, right) {
                        print!("left:\n{}right:\n{}", l.canonical_text(), r.canonical_text());
                    }
                    false
                }
            });
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
