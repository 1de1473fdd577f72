use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn nullvl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nullvl")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn eval_sql_under_each_logic() {
    let o = nullvl(&["eval", "--sql", &data("q1.sql"), &data("rs.json")]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert_eq!(stdout(&o).trim(), "(empty)");
    let o = nullvl(&["eval", "--semantics", "2vl", "--sql", &data("q1.sql"), &data("rs.json")]);
    assert_eq!(code(&o), 0);
    let rows: Vec<_> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(rows.len(), 2, "{rows:?}");
    let o = nullvl(&["eval", "--sql", &data("q2.sql"), &data("rs.json")]);
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = nullvl(&["eval", "--sql", &data("q4.sql"), &data("r_null.json")]);
    assert_eq!(stdout(&o).trim(), "(NULL)");
}

#[test]
fn eval_under_file_kernel_and_grounding() {
    let e = "(select (cmp (col R.A) = (col R.A)) (base R))";
    for s in [format!("mvl:{}", data("kernel_4vl.json")), format!("grounded:{}", data("grounding_le.json")), "grounded:syntactic".into()] {
        let o = nullvl(&["eval", "--semantics", &s, e, &data("rs.json")]);
        assert_eq!(code(&o), 0, "{s}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn translate_and_rewrite_add_null_guards() {
    let o = nullvl(&["translate", "--direction", "2to3", "--sql", &data("q1.sql"), "--db", &data("rs.json")]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("(isnull (col R.A))"), "{}", stdout(&o));
    let o = nullvl(&["rewrite", "--from", "2vl", "--to", "3vl", &data("q1.sql"), "--db", &data("rs.json")]);
    assert_eq!(code(&o), 0);
    let sql = stdout(&o);
    assert!(sql.contains("IS NULL") && sql.contains("IS NOT NULL"), "{sql}");
    let o = nullvl(&["translate", "--direction", "2to3", "--sql", "--trace", &data("q1.sql"), "--db", &data("rs.json")]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("size ratio"));
}

#[test]
fn analyze_certifies_the_aggregate_query() {
    let o = nullvl(&["analyze", "--sql", "--json", &data("q5.sql"), "--db", &data("tpch.json")]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).expect("json report");
    assert_eq!(report["certified"], serde_json::Value::Bool(true), "{report}");
}

#[test]
fn sql2ra_prints_the_algebra() {
    let o = nullvl(&["sql2ra", &data("q4.sql"), "--db", &data("rs.json")]);
    assert_eq!(stdout(&o).trim(), "(distinct (base R))");
}

#[test]
fn errors_exit_with_two() {
    let o = nullvl(&["eval", "--sql", "SELECT R.A FROM R ORDER BY R.A", &data("rs.json")]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ORDER BY"));
    let o = nullvl(&["eval", "--semantics", "5vl", "(base R)", &data("rs.json")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn fuzz_passes_and_replay_reports_failures() {
    let dir = std::env::temp_dir().join(format!("nullvl-cli-{}", std::process::id()));
    let o = nullvl(&["fuzz", "--family", "2to3", "--cases", "30", "--seed", "7", "--json", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["failed"], 0);

    // Q1 over a database with nulls violates the null-free coincidence.
    let db: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(data("rs.json")).unwrap()).unwrap();
    let bundle = serde_json::json!({
        "family": "null-free",
        "seed": 0,
        "case": 0,
        "expression": "(select (not (in (col R.A) (base S))) (base R))",
        "database": db,
        "message": "",
    });
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bundle.json");
    std::fs::write(&path, bundle.to_string()).unwrap();
    let o = nullvl(&["replay", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).starts_with("fail"));

    let mut passing = bundle.clone();
    passing["family"] = "2to3".into();
    std::fs::write(&path, passing.to_string()).unwrap();
    let o = nullvl(&["replay", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    std::fs::remove_dir_all(&dir).ok();
}
