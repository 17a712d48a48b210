use std::process::{Command, Output};

use serde_json::Value;
use spdmeans::fixtures;
use spdmeans::linalg::norm2;
use spdmeans::tuple_file::read_matrices;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spdmeans"));
    cmd.env_remove("SPDMEANS_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad json ({e}): {}", stdout(out)))
}

fn result_matrix(report: &Value) -> Vec<Vec<f64>> {
    report["result"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| {
            row.as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_f64().unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn new_mean_counts_on_fixture() {
    let out = run(&[
        "compute",
        "--fixture",
        "matricibuffe",
        "--mean",
        "new",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["sqrt_count"], 18);
    assert_eq!(r["proot_count"], 9);
    assert_eq!(r["inner_iters"], serde_json::json!([3]));
    assert_eq!(r["converged"], true);
    assert_eq!(r["config"]["inner"], "bmp");
}

#[test]
fn scalar_fixture_returns_identity() {
    for mean in ["alm", "bmp", "palfia", "new"] {
        let out = run(&["compute", "--fixture", "scalar", "--mean", mean, "--json"]);
        assert_eq!(out.status.code(), Some(0), "{mean}: {}", stderr(&out));
        let r = json(&out);
        assert!(r["outer_iters"].as_u64().unwrap() <= 1, "{mean}");
        for (i, row) in result_matrix(&r).iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((x - want).abs() < 1e-15, "{mean} {i},{j}: {x}");
            }
        }
    }
}

#[test]
fn powers_fixture_recovers_m() {
    let out = run(&[
        "compute",
        "--fixture",
        "powers-of-m",
        "--mean",
        "new",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let got = result_matrix(&json(&out));
    let m = fixtures::powers_base(fixtures::DEFAULT_SEED);
    let diff = nalgebra::DMatrix::from_fn(6, 6, |i, j| got[i][j] - m.get(i, j));
    assert!(norm2(&diff) <= 1e-12, "{}", norm2(&diff));
}

#[test]
fn seed_env_and_flag_agree() {
    let digest = |out: Output| json(&out)["input"]["sha256"].as_str().unwrap().to_string();
    let default = digest(run(&["compute", "--fixture", "powers-of-m", "--json"]));
    let env = digest(
        bin()
            .env("SPDMEANS_SEED", "7")
            .args(["compute", "--fixture", "powers-of-m", "--json"])
            .output()
            .unwrap(),
    );
    let flag = digest(run(&[
        "compute",
        "--fixture",
        "powers-of-m",
        "--seed",
        "7",
        "--json",
    ]));
    assert_ne!(default, env);
    assert_eq!(env, flag);
    let bad = bin()
        .env("SPDMEANS_SEED", "seven")
        .args(["compute", "--fixture", "powers-of-m"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn no_convergence_exits_2_with_report() {
    let out = run(&[
        "compute",
        "--fixture",
        "matricibuffe",
        "--mean",
        "alm",
        "--max-iter",
        "2",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let r = json(&out);
    assert_eq!(r["converged"], false);
    assert_eq!(r["outer_iters"], 2);
    assert!(stderr(&out).contains("did not converge"));
}

#[test]
fn invalid_files_exit_1_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "# two 2x2 matrices\n2 2\n1 0\n0 1\n1 5\n0 1\n").unwrap();
    let out = run(&["compute", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(
        err.contains("matrix 2 (lines 5-6)") && err.contains("not symmetric"),
        "{err}"
    );

    std::fs::write(&path, "2 2\n1 0\n0 1\n1 0\n0 nope\n").unwrap();
    let out = run(&["compute", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 5"), "{}", stderr(&out));

    let out = run(&["compute", dir.path().join("missing.txt").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["compute", "--fixture", "elasticity"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn result_round_trips_through_a_tuple_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    let t = fixtures::random_tuple(4, 5, 99);
    spdmeans::tuple_file::write_matrices(&input, t.items()).unwrap();
    let result = dir.path().join("out.txt");
    let out = run(&[
        "compute",
        input.to_str().unwrap(),
        "--mean",
        "bmp",
        "--json",
        "--write-result",
        result.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let printed = result_matrix(&json(&out));
    let back = read_matrices(&result).unwrap();
    assert_eq!(back.len(), 1);
    for (i, row) in printed.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            assert_eq!(back[0].get(i, j).to_bits(), x.to_bits());
        }
    }
}

/// The report's keys, at every level, appear in the schema's order and
/// have the declared JSON types.
#[test]
fn report_follows_the_shipped_schema() {
    let schema: Value = serde_json::from_str(include_str!("../schema/run_report.schema.json"))
        .expect("schema parses");
    for args in [
        vec![
            "compute",
            "--fixture",
            "matricibuffe",
            "--mean",
            "new",
            "--json",
        ],
        vec![
            "compute",
            "--fixture",
            "matricibuffe",
            "--mean",
            "palfia",
            "--json",
        ],
        vec!["compute", "--fixture", "scalar", "--mean", "alm", "--json"],
    ] {
        let out = run(&args);
        let text = stdout(&out);
        check_object(&text, &json(&out), &schema);
    }
}

fn check_object(text: &str, value: &Value, schema: &Value) {
    let required: Vec<&str> = schema["required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|k| k.as_str().unwrap())
        .collect();
    let obj = value.as_object().expect("object");
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_by_key(|k| text.find(&format!("\"{k}\":")).expect("key printed"));
    assert_eq!(keys, required);
    for (k, v) in obj {
        let prop = &schema["properties"][k];
        if prop["type"] == "object" {
            check_object(text, v, prop);
            continue;
        }
        let allowed: Vec<&str> = match &prop["type"] {
            Value::String(t) => vec![t.as_str()],
            Value::Array(ts) => ts.iter().map(|t| t.as_str().unwrap()).collect(),
            _ => vec![],
        };
        if let Some(choices) = prop["enum"].as_array() {
            assert!(choices.contains(v), "{k}: {v}");
        }
        if !allowed.is_empty() {
            let kind = match v {
                Value::Null => "null",
                Value::Bool(_) => "boolean",
                Value::Number(n) if n.is_u64() || n.is_i64() => "integer",
                Value::Number(_) => "number",
                Value::String(_) => "string",
                Value::Array(_) => "array",
                Value::Object(_) => "object",
            };
            let ok = allowed.contains(&kind) || (kind == "integer" && allowed.contains(&"number"));
            assert!(ok, "{k}: {kind} not in {allowed:?}");
        }
    }
}

#[test]
fn properties_subcommand() {
    let out = run(&[
        "properties",
        "--fixture",
        "matricibuffe",
        "--mean",
        "new",
        "--props",
        "P3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("P3") && stdout(&out).contains("pass"));

    let out = run(&[
        "properties",
        "--fixture",
        "matricibuffe",
        "--mean",
        "palfia",
        "--props",
        "P3",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let table = json(&out);
    assert_eq!(table["failed"], serde_json::json!(["P3"]));
    let report = &table["reports"][0];
    assert!(report["max_violation"].as_f64().unwrap() > 1e-6);
    assert!(report["witness"].as_str().unwrap().starts_with('('));

    let out = run(&[
        "properties",
        "--fixture",
        "scalar",
        "--mean",
        "bmp",
        "--props",
        "P1'",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["reports"][0]["max_violation"].as_f64().unwrap() < 1e-14);

    let out = run(&[
        "properties",
        "--random",
        "5",
        "--mean",
        "bmp",
        "--n",
        "3",
        "--samples",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    let out = run(&[
        "properties",
        "--random",
        "5",
        "--mean",
        "new",
        "--props",
        "P11",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn properties_of_an_expression() {
    let out = run(&[
        "properties",
        "--random",
        "1",
        "--expr",
        "(A1#A2)#(A3#A4)",
        "--n",
        "4",
        "--props",
        "P1,P3,P9",
        "--samples",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("P3"));
}

#[test]
fn stabilizer_listings() {
    let out = run(&["stabilizer", "--expr", "(A1#A3)#(A2#A4)", "--n", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).starts_with("order 8, dihedral D4\n"),
        "{}",
        stdout(&out)
    );
    assert!(stdout(&out).contains("reductive: order 8, equal"));

    let out = run(&["stabilizer", "--expr", "A1#A2", "--n", "2"]);
    assert!(stdout(&out).starts_with("order 2, Sym(2)\n"));

    let out = run(&[
        "stabilizer",
        "--expr",
        "(A1^{4/3}#A2^{4/3})#A3^{2/3}",
        "--n",
        "3",
    ]);
    let text = stdout(&out);
    assert!(text.starts_with("order 2\n"), "{text}");
    assert!(text.contains("generators: (1 2)\n"));

    let out = run(&["stabilizer", "--expr", "(A1#A3)#(A2 A4)"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(
        err.contains("(A1#A3)#(A2 A4)\n") && err.contains('^'),
        "{err}"
    );
}

#[test]
fn bench_ratios() {
    let out = run(&[
        "bench",
        "--fixture",
        "matricibuffe",
        "--means",
        "bmp,new",
        "--repeat",
        "2",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!(r["new_over_bmp"]["sqrt"].as_f64().unwrap() <= 0.25);
    assert!(r["new_over_bmp"]["proot"].as_f64().unwrap() <= 0.25);

    let out = run(&[
        "bench",
        "--fixture",
        "matricibuffe",
        "--means",
        "alm",
        "--repeat",
        "1",
    ]);
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("alm")).count(), 1);
    assert!(!text.contains("new/bmp"));
}

#[test]
fn bench_new_is_faster_on_six_matrices() {
    let out = run(&[
        "bench",
        "--fixture",
        "synthetic-6",
        "--means",
        "bmp,new",
        "--repeat",
        "3",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    for row in r["rows"].as_array().unwrap() {
        assert_eq!(row["converged"], true);
    }
    assert!(r["new_over_bmp"]["time"].as_f64().unwrap() < 1.0, "{r}");
}

#[test]
fn group_listings() {
    let out = run(&["group", "--subgroup", "dihedral:4", "--transversal"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("order 8, index 3"));
    assert!(text.contains("transversal (3 representatives)"));

    let out = run(&["group", "--subgroup", "sym:4", "--transversal"]);
    let text = stdout(&out);
    assert!(
        text.contains("(1 representatives)") && text.contains("  1 ()\n"),
        "{text}"
    );

    let out = run(&[
        "group",
        "--subgroup",
        "dihedral:4",
        "--rep",
        "()",
        "--rep",
        "(12)",
        "--rep",
        "(14)",
        "--action",
        "(1 2)",
        "--action",
        "(1 4)",
    ]);
    let text = stdout(&out);
    assert!(text.contains("rho((1 2)) = (1 2)\n"), "{text}");
    assert!(text.contains("rho((1 4)) = (1 3)\n"), "{text}");

    for bad in [
        ["--subgroup", "cyclic:4"],
        ["--subgroup", "dihedral:x"],
        ["--subgroup", "sym:12"],
    ] {
        let out = run(&[&["group"][..], &bad[..]].concat());
        assert_eq!(out.status.code(), Some(1));
    }
    let out = run(&[
        "group",
        "--subgroup",
        "dihedral:4",
        "--rep",
        "()",
        "--rep",
        "(13)",
        "--rep",
        "(12)",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
