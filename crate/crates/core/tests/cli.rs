use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn asdedu(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asdedu"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn synth_label_validate_merge() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(
        code(&asdedu(
            d,
            &["synth", "-n", "40", "--seed", "3", "-o", "a.csv"]
        )),
        0
    );
    assert_eq!(
        code(&asdedu(
            d,
            &["synth", "-n", "25", "--seed", "4", "-o", "b.csv"]
        )),
        0
    );

    let v = asdedu(d, &["validate", "-i", "a.csv"]);
    assert_eq!(code(&v), 0, "{}", stderr(&v));
    assert!(stdout(&v).contains("rows accepted: 40"));

    let m = asdedu(d, &["merge", "-i", "a.csv", "-i", "b.csv", "-o", "m.csv"]);
    assert_eq!(code(&m), 0, "{}", stderr(&m));
    let merged = fs::read_to_string(d.join("m.csv")).unwrap();
    assert_eq!(merged.lines().count(), 66);
    assert!(merged.lines().last().unwrap().starts_with("65,"));

    let l = asdedu(d, &["label", "-i", "m.csv"]);
    assert_eq!(code(&l), 0);
    let out = stdout(&l);
    assert!(out
        .lines()
        .next()
        .unwrap()
        .ends_with(",Preferred_Education"));
    assert_eq!(out.lines().count(), 66);
}

#[test]
fn validate_reports_bad_rows_with_data_error_status() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    asdedu(d, &["synth", "-n", "5", "--seed", "1", "-o", "a.csv"]);
    let text = fs::read_to_string(d.join("a.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<&str> = lines[2].split(',').collect();
    cells[5] = "2";
    lines[2] = cells.join(",");
    fs::write(d.join("bad.csv"), lines.join("\n")).unwrap();

    let v = asdedu(d, &["validate", "-i", "bad.csv"]);
    assert_eq!(code(&v), 2);
    assert!(
        stdout(&v).contains("error: row 1 `A5`: not binary"),
        "{}",
        stdout(&v)
    );
}

#[test]
fn years_alias_file_converts_ages() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    asdedu(d, &["synth", "-n", "3", "--seed", "1", "-o", "a.csv"]);
    let text = fs::read_to_string(d.join("a.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[0] = lines[0].replace("Age_Mons", "age");
    for line in lines.iter_mut().skip(1) {
        let mut cells: Vec<String> = line.split(',').map(String::from).collect();
        cells[11] = "7".into();
        *line = cells.join(",");
    }
    fs::write(d.join("child.csv"), lines.join("\n")).unwrap();
    fs::write(d.join("child.alias"), "age=Age_Mons\nage_unit=years\n").unwrap();

    let m = asdedu(d, &["merge", "-i", "child.csv@child.alias"]);
    assert_eq!(code(&m), 0, "{}", stderr(&m));
    let out = stdout(&m);
    assert!(
        out.lines()
            .skip(1)
            .all(|l| l.split(',').nth(11) == Some("84")),
        "{out}"
    );
}

#[test]
fn coverage_counts_all_vectors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = asdedu(tmp.path(), &["coverage", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let total: usize = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 1024);
}

#[test]
fn usage_and_data_errors_have_distinct_status() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&asdedu(d, &["run", "--synth", "100"])), 1);
    assert_eq!(code(&asdedu(d, &["frobnicate"])), 1);
    assert_eq!(code(&asdedu(d, &["run", "--seed", "1"])), 1);
    assert_eq!(code(&asdedu(d, &["--help"])), 0);
    assert_eq!(code(&asdedu(d, &["--version"])), 0);

    let missing = asdedu(d, &["validate", "-i", "nope.csv"]);
    assert_eq!(code(&missing), 2);
    assert!(stderr(&missing).contains("nope.csv"));

    fs::write(d.join("empty.csv"), "").unwrap();
    assert_eq!(code(&asdedu(d, &["validate", "-i", "empty.csv"])), 2);
    fs::write(d.join("bad.rules"), "1: A12=1\n").unwrap();
    let r = asdedu(
        d,
        &[
            "run",
            "--synth",
            "50",
            "--seed",
            "1",
            "--rules",
            "bad.rules",
        ],
    );
    assert_eq!(code(&r), 2);
    assert!(
        stderr(&r).contains("stage `label` failed"),
        "{}",
        stderr(&r)
    );
    assert!(!d.join("runs").exists());
}

#[test]
fn run_prints_the_report_and_writes_the_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = asdedu(
        d,
        &[
            "run",
            "--synth",
            "500",
            "--seed",
            "8",
            "--trees",
            "20",
            "--format",
            "json,text",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["models"].as_array().unwrap().len(), 4);
    assert_eq!(report["echo"]["n_test"], 25);
    let runs: Vec<_> = fs::read_dir(d.join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(runs.len(), 1);
    assert!(runs[0]
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .ends_with("-seed8"));
    assert!(runs[0].join("report.txt").exists());
    assert!(!runs[0].join("tables").exists());
}

#[test]
fn train_predict_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let t = asdedu(
        d,
        &[
            "train", "--synth", "3043", "--seed", "42", "--k", "1", "--trees", "10", "--out",
            "model",
        ],
    );
    assert_eq!(code(&t), 0, "{}", stderr(&t));
    assert!(d.join("model/models/knn.json").exists());

    // A training row predicted by 1-NN returns its own label.
    asdedu(d, &["synth", "-n", "3043", "--seed", "42", "-o", "all.csv"]);
    let labeled = stdout(&asdedu(d, &["label", "-i", "all.csv"]));
    let split: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("model/data/split.json")).unwrap())
            .unwrap();
    let i = split["train_indices"][0].as_u64().unwrap() as usize;
    let lines: Vec<&str> = labeled.lines().collect();
    let row = lines[i + 1];
    let expected = row.rsplit(',').next().unwrap();
    fs::write(d.join("one.csv"), format!("{}\n{row}\n", lines[0])).unwrap();
    let p = asdedu(
        d,
        &["predict", "-m", "model/models/knn.json", "-i", "one.csv"],
    );
    assert_eq!(code(&p), 0, "{}", stderr(&p));
    assert_eq!(stdout(&p).split('\t').nth(1), Some(expected));

    // All-zero answers go to "None" through the tree.
    let zero_rows: Vec<&&str> = lines[1..]
        .iter()
        .filter(|l| l.split(',').skip(1).take(10).all(|c| c == "0"))
        .collect();
    assert!(!zero_rows.is_empty());
    let mut probe: Vec<String> = lines[1].split(',').map(String::from).collect();
    for c in probe.iter_mut().skip(1).take(10) {
        *c = "0".into();
    }
    probe[12] = "0".into();
    fs::write(
        d.join("zero.csv"),
        format!("{}\n{}\n", lines[0], probe.join(",")),
    )
    .unwrap();
    let p = asdedu(
        d,
        &[
            "predict",
            "-m",
            "model/models/decision_tree.json",
            "-i",
            "zero.csv",
        ],
    );
    assert_eq!(stdout(&p), "0\t0\tNone\n");

    // One malformed and one unseen-category row; the rest still predicted.
    let mut bad = lines[1].replacen(",0,", ",9,", 1);
    if bad == lines[1] {
        bad = lines[1].replacen(",1,", ",9,", 1);
    }
    let eth = lines[2].split(',').nth(14).unwrap();
    let unseen = lines[2].replacen(&format!(",{eth},"), ",atlantean,", 1);
    fs::write(
        d.join("mixed.csv"),
        format!("{}\n{bad}\n{unseen}\n{}\n", lines[0], lines[3]),
    )
    .unwrap();
    let p = asdedu(
        d,
        &[
            "predict",
            "-m",
            "model/models/random_forest.json",
            "-i",
            "mixed.csv",
        ],
    );
    assert_eq!(code(&p), 2);
    let out = stdout(&p);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("0\terror\t"));
    assert!(rows[1].starts_with("1\terror\t") && rows[1].contains("atlantean"));
    assert!(!rows[2].contains("error"));

    let e = asdedu(
        d,
        &[
            "evaluate",
            "-m",
            "model/models/decision_tree.json",
            "-m",
            "model/models/naive_bayes.json",
            "-i",
            "model/data/test.csv",
            "--format",
            "json",
        ],
    );
    assert_eq!(code(&e), 0, "{}", stderr(&e));
    let report: serde_json::Value = serde_json::from_str(&stdout(&e)).unwrap();
    assert_eq!(report["echo"]["n_test"], 152);
    assert_eq!(report["models"].as_array().unwrap().len(), 2);
}
