use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergodic-ifc"))
}

fn channel(dir: &TempDir, name: &str, states: &[[f64; 5]], budget: (f64, f64)) -> PathBuf {
    let states: Vec<String> = states
        .iter()
        .map(|s| {
            format!(
                r#"{{"g11":{},"g12":{},"g21":{},"g22":{},"p":{}}}"#,
                s[0], s[1], s[2], s[3], s[4]
            )
        })
        .collect();
    let text = format!(
        r#"{{"states":[{}],"budget":{{"p1":{},"p2":{}}}}}"#,
        states.join(","),
        budget.0,
        budget.1
    );
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(row: &str, i: usize) -> String {
    row.split(',').nth(i).unwrap().to_string()
}

#[test]
fn classify_evs_file() {
    let dir = TempDir::new().unwrap();
    let ch = channel(&dir, "evs.json", &[[1.0, 4.0, 4.0, 1.0, 1.0]], (1.0, 1.0));
    let o = run(&["classify", "--channel", ch.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["subclass"], "EVS");
    assert!((v["evs_check"]["lhs"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((v["evs_check"]["rhs"].as_f64().unwrap() - 6f64.log2()).abs() < 1e-12);
}

#[test]
fn bad_probabilities_exit_2() {
    let dir = TempDir::new().unwrap();
    let ch = channel(
        &dir,
        "bad.json",
        &[[1.0, 4.0, 4.0, 1.0, 0.3], [1.0, 4.0, 4.0, 1.0, 0.3]],
        (1.0, 1.0),
    );
    let o = run(&["classify", "--channel", ch.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("0.6"));
}

#[test]
fn unknown_field_names_the_field() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("typo.json");
    fs::write(
        &path,
        r#"{"states":[{"g11":1,"g12":4,"g21":4,"g22":1,"prob":1}],"budget":{"p1":1,"p2":1}}"#,
    )
    .unwrap();
    let o = run(&["classify", "--channel", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("prob"));
}

#[test]
fn classify_one_sided_weak() {
    let dir = TempDir::new().unwrap();
    let ch = channel(
        &dir,
        "osw.json",
        &[[1.0, 0.25, 0.0, 1.0, 0.5], [1.0, 0.5, 0.0, 1.0, 0.5]],
        (1.0, 1.0),
    );
    let o = run(&["classify", "--channel", ch.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["subclass"], "OneSidedUW");
}

#[test]
fn sumcap_auto_on_evs() {
    let dir = TempDir::new().unwrap();
    let ch = channel(&dir, "evs.json", &[[1.0, 4.0, 4.0, 1.0, 1.0]], (1.0, 1.0));
    let o = run(&["sumcap", "--channel", ch.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scheme,value_bits,case_label,p1,p2,alpha");
    assert_eq!(field(lines[1], 1), "2.00000");
    assert_eq!(field(lines[1], 2), "C1");
}

#[test]
fn sumcap_us_and_separable_rows() {
    let dir = TempDir::new().unwrap();
    let ch = channel(
        &dir,
        "us.json",
        &[[1.0, 1.1025, 6.25, 1.0, 0.5], [1.0, 6.25, 1.1025, 1.0, 0.5]],
        (1.0, 1.0),
    );
    let o = run(&["sumcap", "--channel", ch.to_str().unwrap(), "--scheme", "us,separable"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(field(rows[0], 0), "us");
    assert_eq!(field(rows[0], 1), "2.00000");
    assert_eq!(field(rows[1], 0), "separable");
    let sep: f64 = field(rows[1], 1).parse().unwrap();
    // Separate decoding never beats joint decoding; uniform power gives log2 3.1025.
    assert!(sep < 2.0);
    assert!(sep >= 3.1025f64.log2() - 1e-5);
}

#[test]
fn us_on_weak_channel_exit_3() {
    let dir = TempDir::new().unwrap();
    let ch = channel(&dir, "uw.json", &[[1.0, 0.25, 0.25, 1.0, 1.0]], (1.0, 1.0));
    let o = run(&["sumcap", "--channel", ch.to_str().unwrap(), "--scheme", "us"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("# failed at scheme=us"));
}

#[test]
fn auto_never_hits_a_precondition() {
    let dir = TempDir::new().unwrap();
    let cases: [&[[f64; 5]]; 5] = [
        &[[1.0, 0.25, 0.25, 1.0, 1.0]],
        &[[1.0, 4.0, 0.25, 1.0, 1.0]],
        &[[1.0, 0.25, 0.0, 1.0, 1.0]],
        &[[1.0, 0.5, 0.0, 1.0, 0.5], [1.0, 2.0, 0.0, 1.0, 0.5]],
        &[[1.0, 0.0, 0.5, 1.0, 0.5], [1.0, 0.0, 2.0, 1.0, 0.5]],
    ];
    for (i, states) in cases.iter().enumerate() {
        let ch = channel(&dir, &format!("c{i}.json"), states, (1.0, 1.0));
        let o = run(&["sumcap", "--channel", ch.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "case {i}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn mirrored_one_sided_hk_matches() {
    let dir = TempDir::new().unwrap();
    let a = channel(
        &dir,
        "a.json",
        &[[1.0, 0.5, 0.0, 1.0, 0.5], [1.0, 2.0, 0.0, 1.0, 0.5]],
        (1.0, 1.0),
    );
    let b = channel(
        &dir,
        "b.json",
        &[[1.0, 0.0, 0.5, 1.0, 0.5], [1.0, 0.0, 2.0, 1.0, 0.5]],
        (1.0, 1.0),
    );
    let va = stdout(&run(&["sumcap", "--channel", a.to_str().unwrap(), "--scheme", "hk"]));
    let vb = stdout(&run(&["sumcap", "--channel", b.to_str().unwrap(), "--scheme", "hk"]));
    let row_a = va.lines().nth(1).unwrap();
    let row_b = vb.lines().nth(1).unwrap();
    assert_eq!(field(row_a, 1), field(row_b, 1));
    assert_eq!(field(row_a, 3), field(row_b, 4));
}

#[test]
fn figure_output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&[
            "figure",
            "ray-evs",
            "--sigma2-grid",
            "0.5:2.5:1",
            "--samples",
            "2000",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(a).unwrap();
    assert_eq!(a, fs::read(b).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 4);
    // small cross-gain variance admits no very-strong power
    let first = text.lines().nth(1).unwrap();
    assert_eq!(field(first, 2), "false");
}

#[test]
fn sep_gap_endpoints_close() {
    let o = run(&["figure", "sep-gap", "--p1-grid", "0,1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 4 * 2);
    for row in text.lines().skip(1) {
        let gap: f64 = field(row, 8).parse().unwrap();
        assert!(gap.abs() <= 1e-6, "{row}");
    }
}

#[test]
fn hk_hybrid_strong_alpha_zero() {
    let o = run(&["figure", "hk-hybrid", "--p1-grid", "0.2:0.8:0.3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "p1,budget,R_HK,R_Ind,R_outer,alpha_weak,alpha_strong");
    for row in text.lines().skip(1) {
        assert_eq!(field(row, 6), "0.00000");
    }
}

#[test]
fn unsorted_grid_rejected() {
    let o = run(&["figure", "hk-hybrid", "--p1-grid", "0.5,0.2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn region_rows_follow_grid() {
    let dir = TempDir::new().unwrap();
    let ch = channel(&dir, "evs.json", &[[1.0, 4.0, 4.0, 1.0, 1.0]], (1.0, 1.0));
    let o = run(&["region", "--channel", ch.to_str().unwrap(), "--mu-grid", "0.25,0.75"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(field(rows[0], 2), "1.00000");
    assert_eq!(field(rows[0], 3), "1.00000");
}
