use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardcore"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut all = args.to_vec();
    all.push("--json");
    let out = run(&all);
    let v = serde_json::from_slice(&out.stdout).expect("JSON on stdout");
    (out.status.code().unwrap(), v)
}

#[test]
fn classify_reports_pgs_count() {
    let (code, v) = json(&["classify", "--lattice", "a2", "--d2", "13"]);
    assert_eq!(code, 0);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["results"]["case"], "TA2");
    assert_eq!(v["results"]["catalog"]["pgs_count"], 26);
    assert_eq!(v["results"]["density"]["coeff_num"], 1);
    assert_eq!(v["results"]["density"]["coeff_den"], 2);
    assert_eq!(v["results"]["density"]["decimal"], "0.906899682117");
}

#[test]
fn mtriangles_for_65() {
    let (code, v) = json(&["mtriangles", "--d2", "65"]);
    assert_eq!(code, 0);
    let r = &v["results"];
    assert_eq!((r["s"].as_u64(), r["k"].as_u64(), r["n1"].as_u64()), (Some(60), Some(2), Some(2)));
}

#[test]
fn unattainable_value_is_a_domain_error() {
    let (code, v) = json(&["classify", "--lattice", "z2", "--d2", "3"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "not_attainable");
    assert!(v["error"]["message"].as_str().unwrap().contains("not attainable"));
}

#[test]
fn sliding_catalog_is_unsupported() {
    let (code, v) = json(&["pgs", "--lattice", "z2", "--d2", "9"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "unsupported");
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(run(&["classify", "--lattice", "a2", "--d2", "4", "--bogus"]).status.code(), Some(64));
    assert_eq!(run(&["classify", "--d2", "4"]).status.code(), Some(64));
    assert_eq!(run(&["gibbs-exact", "--lattice", "a2", "--d2", "4", "--torus", "4,0"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn budget_overrun_exits_3() {
    let out = run(&["gibbs-exact", "--lattice", "z2", "--d2", "2", "--torus", "8,0;0,8"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["render", "--lattice", "a2", "--d2", "147", "--cells", "50x50"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn exact_gibbs_on_template_cells() {
    let (code, v) = json(&["gibbs-exact", "--lattice", "a2", "--d2", "4", "--cells", "2x2", "--u", "3/2"]);
    assert_eq!(code, 0);
    let r = &v["results"];
    assert_eq!(r["coefficients"], serde_json::json!(["1", "16", "24", "16", "4"]));
    // 1 + 16(3/2) + 24(9/4) + 16(27/8) + 4(81/16) = 613/4
    assert_eq!(r["partition_function"]["exact"], "613/4");
}

#[test]
fn pgs_listing_has_every_ground_state() {
    let (code, v) = json(&["pgs", "--lattice", "a2", "--d2", "9", "--list"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["pgs"].as_array().unwrap().len(), 9);
}

#[test]
fn outputs_are_deterministic() {
    let mcmc = ["gibbs-mcmc", "--lattice", "z2", "--d2", "2", "--torus", "4,0;0,4", "--steps", "20000", "--seed", "7", "--json"];
    assert_eq!(run(&mcmc).stdout, run(&mcmc).stdout);
    let svg = ["render", "--lattice", "z2", "--d2", "9", "--scene", "sliding"];
    assert_eq!(run(&svg).stdout, run(&svg).stdout);
}

#[test]
fn thread_count_does_not_change_reports() {
    let base = ["dominance", "--lattice", "a2", "--d2", "49", "--json"];
    let a = run(&base).stdout;
    let mut one = base.to_vec();
    one.extend(["--threads", "1"]);
    let b = run(&one).stdout;
    let strip = |x: &[u8]| {
        let mut v: Value = serde_json::from_slice(x).unwrap();
        v["argv"] = Value::Null;
        v
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(strip(&a)["results"]["dominant_labels"], serde_json::json!(["horizontal"]));
}

#[test]
fn vacancy_render_shades_a_three_by_three_block() {
    let out = run(&["render", "--lattice", "a2", "--d2", "9", "--scene", "vacancy"]);
    assert_eq!(out.status.code(), Some(0));
    let svg = String::from_utf8(out.stdout).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("fill=\"#f4c7c3\"").count(), 9);
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("hardcore-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("pgs.svg");
    let out = run(&["render", "--lattice", "a2", "--d2", "9", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let svg = std::fs::read_to_string(&path).unwrap();
    // the PGS cell outline plus the torus outline
    assert_eq!(svg.matches("<polygon").count(), 2);
    std::fs::remove_dir_all(&dir).unwrap();
}
