use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const TYPE_ONE: &str = "\
[model]
alpha1 = -2.8
alpha2 = -2
a = 5
field = 0.17

[state]
center = 0
sigma = 0.5

[sweep]
f_min = 0.15
f_max = 0.23
f_steps = 41
";

const TYPE_TWO: &str = "\
[model]
alpha1 = -3.2
alpha2 = -2
a = 5

[sweep]
f_min = 0.25
f_max = 0.40
f_steps = 41
";

const F_CRITICAL: &str = "0.19020041652";

fn write_config(name: &str, text: &str) -> PathBuf {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resonance"))
        .args(args)
        .env_remove("RESONANCE_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a CSV body (after the `#` header and the column line).
fn table(csv: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let columns = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (columns, rows)
}

/// `key = value` from the `#` header, or `key,value` from a summary body.
fn field<'a>(csv: &'a str, key: &str) -> &'a str {
    csv.lines()
        .find_map(|l| {
            l.strip_prefix(&format!("# {key} = "))
                .or_else(|| l.strip_prefix(&format!("{key},")))
        })
        .unwrap_or_else(|| panic!("no `{key}` in output"))
}

fn number(csv: &str, key: &str) -> f64 {
    field(csv, key).split(' ').next().unwrap().parse().unwrap()
}

#[test]
fn resonances_at_the_weak_field_reference_point() {
    let cfg = write_config("res.ini", TYPE_ONE);
    let o = run(&["resonances", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with(&format!("# resonance {} resonances\n", env!("CARGO_PKG_VERSION"))));
    assert!(out.contains("# [model]\n# a = 5.0\n# alpha1 = -2.8\n"));
    let (columns, rows) = table(&out);
    assert_eq!(columns, ["branch", "reE", "imE", "reResidue", "imResidue", "absD"]);
    assert_eq!(rows.len(), 2);
    // narrow left-well state and the broad right-well one
    assert!((rows[0][1] + 1.963).abs() < 1e-3 && (rows[0][2] + 3.506e-7).abs() < 1e-9);
    assert!((rows[1][1] + 1.860).abs() < 1e-3 && (rows[1][2] + 3.29e-4).abs() < 1e-6);
    assert!(rows.iter().all(|r| r[5] < 1e-10));
}

#[test]
fn json_carries_the_same_numbers() {
    let cfg = write_config("json.ini", TYPE_ONE);
    let csv = stdout(&run(&["resonances", "--config", cfg.to_str().unwrap()]));
    let o = run(&["resonances", "--config", cfg.to_str().unwrap(), "--json"]);
    assert!(o.status.success());
    let json: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["command"], "resonances");
    assert_eq!(json["config"]["model"]["alpha1"], -2.8);
    let (_, rows) = table(&csv);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(json["results"]["reE"][k].as_f64().unwrap(), row[1]);
        assert_eq!(json["results"]["imE"][k].as_f64().unwrap(), row[2]);
    }
}

#[test]
fn precision_override_shortens_numbers() {
    let cfg = write_config("prec.ini", TYPE_ONE);
    let out = stdout(&run(&["resonances", "--config", cfg.to_str().unwrap(), "--set", "output.precision=4"]));
    let body = out.lines().find(|l| l.starts_with("1.000e0,")).unwrap();
    assert!(body.starts_with("1.000e0,-1.963e0,-3.506e-7,"), "{body}");
}

#[test]
fn config_errors_exit_with_two_and_name_the_line() {
    let cfg = write_config("bad_order.ini", &TYPE_ONE.replace("alpha2 = -2", "alpha2 = -3"));
    let o = run(&["resonances", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad_order.ini:3: delta strengths"), "{}", stderr(&o));

    let cfg = write_config("bad_key.ini", &TYPE_ONE.replace("sigma", "width"));
    let o = run(&["survival", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad_key.ini:9: unknown key `width` in [state]"), "{}", stderr(&o));

    let cfg = write_config("ok.ini", TYPE_ONE);
    let o = run(&["survival", "--config", cfg.to_str().unwrap(), "--set", "time.t_min=0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["resonances", "--config", cfg.to_str().unwrap(), "--set", "model.field"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["resonances"]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config("nofield.ini", TYPE_TWO);
    let o = run(&["survival", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.field"));
}

fn sign_changes(values: impl Iterator<Item = f64>) -> usize {
    let v: Vec<f64> = values.collect();
    v.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
}

#[test]
fn sweeps_show_the_two_crossing_geometries() {
    for (name, text, im_changes, re_changes) in [("t1.ini", TYPE_ONE, 1, 0), ("t2.ini", TYPE_TWO, 0, 1)] {
        let cfg = write_config(name, text);
        let o = run(&["sweep", "--config", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let (columns, rows) = table(&stdout(&o));
        assert_eq!(columns, ["F", "reE1", "imE1", "reE2", "imE2", "branch_gap_flag"]);
        assert_eq!(rows.len(), 41);
        assert!(rows.iter().all(|r| r[5] == 0.0));
        assert_eq!(sign_changes(rows.iter().map(|r| r[2] - r[4])), im_changes, "{name}");
        assert_eq!(sign_changes(rows.iter().map(|r| r[1] - r[3])), re_changes, "{name}");
    }
}

#[test]
fn parallel_sweep_matches_sequential() {
    let cfg = write_config("par.ini", &TYPE_ONE.replace("f_steps = 41", "f_steps = 61"));
    let (_, one) = table(&stdout(&run(&["sweep", "--config", cfg.to_str().unwrap()])));
    for jobs in ["2", "3", "7"] {
        let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--jobs", jobs]);
        assert!(o.status.success());
        let (_, many) = table(&stdout(&o));
        assert_eq!(many.len(), one.len());
        for (a, b) in one.iter().zip(&many) {
            assert_eq!(a[0], b[0]);
            assert_eq!(b[5], 0.0);
            for j in 1..5 {
                assert!((a[j] - b[j]).abs() < 1e-12, "jobs {jobs}, F = {}", a[0]);
            }
        }
    }
    assert_eq!(run(&["sweep", "--config", cfg.to_str().unwrap(), "--jobs", "0"]).status.code(), Some(2));
}

#[test]
fn two_point_grids() {
    let cfg = write_config("two.ini", TYPE_ONE);
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--set", "sweep.f_steps=2"]);
    assert_eq!(table(&stdout(&o)).1.len(), 2);
    let o = run(&["survival", "--config", cfg.to_str().unwrap(), "--set", "time.t_points=2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (columns, rows) = table(&stdout(&o));
    assert_eq!(columns, ["t", "absA", "reA", "imA", "abs_free", "abs_resonance"]);
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0], rows[1][0]), (100.0, 10000.0));
}

#[test]
fn classify_both_configurations() {
    let cfg = write_config("c1.ini", TYPE_ONE);
    let o = run(&["classify", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "semiclassical_type"), "I");
    assert_eq!(field(&out, "numeric_type"), "I");
    assert!((number(&out, "f_critical_numeric") - 0.1902).abs() < 1e-3);
    assert!((number(&out, "f_critical_semiclassical") - 0.192).abs() < 1e-15);
    assert_eq!(field(&out, "near_threshold"), "false");
    assert!(number(&out, "agmon_inner_numeric") > 0.0 && number(&out, "agmon_outer_numeric") > 0.0);

    let cfg = write_config("c2.ini", TYPE_TWO);
    let out = stdout(&run(&["classify", "--config", cfg.to_str().unwrap()]));
    assert_eq!(field(&out, "semiclassical_type"), "II");
    assert_eq!(field(&out, "numeric_type"), "II");
    assert_eq!(field(&out, "f_critical_numeric"), "none");
    assert!((number(&out, "f_real_crossing") - 0.306).abs() < 1e-3);
}

#[test]
fn classify_flags_the_threshold_and_inconclusive_sweeps() {
    let ratio = 3f64.cbrt();
    let text = format!("[model]\nalpha1 = {}\nalpha2 = -2\na = 5\n", -2.0 * ratio);
    let cfg = write_config("threshold.ini", &text);
    let o = run(&["classify", "--config", cfg.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    assert_eq!(field(&stdout(&o), "near_threshold"), "true");

    let cfg = write_config("narrow.ini", &TYPE_ONE.replace("f_max = 0.23", "f_max = 0.17"));
    let o = run(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(field(&stdout(&o), "numeric_type"), "inconclusive");
    assert!(stderr(&o).contains("widen the sweep"), "{}", stderr(&o));
}

#[test]
fn survival_beats_only_at_the_critical_field() {
    let cfg = write_config("surv.ini", TYPE_ONE);
    let contrast = |f: &str| {
        let o = run(&["survival", "--config", cfg.to_str().unwrap(), "--set", &format!("model.field={f}")]);
        assert!(o.status.success(), "{}", stderr(&o));
        let out = stdout(&o);
        for key in ["c1", "c2", "E1", "E2", "T"] {
            field(&out, key);
        }
        number(&out, "contrast")
    };
    let at = contrast(F_CRITICAL);
    assert!(at > 10.0 * contrast("0.17"));
    assert!(at > 10.0 * contrast("0.21"));
}

#[test]
fn json_output_reruns_to_identical_numbers() {
    let cfg = write_config("round.ini", TYPE_ONE);
    let first = tmp("round_1.json");
    let second = tmp("round_2.json");
    let o = run(&[
        "survival", "--config", cfg.to_str().unwrap(), "--set", "time.t_points=50", "--json", "--out",
        first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let o = run(&["survival", "--config", first.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let b: Value = serde_json::from_str(&std::fs::read_to_string(&second).unwrap()).unwrap();
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["summary"], b["summary"]);
    assert_eq!(a["config"]["model"], b["config"]["model"]);
    assert_eq!(a["config"]["time"], b["config"]["time"]);
    assert_eq!(a["results"]["t"].as_array().unwrap().len(), 50);
}

#[test]
fn log_level_comes_from_the_environment() {
    let text = "[model]\nalpha1 = -2.8\nalpha2 = -2\na = 5\n";
    let cfg = write_config("log.ini", text);
    let quiet = run(&["classify", "--config", cfg.to_str().unwrap()]);
    assert!(stderr(&quiet).is_empty(), "{}", stderr(&quiet));
    let loud = Command::new(env!("CARGO_BIN_EXE_resonance"))
        .args(["classify", "--config", cfg.to_str().unwrap()])
        .env("RESONANCE_LOG", "info")
        .output()
        .unwrap();
    assert!(stderr(&loud).contains("default sweep"), "{}", stderr(&loud));
    assert_eq!(stdout(&quiet), stdout(&loud));
}
