use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn foam(args: &[&str]) -> Output {
    foam_env(args, &[])
}

fn foam_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_foam"));
    cmd.args(args).current_dir(root()).env_remove("FOAM_SEED_OVERRIDE");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, json: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(json).unwrap()).unwrap();
    path
}

fn quadratic(kind: &str, level: u32, steps: u64) -> Value {
    serde_json::json!({
        "seed": 5,
        "task": {"kind": "quadratic", "dims": [4, 8], "dataset_size": 1, "batch_size": 1, "noise_std": 0.05},
        "optimizer": {"kind": kind, "config": {"level": level, "alpha": 1.0}},
        "schedule": {"kind": "inv_sqrt", "eta0": 0.1},
        "steps": steps,
        "shadow_adam": true,
        "record_every": 10
    })
}

fn bench(config: &Path, out: &Path) -> Output {
    foam(&["bench", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn bench_writes_versioned_trace_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "q.json", &quadratic("foam", 2, 95));
    let out = tmp.path().join("run");
    let o = bench(&cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let steps: Vec<u64> = trace
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            assert_eq!(v["schema"], 1);
            v["step"].as_u64().unwrap()
        })
        .collect();
    assert_eq!(steps.first(), Some(&1));
    assert_eq!(steps.last(), Some(&95));
    assert_eq!(steps.len(), 11);
    let s = summary(&out);
    assert_eq!(s["steps"], 95);
    assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed, s);
}

#[test]
fn identical_configs_give_identical_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "q.json", &quadratic("foam", 3, 200));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(bench(&cfg, &a).status.success());
    assert!(bench(&cfg, &b).status.success());
    assert_eq!(
        std::fs::read(a.join("trace.jsonl")).unwrap(),
        std::fs::read(b.join("trace.jsonl")).unwrap()
    );
}

#[test]
fn level_zero_foam_and_adam_summaries_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let mut adam = quadratic("adam", 0, 300);
    adam["shadow_adam"] = Value::Bool(false);
    let mut f0 = quadratic("foam", 0, 300);
    f0["shadow_adam"] = Value::Bool(false);
    let (ca, cf) = (write_config(tmp.path(), "a.json", &adam), write_config(tmp.path(), "f.json", &f0));
    let (oa, of) = (tmp.path().join("a"), tmp.path().join("f"));
    assert!(bench(&ca, &oa).status.success());
    assert!(bench(&cf, &of).status.success());
    let (sa, sf) = (summary(&oa), summary(&of));
    for key in ["final_loss", "min_grad_norm", "mean_delta_energy_ratio", "max_delta_norm_ratio"] {
        let (x, y) = (sa[key].as_f64().unwrap(), sf[key].as_f64().unwrap());
        assert!((x - y).abs() <= 1e-12, "{key}: {x} vs {y}");
    }
    assert_eq!(sa["mean_cos_to_adam"], sf["mean_cos_to_adam"]);
    assert_eq!(sa["steps"], sf["steps"]);
}

#[test]
fn bundled_adam_quadratic_converges() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bench(&root().join("configs/quadratic_adam.json"), &tmp.path().join("r"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(summary(&tmp.path().join("r"))["min_grad_norm"].as_f64().unwrap() < 1e-3);
}

#[test]
fn invalid_configs_exit_2_with_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bad = quadratic("foam", 2, 10);
    bad["steps"] = Value::from(0);
    let o = bench(&write_config(tmp.path(), "steps.json", &bad), &tmp.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("steps"), "{}", stderr(&o));

    let mut bad = quadratic("foam", 2, 10);
    bad["optimizer"]["config"]["beta2"] = Value::from(1.0);
    let o = bench(&write_config(tmp.path(), "beta.json", &bad), &tmp.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("optimizer.config.beta2"), "{}", stderr(&o));

    let mut bad = quadratic("foam", 2, 10);
    bad["optimiser"] = Value::Null;
    let o = bench(&write_config(tmp.path(), "key.json", &bad), &tmp.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("optimiser"), "{}", stderr(&o));

    let o = foam(&["bench", "--config", "does/not/exist.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_3_with_step() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = quadratic("adam", 0, 10);
    cfg["schedule"] = serde_json::json!({"kind": "constant"});
    cfg["optimizer"]["config"]["lr"] = Value::from(1e308);
    let o = bench(&write_config(tmp.path(), "d.json", &cfg), &tmp.path().join("x"));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("step"), "{}", stderr(&o));
}

#[test]
fn seed_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "q.json", &quadratic("foam", 2, 20));
    let args = |out: &str| {
        vec![
            "bench".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--out".into(),
            tmp.path().join(out).to_str().unwrap().into(),
        ]
    };
    let run = |out: &str, env: &[(&str, &str)]| {
        let a = args(out);
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        foam_env(&a, env)
    };
    assert!(run("base", &[]).status.success());
    assert!(run("over", &[("FOAM_SEED_OVERRIDE", "99")]).status.success());
    assert_ne!(
        summary(&tmp.path().join("base"))["config_hash"],
        summary(&tmp.path().join("over"))["config_hash"]
    );
    assert_eq!(run("bad", &[("FOAM_SEED_OVERRIDE", "nope")]).status.code(), Some(2));
}

#[test]
fn compare_reports_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_config(tmp.path(), "a.json", &quadratic("adam", 0, 100));
    let o = foam(&["compare", "--config-a", a.to_str().unwrap(), "--config-b", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["final_loss"]["delta"], 0.0);
    assert_eq!(r["late_phase_loss"]["delta"], 0.0);
    assert_eq!(r["min_grad_norm"]["delta"], 0.0);

    let mut other = quadratic("adam", 0, 100);
    other["seed"] = Value::from(6);
    let b = write_config(tmp.path(), "b.json", &other);
    let o = foam(&["compare", "--config-a", a.to_str().unwrap(), "--config-b", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_second_moment_residual_on_noisy_quadratic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("report.json");
    let o = foam(&[
        "compare",
        "--config-a",
        "configs/quadratic_noise_rs_on.json",
        "--config-b",
        "configs/quadratic_noise_rs_off.json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!(r["late_phase_loss"]["delta"].as_f64().unwrap().is_finite());
    assert!(!r["curve"].as_array().unwrap().is_empty());
    assert!(stderr(&o).contains("late_phase_loss"));
}

#[test]
fn props_small_grid_passes() {
    let o = foam(&["props", "--grid", "small"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 failed"));
    assert_eq!(foam(&["props", "--grid", "huge"]).status.code(), Some(2));
}

#[test]
fn memory_reports() {
    let o = foam(&["memory", "--manifest", "crates/core/data/llama60m.json", "--methods", "adam,foam:2", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let reports: Value = serde_json::from_slice(&o.stdout).unwrap();
    let total = |i: usize| reports[i]["totals"]["grand_total"].as_u64().unwrap();
    assert_eq!(total(1), 272_520_000);
    assert!((total(0) as f64 / 1e9 - 0.35).abs() < 0.01);
    assert_eq!(reports[1]["formula"], "mn/2^(l-1)");

    let o = foam(&["memory", "--manifest", "crates/core/data/llama60m_layers.json"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 1 + 9);
}

#[test]
fn foam_mini_states_are_two_per_row() {
    let o = foam(&["memory", "--manifest", "crates/core/data/llama60m_layers.json", "--methods", "foam_mini", "--json"]);
    let reports: Value = serde_json::from_slice(&o.stdout).unwrap();
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("crates/core/data/llama60m_layers.json")).unwrap())
            .unwrap();
    let mut expected = 0;
    for (layer, report) in manifest.as_array().unwrap().iter().zip(reports[0]["layers"].as_array().unwrap()) {
        if layer["routed"]["kind"] == "foam" {
            let m = layer["shape"][0].as_u64().unwrap();
            expected += 2 * m * layer["dtype_bytes"].as_u64().unwrap();
            assert_eq!(report["state_bytes"].as_u64().unwrap(), 2 * m * 2);
        }
    }
    let adam_states: u64 = reports[0]["layers"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|l| l["routed"]["kind"] == "adam")
        .map(|l| l["state_bytes"].as_u64().unwrap())
        .sum();
    assert_eq!(reports[0]["totals"]["state_bytes"].as_u64().unwrap(), expected + adam_states);
}

#[test]
fn malformed_manifest_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.json");
    std::fs::write(&path, r#"[{"name": "x", "shape": [0, 4], "dtype_bytes": 2, "routed": {"kind": "adam"}}]"#).unwrap();
    assert_eq!(foam(&["memory", "--manifest", path.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&path, "not json").unwrap();
    assert_eq!(foam(&["memory", "--manifest", path.to_str().unwrap()]).status.code(), Some(2));
    let o = foam(&["memory", "--manifest", "crates/core/data/llama60m.json", "--methods", "sgd"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bundled_configs_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        foam::bench::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}
