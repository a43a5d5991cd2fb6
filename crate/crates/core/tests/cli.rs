use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_latentdrive"));
    c.env_remove("LATENTDRIVE_OUT");
    c
}

const DOUBLE_WELL: &str = r#"{
    "system": {"kind": "double_well"},
    "dynamics": {"segment_steps": 2000, "baseline_segment_steps": 2000, "stride": 100},
    "learning": {"train": {"epochs": 2}, "hidden": [8], "max_samples": 200},
    "adaptivity": {"max_inference_points": 300},
    "workflow": {"fold": {"kind": "basin", "x_above": 0.0}, "initial_md_tasks": 8, "max_md_tasks": 8,
                 "max_iterations": 100, "aggregate_step_budget": 1000000},
    "scaling": {"steps_per_task": 2000, "stride": 100}
}"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn defaults_print_a_loadable_config() {
    let out = bin().arg("defaults").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.json", std::str::from_utf8(&out.stdout).unwrap());
    let text = std::fs::read_to_string(p).unwrap();
    latentdrive::config::ConfigDocument::from_json(&text).unwrap();
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.json", r#"{"dynamics": {"dt": 1e-4, "bogus": 1}}"#);
    let out = bin().args(["--quiet", "run", "--config"]).arg(&unknown).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dynamics.bogus"));

    let broken = write(dir.path(), "b.json", "{\n  \"dynamics\": {\n");
    let out = bin().args(["--quiet", "run", "--config"]).arg(&broken).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    let out = bin().args(["run", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let dw = write(dir.path(), "dw.json", DOUBLE_WELL);
    let out = bin().args(["--quiet", "scaling", "--counts", "4,100", "--config"]).arg(&dw).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn double_well_run_writes_every_artifact_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "dw.json", DOUBLE_WELL);
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = bin().args(["--quiet", "run", "--seed", "4", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        for f in [
            "report.json",
            "effective_config.json",
            "trace.csv",
            "events.csv",
            "metrics.csv",
            "rmsd_timeseries.csv",
            "rmsd_hist.csv",
            "loss_vs_d.csv",
            "loss_vs_scale.csv",
            "latent_scatter.csv",
        ] {
            assert!(out_dir.join(f).is_file(), "missing {f}");
        }
        assert!(out_dir.join("outliers").is_dir());
        assert!(std::fs::read_dir(out_dir.join("traj")).unwrap().count() > 0);
        let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
        assert_eq!(report["termination"], "folded");
        assert_eq!(report["seed"], 4);
        reports.push(std::fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);

    // the env var stands in for --out
    let env_dir = dir.path().join("env");
    let out = bin().args(["--quiet", "baseline", "--config"]).arg(&cfg).env("LATENTDRIVE_OUT", &env_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(env_dir.join("report.json").is_file());

    let out = bin()
        .args(["--quiet", "gain"])
        .arg(dir.path().join("a/report.json"))
        .arg(env_dir.join("report.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let g: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("gain.json")).unwrap()).unwrap();
    assert!(g["gain"].as_f64().unwrap() > 0.0);
}

#[test]
fn gain_on_an_unfolded_report_is_incomparable() {
    let dir = tempfile::tempdir().unwrap();
    let zero = DOUBLE_WELL.replace("\"aggregate_step_budget\": 1000000", "\"aggregate_step_budget\": 0");
    let cfg = write(dir.path(), "zero.json", &zero);
    let a = dir.path().join("a");
    let out = bin().args(["--quiet", "run", "--config"]).arg(&cfg).arg("--out").arg(&a).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["termination"], "budget_exhausted");
    assert_eq!(report["iterations"], 0);
    let out = bin().arg("gain").arg(a.join("report.json")).arg(a.join("report.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("incomparable"));
}

#[test]
fn scaling_writes_one_row_per_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "dw.json", DOUBLE_WELL);
    let out = bin().args(["--quiet", "scaling", "--counts", "2,4", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "tasks,nodes,gpus,ttx_ms,eoh_ms,bookkeeping_ms,frames,bytes");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2,"));
}
