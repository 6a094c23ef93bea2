use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const PHYSICS: &str = "[physics]\nnu = 0.1\nkappa = 0.1\na = 1.0\nalpha = 2.0\n";

fn mhdbfed(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhdbfed"))
        .args(args)
        .current_dir(dir)
        .env_remove("MHDBFED_THREADS")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn contract<'a>(s: &'a Value, name: &str) -> &'a Value {
    s["contracts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no contract {name} in {s}"))
}

#[test]
fn linear_single_mode_run_decays_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "linear.toml",
        "[physics]\nnu = 0.01\nkappa = 0.01\na = 0.0\nalpha = 2.0\n\
         [grid]\nn = 16\n[time]\nt_end = 1.0\ndt = 0.05\n\
         [ic]\nkind = \"single_mode\"\nk = [1, 0, 0]\ndirection = [0.0, 1.0, 0.0]\n",
    );
    let out = mhdbfed(&["run", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&tmp.path().join("o"));
    assert_eq!(s["passed"], true);
    assert_eq!(contract(&s, "exact_decay")["passed"], true);
    let e0 = s["results"]["energy_initial"].as_f64().unwrap();
    let e1 = s["results"]["energy_final"].as_f64().unwrap();
    assert!((e1 / e0 - (-0.02f64).exp()).abs() < 1e-12);
    for f in ["manifest.toml", "timeseries.csv", "final.bin"] {
        assert!(tmp.path().join("o").join(f).exists(), "{f}");
    }
}

#[test]
fn manifest_resolves_defaults_and_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "min.toml",
        &format!("{PHYSICS}[grid]\nn = 8\n[time]\nt_end = 0.05\n[ic]\nkind = \"random_band\"\n"),
    );
    let out = mhdbfed(&["run", "--config", &cfg, "--out", "a", "--seed", "5"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(tmp.path().join("a/manifest.toml")).unwrap();
    for key in ["l = 6.283185307179586", "rk_order = 4", "dt_max = 0.01", "kmax = 2", "seed = 5", "monitor_cadence = 1"] {
        assert!(manifest.contains(key), "{key} missing from\n{manifest}");
    }
    // the manifest is itself a config reproducing the run
    let out = mhdbfed(&["run", "--config", "a/manifest.toml", "--out", "b"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = std::fs::read(tmp.path().join("a/timeseries.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/timeseries.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unknown_key_is_rejected_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        "[physics]\nviscocity = 0.1\nkappa = 0.1\na = 1.0\nalpha = 2.0\n[grid]\nn = 8\n[time]\nt_end = 0.1\n[ic]\nkind = \"random_band\"\n",
    );
    let out = mhdbfed(&["run", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("viscocity"));
    let s = summary(&tmp.path().join("o"));
    assert_eq!(s["passed"], false);
    assert!(s["error"].as_str().unwrap().contains("viscocity"));
}

#[test]
fn dependence_lint_warns_and_strict_refuses() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "dep.toml",
        "[physics]\nnu = 0.1\nkappa = 0.1\na = 1.0\nalpha = 1.0\n[grid]\nn = 8\n\
         [time]\nt_end = 0.1\ndt = 0.01\n[ic]\nkind = \"random_band\"\nenergy_u = 2.0\n\
         [dependence]\ndeltas = [1e-3, 1e-4, 0.0]\n",
    );
    let out = mhdbfed(&["dependence", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&tmp.path().join("o"));
    assert_eq!(s["warnings"].as_array().unwrap().len(), 1);
    assert_eq!(contract(&s, "zero_delta_exact")["passed"], true);
    assert!(tmp.path().join("o/dependence.dat").exists());

    let out = mhdbfed(&["dependence", "--strict", "--config", &cfg, "--out", "p"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("p/dependence.dat").exists());
}

#[test]
fn sweep_rows_stay_inside_the_ball() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.toml",
        &format!(
            "{PHYSICS}[grid]\nn = 8\n[time]\nt_end = 20.0\ndt_max = 0.05\n\
             [ic]\nkind = \"random_band\"\nenergy_u = 6.0\nenergy_b = 6.0\n\
             [output]\nmonitor_cadence = 5\n\
             [sweep]\nalpha = [1.5, 2.0, 3.0]\na = [1.0]\nnu = [0.1]\nkappa = [0.1]\n"
        ),
    );
    let out = mhdbfed(&["sweep", "--config", &cfg, "--out", "o", "--threads", "2"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&tmp.path().join("o"));
    let cells = s["results"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 3);
    // the alpha = 1.5 cell starts outside its ball
    let csv = std::fs::read_to_string(tmp.path().join("o/cells/cell_000.csv")).unwrap();
    let e0: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(e0 > cells[0]["r_sq"].as_f64().unwrap());
    for c in cells {
        assert!(c["limsup_energy"].as_f64().unwrap() <= c["r_sq"].as_f64().unwrap());
        assert!(tmp.path().join("o").join(c["timeseries"].as_str().unwrap()).exists());
    }
    let dat = std::fs::read_to_string(tmp.path().join("o/sweep_summary.dat")).unwrap();
    assert_eq!(dat.lines().count(), 4);

    let report = mhdbfed(&["report", "o"], tmp.path());
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    let text = std::fs::read_to_string(tmp.path().join("o/report.txt")).unwrap();
    assert_eq!(text.matches("rows").count(), 3);
    assert!(tmp.path().join("o/report.dat").exists());
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.toml",
        &format!(
            "{PHYSICS}[grid]\nn = 8\n[time]\nt_end = 0.1\n[ic]\nkind = \"random_band\"\nseed = 3\n\
             [sweep]\nalpha = [1.5, 2.0]\na = [0.5, 1.0]\nnu = [0.1]\nkappa = [0.1]\n"
        ),
    );
    assert!(mhdbfed(&["sweep", "--config", &cfg, "--out", "one", "--threads", "1"], tmp.path()).status.success());
    assert!(mhdbfed(&["sweep", "--config", &cfg, "--out", "four", "--threads", "4"], tmp.path()).status.success());
    for i in 0..4 {
        let name = format!("cells/cell_{i:03}.csv");
        assert_eq!(
            std::fs::read(tmp.path().join("one").join(&name)).unwrap(),
            std::fs::read(tmp.path().join("four").join(&name)).unwrap()
        );
    }
}

#[test]
fn report_on_empty_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = mhdbfed(&["report", "empty"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing to report"));
    assert_eq!(summary(&tmp.path().join("empty"))["passed"], false);
}

#[test]
fn mms_temporal_study() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "mms.toml",
        "[physics]\nnu = 0.1\nkappa = 0.1\na = 1.0\nalpha = 1.0\n[grid]\nn = 8\n\
         [time]\nt_end = 0.2\nrk_order = 2\n[ic]\nkind = \"random_band\"\n\
         [mms]\nkind = \"temporal\"\nlevels = [0.02, 0.01, 0.005]\n",
    );
    let out = mhdbfed(&["mms", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(contract(&summary(&tmp.path().join("o")), "temporal_order")["passed"], true);
}

#[test]
fn checkpoint_restart_matches() {
    let tmp = tempfile::tempdir().unwrap();
    let base = format!("{PHYSICS}[grid]\nn = 8\n[time]\nt_end = 0.2\ndt = 0.01\n[ic]\nkind = \"random_band\"\nseed = 4\n");
    let full = write(tmp.path(), "full.toml", &format!("{base}[output]\ncheckpoint_cadence = 10\n"));
    assert!(mhdbfed(&["run", "--config", &full, "--out", "full"], tmp.path()).status.success());
    let resume = write(
        tmp.path(),
        "resume.toml",
        &format!("{base}[output]\nrestart = \"full/checkpoints/checkpoint_00000010.bin\"\n"),
    );
    let out = mhdbfed(&["run", "--config", &resume, "--out", "resume"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(tmp.path().join("full/final.bin")).unwrap(),
        std::fs::read(tmp.path().join("resume/final.bin")).unwrap()
    );

    let wrong = write(
        tmp.path(),
        "wrong.toml",
        &(base.replace("n = 8", "n = 16") + "[output]\nrestart = \"full/checkpoints/checkpoint_00000010.bin\"\n"),
    );
    let out = mhdbfed(&["run", "--config", &wrong, "--out", "wrong"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolution mismatch"));
}
