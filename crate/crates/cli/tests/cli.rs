use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper_fig2.cfg")
}

fn dlsa(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlsa"))
        .args(args)
        .env("DLSA_OUTPUT_DIR", out_dir)
        .output()
        .expect("spawn dlsa")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = dlsa(&["run", "does/not/exist.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does/not/exist.cfg"), "{}", stderr(&o));
}

#[test]
fn bad_usage_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dlsa(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(dlsa(&["run"], dir.path()).status.code(), Some(1));
    assert_eq!(dlsa(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn invalid_config_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    let text = fs::read_to_string(reference_config()).unwrap().replace("V = 100", "V = 0.5");
    fs::write(&cfg, text).unwrap();
    let o = dlsa(&["check-config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("violation"));

    let cfg = reference_config();
    let o = dlsa(&["run", cfg.to_str().unwrap(), "--V", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn check_config_prints_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = dlsa(&["check-config", reference_config().to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("mu_max           2.944439"), "{out}");
    assert!(out.contains("B                1608.29"), "{out}");
}

#[test]
fn zero_horizon_gives_zero_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let o = dlsa(&["run", reference_config().to_str().unwrap(), "--horizon", "0"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    for col in ["avg_utility", "avg_backlog", "max_avg_power", "delivered"] {
        let i = header.iter().position(|h| *h == col).unwrap();
        assert_eq!(row[i].parse::<f64>().unwrap(), 0.0, "{col}");
    }
}

#[test]
fn run_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = reference_config();
    for dir in [&a, &b] {
        let trace = dir.path().join("trace.csv");
        let o = dlsa(
            &["run", cfg.to_str().unwrap(), "--horizon", "500", "--seed", "7", "--trace-out", trace.to_str().unwrap()],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["summary.csv", "trace.csv"] {
        let x = fs::read(a.path().join(file)).unwrap();
        assert_eq!(x, fs::read(b.path().join(file)).unwrap(), "{file}");
        assert!(!x.contains(&b'\r'));
    }
    let trace = fs::read_to_string(a.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 501);
}

#[test]
fn trace_single_slot_and_pair_rules() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config();
    let o = dlsa(&["trace", cfg.to_str().unwrap(), "--pair", "0:1,3:2", "--slots", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("queues.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "slot,q_0_1,q_3_2");

    let o = dlsa(&["trace", cfg.to_str().unwrap(), "--pair", "2:2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("identically zero"));

    let o = dlsa(&["trace", cfg.to_str().unwrap(), "--pair", "nonsense"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_rows_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config();
    let o = dlsa(
        &["sweep", cfg.to_str().unwrap(), "--V", "1,50", "--seeds", "1,2", "--horizon", "400", "--workers", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let sweep = dir.path().join("sweep.csv");
    let csv = fs::read_to_string(&sweep).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(dir.path().join("report.txt").exists());
    assert!(dir.path().join("report.csv").exists());

    let again = tempfile::tempdir().unwrap();
    let o = dlsa(&["report", cfg.to_str().unwrap(), sweep.to_str().unwrap()], again.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(dir.path().join("report.csv")).unwrap(),
        fs::read(again.path().join("report.csv")).unwrap()
    );
}

#[test]
fn sweep_rejects_empty_v_list() {
    let dir = tempfile::tempdir().unwrap();
    let o = dlsa(&["sweep", reference_config().to_str().unwrap(), "--V", ""], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn out_dir_flag_overrides_env() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let o = dlsa(
        &["run", reference_config().to_str().unwrap(), "--horizon", "10", "--out-dir", flag_dir.path().to_str().unwrap()],
        env_dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(flag_dir.path().join("summary.csv").exists());
    assert!(!env_dir.path().join("summary.csv").exists());
}
