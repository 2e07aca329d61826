use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lvctl::io::Table;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn lvctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lvctl"))
        .args(args)
        .output()
        .expect("spawn lvctl")
}

fn run_into(cfg: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = lvctl(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(csv_files(&path));
        } else if path.extension().is_some_and(|e| e == "csv") {
            out.push(path);
        }
    }
    out.sort();
    out
}

#[test]
fn identical_configs_give_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["two_phase.cfg", "uniqueness_probe.cfg"] {
        let a = tmp.path().join(format!("{name}.a"));
        let b = tmp.path().join(format!("{name}.b"));
        run_into(&config(name), &a, &["--jobs", "1"]);
        run_into(&config(name), &b, &["--jobs", "4"]);
        let (fa, fb) = (csv_files(&a), csv_files(&b));
        assert!(!fa.is_empty());
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(x.file_name(), y.file_name());
            assert!(fs::read(x).unwrap() == fs::read(y).unwrap(), "{} differs", x.display());
        }
    }
}

#[test]
fn emitted_csvs_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("barrier");
    run_into(&config("barrier_cross.cfg"), &out, &[]);
    let files = csv_files(&out);
    for expected in ["barrier.csv", "blocked_traj.csv", "crossed_traj.csv"] {
        assert!(files.iter().any(|f| f.ends_with(expected)), "missing {expected}");
    }
    for f in files {
        let table = Table::read(&f).unwrap();
        for c in &table.columns {
            table.column(c).unwrap();
        }
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        assert_eq!(buf, fs::read(&f).unwrap(), "{}", f.display());
    }
}

#[test]
fn summary_reports_min_time_line() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = run_into(&config("min_time.cfg"), &tmp.path().join("mt"), &[]);
    let t_star: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("T_star="))
        .expect("T_star line")
        .parse()
        .unwrap();
    assert!(t_star > 0.0);
    assert!(tmp.path().join("mt/summary.txt").exists());
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let stdout = run_into(&config("two_phase_sweep.cfg"), &out, &["--jobs", "3"]);
    for k in 0..3 {
        assert!(out.join(format!("job_{k}")).is_dir());
        assert!(stdout.contains(&format!("[job_{k}]")));
    }
}

#[test]
fn parse_errors_are_reported_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "[preset]\nname = barrier_cross\n[grid]\nn 199\n").unwrap();
    let o = lvctl(&["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.starts_with("error kind=parse message="), "{stderr}");
    assert!(stderr.contains("line 4"), "{stderr}");
}

#[test]
fn unknown_preset_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("regime_report.cfg");
    let o = lvctl(&[
        "run",
        cfg.to_str().unwrap(),
        "--preset",
        "nope",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error kind=unknown_preset"));
}
