use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

fn advecta() -> Command {
    Command::new(env!("CARGO_BIN_EXE_advecta"))
}

fn summary_fields(line: &str) -> BTreeMap<String, String> {
    line.split_whitespace()
        .map(|kv| {
            let (k, v) = kv.split_once('=').unwrap_or_else(|| panic!("bad summary token {kv}"));
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn quick_run(out: &Path) -> std::process::Output {
    advecta()
        .args(["run", "--case", "solid_body", "--scheme", "split", "--mesh", "orthogonal"])
        .args(["--nx", "20", "--dt", "10", "--t-end", "200", "--out"])
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn completed_run_writes_fields_log_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = quick_run(dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let stdout = String::from_utf8(out.stdout).unwrap();
    let fields = summary_fields(stdout.trim());
    for key in ["case", "scheme", "nx", "dt", "maxc", "maxcd", "l2", "linf", "mults_per_cell_step", "iters_mean", "status"] {
        assert!(fields.contains_key(key), "missing {key} in {stdout}");
    }
    assert_eq!(fields["case"], "solid_body");
    assert_eq!(fields["status"], "completed");
    assert_eq!(fields["mults_per_cell_step"], "40.0");

    for t in ["0", "100", "200"] {
        let csv = fs::read_to_string(dir.path().join(format!("solid_body_split_t{t}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("i,j,x,y,phi,error"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 400);
        assert!(rows[0].starts_with("0,0,"));
        assert!(rows[1].starts_with("1,0,"), "rows run j-outer");
        assert!(rows.iter().all(|r| r.split(',').count() == 6));
    }
    let log = fs::read_to_string(dir.path().join("solid_body_split.log")).unwrap();
    assert!(log.lines().next().unwrap().starts_with("step=1 "));
    assert_eq!(fs::read_to_string(dir.path().join("summary.txt")).unwrap().trim(), stdout.trim());
}

#[test]
fn repeated_runs_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    quick_run(a.path());
    quick_run(b.path());
    for t in ["0", "100", "200"] {
        let name = format!("solid_body_split_t{t}.csv");
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn seed_check_passes_for_deterministic_runs() {
    let out = advecta()
        .args(["run", "--case", "deform", "--scheme", "mol-rk2", "--mesh", "distorted"])
        .args(["--nx", "24", "--dt", "0.05", "--t-end", "0.5", "--seed-check"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("identical"));
    // No reference exists half way through the reversal.
    assert!(String::from_utf8_lossy(&out.stdout).contains("l2=NA"));
}

#[test]
fn unstable_split_run_exits_with_diverged_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = advecta()
        .args(["run", "--case", "orography", "--scheme", "split", "--mesh", "distorted"])
        .args(["--nx", "300", "--dt", "1000", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let fields = summary_fields(String::from_utf8(out.stdout).unwrap().trim());
    assert!(fields["status"].starts_with("diverged@"));
    assert_eq!(fields["l2"], "NA");
    // Partial output: the initial field and the log are still written.
    assert!(dir.path().join("orography_split_t0.csv").exists());
    assert!(fs::read_to_string(dir.path().join("orography_split.log")).unwrap().contains("diverged"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "# quick run\ncase=solid_body\nscheme=mol-rk2\nmesh=distorted\nnx=16\ndt=50\nt-end=100\n").unwrap();
    let out = advecta().args(["run", "--config"]).arg(&path).args(["--dt", "25"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let fields = summary_fields(String::from_utf8(out.stdout).unwrap().trim());
    assert_eq!(fields["scheme"], "mol-rk2");
    assert_eq!(fields["nx"], "16");
    assert_eq!(fields["dt"], "25");
}

#[test]
fn configuration_errors_exit_with_one() {
    let bad = [
        vec!["run", "--case", "cube", "--scheme", "split", "--mesh", "orthogonal", "--nx", "20", "--dt", "1"],
        vec!["run", "--case", "solid_body", "--scheme", "split", "--mesh", "orthogonal", "--nx", "2", "--dt", "1"],
        vec!["run", "--case", "solid_body", "--scheme", "split", "--mesh", "orthogonal", "--nx", "20", "--dt", "0.7"],
        vec!["run", "--case", "solid_body", "--scheme", "split", "--mesh", "orthogonal", "--nx", "20", "--dt", "1", "--h0", "10"],
        vec!["run", "--case", "solid_body", "--mesh", "orthogonal", "--nx", "20", "--dt", "1"],
    ];
    for args in bad {
        let out = advecta().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("advecta:"));
    }
}
