use std::path::Path;
use std::process::{Command, Output};

fn qheat(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qheat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn csv_schemas() {
    let dir = tempfile::tempdir().unwrap();
    for (command, header) in [
        ("forward", "t,x,u"),
        ("inverse-source", "t,v_true,v_rec,abs_err"),
        (
            "inverse-initial",
            "k,lambda_k,gamma_k,tau_k,amplification_k",
        ),
        ("selftest", "check,residual,tolerance,passed"),
    ] {
        let out = dir.path().join(format!("{command}.csv"));
        let run = qheat(&[command], &out);
        assert_eq!(run.status.code(), Some(0), "{command}");
        let stdout = String::from_utf8(run.stdout).unwrap();
        assert!(
            stdout.starts_with(&format!("{command} ok max_err=")),
            "{stdout}"
        );
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().next(), Some(header));
    }
}

#[test]
fn forward_rows_are_lattice_major() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    assert_eq!(
        qheat(&["forward", "--set", "scenario=decay"], &out)
            .status
            .code(),
        Some(0)
    );
    let rows: Vec<(f64, f64)> = lines(&out)[1..]
        .iter()
        .map(|l| {
            let mut it = l.split(',').map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(rows[0], (1.0, 1.0));
    for w in rows.windows(2) {
        let (a, b) = (w[0], w[1]);
        assert!(b.0 < a.0 || (b.0 == a.0 && b.1 < a.1));
    }
}

#[test]
fn inverse_source_round_trip_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let run = qheat(&["inverse-source", "--set", "scenario=affine-v"], &out);
    let stdout = String::from_utf8(run.stdout).unwrap();
    let max_err: f64 = stdout.trim().rsplit('=').next().unwrap().parse().unwrap();
    assert!(max_err <= 1e-6, "{stdout}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");

    let bad = qheat(&["forward", "--set", "q=1.2"], &out);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8(bad.stderr).unwrap().contains("`q`"));
    assert!(!out.exists());

    let unknown = qheat(&["forward", "--set", "colour=red"], &out);
    assert_eq!(unknown.status.code(), Some(2));

    let cmd = qheat(&["backward"], &out);
    assert_eq!(cmd.status.code(), Some(2));

    let greedy = qheat(&["inverse-initial", "--set", "K_reg=5"], &out);
    assert_eq!(greedy.status.code(), Some(1));
    assert!(String::from_utf8(greedy.stderr)
        .unwrap()
        .contains("unrecoverable"));

    let zero_mean = qheat(&["inverse-source", "--set", "scenario=zero-mean"], &out);
    assert_eq!(zero_mean.status.code(), Some(2));

    let unwritable = qheat(&["forward"], &dir.path().join("no/such/dir.csv"));
    assert_eq!(unwritable.status.code(), Some(1));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "K=3\nK_reg=1\nscenario=decay\n").unwrap();
    let out = dir.path().join("i.csv");
    let run = Command::new(env!("CARGO_BIN_EXE_qheat"))
        .arg("inverse-initial")
        .arg("--config")
        .arg(&cfg)
        .args(["--set", "K=4", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(lines(&out).len(), 5);
}
