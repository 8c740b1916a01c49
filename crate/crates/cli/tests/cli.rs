use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn adsmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adsmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_default_is_ok() {
    let dir = tempfile::tempdir().unwrap();
    let p = scenario(&dir, "default.toml", "");
    let o = adsmc(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn asymmetric_phi_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = scenario(
        &dir,
        "bad.toml",
        "[controller]\norder = \"second\"\ngains = [[0.5, 0.2], [0.0, 0.5]]\n",
    );
    for cmd in ["run", "validate"] {
        let o = adsmc(&[cmd, p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains("symmetric"), "{}", stderr(&o));
    }
}

#[test]
fn unknown_key_and_usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = scenario(&dir, "typo.toml", "[adc]\nbitz = 10\n");
    assert_eq!(adsmc(&["validate", p.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(adsmc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(adsmc(&["run"]).status.code(), Some(1));
    assert_eq!(adsmc(&["repro", "fig9"]).status.code(), Some(1));
    assert_eq!(adsmc(&["--help"]).status.code(), Some(0));
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = scenario(&dir, "blowup.toml", "[run]\nduration = 10.0\ndivergence_bound = 5.0\n");
    let o = adsmc(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("divergence"));
}

#[test]
fn run_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let p = scenario(&dir, "short.toml", "[run]\nduration = 4.0\n");
    let out = dir.path().join("trace.csv");
    let o = adsmc(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out).unwrap();
    assert!(text.starts_with("t,theta_ref,"));
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn sweep_writes_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let p = scenario(&dir, "short.toml", "[run]\nduration = 6.0\n");
    let out = dir.path().join("summary.csv");
    let o = adsmc(&[
        "sweep",
        p.to_str().unwrap(),
        "--axis",
        "sampling_time",
        "--values",
        "0.2,0.4",
        "--controllers",
        "1siso,2siso,2mimo",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("sampling_time,controller,mean_abs_error"));

    let bad = adsmc(&["sweep", p.to_str().unwrap(), "--axis", "gain", "--values", "1"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn repro_fig7_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = adsmc(&["repro", "fig7", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let header = String::from_utf8_lossy(&a);
    let header = header.lines().next().unwrap();
    assert!(header.contains("beta_hat_11") && header.contains("alpha_hat_22"));
}
