//! The `gradlab` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gradlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_passes_on_example41() {
    let o = gradlab(&["check", "--preset", "example41", "--box", "2", "--t", "1:2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 4);
}

#[test]
fn check_fails_the_algebraic_row_for_wang() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = gradlab(&["check", "--preset", "wang-counterexample", "--box", "2", "--t", "1:2", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    // The report is still written.
    let csv = fs::read_to_string(dir.path().join("conditions.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("algebraic")).unwrap();
    assert!(row.starts_with("algebraic,false,"), "{row}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(gradlab(&["check", "--preset", "missing"]).status.code(), Some(2));
    assert_eq!(gradlab(&["check", "--preset", "heat", "--bogus"]).status.code(), Some(2));
    assert_eq!(gradlab(&["verify-gradient", "--preset", "heat"]).status.code(), Some(2));
}

fn verify_heat(out: &Path) -> Output {
    gradlab(&[
        "verify-gradient",
        "--preset",
        "heat",
        "--f",
        "exp(-x1^2/2)",
        "--s",
        "0",
        "--T",
        "0.5",
        "--c0",
        "0",
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn verify_gradient_writes_a_reproducible_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = verify_heat(a.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(verify_heat(b.path()).status.code(), Some(0));

    let manifest = fs::read_to_string(a.path().join("manifest.txt")).unwrap();
    let files: Vec<&str> = manifest.lines().filter_map(|l| l.strip_prefix("file=")).collect();
    for f in ["report.txt", "conditions.csv", "margins.csv", "snapshots/index.csv", "manifest.txt"] {
        assert!(files.contains(&f), "{f} missing from manifest");
    }
    for f in &files {
        assert!(a.path().join(f).is_file(), "{f} listed but not written");
        if f.ends_with(".csv") {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
        }
    }
    let margins = fs::read_to_string(a.path().join("margins.csv")).unwrap();
    assert!(margins.lines().skip(1).all(|l| {
        let margin: f64 = l.split(',').nth(2).unwrap().parse().unwrap();
        margin <= 3e-3
    }));
}

#[test]
fn spec_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("op.txt");
    fs::write(
        &spec,
        "[meta]\nd=2\nt_lo=0\nt_hi=5\n[diffusion]\nq11=2\nq22=1+t\n[drift]\nb1=-x1\nb2=-x2\n[lyapunov]\nphi=1+norm2(x)\ngamma=10\n",
    )
    .unwrap();
    let o = gradlab(&["check", "--spec", spec.to_str().unwrap(), "--t", "1:2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    let c0_row = text.lines().find(|l| l.starts_with("dissipativity")).unwrap();
    assert!(c0_row.contains("-1.0000000000000000e0"), "{c0_row}");
}

#[test]
fn probe_necessity_flags_wang() {
    let o = gradlab(&["probe-necessity", "--preset", "wang-counterexample", "--s", "1", "--at", "1,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("necessity      FAIL"));
    let o = gradlab(&["probe-necessity", "--preset", "heat", "--s", "1", "--at", "0.3", "--f", "sin(x1)"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
