use std::path::Path;
use std::process::Command;

fn run(args: &[&str], config: &str, out: &Path) -> (i32, String) {
    let cfg = out.join("config.json");
    std::fs::create_dir_all(out).unwrap();
    std::fs::write(&cfg, config).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_abstain"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into_owned())
}

#[test]
fn calib_check_writes_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = run(&["calib-check"], r#"{"costs":[0.2],"calib":{"classes":[2,8]}}"#, dir.path());
    assert_eq!(code, 0);
    assert!(stdout.contains("K = 2, c = 0.2: calibratable at β/α=4"));
    let ratios = std::fs::read_to_string(dir.path().join("calib_ratios.csv")).unwrap();
    assert!(ratios.lines().nth(2).unwrap().starts_with("8,0.2,16.5830052,4,"));
    assert!(dir.path().join("calib_extremes.csv").exists());
}

#[test]
fn bound_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (ok, _) = run(&["bound-check"], r#"{"bound":{"samples":3000}}"#, &dir.path().join("a"));
    assert_eq!(ok, 0);
    let (bad, _) = run(
        &["bound-check"],
        r#"{"bound":{"samples":3000,"constant_scale":0.1}}"#,
        &dir.path().join("b"),
    );
    assert_eq!(bad, 2);
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["synth"], r#"{"costs":[0.7]}"#, dir.path()).0, 1);
    assert_eq!(run(&["synth"], r#"{"mode":"bench"}"#, dir.path()).0, 1);
    assert_eq!(run(&["bench"], r#"{}"#, dir.path()).0, 1);
}

#[test]
fn synth_output_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"mode":"synth","costs":[0.1,0.3],"trials":1,
        "methods":[{"kind":"ce"},{"kind":"apc","phi":"exponential","psi":"exponential"}],
        "training":{"epochs":3},"grids":{"weight_decays":[1e-4,1e-1]},
        "synth":{"classes":3,"n_per_class":[15],"n_test_per_class":30,"n_mc":5000}}"#;
    let (a, _) = run(&["synth", "--seed", "7"], cfg, &dir.path().join("a"));
    let (b, _) = run(&["synth", "--seed", "7", "--threads", "2"], cfg, &dir.path().join("b"));
    assert_eq!((a, b), (0, 0));
    let read = |d: &str| std::fs::read(dir.path().join(d).join("synth.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let text = String::from_utf8(read("a")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "method,cost,n_per_class,trial,zoc_risk,rejection_ratio,fr_rate,fa_rate,bayes_risk,weight_decay,beta,tau"
    );
    assert_eq!(text.lines().count(), 1 + 4);
}
