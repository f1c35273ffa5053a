use std::path::Path;
use std::process::{Command, Output};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ztac-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn run_writes_a_report_that_inspect_reads() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("honest.report");
    let o = sim(&["run", &scenario("honest.scn"), "--report", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let saved = std::fs::read_to_string(&out).unwrap();
    assert_eq!(saved.as_bytes(), o.stdout.as_slice());
    assert!(saved.starts_with("ztac-sim report v1"));

    let o = sim(&["inspect", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("leaks: PASS"), "{text}");
    assert!(text.contains("key-separation: PASS"), "{text}");
}

#[test]
fn seed_override_changes_the_report() {
    let a = sim(&["run", &scenario("honest.scn"), "--seed", "1"]);
    let b = sim(&["run", &scenario("honest.scn"), "--seed", "2"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn bad_scenario_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.scn");
    std::fs::write(&p, "epochs = many\n").unwrap();
    let o = sim(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));

    let o = sim(&["run", dir.path().join("missing.scn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn attack_scripts_leave_invariants_intact() {
    let adv = scenario("flip.adv");
    for extra in [&[][..], &["--fork"][..]] {
        let mut args = vec!["attack", &*scenario("honest.scn"), "--script", &adv]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        args.extend(extra.iter().map(|s| s.to_string()));
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = sim(&args);
        assert!(o.status.success(), "{extra:?}: {}", String::from_utf8_lossy(&o.stdout));
    }
}

#[test]
fn inspect_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.report");
    std::fs::write(&p, "not a report\n").unwrap();
    let o = sim(&["inspect", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_lists_every_table_term() {
    let o = sim(&["bench", "--iters", "1"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for term in ["T_Enc", "T_SHA", "T_ECDH", "T_VER", "T_ABE-Setup", "T_ABE-KeyGen", "T_ABE-Enc", "T_ABE-Dec", "T_IBBE"] {
        assert!(text.lines().any(|l| l.starts_with(term)), "{term} missing:\n{text}");
    }
}
