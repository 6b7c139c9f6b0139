//! End-to-end driver tests: exit codes, stage gating, artifact sets, and
//! byte-level determinism of repeated runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_degenlab")
}

const A1_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/acceptance.cfg");

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("degenlab-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn manifest_body(dir: &Path) -> String {
    fs::read_to_string(dir.join("manifest.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("timestamp"))
        .collect::<Vec<_>>()
        .join("\n")
}

const QUICK_SOLVE: &str = "\
[problem]
res = 9
datum = linear:2,0

[solver]
eps_schedule = 1e-1, 1e-2
";

#[test]
fn acceptance_config_produces_four_files_and_exit_zero() {
    let dir = temp_dir("a1");
    let out = dir.join("out");
    let result = run(&[
        "run",
        "--config",
        A1_CONFIG,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let body = manifest_body(&out);
    assert_eq!(body.lines().count(), 4, "{body}");
    for name in ["solution.csv", "checkpoint.csv", "flow.csv", "duality.txt"] {
        assert!(body.contains(name), "missing {name} in {body}");
        assert!(out.join(name).exists());
    }
}

#[test]
fn lemmas_only_config_emits_only_lemma_csv() {
    let dir = temp_dir("lemmas");
    let out = dir.join("out");
    let cfg = write_config(
        &dir,
        "lemmas.cfg",
        "[lemmas]\nids = L2_5a, L2_7\nbudget = 2000\n",
    );
    let result = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, vec!["lemmas.csv", "manifest.txt"]);
    let csv = fs::read_to_string(out.join("lemmas.csv")).unwrap();
    assert!(csv.starts_with("id,mode,samples,violations,c_emp,stable\n"));
    assert!(csv.contains("L2_5a,exact"));
    assert!(csv.contains("L2_7,exact"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = temp_dir("determinism");
    let out1 = dir.join("r1");
    let out2 = dir.join("r2");
    for out in [&out1, &out2] {
        let result = run(&[
            "run",
            "--config",
            A1_CONFIG,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(result.status.success(), "{result:?}");
    }
    for name in ["solution.csv", "checkpoint.csv", "flow.csv", "duality.txt"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    assert_eq!(manifest_body(&out1), manifest_body(&out2));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = temp_dir("cfgerr");
    let cases = [
        ("smallp.cfg", "[problem]\np = 0.5\n"),
        ("dup.cfg", "[problem]\nres = 9\nres = 17\n"),
        ("unknown.cfg", "[problem]\nbogus = 1\n"),
    ];
    for (name, body) in cases {
        let cfg = write_config(&dir, name, body);
        let result = run(&["run", "--config", cfg.to_str().unwrap()]);
        assert_eq!(result.status.code(), Some(2), "{name}: {result:?}");
        assert!(!result.stderr.is_empty());
    }
    // missing --config entirely
    let result = run(&["run"]);
    assert_eq!(result.status.code(), Some(2));
    // duplicate-key message carries the offending line number
    let cfg = write_config(&dir, "dup2.cfg", "[problem]\nres = 9\nres = 17\n");
    let result = run(&["run", "--config", cfg.to_str().unwrap()]);
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn starved_solver_exits_three_and_names_the_stage() {
    let dir = temp_dir("solvefail");
    let cfg = write_config(
        &dir,
        "hard.cfg",
        "\
[problem]
res = 17
datum = bilinear:2
p = 2.0

[solver]
eps_schedule = 1e-3
max_iter = 1
",
    );
    let out = dir.join("out");
    let result = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(3), "{result:?}");
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("stage solve"), "{stderr}");
}

#[test]
fn solve_subcommand_writes_solution_and_checkpoint_only() {
    let dir = temp_dir("solve");
    let out = dir.join("out");
    let cfg = write_config(&dir, "quick.cfg", QUICK_SOLVE);
    let result = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, vec!["checkpoint.csv", "manifest.txt", "solution.csv"]);
    let sol = fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(sol.starts_with("eps,energy,residual,iterations,sup_slope\n"));
    assert_eq!(sol.lines().count(), 3); // header + two schedule entries
}

#[test]
fn diagnose_subcommand_adds_reports() {
    let dir = temp_dir("diag");
    let out = dir.join("out");
    let cfg = write_config(
        &dir,
        "diag.cfg",
        "\
[problem]
res = 9
datum = linear:2,0

[solver]
eps_schedule = 1e-1, 3e-2, 1e-2, 3e-3, 1e-3

[diagnostics]
delta = 0.1
balls = 0.5,0.5,0.3
",
    );
    let result = run(&[
        "diagnose",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    for name in ["excess.csv", "holder.csv", "rate.csv"] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let excess = fs::read_to_string(out.join("excess.csv")).unwrap();
    assert!(excess.starts_with("x0_1,x0_2,rho,delta,phi,psi_delta,fraction,regime\n"));
    assert!(excess.contains("nondegenerate"));
}

#[test]
fn seed_flag_overrides_lemma_seed() {
    let dir = temp_dir("seed");
    let cfg = write_config(
        &dir,
        "lem.cfg",
        "[lemmas]\nids = L2_1\nbudget = 2000\nseed = 7\n",
    );
    let read_c = |out: &Path| -> String {
        let text = fs::read_to_string(out.join("lemmas.csv")).unwrap();
        text.lines().nth(1).unwrap().split(',').nth(4).unwrap().to_string()
    };
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    let out_c = dir.join("c");
    for (out, seed) in [(&out_a, "7"), (&out_b, "7"), (&out_c, "12345")] {
        let result = run(&[
            "verify-lemmas",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(result.status.success(), "{result:?}");
    }
    assert_eq!(read_c(&out_a), read_c(&out_b));
    assert_ne!(read_c(&out_a), read_c(&out_c));
}
