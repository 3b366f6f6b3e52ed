use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use removal_lab::ramsey::{canonical_coloring, CanonicalSpec};
use removal_lab::{Coloring, Limits, Space};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_removal-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn write_coloring(dir: &TempDir, name: &str, phi: &Coloring) -> PathBuf {
    write(dir, name, &phi.to_text())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn random_coloring(p: u32, n: usize, r: u32, seed: u64) -> Coloring {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Coloring::random(Space::new(p, n).unwrap(), r, &mut rng)
}

const SCHUR5_R2: &str = r#"{"p":5,"r":2,"rows":[[1,1,-1]],"psi":[1,1,1]}"#;

#[test]
fn density_prints_exact_fraction() {
    let dir = TempDir::new().unwrap();
    let pat = write(
        &dir,
        "h.json",
        r#"{"p":5,"r":1,"rows":[[1,1,-1]],"psi":[1,1,1]}"#,
    );
    let phi = Coloring::constant(Space::new(5, 2).unwrap(), 1, 1).unwrap();
    let col = write_coloring(&dir, "c.txt", &phi);
    let out = run(&["density", "--pattern", s(&pat), "--coloring", s(&col)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "density");
    assert_eq!(v["density"], "625/625");
    assert_eq!(v["value"], 1.0);
}

#[test]
fn density_on_random_coloring_matches_brute_force() {
    let dir = TempDir::new().unwrap();
    let pat = write(
        &dir,
        "h.json",
        r#"{"p":3,"r":2,"rows":[[1,1,1]],"psi":[1,2,1]}"#,
    );
    let phi = random_coloring(3, 2, 2, 4);
    let col = write_coloring(&dir, "c.txt", &phi);
    let space = *phi.space();
    let mut count = 0;
    for x in 0..9 {
        for y in 0..9 {
            let z = space.scale_idx(2, space.add_idx(x, y));
            if phi.get(x) == 1 && phi.get(y) == 2 && phi.get(z) == 1 {
                count += 1;
            }
        }
    }
    let v = json(&run(&[
        "density",
        "--pattern",
        s(&pat),
        "--coloring",
        s(&col),
    ]));
    assert_eq!(v["count"], count.to_string());
    assert_eq!(v["total"], "81");
}

#[test]
fn complexity_rejects_characteristic_two() {
    let dir = TempDir::new().unwrap();
    let pat = write(
        &dir,
        "h.json",
        r#"{"p":2,"r":1,"rows":[[1,1,1]],"psi":[1,1,1]}"#,
    );
    let out = run(&["complexity", "--pattern", s(&pat)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "unsupported_characteristic");

    let pat = write(
        &dir,
        "h3.json",
        r#"{"p":5,"r":1,"rows":[[1,1,-1]],"psi":[1,1,1]}"#,
    );
    let out = run(&["complexity", "--pattern", s(&pat)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["complexity_one"], true);
}

#[test]
fn usage_and_io_errors_exit_one() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        run(&["density", "--pattern", "x.json"]).status.code(),
        Some(1)
    );
    let out = run(&[
        "density",
        "--pattern",
        "/nonexistent/h.json",
        "--coloring",
        "/nonexistent/c.txt",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["kind"], "io");

    let dir = TempDir::new().unwrap();
    let pat = write(&dir, "h.json", "{not json");
    let col = write_coloring(&dir, "c.txt", &random_coloring(2, 3, 2, 0));
    let out = run(&["density", "--pattern", s(&pat), "--coloring", s(&col)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn point_cap_is_enforced() {
    let dir = TempDir::new().unwrap();
    let col = write_coloring(&dir, "c.txt", &random_coloring(2, 6, 2, 1));
    let out = run(&["--cap", "32", "fourier", "--coloring", s(&col)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "resource");
    assert_eq!(
        run(&["--cap", "64", "fourier", "--coloring", s(&col)])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn dichotomy_case_b_writes_free_witness() {
    let dir = TempDir::new().unwrap();
    let fam = write(&dir, "f.json", SCHUR5_R2);
    let wit = dir.path().join("w.json");
    let out = run(&["dichotomy", "--family", s(&fam), "--witness-out", s(&wit)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["case"], "B");
    let w: CanonicalSpec = {
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&wit).unwrap()).unwrap();
        let chi: Vec<u32> = serde_json::from_value(v["chi"].clone()).unwrap();
        CanonicalSpec::new(5, 2, chi).unwrap()
    };
    let space = Space::new(5, 3).unwrap();
    let phi = canonical_coloring(&space, &w).unwrap();
    let col = write_coloring(&dir, "c.txt", &phi);
    let stats = json(&run(&[
        "stats",
        "--pattern",
        s(&fam),
        "--coloring",
        s(&col),
    ]));
    assert_eq!(stats["is_free"], true);
}

#[test]
fn dichotomy_case_a_has_no_witness() {
    let dir = TempDir::new().unwrap();
    let fam = write(
        &dir,
        "f.json",
        r#"{"p":5,"r":1,"rows":[[1,1,-1]],"psi":[1,1,1]}"#,
    );
    let wit = dir.path().join("w.json");
    let out = run(&["dichotomy", "--family", s(&fam), "--witness-out", s(&wit)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["case"], "A");
    assert!(!wit.exists());
}

#[test]
fn recolor_output_round_trips() {
    let dir = TempDir::new().unwrap();
    let phi = random_coloring(2, 5, 2, 11);
    let col = write_coloring(&dir, "c.txt", &phi);
    let new = dir.path().join("new.txt");
    let out = run(&[
        "recolor",
        "--coloring",
        s(&col),
        "--eps",
        "0.5",
        "--seed",
        "3",
        "--coloring-out",
        s(&new),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["check"]["ok"], true);
    let back =
        Coloring::from_text(&std::fs::read_to_string(&new).unwrap(), Limits::default()).unwrap();
    assert_eq!(back.space(), phi.space());
    let changed = back
        .colors()
        .iter()
        .zip(phi.colors())
        .filter(|(a, b)| a != b)
        .count();
    assert_eq!(v["changed_count"], changed);
}

#[test]
fn remove_free_input_exits_zero() {
    let dir = TempDir::new().unwrap();
    let space = Space::new(5, 3).unwrap();
    let phi = canonical_coloring(&space, &CanonicalSpec::identity(5)).unwrap();
    let col = write_coloring(&dir, "c.txt", &phi);
    let fam = write(
        &dir,
        "f.json",
        &removal_lab::PatternFamily::monochromatic(5, 4, &[vec![1, 1, 1]], 3)
            .unwrap()
            .to_json(),
    );
    let new = dir.path().join("new.txt");
    let out = run(&[
        "remove",
        "--family",
        s(&fam),
        "--coloring",
        s(&col),
        "--eps",
        "0.5",
        "--coloring-out",
        s(&new),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let v = json(&out);
    assert_eq!(v["outcome"], "free");
    assert_eq!(v["report"]["free"], true);
    assert!(new.exists());
}

#[test]
fn remove_abort_exits_two_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let fam = write(&dir, "f.json", SCHUR5_R2);
    let col = write_coloring(&dir, "c.txt", &random_coloring(5, 3, 2, 2));
    let args = [
        "remove",
        "--family",
        s(&fam),
        "--coloring",
        s(&col),
        "--eps",
        "0.5",
        "--seed",
        "7",
    ];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(2));
    assert_eq!(json(&a)["outcome"], "aborted");
    let mut with_threads = vec!["--threads", "1"];
    with_threads.extend_from_slice(&args);
    let b = run(&with_threads);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn model_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let col = write_coloring(&dir, "c.txt", &random_coloring(3, 4, 3, 5));
    let args = [
        "model",
        "--coloring",
        s(&col),
        "--eps",
        "0.5",
        "--seed",
        "9",
    ];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(json(&a)["check"]["ok"], true);
    let b = run(&[
        "--threads",
        "2",
        "model",
        "--coloring",
        s(&col),
        "--eps",
        "0.5",
        "--seed",
        "9",
    ]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn report_goes_to_out_file() {
    let dir = TempDir::new().unwrap();
    let pat = write(&dir, "h.json", SCHUR5_R2);
    let rep = dir.path().join("rep.json");
    let out = run(&[
        "--out",
        s(&rep),
        "subpattern",
        "--pattern",
        s(&pat),
        "--vars",
        "1,3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(v["vars"], serde_json::json!([1, 3]));
    assert_eq!(
        run(&["subpattern", "--pattern", s(&pat), "--vars", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn regularize_methods_run() {
    let dir = TempDir::new().unwrap();
    let col = write_coloring(&dir, "c.txt", &random_coloring(2, 6, 2, 8));
    for m in ["green", "strong", "weak", "strong-decomp"] {
        let out = run(&[
            "regularize",
            "--coloring",
            s(&col),
            "--method",
            m,
            "--eps",
            "0.9",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{m}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        assert_eq!(json(&out)["method"], m);
    }
}

#[test]
fn reduce_writes_lifted_coloring_and_family() {
    let dir = TempDir::new().unwrap();
    let phi = random_coloring(2, 4, 2, 6);
    let col = write_coloring(&dir, "c.txt", &phi);
    let offs = write(
        &dir,
        "o.json",
        r#"[{"p":2,"r":2,"rows":[[1,1,1]],"psi":[1,1,2],"offsets":[[1,0,0,0]]}]"#,
    );
    let lifted = dir.path().join("l.txt");
    let family = dir.path().join("f.json");
    let out = run(&[
        "reduce",
        "--offsets",
        s(&offs),
        "--coloring",
        s(&col),
        "--coloring-out",
        s(&lifted),
        "--family-out",
        s(&family),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["counts"], serde_json::json!([32]));
    let l = Coloring::from_text(
        &std::fs::read_to_string(&lifted).unwrap(),
        Limits::default(),
    )
    .unwrap();
    assert_eq!((l.space().dim(), l.r()), (3, 4));
    let f = removal_lab::PatternFamily::load(&family).unwrap();
    assert_eq!(f.len(), 32);
}

#[test]
fn mono_schur_f5_family_is_case_b() {
    let dir = TempDir::new().unwrap();
    let fam = removal_lab::PatternFamily::monochromatic(5, 4, &[vec![1, 1, 1]], 3).unwrap();
    let path = write(&dir, "mono.json", &fam.to_json());
    // x + y = z is different: e1, e2, e1 + e2 share a leading coefficient.
    let sum = removal_lab::PatternFamily::monochromatic(5, 4, &[vec![1, 1, -1]], 3).unwrap();
    let sum_path = write(&dir, "sum.json", &sum.to_json());
    assert_eq!(
        json(&run(&["dichotomy", "--family", s(&sum_path)]))["case"],
        "A"
    );
    let wit = dir.path().join("w.json");
    let out = run(&["dichotomy", "--family", s(&path), "--witness-out", s(&wit)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["case"], "B");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&wit).unwrap()).unwrap();
    assert_eq!(v["r"], 4);
    assert_eq!(v["chi"].as_array().unwrap().len(), 4);
}
