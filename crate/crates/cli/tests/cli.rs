use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const MEASUREMENT_B: &str = "slits:n=3,a=99e-6,d=198e-6";
const DOUBLE: &str = "slits:n=2,a=28e-6,d=56e-6";

fn cpi(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpi"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("failed to launch cpi")
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = cpi(out, args);
    assert!(
        o.status.success(),
        "cpi {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by signal")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn paper_setup() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/paper_setup.toml")
}

fn manifest(dir: &Path, command: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("{command}.manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn csv_column(path: &Path, col: usize) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn gamma_refocus_ghost_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gamma", "--mask", MEASUREMENT_B]);
    let t = d.join("gamma.cpig");
    let refocused = ok(d, &["refocus", t.to_str().unwrap()]);
    let ghost = ok(d, &["ghost", t.to_str().unwrap()]);
    let v = |o: &Output| -> f64 {
        String::from_utf8_lossy(&o.stdout)
            .trim()
            .strip_prefix("visibility ")
            .unwrap()
            .parse()
            .unwrap()
    };
    // out of focus: the ghost image is washed out, the refocused one is not
    assert!(v(&ghost) < 0.1);
    assert!(v(&refocused) > 0.3);
    assert_eq!(csv_column(&d.join("refocused.csv"), 2).len(), csv_column(&d.join("ghost.csv"), 2).len());

    for c in ["gamma", "refocus", "ghost"] {
        let m = manifest(d, c);
        assert_eq!(m["command"], c);
        assert_eq!(m["outputs"].as_array().unwrap().len(), 1);
        assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
    }
    assert_eq!(manifest(d, "refocus")["inputs"][0]["path"], "gamma.cpig");
    ok(d, &["verify"]);

    std::fs::OpenOptions::new()
        .append(true)
        .open(d.join("ghost.csv"))
        .and_then(|mut f| std::io::Write::write_all(&mut f, b"tampered\n"))
        .unwrap();
    let o = cpi(d, &["verify"]);
    assert_eq!(code(&o), 6);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    let m = d.join("gamma.manifest.json");
    ok(d, &["verify", m.to_str().unwrap()]);
}

#[test]
fn focused_ghost_equals_refocused_image() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gamma", "--mask", MEASUREMENT_B, "--z-b", "0.092"]);
    let t = d.join("gamma.cpig");
    ok(d, &["refocus", t.to_str().unwrap()]);
    ok(d, &["ghost", t.to_str().unwrap()]);
    let r = csv_column(&d.join("refocused.csv"), 2);
    let g = csv_column(&d.join("ghost.csv"), 2);
    let peak = g.iter().copied().fold(0.0, f64::max);
    let worst = r.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst / peak < 0.01, "{}", worst / peak);
}

#[test]
fn analytic_outputs_are_reproducible_across_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(a.path(), &["--threads", "1", "gamma", "--mask", MEASUREMENT_B]);
    ok(b.path(), &["--threads", "3", "gamma", "--mask", MEASUREMENT_B]);
    let sum = |d: &Path| manifest(d, "gamma")["outputs"][0]["sha256"].clone();
    assert_eq!(sum(a.path()), sum(b.path()));
    let (ma, mb) = (manifest(a.path(), "gamma"), manifest(b.path(), "gamma"));
    assert_eq!(ma["scenario_hash"], mb["scenario_hash"]);
}

#[test]
fn scenario_file_matches_built_in_setup() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s = paper_setup();
    ok(a.path(), &["--scenario", s.to_str().unwrap(), "gamma", "--mask", DOUBLE]);
    ok(b.path(), &["gamma", "--mask", DOUBLE]);
    assert_eq!(manifest(a.path(), "gamma")["scenario_hash"], manifest(b.path(), "gamma")["scenario_hash"]);
    assert_eq!(
        manifest(a.path(), "gamma")["outputs"][0]["sha256"],
        manifest(b.path(), "gamma")["outputs"][0]["sha256"]
    );
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let text = std::fs::read_to_string(paper_setup()).unwrap();
    let broken: String = text.lines().filter(|l| !l.starts_with("z_b")).map(|l| format!("{l}\n")).collect();
    std::fs::write(d.join("no_zb.toml"), broken).unwrap();
    let o = cpi(d, &["--scenario", d.join("no_zb.toml").to_str().unwrap(), "gamma", "--mask", DOUBLE]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("z_b"), "{}", stderr(&o));

    assert_eq!(code(&cpi(d, &["gamma"])), 3);
    assert_eq!(code(&cpi(d, &["gamma", "--mask", "slits:n=2,a=3e-5"])), 3);
    assert_eq!(code(&cpi(d, &["vismap", "--d-range", "1:2:0"])), 3);
    assert_eq!(code(&cpi(d, &["speckle", "--mask", DOUBLE, "--frames", "1"])), 3);

    let o = cpi(d, &["gamma", "--mask", "slits:n=2,a=3e-5,d=1e-5"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    assert_eq!(code(&cpi(d, &["--scenario", "/nonexistent/s.toml", "gamma", "--mask", DOUBLE])), 5);
    assert_eq!(code(&cpi(d, &["refocus", d.join("missing.cpig").to_str().unwrap()])), 5);

    ok(d, &["gamma", "--mask", DOUBLE, "--grid-a", "32,10e-6", "--grid-b", "16,100e-6"]);
    let t = d.join("gamma.cpig");
    let mut bytes = std::fs::read(&t).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    std::fs::write(&t, bytes).unwrap();
    let o = cpi(d, &["ghost", t.to_str().unwrap()]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&cpi(empty.path(), &["verify"])), 6);
}

#[test]
fn speckle_runs_are_seeded_and_resumable() {
    let full = tempfile::tempdir().unwrap();
    let part = tempfile::tempdir().unwrap();
    let other = tempfile::tempdir().unwrap();
    let run = |d: &Path, extra: &[&str]| {
        let mut args = vec![
            "speckle", "--mask", DOUBLE, "--z-b", "0.092", "--pixels-a", "16", "--pixels-b", "8", "--chunk", "8",
        ];
        args.extend_from_slice(extra);
        ok(d, &args)
    };
    let o = run(full.path(), &["--frames", "40"]);
    assert!(stderr(&o).contains("noise"), "expected a variance warning");
    run(part.path(), &["--frames", "24"]);
    run(part.path(), &["--frames", "40", "--resume"]);
    run(other.path(), &["--frames", "40", "--seed", "7"]);

    let bytes = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(bytes(full.path(), "frames.cpfs"), bytes(part.path(), "frames.cpfs"));
    assert_eq!(bytes(full.path(), "gamma_estimate.cpig"), bytes(part.path(), "gamma_estimate.cpig"));
    assert_ne!(bytes(full.path(), "frames.cpfs"), bytes(other.path(), "frames.cpfs"));
    assert_eq!(manifest(full.path(), "speckle")["seeds"][0], 42);
    assert_eq!(manifest(other.path(), "speckle")["seeds"][0], 7);

    // a conflicting resume is refused without touching the stack
    let before = bytes(part.path(), "frames.cpfs");
    let o = cpi(part.path(), &["speckle", "--resume", "--frames", "48", "--seed", "9", "--pixels-a", "16", "--pixels-b", "8"]);
    assert_eq!(code(&o), 3);
    assert_eq!(before, bytes(part.path(), "frames.cpfs"));

    let f = full.path().join("frames.cpfs");
    ok(full.path(), &["estimate", f.to_str().unwrap(), "--output", "again.cpig"]);
    assert_eq!(bytes(full.path(), "again.cpig"), bytes(full.path(), "gamma_estimate.cpig"));
    ok(
        full.path(),
        &["estimate", f.to_str().unwrap(), "--bin-a", "2", "--postprocess", "threshold=0.02", "--output", "pp.cpig"],
    );
    ok(full.path(), &["verify"]);
}

#[test]
fn visibility_maps_are_written_per_modality() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["vismap", "--d-range", "3", "--z-range=-0.01:0.01:3"]);
    for stem in ["standard", "standard-pi-3", "cpi"] {
        let path = d.join(format!("vismap_{stem}.csv"));
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 3, "{stem}");
        assert!(d.join(format!("vismap_{stem}.cpig")).exists());
    }
    let cpi_rows = std::fs::read_to_string(d.join("vismap_cpi.csv")).unwrap();
    assert!(cpi_rows.lines().skip(1).all(|l| l.ends_with(",0") || l.ends_with(",1")));
    let standard = csv_column(&d.join("vismap_standard.csv"), 5);
    assert!(standard[1] > standard[0] && standard[1] > standard[2]);
}

#[test]
fn dof_sides_and_bound_are_separate_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = ok(d, &["dof", "--d-range", "6"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("DOF_CPI / DOF_standard"));
    let near = csv_column(&d.join("dof_near.csv"), 4);
    let far = csv_column(&d.join("dof_far.csv"), 4);
    assert_eq!(near.len(), 3);
    assert!(near.iter().all(|&dz| dz <= 0.0));
    assert!(far.iter().all(|&dz| dz >= 0.0));

    ok(d, &["bound", "--d-range", "2,5"]);
    let lo = csv_column(&d.join("bound.csv"), 2);
    let hi = csv_column(&d.join("bound.csv"), 3);
    assert_eq!(lo.len(), 2);
    assert!(lo[1] < lo[0] && hi[1] > hi[0], "wider separations refocus over a wider range");
    ok(d, &["verify"]);
}
