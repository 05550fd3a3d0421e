use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn sdg(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdg"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SDG_OUT_DIR")
        .output()
        .unwrap()
}

fn config(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn validate_control_free_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdg(&["validate", "--config", &config("control-free.toml")], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("validation.json")).unwrap()).unwrap();
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    assert_eq!(manifest(dir.path())["status"], "pass");
}

#[test]
fn demo_reports_no_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdg(&["demo-fixedpoint"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("no fixed point"), "{stdout}");
    assert!(dir.path().join("demo.json").exists());
}

#[test]
fn equilibrium_then_verify_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let bilinear = config("bilinear.toml");
    let eq = dir.path().join("eq");
    let out = sdg(&["equilibrium", "--config", &bilinear], &eq);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(eq.join("controls.csv").exists());

    // verify against the exported table
    let cfg = dir.path().join("verify.toml");
    let text = fs::read_to_string(configs().join("bilinear.toml")).unwrap() + "controls = \"eq/controls.csv\"\n";
    fs::write(&cfg, text).unwrap();
    let cfg = cfg.display().to_string();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = sdg(&["verify", "--config", &cfg, "--quiet"], d);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
    for file in ["certificate.csv", "certificate.json", "paths.csv", "values.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let m = manifest(&a);
    assert_eq!(m["seed"], 7);
    assert_eq!(m["exit_code"], 0);
    let cert: serde_json::Value = serde_json::from_slice(&fs::read(a.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["paths"], 10_000);
    assert_eq!(cert["epsilon"], 0.05);
    assert_eq!(cert["pass"], true);
    // paths.csv holds a prefix: 100 paths x 51 knots plus header and comment
    let lines = fs::read_to_string(a.join("paths.csv")).unwrap().lines().count();
    assert_eq!(lines, 100 * 51 + 2);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdg(&["isaacs", "--config", &config("bilinear.toml"), "--seed", "123", "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(manifest(dir.path())["seed"], 123);
}

#[test]
fn manifest_hashes_match_artifacts() {
    use sha2::{Digest, Sha256};
    let dir = tempfile::tempdir().unwrap();
    let out = sdg(&["values", "--config", &config("control-free.toml"), "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let m = manifest(dir.path());
    let text = fs::read_to_string(configs().join("control-free.toml")).unwrap();
    let hex = |b: &[u8]| Sha256::digest(b).iter().map(|x| format!("{x:02x}")).collect::<String>();
    assert_eq!(m["config_sha256"], hex(text.as_bytes()));
    for a in m["artifacts"].as_array().unwrap() {
        let bytes = fs::read(dir.path().join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"], hex(&bytes));
    }
}

#[test]
fn pennies_isaacs_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdg(&["isaacs", "--config", &config("pennies.toml"), "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let audit: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("isaacs.json")).unwrap()).unwrap();
    assert_eq!(audit["pass"], false);
    assert_eq!(manifest(dir.path())["status"], "fail");
}

#[test]
fn config_errors_exit_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nfixture = \"bilinear\"\n[run]\nepsilon = 0.05\nsed = 3\n").unwrap();
    let out = sdg(&["verify", "--config", &cfg.display().to_string()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("sed") && err.contains("line 5"), "{err}");

    fs::write(&cfg, "[model]\nfixture = \"bilinear\"\n[run]\nepsilon = \"big\"\n").unwrap();
    let out = sdg(&["verify", "--config", &cfg.display().to_string()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));

    let out = sdg(&["verify"], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    let out = sdg(&["no-such-command"], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdg(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("demo-fixedpoint"));
}

#[test]
fn writes_only_inside_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("work");
    fs::create_dir(&work).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sdg"))
        .args(["isaacs", "--config", &config("bilinear.toml"), "--quiet"])
        .current_dir(&work)
        .env("SDG_OUT_DIR", dir.path().join("env-out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_dir(&work).unwrap().count(), 0);
    let mut files: Vec<_> = fs::read_dir(dir.path().join("env-out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["isaacs.json", "manifest.json"]);
}
