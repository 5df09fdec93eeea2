//! End-to-end runs of the `soliton` binary on small one-dimensional problems.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use soliton_cli::output::{read_field, write_field, CURVE_HEADER};
use soliton_core::{gaussian_seed, Grid};
use tempfile::TempDir;

const FREE_KERR: &str = r#"
lambda = -1.0

[model]
kind = "kerr"
v0 = 0.0
sigma = 1.0

[grid]
dim = 1
n = 256
box_len = 32.0

[seed]
sigma = 1.0
power = 2.0

[[paths]]
start = -1.0
end = -1.5

[continuation]
max_step = 0.25
"#;

fn soliton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soliton"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout_value(out: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&out.stdout);
    text.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn presets_are_listed() {
    let out = soliton(&["presets"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "kerr-focusing",
        "kerr-defocusing",
        "saturable-focusing",
        "saturable-defocusing",
    ] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(soliton(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(soliton(&["solve"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "a.toml", FREE_KERR);
    let out = soliton(&["solve", "--preset", "kerr-focusing", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        soliton(&["solve", "--config", path_str(&missing)]).status.code(),
        Some(2)
    );
}

#[test]
fn empty_config_names_required_keys() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "empty.toml", "");
    let out = soliton(&["sweep", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for key in ["model", "grid", "seed", "paths"] {
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn zero_seed_width_is_rejected() {
    let dir = TempDir::new().unwrap();
    let text = FREE_KERR.replace("sigma = 1.0\npower", "sigma = 0.0\npower");
    assert_ne!(text, FREE_KERR);
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let out = soliton(&["solve", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed.sigma"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "typo.toml",
        &format!("{FREE_KERR}\n[newton]\nres_toll = 1e-9\n"),
    );
    assert_eq!(soliton(&["solve", "--config", path_str(&cfg)]).status.code(), Some(2));
}

#[test]
fn sweep_writes_curve_and_endpoint_fields() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE_KERR);
    let out_dir = dir.path().join("run");
    let out = soliton(&["sweep", "--config", path_str(&cfg), "--out", path_str(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(out_dir.join("curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CURVE_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for (row, lambda) in rows.iter().zip([-1.0, -1.25, -1.5]) {
        assert_eq!(row.len(), 5);
        assert_eq!(row[0].parse::<f64>().unwrap(), lambda);
        // Free cubic soliton: P = 2√(-2λ) with c_K = ½.
        let expected = 2.0 * (-2.0 * lambda).sqrt();
        assert!((row[1].parse::<f64>().unwrap() - expected).abs() < 1e-6, "{row:?}");
        assert_eq!(row[4], "true");
    }

    for lambda in [-1.0, -1.5] {
        let (field, meta) = read_field(&out_dir.join(format!("field_{lambda:+.6}.f64"))).unwrap();
        assert_eq!((meta.d, meta.n, meta.box_len, meta.lambda), (1, 256, 32.0, lambda));
        assert!((soliton_core::power(&field) - meta.power).abs() <= 1e-15 * meta.power);
    }
}

#[test]
fn field_files_round_trip_bitwise() {
    let dir = TempDir::new().unwrap();
    let grid = Grid::new(2, 16, 3.0, true).unwrap();
    let field = gaussian_seed(&grid, 0.4, 1.0 / 3.0).unwrap();
    let path = write_field(dir.path(), &field, -0.1, "test").unwrap();
    let (back, meta) = read_field(&path).unwrap();
    assert_eq!(back.grid(), field.grid());
    assert!(back
        .values()
        .iter()
        .zip(field.values())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(meta.model, "test");
    assert!(!dir.path().join("field_-0.100000.f64.tmp").exists());

    fs::write(&path, [0u8; 12]).unwrap();
    assert!(read_field(&path).is_err());
}

#[test]
fn seed_field_reproduces_solution() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE_KERR);
    let first = dir.path().join("first");
    let out = soliton(&["solve", "--config", path_str(&cfg), "--out", path_str(&first)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let power: f64 = stdout_value(&out, "power").parse().unwrap();

    let seed = first.join("field_-1.000000.f64");
    let second = dir.path().join("second");
    let again = soliton(&[
        "solve",
        "--config",
        path_str(&cfg),
        "--seed-field",
        path_str(&seed),
        "--out",
        path_str(&second),
    ]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(stdout_value(&again, "newton_iters"), "0");
    let repeat: f64 = stdout_value(&again, "power").parse().unwrap();
    assert!((repeat - power).abs() <= 1e-12 * power, "{repeat} vs {power}");
}

#[test]
fn seed_field_on_wrong_grid_is_rejected() {
    let dir = TempDir::new().unwrap();
    let grid = Grid::new(1, 64, 32.0, true).unwrap();
    let seed = write_field(dir.path(), &gaussian_seed(&grid, 1.0, 2.0).unwrap(), -1.0, "x").unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE_KERR);
    let out = soliton(&["solve", "--config", path_str(&cfg), "--seed-field", path_str(&seed)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn newton_budget_exhaustion_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "tight.toml",
        &format!("{FREE_KERR}\n[newton]\nmax_newton = 1\n"),
    );
    let out = soliton(&["solve", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_value(&out, "converged"), "false");
}

#[test]
fn fixed_norm_hits_prescribed_power() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE_KERR);
    // P = 2√(-2λ) = 4 at λ = -2.
    let out = soliton(&[
        "fixed-norm",
        "--config",
        path_str(&cfg),
        "--norm",
        "2",
        "--lambda0",
        "-1.5",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lambda: f64 = stdout_value(&out, "lambda").parse().unwrap();
    let power: f64 = stdout_value(&out, "power").parse().unwrap();
    assert!((power - 4.0).abs() < 1e-7, "{power}");
    assert!((lambda + 2.0).abs() < 1e-6, "{lambda}");
}

#[test]
fn petviashvili_converges_without_lattice() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE_KERR);
    let out = soliton(&[
        "petviashvili",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let power: f64 = stdout_value(&out, "power").parse().unwrap();
    assert!((power - 2.0 * 2f64.sqrt()).abs() < 1e-6, "{power}");
}

#[test]
fn petviashvili_fails_in_the_lattice_gap() {
    let dir = TempDir::new().unwrap();
    let out = soliton(&[
        "petviashvili",
        "--preset",
        "kerr-focusing",
        "--lambda",
        "6",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_value(&out, "converged"), "false");
}
