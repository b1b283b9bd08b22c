use std::path::{Path, PathBuf};
use std::process::Command;

use kpo_core::spectrum::Method;
use kpo_sweep::{emit_energy_diagram, emit_offdiag_trace, run_sweep, SweepConfig, SweepError, SweepMethod};

fn recipes_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("recipes")
}

fn parse(src: &str) -> SweepConfig {
    SweepConfig::parse(src, "test.toml").unwrap_or_else(|e| panic!("{e}"))
}

fn parse_err(src: &str) -> String {
    match SweepConfig::parse(src, "test.toml") {
        Ok(_) => panic!("config was accepted"),
        Err(e @ SweepError::Config { .. }) => e.to_string(),
        Err(e) => panic!("not a config error: {e}"),
    }
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

const SMALL: &str = r#"
methods = ["modified", "previous"]

[model]
kind = "two-photon"
delta_over_2pi_MHz = 0.0
kerr_over_2pi_MHz = 17.0
dim = 16
n_keep = 6

[loss]
kappa_ex_over_2pi_MHz = 1.0
kappa_int_over_2pi_MHz = 0.45

[probe]
measurement = "transmission"
start_over_2pi_MHz = -60.0
stop_over_2pi_MHz = 10.0
count = 41

[pump]
values_over_2pi_MHz = [0.0, 8.0]

[output]
directory = "unused"
formats = ["csv", "svg"]
"#;

fn small_in(dir: &Path) -> SweepConfig {
    let mut cfg = parse(SMALL);
    cfg.output.directory = dir.to_path_buf();
    cfg
}

#[test]
fn config_errors_name_line_and_column() {
    let empty = SMALL.replace(r#"methods = ["modified", "previous"]"#, "methods = []");
    let msg = parse_err(&empty);
    assert!(msg.starts_with("test.toml:2:"), "{msg}");

    let unknown = SMALL.replace(r#""previous""#, r#""bogus""#);
    let msg = parse_err(&unknown);
    assert!(msg.starts_with("test.toml:2:"), "{msg}");
    assert!(msg.contains("bogus"), "{msg}");

    let broken = SMALL.replace("dim = 16", "dim = = 16");
    let msg = parse_err(&broken);
    assert!(msg.starts_with("test.toml:8:"), "{msg}");

    let extra = SMALL.replace("n_keep = 6", "n_keep = 6\nspin = 1");
    let msg = parse_err(&extra);
    assert!(msg.starts_with("test.toml:10:"), "{msg}");

    let shallow = SMALL.replace("dim = 16", "dim = 4").replace("n_keep = 6", "n_keep = 4");
    let msg = parse_err(&shallow);
    assert!(msg.starts_with("test.toml:8:"), "{msg}");
}

#[test]
fn every_recipe_parses() {
    let mut count = 0;
    for entry in std::fs::read_dir(recipes_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            SweepConfig::from_path(&path).unwrap_or_else(|e| panic!("{e}"));
            count += 1;
        }
    }
    assert!(count >= 10);
}

#[test]
fn hash_tracks_physics_only() {
    let base = parse(SMALL);
    let mut moved = base.clone();
    moved.output.directory = PathBuf::from("elsewhere");
    moved.output.svg = false;
    assert_eq!(base.physics_hash(), moved.physics_hash());

    let tweaks = [
        ("kerr_over_2pi_MHz = 17.0", "kerr_over_2pi_MHz = 17.5"),
        ("kappa_int_over_2pi_MHz = 0.45", "kappa_int_over_2pi_MHz = 0.5"),
        ("count = 41", "count = 42"),
        ("[0.0, 8.0]", "[0.0, 8.5]"),
        (r#"["modified", "previous"]"#, r#"["modified"]"#),
    ];
    for (from, to) in tweaks {
        assert_ne!(base.physics_hash(), parse(&SMALL.replace(from, to)).physics_hash(), "{to}");
    }
}

#[test]
fn sweep_is_deterministic_and_well_formed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_sweep(&small_in(a.path())).unwrap();
    let second = run_sweep(&small_in(b.path())).unwrap();
    assert_eq!(first.files.len(), second.files.len());
    for (fa, fb) in first.files.iter().zip(&second.files).chain([(&first.manifest, &second.manifest)]) {
        assert_eq!(fa.file_name(), fb.file_name());
        assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap(), "{}", fa.display());
    }

    let (header, rows) = read_csv(&a.path().join("modified_p8.csv"));
    assert_eq!(header, ["omega_in_over_2pi_MHz", "re_gamma", "im_gamma", "abs_gamma", "re_T", "im_T", "abs_T"]);
    assert_eq!(rows.len(), 41);
    for row in &rows {
        assert_eq!(row.len(), 7);
        assert!((row[4] - 1.0 - row[1]).abs() < 1e-12 && (row[5] - row[2]).abs() < 1e-12);
    }
    let (header, rows) = read_csv(&a.path().join("transitions_p8.csv"));
    assert_eq!(header.len(), 6);
    assert!(!rows.is_empty());

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(&first.manifest).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], small_in(a.path()).physics_hash());
    assert_eq!(manifest["pumps"].as_array().unwrap().len(), 2);
    assert!(manifest["files"].as_array().unwrap().iter().any(|f| f == "spectrum_p8.svg"));
}

#[test]
fn methods_differ_at_intermediate_pump() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SweepConfig::from_path(&recipes_dir().join("two_photon_p68.toml")).unwrap();
    cfg.output.directory = dir.path().to_path_buf();
    cfg.output.svg = false;
    run_sweep(&cfg).unwrap();
    let (_, modified) = read_csv(&dir.path().join("modified_p68.csv"));
    let (_, previous) = read_csv(&dir.path().join("previous_p68.csv"));
    let gap = modified.iter().zip(&previous).map(|(m, p)| (m[3] - p[3]).abs()).fold(0.0, f64::max);
    assert!(gap > 0.1, "largest ||Γ| difference| {gap}");
}

const LEVELS: &str = r#"
[model]
kind = "two-photon"
delta_over_2pi_MHz = 25.5
kerr_over_2pi_MHz = 17.0
dim = 24
n_keep = 6

[loss]
kappa_ex_over_2pi_MHz = 1.0
kappa_int_over_2pi_MHz = 0.1

[pump]
start_over_2pi_MHz = 0.0
stop_over_2pi_MHz = 4.0
count = 9

[output]
directory = "unused"
formats = ["csv"]
"#;

#[test]
fn energy_diagram_starts_at_fock_energies() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse(LEVELS);
    cfg.output.directory = dir.path().to_path_buf();
    emit_energy_diagram(&cfg).unwrap();
    let (header, rows) = read_csv(&dir.path().join("energies.csv"));
    assert_eq!(header[0], "p_over_2pi_MHz");
    assert_eq!(header[1], "level_0_even");
    assert_eq!(header[2], "level_1_odd");
    assert_eq!(rows.len(), 9);
    let fock = |n: f64| 25.5 * n - 8.5 * n * (n - 1.0);
    for n in 0..6 {
        assert!((rows[0][n + 1] - fock(n as f64)).abs() < 1e-9, "level {n}");
    }
    // Δ = 1.5 K: |1⟩,|3⟩ and |0⟩,|4⟩ are degenerate at p = 0.
    assert!((rows[0][2] - rows[0][4]).abs() < 1e-9);
    assert!((rows[0][1] - rows[0][5]).abs() < 1e-9);
}

#[test]
fn four_photon_levels_are_continuous() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SweepConfig::from_path(&recipes_dir().join("four_photon_levels.toml")).unwrap();
    cfg.output.directory = dir.path().to_path_buf();
    cfg.output.svg = false;
    emit_energy_diagram(&cfg).unwrap();
    let (_, rows) = read_csv(&dir.path().join("energies.csv"));
    // A label swap changes the slope by about the local level gap; smooth
    // curves on this grid bend by well under 1 MHz per step.
    for w in rows.windows(3) {
        for l in 1..w[0].len() {
            let bend = (w[2][l] - 2.0 * w[1][l] + w[0][l]).abs();
            assert!(bend < 1.0, "label {} kinks by {bend} MHz at p = {}", l - 1, w[1][0]);
        }
    }
}

#[test]
fn offdiag_trace_vanishes_without_pump_and_is_hermitian() {
    let dir = tempfile::tempdir().unwrap();
    let src = LEVELS.replace("delta_over_2pi_MHz = 25.5", "delta_over_2pi_MHz = 0.0")
        + "\n[offdiag]\nelements = [[0, 4], [4, 0], [0, 2]]\n";
    let mut cfg = parse(&src);
    cfg.output.directory = dir.path().to_path_buf();
    emit_offdiag_trace(&cfg).unwrap();
    let (header, rows) = read_csv(&dir.path().join("offdiag.csv"));
    assert_eq!(header.len(), 1 + 3 * 3);
    assert_eq!(header[1], "abs_rho_0_4");
    assert_eq!(rows[0][0], 0.0);
    assert!(rows[0][1..].iter().all(|v| v.abs() < 1e-12), "{:?}", rows[0]);
    for row in &rows {
        assert!((row[1] - row[4]).abs() < 1e-12);
        assert!((row[2] - row[5]).abs() < 1e-12 && (row[3] + row[6]).abs() < 1e-12);
    }
    assert!(rows.last().unwrap()[7] > 1e-3);
}

#[test]
fn solver_failures_name_the_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let src = SMALL
        .replace("start_over_2pi_MHz = -60.0", "start_over_2pi_MHz = -2.0")
        .replace("stop_over_2pi_MHz = 10.0", "stop_over_2pi_MHz = 2.0")
        .replace("count = 41", "count = 3")
        .replace("[0.0, 8.0]", "[8.0]");
    let mut cfg = parse(&src);
    cfg.output.directory = dir.path().to_path_buf();
    // The time-domain oracle has no drive period at zero detuning.
    cfg.methods = vec![SweepMethod::Core(Method::Modified), SweepMethod::Oracle];
    let err = run_sweep(&cfg).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, SweepError::Solver { .. }), "{msg}");
    assert!(msg.contains("method oracle, p/2π = 8 MHz, ω̃_in/2π = 0 MHz"), "{msg}");
}

fn kpo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kpo"))
}

#[test]
fn binary_writes_where_asked() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("small.toml");
    std::fs::write(&config, SMALL.replace("[0.0, 8.0]", "[8.0]")).unwrap();

    let out = tmp.path().join("flag");
    let run = kpo()
        .args(["sweep", "--threads", "1", "--method", "previous", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(out.join("previous_p8.csv").exists());
    assert!(!out.join("modified_p8.csv").exists());
    assert!(String::from_utf8_lossy(&run.stdout).contains("manifest.json"));

    let env_out = tmp.path().join("env");
    let run = kpo()
        .args(["sweep", "--threads", "1", "--config"])
        .arg(&config)
        .env("KPO_OUT_DIR", &env_out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(env_out.join("modified_p8.csv").exists() && env_out.join("previous_p8.csv").exists());
}

#[test]
fn binary_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, SMALL.replace("count = 41", "count = \"many\"")).unwrap();
    let run = kpo().args(["sweep", "--config"]).arg(&config).arg("--out").arg(tmp.path()).output().unwrap();
    assert!(!run.status.success());
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.starts_with("error: ") && stderr.contains("bad.toml:"), "{stderr}");

    let four = tmp.path().join("four.toml");
    std::fs::write(&four, SMALL.replace("two-photon", "four-photon")).unwrap();
    let run = kpo()
        .args(["sweep", "--method", "analytic-2x2", "--config"])
        .arg(&four)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(!run.status.success());
}
