//! End-to-end behaviour of the `qlwave` binary: exit codes, artifacts and
//! the config echo.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qlwave_cli::config::RunConfig;
use qlwave_cli::experiment::{Status, Verdict};
use qlwave_core::diagnostics::EnergyLedger;

fn qlwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlwave"))
        .args(args)
        .env_remove("QLWAVE_OUTPUT_DIR")
        .env_remove("QLWAVE_THREADS")
        .output()
        .expect("binary runs")
}

fn small_config(amplitude: f64) -> String {
    format!(
        r#"
mode = "linear-flat"
tau_final = 3.0

[params]
radius = 5.0

[grid]
half_width = 10.0
n_per_axis = 40

[data]
kind = "off-center"
amplitude = {amplitude:e}
center = [0.5, 0.0, 0.0]
width = 2.5

[diagnostics]
k_max = 1
fit_window = [0.5, 3.0]
"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn verdict(dir: &Path) -> Verdict {
    serde_json::from_str(&std::fs::read_to_string(dir.join("verdict.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn zero_data_is_an_all_trivial_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "zero.toml", &small_config(0.0));
    let out = tmp.path().join("out");
    let o = qlwave(&["run", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(verdict(&out).status, Status::AllTrivialPass);
    let table = EnergyLedger::parse_csv(&std::fs::read_to_string(out.join("ledger.csv")).unwrap()).unwrap();
    assert!(!table.is_empty());
    assert!(table.values().flatten().all(|p| p.1 == 0.0));
    for f in ["config.toml", "ledger.json", "fits.json", "lemmas.json", "monitor.json", "pigeonhole.json", "summary.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(out.join("checkpoints").join("final.bin").exists());
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "pulse.toml", &small_config(1e-3));
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let o = qlwave(&["run", s(&cfg), "--out", s(&first)]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    let echo = first.join("config.toml");
    let parsed = RunConfig::load(&echo).unwrap();
    assert_eq!(parsed, RunConfig::load(&cfg).unwrap());
    qlwave(&["run", s(&echo), "--out", s(&second)]);
    for f in ["ledger.csv", "verdict.json"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f} differs");
    }
    assert_eq!(
        std::fs::read(first.join("checkpoints/final.bin")).unwrap(),
        std::fs::read(second.join("checkpoints/final.bin")).unwrap()
    );

    let ledger = first.join("ledger.csv");
    let o = qlwave(&["fit", s(&ledger), "--quantity", "energy_disc", "--window", "0.5", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(fit["exponent"].as_f64().unwrap().is_finite());
    let o = qlwave(&["fit", s(&ledger), "--quantity", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_dir_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "zero.toml", &small_config(0.0));
    let out = tmp.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_qlwave"))
        .args(["run", s(&cfg)])
        .env("QLWAVE_OUTPUT_DIR", &out)
        .env("QLWAVE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("verdict.json").exists());
}

#[test]
fn config_errors_exit_with_two_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (small_config(0.0).replace("half_width = 10.0", "half_width = 8.0"), "grid.half_width"),
        (small_config(0.0).replace("radius = 5.0", "radius = 3.0"), "params"),
        (small_config(0.0).replace("k_max = 1", "k_max = 4"), "diagnostics.k_max"),
        (small_config(0.0).replace("tau_final", "tau_end"), "tau_end"),
    ];
    for (i, (text, field)) in cases.iter().enumerate() {
        let cfg = write(tmp.path(), &format!("bad{i}.toml"), text);
        let o = qlwave(&["run", s(&cfg), "--out", s(&tmp.path().join("never"))]);
        assert_eq!(o.status.code(), Some(2));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(field), "{err}");
    }
    let o = qlwave(&["run", s(&tmp.path().join("missing.toml"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_suite_lists_the_available_ones() {
    let o = qlwave(&["accept", "everything"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in qlwave_cli::suites::suite_names() {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn fast_suite_passes_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qlwave(&["accept", "null-condition", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let res: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(res[0]["suite"], "null-condition");
    assert_eq!(res[0]["pass"], true);
}

#[test]
fn check_null_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "good.json", r#"{"name": "dt-box"}"#);
    let bad = write(tmp.path(), "bad.json", r#"{"name": "ttt-only"}"#);
    let tensor = serde_json::to_string(&qlwave_core::geometry::NullFormTensor::q0_dt()).unwrap();
    let explicit = write(tmp.path(), "explicit.json", &tensor);
    let junk = write(tmp.path(), "junk.json", "[1, 2");
    assert_eq!(qlwave(&["check-null", s(&good)]).status.code(), Some(0));
    assert_eq!(qlwave(&["check-null", s(&explicit)]).status.code(), Some(0));
    let o = qlwave(&["check-null", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rep["worst_residual"].as_f64().unwrap() >= 0.5);
    assert_eq!(qlwave(&["check-null", s(&junk)]).status.code(), Some(2));
}

#[test]
fn validate_metric_separates_decaying_from_constant_perturbations() {
    let tmp = tempfile::tempdir().unwrap();
    let base = small_config(0.0).replace("linear-flat", "linear-perturbed");
    let bump = write(
        tmp.path(),
        "bump.toml",
        &format!("{base}\n[metric]\nfamily = \"static-bump\"\ndelta0 = 0.01\nalpha = 0.1\nradius = 5.0\nc_time = 1.0\nc_space = -0.5\n"),
    );
    let constant = write(tmp.path(), "constant.toml", &format!("{base}\n[metric]\nfamily = \"constant-time\"\nvalue = -0.05\n"));
    assert_eq!(qlwave(&["validate-metric", s(&bump)]).status.code(), Some(0));
    assert_eq!(qlwave(&["validate-metric", s(&constant)]).status.code(), Some(1));
}

#[test]
fn audit_verb_requires_an_audit_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "plain.toml", &small_config(1e-3));
    assert_eq!(qlwave(&["audit", s(&cfg)]).status.code(), Some(2));

    let text = format!(
        "{}\n[audit]\nmultipliers = [\"dt\"]\ntau1 = 0.5\ntau2 = 2.5\nspacings = [0.5]\n",
        small_config(1e-3)
    );
    let cfg = write(tmp.path(), "audit.toml", &text);
    let out = tmp.path().join("audit-out");
    let o = qlwave(&["audit", s(&cfg), "--out", s(&out)]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    let body: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(body["reports"][0]["multiplier"], "dt");
    assert!(body["reports"][0]["residuals"][0].as_f64().unwrap().is_finite());
    assert!(out.join("audit.json").exists());
}

#[test]
fn convergence_mode_reports_second_order() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
mode = "convergence"
tau_final = 2.0

[params]
radius = 5.0

[grid]
half_width = 9.0
n_per_axis = 36

[solver]
fd_order = 2
courant = 0.25

[data]
kind = "radial"
profile = { amplitude = 1.0, center = 2.0, width = 2.5 }

[convergence]
spacings = [0.5, 0.25, 0.125]
t_check = 2.0
"#;
    let cfg = write(tmp.path(), "conv.toml", text);
    let out = tmp.path().join("conv");
    let o = qlwave(&["run", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let table: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("convergence.json")).unwrap()).unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 3);
    assert!(table["min_order"].as_f64().unwrap() >= 1.9);
    assert!(out.join("convergence.csv").exists());
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 5);

    use qlwave_cli::suites::{audit_config, convergence_config, DeskRun};
    let pairs = [
        ("convergence.toml", convergence_config()),
        ("audit.toml", audit_config()),
        ("desk-linear-flat.toml", DeskRun::LinearFlat.config()),
        ("desk-perturbed.toml", DeskRun::Perturbed.config()),
        ("desk-quasilinear.toml", DeskRun::Quasilinear.config()),
    ];
    for (file, expected) in pairs {
        let cfg = RunConfig::load(&dir.join(file)).unwrap();
        assert_eq!(cfg.mode, expected.mode, "{file}");
        assert_eq!(cfg.grid, expected.grid, "{file}");
        assert_eq!(cfg.data, expected.data, "{file}");
        assert_eq!(cfg.metric, expected.metric, "{file}");
        assert_eq!(cfg.params, expected.params, "{file}");
        assert_eq!(cfg.audit, expected.audit, "{file}");
        assert_eq!(cfg.convergence, expected.convergence, "{file}");
        assert_eq!(cfg.nullform, expected.nullform, "{file}");
    }
}
