use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_warmstart");

const SMALL: &str = r#"
seed = 11

[system]
qubits = [2, 3, 4]

[sampling]
n_samples = 64
directions = 8
r_points = 6
dt_points = 6

[track]
instances = 2
n_steps = 4

[jump]
restarts = 3
cut_points = 11
random_points = 8

[grid2d]
resolution = 5

[compress]
steps = 2

[unitary]
max_qubits = 2
draws = 20
comparisons = 2
"#;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("WARMSTART_OUTDIR")
        .env_remove("WARMSTART_LONG_RUN")
        .output()
        .unwrap()
}

fn run_in(dir: &Path, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "--config".to_string(),
        config.display().to_string(),
        "--outdir".to_string(),
        out.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    let o = Command::new(BIN)
        .current_dir(dir)
        .args(&args)
        .env_remove("WARMSTART_OUTDIR")
        .env_remove("WARMSTART_LONG_RUN")
        .output()
        .unwrap();
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

/// The CSV without its provenance line.
fn body(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let (first, rest) = text.split_once('\n').unwrap();
    assert!(first.starts_with("# seed="), "{first}");
    rest.to_string()
}

fn single_qubit_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        "one.toml",
        &SMALL.replace("qubits = [2, 3, 4]", "qubits = 4"),
    )
}

#[test]
fn selftest_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["--outdir", tmp.path().to_str().unwrap(), "selftest"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().count() >= 8);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
    assert!(tmp.path().join("selftest.csv").exists());
}

#[test]
fn bounds_prints_report_and_writes_json() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "b.toml",
        "[bounds]\nr = 0.1\nr0 = 0.5\nm = 20\nlambda = 3.0\ndt = 0.0\n",
    );
    let out = tmp.path().join("out");
    let o = run_in(tmp.path(), &cfg, &out, &["bounds"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("thm5.valid"), "{text}");

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("bounds.json")).unwrap()).unwrap();
    let r: f64 = 0.1;
    let expect = 4.0 * r.powi(4) / 45.0 * (1.0 - 4.0 * r * r / 7.0) * 0.75f64.powi(2);
    let got = json["thm5"]["value"].as_f64().unwrap();
    assert!(
        (got - expect).abs() < 1e-15 * expect.max(1.0),
        "{got} vs {expect}"
    );
    assert_eq!(json["thm5"]["valid"], true);
    assert_eq!(json["inputs"]["M"], 20);

    let csv = body(&out.join("bounds.csv"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn variance_sweep_columns_are_exact() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL);
    let out = tmp.path().join("out");
    run_in(tmp.path(), &cfg, &out, &["variance-sweep"]);
    let csv = body(&out.join("variance-sweep.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "n,M,r,mean_loss,variance,var_stderr");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3 * 6);
    assert!(rows.iter().flatten().all(|x| x.is_finite()));
    assert!(out.join("variance-sweep_fit.csv").exists());

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("variance-sweep.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["config"]["sampling"]["n_samples"], 64);
    assert!(meta["duration_s"].as_f64().unwrap() >= 0.0);
    assert!(meta["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f == "variance-sweep.csv"));
}

#[test]
fn csv_bodies_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let multi = write_config(tmp.path(), "c.toml", SMALL);
    let single = single_qubit_config(tmp.path());
    let cases: [(&str, &Path, &[&str]); 4] = [
        (
            "variance-sweep",
            &multi,
            &["variance-sweep.csv", "variance-sweep_peaks.csv"],
        ),
        ("adiabatic-track", &multi, &["adiabatic-track.csv"]),
        (
            "minima-cut",
            &single,
            &["minima-cut.csv", "minima-cut_minima.csv"],
        ),
        (
            "grad-path",
            &single,
            &["grad-path.csv", "grad-path_random.csv"],
        ),
    ];
    for (cmd, cfg, files) in cases {
        let a = tmp.path().join(format!("a-{cmd}"));
        let b = tmp.path().join(format!("b-{cmd}"));
        let c = tmp.path().join(format!("c-{cmd}"));
        run_in(tmp.path(), cfg, &a, &[cmd]);
        run_in(tmp.path(), cfg, &b, &[cmd]);
        run_in(tmp.path(), cfg, &c, &["--seed", "12", cmd]);
        for f in files {
            assert_eq!(body(&a.join(f)), body(&b.join(f)), "{cmd}: {f}");
        }
        assert_ne!(
            body(&a.join(files[0])),
            body(&c.join(files[0])),
            "{cmd}: seed ignored"
        );
    }
}

#[test]
fn every_subcommand_runs_on_a_small_config() {
    let tmp = TempDir::new().unwrap();
    let multi = write_config(tmp.path(), "c.toml", SMALL);
    let single = single_qubit_config(tmp.path());
    let out = tmp.path().join("out");
    for cmd in ["variance-vs-dt", "ite-suite", "unitary-suite"] {
        run_in(tmp.path(), &multi, &out, &[cmd]);
        assert!(out.join(format!("{cmd}.csv")).exists(), "{cmd}");
    }
    for cmd in ["landscape-2d", "compress"] {
        run_in(tmp.path(), &single, &out, &[cmd]);
        assert!(out.join(format!("{cmd}.csv")).exists(), "{cmd}");
    }
    let grid = body(&out.join("landscape-2d.csv"));
    assert_eq!(grid.lines().next().unwrap(), "u,v,loss");
    assert_eq!(grid.lines().count(), 1 + 5 * 5);
}

#[test]
fn outdir_defaults_to_the_environment() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("from-env");
    let o = Command::new(BIN)
        .arg("bounds")
        .env("WARMSTART_OUTDIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("bounds.csv").exists());
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn malformed_configs_exit_2_with_a_location() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        ("syntax.toml", "[system]\nqubits = [2,\n", "line"),
        ("field.toml", "[sampling]\nsamples = 3\n", "samples"),
        (
            "value.toml",
            "[system]\ninitial_state = \"nope\"\n",
            "initial_state",
        ),
        ("zero.toml", "[system]\nqubits = 0\n", "qubits"),
        (
            "file.toml",
            "[ansatz]\nfamily = \"file\"\nfile = \"missing.circuit\"\n",
            "ansatz.file",
        ),
        (
            "mismatch.toml",
            "[system]\nqubits = 3\nhamiltonian = \"terms\"\nterms = \"1 XX\"\n",
            "qubits",
        ),
    ];
    for (name, text, needle) in cases {
        let cfg = write_config(tmp.path(), name, text);
        let o = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--outdir",
            out.to_str().unwrap(),
            "compress",
        ]);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(2), "{name}: {err}");
        assert!(err.contains(needle), "{name}: {err}");
    }
    assert!(!out.join("compress.csv").exists());
}

#[test]
fn non_finite_results_exit_3_and_write_nothing() {
    let tmp = TempDir::new().unwrap();
    // a vanishing lambda_max with a huge curvature overflows the step-size limit
    let cfg = write_config(
        tmp.path(),
        "inf.toml",
        "[bounds]\nlambda = 1e-300\nbeta = 1e300\n",
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--outdir",
        out.to_str().unwrap(),
        "bounds",
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(!out.join("bounds.csv").exists());
}

#[test]
fn custom_hamiltonian_and_circuit_files() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("h.txt"), "1.0 XI\n0.5 ZZ\n").unwrap();
    fs::write(
        tmp.path().join("a.circuit"),
        "ROT 0 XI\nROT 1 ZZ\nROT 2 IY\n",
    )
    .unwrap();
    let cfg = write_config(
        tmp.path(),
        "custom.toml",
        "[system]\nqubits = 2\nhamiltonian = \"file\"\nfile = \"h.txt\"\n\n[ansatz]\nfamily = \"file\"\nfile = \"a.circuit\"\n\n[compress]\nsteps = 2\n",
    );
    let out = tmp.path().join("out");
    run_in(tmp.path(), &cfg, &out, &["compress"]);
    let csv = body(&out.join("compress.csv"));
    assert!(
        csv.starts_with("k,dt,t,final_loss,cumulative_fidelity,iters,theta_0,theta_1,theta_2\n")
    );
    assert_eq!(csv.lines().count(), 3);
}
