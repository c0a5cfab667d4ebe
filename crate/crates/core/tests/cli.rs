use std::fs;
use std::path::Path;
use std::process::Command;

fn qpdf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qpdf"))
}

fn config_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .display()
        .to_string()
}

fn read(dir: &Path, file: &str) -> String {
    fs::read_to_string(dir.join(file)).unwrap()
}

#[test]
fn end_to_end_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = qpdf()
        .args([
            "end-to-end",
            "--config",
            &config_path("default.toml"),
            "--out-dir",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        read(dir.path(), "moments.csv").lines().next().unwrap(),
        "time,mean_exact,var_exact,mean_m2,var_m2,mean_m4,var_m4,mean_m6,var_m6,mean_oracle,var_oracle"
    );
    let gates = read(dir.path(), "gate_counts.csv");
    let mut lines = gates.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,exact_count,approx_m2,approx_m4,approx_m6"
    );
    assert!(lines.next().unwrap().starts_with("1,3,"));
    assert!(lines.next().unwrap().starts_with("2,17,"));
    assert_eq!(
        read(dir.path(), "pdf_evolution.csv").lines().count(),
        1 + 16 * 32
    );
    assert!(read(dir.path(), "run_summary.csv").ends_with(",ok\n"));
    assert!(dir.path().join("gate_counts_compiled.csv").exists());
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let status = qpdf()
            .args(["end-to-end", "--config", &config_path("hhl_reduced.toml")])
            .args(["--set", "shots=1000", "--set", "seed=7", "--out-dir"])
            .arg(d)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for f in [
        "moments.csv",
        "pdf_evolution.csv",
        "run_summary.csv",
        "gate_counts.csv",
    ] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn end_to_end_requires_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = qpdf()
        .args(["end-to-end", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(qpdf().arg("frobnicate").status().unwrap().code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let code = qpdf()
        .args(["solve", "--set", "dt=-1", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(1));
    assert_eq!(qpdf().arg("--help").status().unwrap().code(), Some(0));
}

#[test]
fn numerical_failure_exits_with_two_and_still_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = qpdf()
        .args(["end-to-end", "--config", &config_path("hhl_reduced.toml")])
        .args(["--set", "hhl_c=1e-9", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let summary = read(dir.path(), "run_summary.csv");
    assert!(summary.starts_with("mode,n_system,clock,t0,c,success_prob,fidelity,kappa,status"));
    assert!(summary.contains("error:"));
}

#[test]
fn subcommands_produce_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let out = qpdf()
            .args(args)
            .args([
                "--set",
                "n_t_qubits=2",
                "--set",
                "n_phi_qubits=3",
                "--out-dir",
            ])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    };
    run(&["evolve-classical"]);
    assert!(dir.path().join("pdf_evolution.csv").exists());

    let stdout = run(&["build-history"]);
    assert!(stdout.contains("N = 32"));
    assert!(read(dir.path(), "history_matrix.txt").starts_with("32 "));

    run(&["solve", "--mode", "hhl"]);
    assert!(read(dir.path(), "run_summary.csv").contains("hhl,5,8,"));
    assert_eq!(read(dir.path(), "solution.csv").lines().count(), 33);

    run(&["measure", "--mode", "classical"]);
    assert_eq!(read(dir.path(), "moments.csv").lines().count(), 5);

    run(&["gate-count"]);
    assert_eq!(read(dir.path(), "gate_counts.csv").lines().count(), 21);
}

#[test]
fn sweep_runs_every_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = qpdf()
        .args(["sweep", "--config", &config_path("hhl_reduced.toml")])
        .args(["--param", "clock_qubits", "--values", "6,8", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for v in ["6", "8"] {
        let sub = dir.path().join(format!("clock_qubits={v}"));
        assert!(read(&sub, "run_summary.csv").contains(&format!("hhl,5,{v},")));
    }
}
