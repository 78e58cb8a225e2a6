//! End-to-end checks of the `crtsim` binary: exit codes, deterministic
//! output, and the config-sidecar round trip.

use std::process::{Command, Output};

fn crtsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crtsim"))
        .args(args)
        .output()
        .expect("failed to spawn crtsim")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn derived_prints_the_effective_couplings_to_stdout() {
    let out = crtsim(&["derived", "--set", "sweep.rate_ghz2=6e-5"]);
    let text = stdout_of(&out);
    assert!(text.starts_with("# crtsim derived\n"), "{text}");
    assert!(text.contains("# config_sha256: "), "{text}");
    assert!(text.contains("# config: model.omega_ghz = 8.0"), "{text}");
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "beta1,beta2,chi_GHz,Gs_GHz,half_rabi_time_ns,adiabaticity");
    let row = text.lines().last().unwrap();
    assert!(row.starts_with("2.50000000000e-2,2.50000000000e-2,2.00000000000e-2,1.00000000000e-2,"), "{row}");
    assert!(row.contains("1.57079632679e2"), "{row}");
    assert!(row.ends_with("1.04719755120e1"), "{row}");
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = [
        "spectrum-scan",
        "--set",
        "scan.delta1_start_ghz=3.98",
        "--set",
        "scan.delta1_stop_ghz=4.02",
        "--set",
        "scan.delta1_step_ghz=0.02",
        "--set",
        "scan.variants=full",
    ];
    let first = crtsim(&args);
    let second = crtsim(&args);
    assert_eq!(stdout_of(&first), stdout_of(&second));
    assert!(stdout_of(&first).contains("# table: variant = full"));
}

#[test]
fn sidecar_config_reproduces_the_output_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("lz.csv");
    let run1 = crtsim(&[
        "lz",
        "--preset",
        "fig4",
        "--set",
        "sweep.t_end_ns=0.0",
        "--out",
        out1.to_str().unwrap(),
    ]);
    assert!(run1.status.success(), "{}", String::from_utf8_lossy(&run1.stderr));
    let sidecar = dir.path().join("lz.csv.config");
    let echoed = std::fs::read_to_string(&sidecar).unwrap();
    assert!(echoed.contains("sweep.t_end_ns = 0.0"), "{echoed}");
    assert!(echoed.contains("sweep.rate_ghz2 = 6e-5"), "{echoed}");

    let out2 = dir.path().join("again.csv");
    let run2 = crtsim(&[
        "lz",
        "--config",
        sidecar.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(run2.status.success(), "{}", String::from_utf8_lossy(&run2.stderr));
    assert_eq!(
        std::fs::read(&out1).unwrap(),
        std::fs::read(&out2).unwrap(),
        "re-running from the sidecar must reproduce the CSV"
    );
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let out = crtsim(&["lz", "--set", "sweep.rate_gz2=6e-5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sweep.rate_gz2"), "{err}");

    let out = crtsim(&["rabi", "--preset", "fig2"]);
    assert_eq!(out.status.code(), Some(2));

    let out = crtsim(&["interference", "--set", "model.g1_ghz=0.0"]);
    assert_eq!(out.status.code(), Some(2));

    // missing config file
    let out = crtsim(&["derived", "--config", "/nonexistent/x.config"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_finite_output_exits_3() {
    // J = 0 → Gs = 0 → infinite half-Rabi time trips the finite-only rule
    let out = crtsim(&["derived", "--set", "model.j_ghz=0.0"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("half_rabi_time_ns"), "{err}");
}
