use std::path::Path;
use std::process::{Command, Output};

use spinotto::io::fmt_sci;
use spinotto::{decay_rate_xi, Config};

fn spinotto(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinotto"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {text}"))
}

#[test]
fn otto_half_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = spinotto(&["otto", "--set", "B0_tesla=0.05"], dir.path());
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "eta_O"), "5.0000000000000000e-1");
}

#[test]
fn xi_matches_library_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let o = spinotto(&["xi", "--set", "trap_omega_over_omega1=100"], dir.path());
    assert!(o.status.success());
    let lib = decay_rate_xi(&Config::reference_defaults().derive().unwrap());
    assert_eq!(value(&stdout(&o), "xi_per_s"), fmt_sci(lib));
}

#[test]
fn overrides_apply_after_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "# engine\nB0_tesla = 0.02\nT_kelvin = 1e-4\n",
    )
    .unwrap();
    let o = spinotto(&["otto", "--config", "run.cfg"], dir.path());
    assert_eq!(value(&stdout(&o), "eta_O"), fmt_sci(1.0 - 0.02 / 0.1));
    let o = spinotto(
        &["otto", "--config", "run.cfg", "--set", "B0_tesla=0.05"],
        dir.path(),
    );
    assert_eq!(value(&stdout(&o), "eta_O"), "5.0000000000000000e-1");
}

#[test]
fn config_errors_exit_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 5] = [
        (&["otto", "--set", "B7_tesla=1"], "B7_tesla"),
        (&["otto", "--set", "T_kelvin=warm"], "T_kelvin"),
        (&["otto", "--set", "B0_tesla=0.2"], "B0"),
        (&["otto", "--config", "missing.cfg"], "No such file"),
        (&["sweep", "--set", "lambda_count=1"], "lambda_count"),
    ];
    for (args, needle) in cases {
        let o = spinotto(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{args:?}: {err}");
    }
    let o = spinotto(&["bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    // the kernel memory time is far below the precession period here
    let o = spinotto(
        &[
            "dynamics",
            "--set",
            "dynamics_solver=full",
            "--set",
            "B2_tesla=1",
            "--out",
            "d.csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("d.csv").exists());
    assert!(!dir.path().join("d.manifest").exists());
}

#[test]
fn sweep_is_byte_stable_and_rerunnable_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let grid = [
        "--set",
        "lambda_count=7",
        "--set",
        "gamma_count=9",
        "--set",
        "gamma_min=1e-11",
    ];
    let run = |out: &str, extra: &[&str], threads: &str| {
        let mut args = vec!["sweep"];
        args.extend_from_slice(extra);
        args.extend(["--out", out]);
        let o = Command::new(env!("CARGO_BIN_EXE_spinotto"))
            .args(&args)
            .env("SPINOTTO_THREADS", threads)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let a = run("a.csv", &grid, "1");
    let b = run("b.csv", &grid, "3");
    let c = run("c.csv", &["--config", "a.manifest"], "0");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "lambda,gamma,xi_per_s,t_c_s,xi_tc,eta_c,W_dim,P_dim,status"
    );
    assert_eq!(lines.count(), 63);
    assert!(!text.contains('\r'));
    let manifest = std::fs::read_to_string(dir.path().join("a.manifest")).unwrap();
    assert!(manifest.contains("# subcommand=sweep"));
    assert!(manifest.contains("# constants=CODATA-2018"));
    assert!(manifest.contains("lambda_count=7"));
}

#[test]
fn dynamics_and_record_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let o = spinotto(&["dynamics", "--set", "history_grid=50"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("t,r3,re_r_plus,im_r_plus,r_n,regime\n"));
    assert!(text.contains(",early\n") && text.contains(",exponential\n"));
    assert_eq!(text.lines().count(), 52);

    let o = spinotto(&["record", "--set", "history_grid=10"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("t,E_rad_J,norm,fidelity_up_down\n"));
    let first = text.lines().nth(1).unwrap();
    assert_eq!(
        first,
        "0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0"
    );
}

#[test]
fn cycle_reports_efficiencies() {
    let dir = tempfile::tempdir().unwrap();
    let o = spinotto(&["cycle"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let eta: f64 = value(&text, "eta").parse().unwrap();
    let eta_c: f64 = value(&text, "eta_c").parse().unwrap();
    assert!((eta - eta_c).abs() < 1e-9);
    assert!(eta_c < 0.5);
    let e: f64 = value(&text, "E_rad_at_tc_J").parse().unwrap();
    assert!(e > 0.0);

    let o = spinotto(&["cycle", "--set", "coupling=off"], dir.path());
    assert_eq!(value(&stdout(&o), "eta_c"), "5.0000000000000000e-1");
}

#[test]
fn xi_writes_spectrum_and_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let o = spinotto(
        &[
            "xi",
            "--spectrum",
            "j.csv",
            "--kernel",
            "h.csv",
            "--set",
            "history_grid=64",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = std::fs::read_to_string(dir.path().join("j.csv")).unwrap();
    let h = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert!(j.starts_with("omega_per_s,J\n") && j.lines().count() == 65);
    assert!(h.starts_with("tau_s,re_H,im_H\n") && h.lines().count() == 65);
    assert!(dir.path().join("j.manifest").exists() && dir.path().join("h.manifest").exists());
}
