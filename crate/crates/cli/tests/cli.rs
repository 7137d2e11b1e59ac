use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn igo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igo"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("igo runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn table(out: &[u8]) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_reader(out);
    r.records().map(|x| x.unwrap()).collect()
}

fn column(rows: &[csv::StringRecord], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn constants_for_the_two_point_scheme() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.cfg",
        "lambda = 2\nweights = 1, 0\ndimension = 1\n",
    );
    let out = igo(dir.path(), &["--config", &cfg, "constants"]);
    assert!(out.status.success());
    let rows = table(&out.stdout);
    let get = |k: &str| -> f64 {
        rows.iter()
            .find(|r| &r[0] == k)
            .unwrap_or_else(|| panic!("{k} missing"))[1]
            .parse()
            .unwrap()
    };
    assert!((get("M_w") - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(get("L_u"), 2.0);
    assert_eq!(get("N_w"), 4.0);
    assert!((get("tau_bar_min") - 323.0 / 324.0).abs() < 1e-12);
    assert!((get("beta") - 1.0 / 72.0).abs() < 1e-15);
}

#[test]
fn truncation_constants_are_finite() {
    let dir = TempDir::new().unwrap();
    let out = igo(dir.path(), &["constants"]);
    assert!(out.status.success());
    let rows = table(&out.stdout);
    assert!(rows.len() >= 10);
    assert!(column(&rows, 1).iter().all(|v| v.is_finite()));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let equal = write(dir.path(), "eq.cfg", "weights = equal\n");
    let out = igo(dir.path(), &["--config", &equal, "constants"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());

    let unknown = write(dir.path(), "bad.cfg", "colour = red\n");
    let out = igo(dir.path(), &["--config", &unknown, "verify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let out = igo(dir.path(), &["--config", "missing.cfg", "constants"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_learning_rate_is_rejected_before_sampling() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "a.cfg", "alpha = 1\n");
    let out = igo(
        dir.path(),
        &["--config", &cfg, "verify", "--filter", "theorem_cq"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning rate"));
}

#[test]
fn filter_selects_descent_checks() {
    let dir = TempDir::new().unwrap();
    let out = igo(dir.path(), &["verify", "--filter", "lemma2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = table(&out.stdout);
    assert_eq!(rows.len(), 28);
    assert!(rows
        .iter()
        .all(|r| r[0].starts_with("lemma2/") && &r[6] == "holds"));
}

#[test]
fn default_verification_suite_holds() {
    let dir = TempDir::new().unwrap();
    let out = igo(dir.path(), &["verify", "--out", "reports.csv"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(0), "{stderr}");
    assert!(stderr.contains(" 0 violated"));
    let rows = table(&fs::read(dir.path().join("reports.csv")).unwrap());
    assert!(rows.len() > 200);
    assert!(rows.iter().all(|r| &r[6] == "holds"));
}

#[test]
fn exact_optimization_decreases_in_expectation_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "o.cfg",
        "surrogate = exact\nspectrum = sphere\ndimension = 2\niterations = 50\n",
    );
    let a = igo(dir.path(), &["--config", &cfg, "optimize"]);
    assert!(a.status.success());
    let rows = table(&a.stdout);
    assert_eq!(rows.len(), 51);
    let (j, drift) = (column(&rows, 1), column(&rows, 2));
    for t in 0..50 {
        assert!(drift[t] < 0.0, "row {t}");
        assert_eq!(&rows[t][6], "true");
    }
    assert!(j[50] < j[0]);

    let b = igo(dir.path(), &["--config", &cfg, "optimize"]);
    assert_eq!(a.stdout, b.stdout);
    let c = igo(dir.path(), &["--config", &cfg, "--seed", "1", "optimize"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn negated_surrogate_never_passes_the_gate() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "n.cfg",
        "surrogate = negated\ngate_kind = kendall\ngate_threshold = 0.99\nalpha = 0.01\niterations = 30\n",
    );
    let out = igo(dir.path(), &["--config", &cfg, "optimize"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = table(&out.stdout);
    for r in &rows[..30] {
        assert_eq!(&r[6], "false");
        assert_eq!(&r[5], &format!("{:.16e}", -1.0));
    }
    assert!(column(&rows, 1)[30] < column(&rows, 1)[0]);
}

#[test]
fn correlate_reads_value_files() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.txt", "1\n1\n2\n");
    let g = write(dir.path(), "g.txt", "1\n2\n2\n");
    let out = igo(dir.path(), &["correlate", &f, &g]);
    assert!(out.status.success());
    let rows = table(&out.stdout);
    assert_eq!(&rows[0][0], "tau_b");
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.5);
    assert_eq!(&rows[1][0], "rho_weights");

    let short = write(dir.path(), "s.txt", "1\n2\n");
    assert_eq!(
        igo(dir.path(), &["correlate", &f, &short]).status.code(),
        Some(2)
    );
    let junk = write(dir.path(), "j.txt", "1\nx\n2\n");
    assert_eq!(
        igo(dir.path(), &["correlate", &f, &junk]).status.code(),
        Some(2)
    );
}
