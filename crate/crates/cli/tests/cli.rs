use std::path::PathBuf;
use std::process::{Command, Output};

fn gjms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gjms")).args(args).output().unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("gjms-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn rows(csv: &[u8]) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(csv);
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn scattering_table_meets_budget() {
    let o = gjms(&["scattering", "--n", "4", "--gamma", "0.5", "--kmax", "10"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    assert!(text.starts_with("k,ode_multiplier,closed_form,rel_err,budget,pass\n"));
    let r = rows(&o.stdout);
    assert_eq!(r.len(), 11);
    for (k, row) in r.iter().enumerate() {
        assert_eq!(row[0], k.to_string());
        // gamma = 1/2, n = 4: multiplier k + 3/2
        let m: f64 = row[1].parse().unwrap();
        assert!((m - (k as f64 + 1.5)).abs() < 1e-12);
        assert!(row[3].parse::<f64>().unwrap() <= 1e-8);
        assert_eq!(row[5], "true");
    }
}

#[test]
fn energy_suite_is_deterministic() {
    let (a, b) = (tmp("ea"), tmp("eb"));
    for d in [&a, &b] {
        let o = gjms(&["energy", "--gamma", "1.5", "--n", "5", "--trials", "100", "--seed", "7", "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ca = std::fs::read(a.join("energy.csv")).unwrap();
    assert_eq!(ca, std::fs::read(b.join("energy.csv")).unwrap());
    let r = rows(&ca);
    assert_eq!(r.len(), 100);
    for row in &r {
        let gap: f64 = row[6].parse().unwrap();
        let budget: f64 = row[7].parse().unwrap();
        assert!(gap >= -budget);
    }
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("energy.json")).unwrap()).unwrap();
    assert_eq!(s["schema"], 1);
    assert_eq!(s["rows"], 100);
    assert!(s["breaches"].as_array().unwrap().is_empty());
    // another seed gives other fields
    let o = gjms(&["energy", "--gamma", "1.5", "--n", "5", "--trials", "100", "--seed", "8"]);
    assert_ne!(o.stdout, ca);
}

#[test]
fn trials_do_not_depend_on_the_count() {
    let short = gjms(&["energy", "--gamma", "0.5", "--n", "3", "--geometry", "halfspace", "--trials", "3", "--seed", "1"]);
    let long = gjms(&["energy", "--gamma", "0.5", "--n", "3", "--geometry", "halfspace", "--trials", "6", "--seed", "1"]);
    assert!(short.status.success() && long.status.success());
    assert_eq!(rows(&short.stdout)[..], rows(&long.stdout)[..3]);
}

#[test]
fn empty_mode_input() {
    for cmd in ["scattering", "dtn", "energy", "sobolev", "covariance"] {
        let g = if cmd == "dtn" { "0.5" } else { "1.5" };
        let o = gjms(&[cmd, "--gamma", g, "--modes", ""]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let text = String::from_utf8(o.stdout).unwrap();
        assert_eq!(text.lines().count(), 1, "{cmd}: {text}");
    }
}

#[test]
fn budget_breach_exits_nonzero() {
    let o = gjms(&["scattering", "--gamma", "0.5", "--n", "4", "--kmax", "3", "--tol-scale", "1e-12"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("budget breach"));
    assert!(err.contains("k = 0"));
    // the table is still emitted, with the failing rows marked
    assert!(rows(&o.stdout).iter().any(|r| r[5] == "false"));
}

#[test]
fn config_file_and_flag_precedence() {
    let d = tmp("cfg");
    std::fs::create_dir_all(&d).unwrap();
    let cfg = d.join("run.cfg");
    std::fs::write(&cfg, "# scattering run\ngamma = 0.7\nn = 5\nkmax = 4\n").unwrap();
    let o = gjms(&["scattering", "--config", cfg.to_str().unwrap(), "--kmax", "1"]);
    assert!(o.status.success());
    let r = rows(&o.stdout);
    assert_eq!(r.len(), 2);
    let want = gjms::specfun::sphere_multiplier_of(1, 5, 0.7);
    assert!((r[1][2].parse::<f64>().unwrap() - want).abs() < 1e-14 * want);

    std::fs::write(&cfg, "gama = 0.7\n").unwrap();
    let o = gjms(&["scattering", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("unknown key"));
}

#[test]
fn invalid_parameters_are_config_errors() {
    for args in [
        &["scattering", "--gamma", "1.0"][..],
        &["dtn", "--gamma", "1.5"],
        &["appendix", "--gamma", "0.5"],
        &["sobolev", "--geometry", "halfspace"],
        &["scattering", "--modes", "1.5"],
        &["energy", "--tol-scale", "0"],
    ] {
        assert_eq!(gjms(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn dtn_sobolev_covariance_appendix_pass() {
    for args in [
        &["dtn", "--gamma", "0.3"][..],
        &["sobolev", "--gamma", "0.5", "--n", "3"],
        &["covariance", "--gamma", "1.4", "--n", "5"],
        &["covariance", "--gamma", "0.7"],
        &["appendix", "--gamma", "1.25", "--modes", "0.5,2"],
    ] {
        let o = gjms(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(rows(&o.stdout).iter().all(|r| r.last().unwrap() == "true"), "{args:?}");
    }
}

#[test]
fn appendix_reports_the_hessian_gap() {
    let o = gjms(&["appendix", "--gamma", "1.5", "--modes", "1"]);
    let r = rows(&o.stdout);
    // psi = 0: hessian 8 g (g-1)/d_g, twice the stated bound at gamma = 3/2
    let (h, rhs): (f64, f64) = (r[0][5].parse().unwrap(), r[0][6].parse().unwrap());
    assert!((h - 2.0).abs() < 1e-12 && (rhs - 1.0).abs() < 1e-12, "{h} {rhs}");
    let gap: f64 = r[0][7].parse().unwrap();
    let square: f64 = r[0][8].parse().unwrap();
    assert!((gap - square).abs() < 1e-12);
}
