use std::path::Path;
use std::process::{Command, Output};

fn infogeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infogeo")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn rows(out: &Output) -> Vec<Vec<f64>> {
    stdout(out)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn table1_default_range_and_header() {
    let out = infogeo(&["table1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("n,Ks_inf,Kr_inf,plateau_spread\n"));
    let r = rows(&out);
    assert_eq!(r.len(), 7);
    assert_eq!(r[0][0], 2.0);
    assert!((r[0][2] + 0.5).abs() < 0.01);
}

#[test]
fn table1_respects_n_max() {
    let r = rows(&infogeo(&["table1", "--n-max", "3"]));
    assert_eq!(r.iter().map(|row| row[0]).collect::<Vec<_>>(), vec![2.0, 3.0]);
}

#[test]
fn single_point_grid_is_a_config_error() {
    let out = infogeo(&["curvature", "--grid-count", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_model_is_rejected() {
    let out = infogeo(&["curvature", "--model", "gamma"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn isonormal_curvature_is_constant() {
    let out = infogeo(&["curvature", "--model", "isonormal", "--n", "3", "--grid-count", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&out);
    assert_eq!(r.len(), 7);
    for row in r {
        assert!((row[1] + 1.0 / 6.0).abs() < 1e-6, "{row:?}");
        assert!((row[2] + 1.0 / 6.0).abs() < 1e-6, "{row:?}");
    }
}

#[test]
fn dat_output_uses_spaces_and_comment_header() {
    let out = infogeo(&["curvature", "--grid-count", "3", "--format", "dat"]);
    let text = stdout(&out);
    assert!(text.starts_with("# eta Ks Kr\n"));
    assert_eq!(text.lines().nth(1).unwrap().split(' ').count(), 3);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let out = infogeo(&["table1", "--n-max", "2", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(path).unwrap().starts_with("n,"));
}

#[test]
fn isonormal_distance() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a", "0 0\n");
    let b = write(dir.path(), "b", "2 0\n");
    let r = rows(&infogeo(&["distance", "--model", "isonormal", "--sigma", "2", &a, &b]));
    assert_eq!(r, vec![vec![2.0, 1.0]]);
}

#[test]
fn identical_matrices_are_at_distance_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a", "2 0.5\n0.5 1\n");
    let out = infogeo(&["distance", "--samples", "20000", &a, &a]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(rows(&out), vec![vec![0.0, 0.0]]);
}

#[test]
fn malformed_matrix_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a", "1 2 3\n");
    let b = write(dir.path(), "b", "1 0\n0 1\n");
    assert_eq!(infogeo(&["distance", &a, &b]).status.code(), Some(2));
    let c = write(dir.path(), "c", "1 2\n2 1\n");
    assert_eq!(infogeo(&["distance", &c, &b]).status.code(), Some(2));
    let missing = dir.path().join("nope").to_str().unwrap().to_string();
    assert_eq!(infogeo(&["distance", &missing, &b]).status.code(), Some(2));
}

#[test]
fn vertical_isonormal_geodesic_has_affine_r() {
    let out = infogeo(&["geodesic", "--model", "isonormal", "--x0", "1,2", "--u-sigma", "0.5", "--steps", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&out);
    assert_eq!(r.len(), 5);
    for row in &r {
        assert!((row[2] - 2.0 * 0.5 * row[0]).abs() < 1e-9, "{row:?}");
        assert_eq!((row[3], row[4]), (1.0, 2.0));
    }
}

#[test]
fn escape_writes_partial_output_and_exits_4() {
    let out = infogeo(&["geodesic", "--model", "isonormal", "--x0", "0,0", "--u-sigma", "-30", "--steps", "5"]);
    assert_eq!(out.status.code(), Some(4));
    let r = rows(&out);
    assert!(!r.is_empty() && r.len() < 6);
    assert!(String::from_utf8_lossy(&out.stderr).contains("escaped"));
}

#[test]
fn vmf_geodesic_needs_velocity() {
    assert_eq!(infogeo(&["geodesic", "--x0", "1,0,0"]).status.code(), Some(2));
    let out = infogeo(&["geodesic", "--x0", "1,0,0", "--u", "0,1,0", "--steps", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("t,sigma,r,x0,x1,x2\n"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "# table range\nn_max = 4\nformat = dat\n");
    let from_file = stdout(&infogeo(&["table1", "--config", &cfg]));
    assert!(from_file.starts_with("# n "));
    assert_eq!(from_file.lines().count(), 4);
    let overridden = infogeo(&["table1", "--config", &cfg, "--n-max", "2", "--format", "csv"]);
    assert_eq!(rows(&overridden).len(), 1);
    let bad = write(dir.path(), "bad.cfg", "colour = blue\n");
    assert_eq!(infogeo(&["table1", "--config", &bad]).status.code(), Some(2));
}

#[test]
fn psi_table_is_deterministic_across_thread_counts() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_infogeo"))
            .args(["psi-table", "--n", "2", "--samples", "20000", "--grid-count", "5", "--seed", "9"])
            .env("INFOGEO_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    let four = run("4");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(stdout(&one).lines().count(), 6);
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn too_few_samples_is_a_config_error() {
    assert_eq!(infogeo(&["psi-table", "--samples", "10"]).status.code(), Some(2));
}
