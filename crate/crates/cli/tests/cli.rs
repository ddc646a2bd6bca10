//! End-to-end tests of the command-line interface: file handling, exit
//! codes, output formats, and determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bimot"))
}

fn fixture_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bimot-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &PathBuf, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

const MU_CROSS: &str = "weight,x1,x2\n0.25,-1,0\n0.25,1,0\n0.25,-2,0\n0.25,2,0\n";
const NU_CROSS: &str = "0.25,0,-1\n0.25,0,1\n0.25,0,-2\n0.25,0,2\n";
const MU_1D: &str = "0.5,-1\n0.5,1\n";
const NU_1D: &str = "0.2,-2\n0.6,0\n0.2,2\n";

#[test]
fn z2_identical_files_is_zero() {
    let dir = fixture_dir("z2-eq");
    let mu = write(&dir, "mu.csv", MU_1D);
    let out = bin().args(["z2"]).arg(&mu).arg(&mu).output().unwrap();
    assert!(out.status.success());
    let json = stdout(&out);
    let v: f64 = json
        .split("\"z2\": ")
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(v.abs() < 1e-7, "z2 {v}");
    assert!(json.contains("\"alpha\": null"));
}

#[test]
fn z2_cross_pair_value() {
    let dir = fixture_dir("z2-cross");
    let mu = write(&dir, "mu.csv", MU_CROSS);
    let nu = write(&dir, "nu.csv", NU_CROSS);
    let out = bin().args(["z2"]).arg(&mu).arg(&nu).output().unwrap();
    assert!(out.status.success());
    let json = stdout(&out);
    let v: f64 = json
        .split("\"z2\": ")
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((v - 2.5).abs() < 1e-4, "z2 {v}");
}

#[test]
fn mismatched_dimensions_exit_one() {
    let dir = fixture_dir("dims");
    let mu = write(&dir, "mu.csv", MU_CROSS);
    let nu = write(&dir, "nu.csv", MU_1D);
    let out = bin().args(["z2"]).arg(&mu).arg(&nu).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unparsable_file_exits_one() {
    let dir = fixture_dir("parse");
    let mu = write(&dir, "mu.csv", "0.5,nan\n0.5,1\n");
    let out = bin().args(["w2"]).arg(&mu).arg(&mu).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dominate_ordered_pair_returns_nu() {
    let dir = fixture_dir("dom-ordered");
    let mu = write(&dir, "mu.csv", "1,0\n");
    let nu = write(&dir, "nu.csv", MU_1D);
    let out = bin()
        .args(["dominate"])
        .arg(&mu)
        .arg(&nu)
        .args(["--p", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let rho = bimot::DiscreteMeasure::from_csv_str(&stdout(&out)).unwrap();
    assert_eq!(rho.len(), 2);
    for (i, (w, x)) in rho.atoms().enumerate() {
        assert!((w - 0.5).abs() < 1e-6);
        assert!((x[0] - [-1.0, 1.0][i]).abs() < 1e-5);
    }
}

#[test]
fn dominate_matches_1d_envelope() {
    let dir = fixture_dir("dom-1d");
    let mu = write(&dir, "mu.csv", MU_1D);
    let nu = write(&dir, "nu.csv", NU_1D);
    let lub = bin().args(["lub1d"]).arg(&mu).arg(&nu).output().unwrap();
    let lub = bimot::DiscreteMeasure::from_csv_str(&stdout(&lub)).unwrap();
    let out = bin()
        .args(["dominate"])
        .arg(&mu)
        .arg(&nu)
        .args(["--p", "2", "--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let rho_json = text.split("\"rho\": ").nth(1).unwrap().trim_end_matches("}\n");
    let rho = bimot::DiscreteMeasure::from_json_str(rho_json).unwrap();
    assert!((rho.moment(2.0) - lub.moment(2.0)).abs() < 1e-6);
    // p = 4 on planar data runs to optimal (smoke level).
    let mu2 = write(&dir, "mu2.csv", MU_CROSS);
    let nu2 = write(&dir, "nu2.csv", NU_CROSS);
    let out = bin()
        .args(["dominate"])
        .arg(&mu2)
        .arg(&nu2)
        .args(["--p", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn mot_approx_demo_costs() {
    let out = bin()
        .args(["mot-approx", "--demo", "3,5,20", "--warm-start"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let body = stdout(&out);
    let costs: Vec<f64> = body
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let want = [0.9223, 0.8209, 0.6928];
    for (got, want) in costs.iter().zip(want) {
        assert!((got - want).abs() < 1e-3, "{got} vs {want}");
    }
}

#[test]
fn mot_approx_empty_demo_list_exits_one() {
    let out = bin().args(["mot-approx", "--demo", ""]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["mot-approx"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mot_approx_files_and_svg() {
    let dir = fixture_dir("mot-files");
    let mu = write(&dir, "mu.csv", "0.5,-0.5,0\n0.5,0.5,0\n");
    let nu1 = write(
        &dir,
        "nu1.csv",
        "0.25,-1.5,0\n0.25,-0.5,0\n0.25,0.5,0\n0.25,1.5,0\n",
    );
    let svg_path = dir.join("plot.svg");
    let out = bin()
        .args(["mot-approx"])
        .arg(&mu)
        .arg(&nu1)
        .args(["--cost", "l1", "--svg"])
        .arg(&svg_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn strassen_answers() {
    let dir = fixture_dir("strassen");
    let dirac = write(&dir, "dirac.csv", "1,0\n");
    let pair = write(&dir, "pair.csv", MU_1D);
    let out = bin().args(["strassen"]).arg(&dirac).arg(&pair).output().unwrap();
    assert_eq!(stdout(&out).trim(), "true");
    let out = bin().args(["strassen"]).arg(&pair).arg(&dirac).output().unwrap();
    assert_eq!(stdout(&out).trim(), "false");
}

#[test]
fn w2_of_diracs_is_distance() {
    let dir = fixture_dir("w2");
    let a = write(&dir, "a.csv", "1,0,0\n");
    let b = write(&dir, "b.csv", "1,3,4\n");
    let out = bin().args(["w2"]).arg(&a).arg(&b).output().unwrap();
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 5.0).abs() < 1e-6);
}

#[test]
fn recentre_flag_fixes_barycentre_mismatch() {
    let dir = fixture_dir("recentre");
    let mu = write(&dir, "mu.csv", "1,0\n");
    let nu = write(&dir, "nu.csv", "0.5,0\n0.5,2\n");
    let out = bin().args(["z2"]).arg(&mu).arg(&nu).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin()
        .args(["z2", "--recentre"])
        .arg(&mu)
        .arg(&nu)
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn commands_are_deterministic_and_dump_is_stable() {
    let dir = fixture_dir("determinism");
    let mu = write(&dir, "mu.csv", MU_CROSS);
    let nu = write(&dir, "nu.csv", NU_CROSS);
    let dump1 = dir.join("p1.txt");
    let dump2 = dir.join("p2.txt");
    let run = |dump: &PathBuf| {
        let out = bin()
            .args(["z2"])
            .arg(&mu)
            .arg(&nu)
            .args(["--dump-program"])
            .arg(dump)
            .output()
            .unwrap();
        assert!(out.status.success());
        stdout(&out)
    };
    let a = run(&dump1);
    let b = run(&dump2);
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read_to_string(&dump1).unwrap(),
        std::fs::read_to_string(&dump2).unwrap()
    );
    let dump = std::fs::read_to_string(&dump1).unwrap();
    let header = dump.lines().next().unwrap();
    // rows cols nnz of the quadratic build for a 4 x 4 pair in the plane.
    assert_eq!(header, "24 64 96");
    assert!(dump.contains("cone power"));
}

#[test]
fn json_measure_files_parse() {
    let dir = fixture_dir("json-in");
    let mu = write(
        &dir,
        "mu.json",
        r#"{"dim": 1, "atoms": [{"w": 0.5, "x": [-1]}, {"w": 0.5, "x": [1]}]}"#,
    );
    let nu = write(&dir, "nu.csv", NU_1D);
    let out = bin()
        .args(["lub1d", "--format", "json"])
        .arg(&mu)
        .arg(&nu)
        .output()
        .unwrap();
    assert!(out.status.success());
    let rho = bimot::DiscreteMeasure::from_json_str(stdout(&out).trim()).unwrap();
    assert_eq!(rho.len(), 4);
}
