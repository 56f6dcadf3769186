use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn curvflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvflow")).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const CIRCLE: &str = r#"
name = "circle"
output_dir = "out"
end_time = 0.005
[problem]
kind = "curve"
shape = "circle"
resolution = 16
[[scheme]]
method = "alg1"
alpha = 1.0
tau = 1e-3
[eoc]
resolutions = [8, 16]
tau_coefficient = 0.5
"#;

#[test]
fn run_validate_and_eoc_succeed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), CIRCLE).unwrap();
    let v = curvflow(&["validate", "c.toml"], dir.path());
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
    let r = curvflow(&["run", "c.toml"], dir.path());
    assert_eq!(code(&r), 0);
    assert!(String::from_utf8_lossy(&r.stdout).contains("alg1_0: end-time after 5 steps"));
    assert!(dir.path().join("out/manifest.json").exists());
    assert!(dir.path().join("out/alg1_0.csv").exists());
    let e = curvflow(&["eoc", "c.toml"], dir.path());
    assert_eq!(code(&e), 0);
    assert!(dir.path().join("out/eoc.csv").exists());
}

#[test]
fn spec_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), CIRCLE.replace("tau = 1e-3", "tau = -1e-3")).unwrap();
    for verb in ["validate", "run", "eoc"] {
        let o = curvflow(&[verb, "bad.toml"], dir.path());
        assert_eq!(code(&o), 2, "{verb}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("tau"));
    }
    fs::write(dir.path().join("syntax.toml"), "name = \n").unwrap();
    assert_eq!(code(&curvflow(&["run", "syntax.toml"], dir.path())), 2);
    // nothing was computed
    assert!(!dir.path().join("out").exists());
}

#[test]
fn numerical_failure_exits_with_3_and_keeps_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"
name = "graded"
output_dir = "out"
end_time = 1e-3
[problem]
kind = "curve"
shape = "example3"
resolution = 40
ratio = 1.6
[[scheme]]
method = "bgn-curve"
tau = 1e-4
max_fixed_point_iterations = 1000
"#;
    fs::write(dir.path().join("g.toml"), spec).unwrap();
    let o = curvflow(&["run", "g.toml", "--parallel"], dir.path());
    assert_eq!(code(&o), 3);
    let manifest = fs::read_to_string(dir.path().join("out/manifest.json")).unwrap();
    assert!(manifest.contains("\"solver-failure\""));
}

#[test]
fn mesh_gen_writes_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (vec!["mesh", "gen", "example2", "c.csv", "--resolution", "32"], "c.csv"),
        (vec!["mesh", "gen", "circle", "c.vtk", "--radius", "2"], "c.vtk"),
        (vec!["mesh", "gen", "sphere", "s.off", "--resolution", "2"], "s.off"),
        (vec!["mesh", "gen", "undulating_torus", "t.vtk", "--resolution", "1", "--r2", "0.65"], "t.vtk"),
    ];
    for (args, file) in cases {
        let o = curvflow(&args, dir.path());
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(dir.path().join(file).exists());
    }
    let c = curvflow::io::read_curve_csv(&dir.path().join("c.csv")).unwrap();
    assert_eq!(c.len(), 32);
    let s = curvflow::io::read_off(&dir.path().join("s.off")).unwrap();
    assert_eq!(s.num_triangles(), 320);

    assert_eq!(code(&curvflow(&["mesh", "gen", "sphere", "s.csv"], dir.path())), 2);
    assert_eq!(code(&curvflow(&["mesh", "gen", "blob", "b.off"], dir.path())), 2);
}
