use std::fs;
use std::path::Path;

use curvflow::config::{ExperimentSpec, InitialMesh, Method, Problem, ProblemKind, SchemeSpec};
use curvflow::runner::*;
use curvflow::Error;
use curvflow_core::mesh::{generate_surface_example, SurfaceShape};

fn curve_problem(shape: &str, resolution: usize) -> Problem {
    Problem { kind: ProblemKind::Curve, shape: shape.into(), resolution, radius: None, ratio: None, r1: None, r2: None }
}

fn spec(dir: &Path, problem: Problem, schemes: Vec<SchemeSpec>, end_time: f64) -> ExperimentSpec {
    ExperimentSpec {
        name: "test".into(),
        output_dir: dir.to_path_buf(),
        end_time,
        extinction_fraction: None,
        snapshot_every: 0,
        seed: 0,
        problem,
        schemes,
        eoc: None,
    }
}

fn column(csv: &str, k: usize) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn small_circle_length_strictly_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), curve_problem("circle", 16), vec![SchemeSpec::new(Method::Alg1, Some(1.0), 1e-6)], 0.01);
    let m = run_experiment(&s, RunOptions::default()).unwrap();
    let run = &m.schemes[0];
    assert_eq!(run.termination, Termination::EndTime);
    assert_eq!(run.steps, 10_000);
    assert_eq!(run.stability_violations, 0);
    let lengths = column(&fs::read_to_string(&run.csv).unwrap(), 1);
    assert_eq!(lengths.len(), 10_001);
    assert!(lengths.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn example1_run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(
        dir.path(),
        curve_problem("example1", 64),
        vec![SchemeSpec::new(Method::Alg1, Some(1e-3), 1e-4), SchemeSpec::new(Method::BgnCurve, None, 1e-4)],
        0.15,
    );
    s.snapshot_every = 500;
    let m = run_experiment(&s, RunOptions { parallel: true }).unwrap();
    assert_eq!(m.schemes.len(), 2);
    for run in &m.schemes {
        assert_eq!(run.termination, Termination::EndTime);
        assert!(run.csv.exists() && run.final_mesh.exists());
        assert_eq!(run.snapshots.len(), 4);
        assert!(run.snapshots.iter().all(|p| p.exists()));
    }
    let final_length = *column(&fs::read_to_string(&m.schemes[0].csv).unwrap(), 1).last().unwrap();
    assert!((final_length / 0.98 - 1.0).abs() < 0.03, "final length {final_length}");

    let json = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    let back: RunManifest = serde_json::from_str(&json).unwrap();
    assert_eq!(back, m);
    assert!(json.contains("\"termination\": \"end-time\""));
}

#[test]
fn identical_specs_give_identical_csvs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let schemes = vec![SchemeSpec::new(Method::Alg1, Some(1e-2), 1e-4), SchemeSpec::new(Method::BgnCurve, None, 1e-4)];
    let ma = run_experiment(&spec(a.path(), curve_problem("example2", 48), schemes.clone(), 0.01), RunOptions::default()).unwrap();
    let mb =
        run_experiment(&spec(b.path(), curve_problem("example2", 48), schemes, 0.01), RunOptions { parallel: true }).unwrap();
    for (x, y) in ma.schemes.iter().zip(&mb.schemes) {
        assert_eq!(fs::read(&x.csv).unwrap(), fs::read(&y.csv).unwrap());
        assert_eq!(fs::read(&x.final_mesh).unwrap(), fs::read(&y.final_mesh).unwrap());
    }
}

#[test]
fn csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), curve_problem("circle", 12), vec![SchemeSpec::new(Method::BgnCurve, None, 1e-3)], 2.5e-3);
    let m = run_experiment(&s, RunOptions::default()).unwrap();
    let text = fs::read_to_string(&m.schemes[0].csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    // 2.5 steps round up to 3
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0,"));
    // BGN has no energy columns
    assert!(lines[3].contains(",,,"));
}

#[test]
fn extinction_stops_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(dir.path(), curve_problem("circle", 32), vec![SchemeSpec::new(Method::Alg1, Some(1.0), 1e-3)], 1.0);
    s.extinction_fraction = Some(0.5);
    let m = run_experiment(&s, RunOptions::default()).unwrap();
    let run = &m.schemes[0];
    assert_eq!(run.termination, Termination::Extinction);
    // radius² = 1 - 2t reaches 1/4 at t = 0.375
    assert!((run.final_time - 0.375).abs() < 0.01, "{}", run.final_time);
}

#[test]
fn fixed_point_failure_is_recorded_not_raised() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = curve_problem("example3", 40);
    p.ratio = Some(1.6);
    let mut undamped = SchemeSpec::new(Method::BgnCurve, None, 1e-4);
    undamped.max_fixed_point_iterations = Some(1000);
    let m = run_experiment(&spec(dir.path(), p, vec![undamped], 1e-3), RunOptions::default()).unwrap();
    assert_eq!(m.schemes[0].termination, Termination::SolverFailure);
    assert!(m.any_numerical_failure());
    assert!(m.schemes[0].message.as_deref().unwrap().contains("did not converge"));
    assert!(m.schemes[0].csv.exists());
}

#[test]
fn surface_runs_with_adaptive_steps_land_on_end_time() {
    let dir = tempfile::tempdir().unwrap();
    let p = Problem { kind: ProblemKind::Surface, shape: "sphere".into(), resolution: 1, radius: None, ratio: None, r1: None, r2: None };
    let mut adaptive = SchemeSpec::new(Method::Alg3, Some(1.0), 0.05);
    adaptive.tau_rule = curvflow::config::TauRule::Quadratic;
    let s = spec(dir.path(), p, vec![adaptive, SchemeSpec::new(Method::Bgn, None, 1e-3)], 0.01);
    let m = run_experiment(&s, RunOptions::default()).unwrap();
    for run in &m.schemes {
        assert_eq!(run.termination, Termination::EndTime);
        assert!((run.final_time - 0.01).abs() < 1e-12, "{}", run.final_time);
        assert!(run.final_mesh.extension().unwrap() == "off");
    }
}

#[test]
fn simulate_reports_degeneration() {
    // BGN on a coarse undulating torus collapses a triangle near t = 0.046
    let torus = generate_surface_example(SurfaceShape::UndulatingTorus { r1: 1.0, r2: 0.65 }, 1).unwrap();
    let mesh = InitialMesh::Surface(torus);
    let cfg = SchemeSpec::new(Method::Bgn, None, 1e-4).to_config().unwrap();
    let out = simulate(&mesh, &cfg, 0.1, None, &mut |_: usize, _: MeshRef<'_>, _: &_| Ok(())).unwrap();
    assert_eq!(out.termination, Termination::Degeneration);
    assert!(out.message.as_deref().unwrap().contains("degenerate"));
    assert_eq!(out.records.len(), out.steps + 1);
    assert!(out.final_time < 0.1);
    // the last recorded state is the last valid one
    let InitialMesh::Surface(last) = &out.final_mesh else { panic!() };
    assert!(curvflow_core::mcf::check_degeneration(last).is_ok());
}

#[test]
fn observer_sees_every_state() {
    let mesh = InitialMesh::Curve(curvflow_core::mesh::generate_circle(10, 1.0).unwrap());
    let cfg = SchemeSpec::new(Method::Alg1, Some(1.0), 1e-3).to_config().unwrap();
    let mut seen = Vec::new();
    let out = simulate(&mesh, &cfg, 5e-3, None, &mut |k: usize, _: MeshRef<'_>, r: &curvflow_core::diagnostics::DiagnosticsRecord| {
        seen.push((k, r.time));
        Ok(())
    })
    .unwrap();
    assert_eq!(seen.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5]);
    assert_eq!(out.records.len(), 6);
    assert!(matches!(out.final_mesh, InitialMesh::Curve(_)));
}

#[test]
fn eoc_study_on_small_resolutions() {
    let study = eoc_circle(1.0, 1.0, 0.05, &[8, 16, 32], 0.5).unwrap();
    assert!(study.aborted.is_none());
    let h1 = study.h1.unwrap();
    assert_eq!(h1.orders.len(), 2);
    assert!(h1.orders.iter().all(|&p| (0.8..1.2).contains(&p)), "{:?}", h1.orders);
    for r in &study.rows {
        assert!(r.tau <= 0.5 * r.h * r.h);
        assert!((r.tau * r.steps as f64 - 0.05).abs() < 1e-12);
    }
}

#[test]
fn eoc_needs_two_resolutions() {
    assert!(matches!(eoc_circle(1.0, 1.0, 0.1, &[16], 0.5), Err(Error::Spec(_))));
}

#[test]
fn eoc_study_from_spec_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(dir.path(), curve_problem("circle", 8), vec![SchemeSpec::new(Method::Alg1, Some(1.0), 1e-3)], 0.02);
    s.eoc = Some(curvflow::config::EocSpec { resolutions: vec![8, 16], tau_coefficient: 0.5 });
    let study = run_eoc_study(&s).unwrap();
    assert_eq!(study.rows.len(), 2);
    let table = fs::read_to_string(dir.path().join("eoc.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    s.problem.shape = "example1".into();
    assert!(matches!(run_eoc_study(&s), Err(Error::Spec(_))));
}
