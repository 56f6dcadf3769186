//! Experiment orchestration: time loops with per-step diagnostics, CSV and
//! snapshot output, run manifests, and convergence studies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use curvflow_core::csf::{self, step_bgn_curve, step_csf, CsfState};
use curvflow_core::diagnostics::{
    eoc, h1_error_vs_circle, segment_ratio, sigma_max, DiagnosticsRecord, EocTable, Flags,
    NEAR_DEGENERATION_SIGMA,
};
use curvflow_core::math::TAU;
use curvflow_core::mcf::{self, step_mcf, McfConfig, McfState, TimeStepRule};
use curvflow_core::mesh::generate_circle;

use crate::config::{ExperimentSpec, InitialMesh, Method, ProblemKind, SchemeConfig};
use crate::error::{Error, Result};
use crate::io::{write_curve_csv, write_curve_vtk, write_off, write_vtk_surface, write_with};

/// Why a scheme's time loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    EndTime,
    Extinction,
    Degeneration,
    SolverFailure,
}

impl Termination {
    /// Degeneration and solver failure end a run abnormally.
    pub fn is_numerical_failure(self) -> bool {
        matches!(self, Termination::Degeneration | Termination::SolverFailure)
    }

    fn from_error(e: &curvflow_core::Error) -> Self {
        use curvflow_core::Error as E;
        match e {
            E::MeshDegeneration { .. }
            | E::DegenerateReference { .. }
            | E::DegenerateNormal { .. }
            | E::InvalidMesh(_) => Termination::Degeneration,
            _ => Termination::SolverFailure,
        }
    }
}

/// Result of one scheme's time loop.
#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    /// One record per accepted state, starting with the initial one.
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
    /// The error that ended the run, if any.
    pub message: Option<String>,
    /// Last valid mesh.
    pub final_mesh: InitialMesh,
    pub steps: usize,
    pub final_time: f64,
    pub stability_violations: usize,
}

/// Called with every accepted state (including the initial one).
pub trait Observer {
    fn observe(&mut self, step: usize, mesh: MeshRef<'_>, record: &DiagnosticsRecord) -> Result<()>;
}

impl<F: FnMut(usize, MeshRef<'_>, &DiagnosticsRecord) -> Result<()>> Observer for F {
    fn observe(&mut self, step: usize, mesh: MeshRef<'_>, record: &DiagnosticsRecord) -> Result<()> {
        self(step, mesh, record)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum MeshRef<'a> {
    Curve(&'a curvflow_core::mesh::PolygonalCurve),
    Surface(&'a curvflow_core::mesh::TriSurface),
}

fn step_count(end_time: f64, tau: f64) -> usize {
    (end_time / tau - 1e-9).ceil().max(1.0) as usize
}

fn curve_record(
    state: &CsfState,
    prev: Option<&CsfState>,
    tau: f64,
    with_energy: bool,
) -> Result<DiagnosticsRecord> {
    let speed = match prev {
        Some(p) => csf::max_vertex_speed(&p.curve, &state.curve, tau)?,
        None => 0.0,
    };
    Ok(DiagnosticsRecord {
        time: state.time,
        size: state.curve.length(),
        quality: segment_ratio(&state.curve),
        max_vertex_speed: speed,
        energy_lhs: with_energy.then(|| state.energy_lhs()),
        energy_rhs: with_energy.then_some(state.initial_energy),
        iterations: state.last_iterations,
        flags: Flags {
            stability_violation: prev.is_some_and(|p| state.stability_violations > p.stability_violations),
            near_degeneration: false,
        },
    })
}

fn surface_record(state: &McfState, prev: Option<&McfState>) -> DiagnosticsRecord {
    let speed = prev.map_or(0.0, |p| {
        p.surface
            .vertices()
            .iter()
            .zip(state.surface.vertices())
            .map(|(a, b)| (*b - *a).norm())
            .fold(0.0, f64::max)
            / state.last_tau
    });
    let sigma = sigma_max(&state.surface);
    DiagnosticsRecord {
        time: state.time,
        size: state.surface.area(),
        quality: sigma,
        max_vertex_speed: speed,
        energy_lhs: None,
        energy_rhs: None,
        iterations: state.last_iterations,
        flags: Flags { stability_violation: false, near_degeneration: !(sigma <= NEAR_DEGENERATION_SIGMA) },
    }
}

/// Runs one scheme from `mesh` until `end_time`, extinction or a numerical
/// failure. Stepper errors end the loop and are reported in the outcome;
/// only observer errors (I/O) are returned as `Err`.
pub fn simulate(
    mesh: &InitialMesh,
    scheme: &SchemeConfig,
    end_time: f64,
    extinction_fraction: Option<f64>,
    observer: &mut dyn Observer,
) -> Result<SchemeOutcome> {
    match (mesh, scheme) {
        (InitialMesh::Curve(c), SchemeConfig::Alg1(_) | SchemeConfig::BgnCurve(_)) => {
            simulate_curve(c.clone(), scheme, end_time, extinction_fraction, observer)
        }
        (InitialMesh::Surface(s), SchemeConfig::Surface(cfg)) => {
            simulate_surface(s.clone(), cfg, end_time, extinction_fraction, observer)
        }
        _ => Err(Error::Spec("scheme does not match the problem kind".into())),
    }
}

fn simulate_curve(
    curve: curvflow_core::mesh::PolygonalCurve,
    scheme: &SchemeConfig,
    end_time: f64,
    extinction_fraction: Option<f64>,
    observer: &mut dyn Observer,
) -> Result<SchemeOutcome> {
    let (tau, with_energy) = match scheme {
        SchemeConfig::Alg1(c) => (c.tau, true),
        SchemeConfig::BgnCurve(c) => (c.tau, false),
        SchemeConfig::Surface(_) => unreachable!("checked by simulate"),
    };
    let fraction = extinction_fraction.unwrap_or(csf::EXTINCTION_LENGTH_FRACTION);
    let initial_length = curve.length();
    let mut state = CsfState::new(curve);
    let first = curve_record(&state, None, tau, with_energy)?;
    observer.observe(0, MeshRef::Curve(&state.curve), &first)?;
    let mut records = vec![first];
    let n = step_count(end_time, tau);
    let mut termination = Termination::EndTime;
    let mut message = None;
    while state.step_index < n {
        let next = match scheme {
            SchemeConfig::Alg1(c) => step_csf(&state, c),
            SchemeConfig::BgnCurve(c) => step_bgn_curve(&state, c).map(|(s, _)| s),
            SchemeConfig::Surface(_) => unreachable!(),
        };
        let next = match next {
            Ok(s) => s,
            Err(e) => {
                termination = Termination::from_error(&e);
                message = Some(e.to_string());
                break;
            }
        };
        let rec = curve_record(&next, Some(&state), tau, with_energy)?;
        observer.observe(next.step_index, MeshRef::Curve(&next.curve), &rec)?;
        records.push(rec);
        state = next;
        if state.curve.length() < fraction * initial_length
            || state.curve.segments().any(|s| s.length < csf::MIN_SEGMENT_LENGTH)
        {
            termination = Termination::Extinction;
            break;
        }
    }
    Ok(SchemeOutcome {
        records,
        termination,
        message,
        steps: state.step_index,
        final_time: state.time,
        stability_violations: state.stability_violations,
        final_mesh: InitialMesh::Curve(state.curve),
    })
}

fn simulate_surface(
    surface: curvflow_core::mesh::TriSurface,
    cfg: &McfConfig,
    end_time: f64,
    extinction_fraction: Option<f64>,
    observer: &mut dyn Observer,
) -> Result<SchemeOutcome> {
    let fraction = extinction_fraction.unwrap_or(mcf::EXTINCTION_AREA_FRACTION);
    let initial_area = surface.area();
    let mut state = McfState::new(surface)?;
    let first = surface_record(&state, None);
    observer.observe(0, MeshRef::Surface(&state.surface), &first)?;
    let mut records = vec![first];
    let fixed_steps = match cfg.time_step {
        TimeStepRule::Fixed(tau) => Some(step_count(end_time, tau)),
        _ => None,
    };
    let mut termination = Termination::EndTime;
    let mut message = None;
    loop {
        let done = match fixed_steps {
            Some(n) => state.step_index >= n,
            None => state.time >= end_time * (1.0 - 1e-12),
        };
        if done {
            break;
        }
        let mut step_cfg = *cfg;
        if fixed_steps.is_none() {
            let tau = cfg.time_step.tau(&state.surface).min(end_time - state.time);
            step_cfg.time_step = TimeStepRule::Fixed(tau);
        }
        let next = match step_mcf(&state, &step_cfg) {
            Ok(s) => s,
            Err(e) => {
                termination = Termination::from_error(&e);
                message = Some(e.to_string());
                break;
            }
        };
        let rec = surface_record(&next, Some(&state));
        observer.observe(next.step_index, MeshRef::Surface(&next.surface), &rec)?;
        records.push(rec);
        state = next;
        if state.surface.area() < fraction * initial_area {
            termination = Termination::Extinction;
            break;
        }
    }
    Ok(SchemeOutcome {
        records,
        termination,
        message,
        steps: state.step_index,
        final_time: state.time,
        stability_violations: 0,
        final_mesh: InitialMesh::Surface(state.surface),
    })
}

pub const CSV_HEADER: &str = "time,size,sigma_max_or_ratio,max_speed,energy_lhs,energy_rhs,iterations,flags";

fn flags_field(f: &Flags) -> String {
    let mut parts = Vec::new();
    if f.stability_violation {
        parts.push("stability_violation");
    }
    if f.near_degeneration {
        parts.push("near_degeneration");
    }
    parts.join("|")
}

/// CSV text of a record series. Floats use shortest round-trip formatting,
/// so identical runs give identical bytes.
pub fn records_to_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.time,
            r.size,
            r.quality,
            r.max_vertex_speed,
            opt(r.energy_lhs),
            opt(r.energy_rhs),
            r.iterations,
            flags_field(&r.flags)
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeManifest {
    pub label: String,
    pub method: Method,
    pub csv: PathBuf,
    pub final_mesh: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub termination: Termination,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
    pub steps: usize,
    pub final_time: f64,
    pub stability_violations: usize,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub spec: ExperimentSpec,
    pub schemes: Vec<SchemeManifest>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn any_numerical_failure(&self) -> bool {
        self.schemes.iter().any(|s| s.termination.is_numerical_failure())
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Run the schemes of one experiment on separate threads.
    pub parallel: bool,
}

fn write_snapshot(path: &Path, mesh: MeshRef<'_>, title: &str) -> Result<()> {
    match mesh {
        MeshRef::Curve(c) => write_curve_vtk(path, c, title),
        MeshRef::Surface(s) => write_vtk_surface(path, s, title),
    }
}

fn run_scheme(spec: &ExperimentSpec, mesh: &InitialMesh, index: usize) -> Result<SchemeManifest> {
    let started = Instant::now();
    let scheme = &spec.schemes[index];
    let label = scheme.label(index);
    let cfg = scheme.to_config()?;
    let dir = &spec.output_dir;
    let mut snapshots = Vec::new();
    let every = spec.snapshot_every;
    let mut observer = |step: usize, m: MeshRef<'_>, r: &DiagnosticsRecord| -> Result<()> {
        if every > 0 && step.is_multiple_of(every) {
            let path = dir.join(&label).join(format!("snap_{step:07}.vtk"));
            write_snapshot(&path, m, &format!("{label} step {step} t={}", r.time))?;
            snapshots.push(path);
        }
        Ok(())
    };
    let outcome = simulate(mesh, &cfg, spec.end_time, spec.extinction_fraction, &mut observer)?;
    let csv = dir.join(format!("{label}.csv"));
    let text = records_to_csv(&outcome.records);
    write_with(&csv, |w| w.write_all(text.as_bytes()))?;
    let final_mesh = match &outcome.final_mesh {
        InitialMesh::Curve(c) => {
            let p = dir.join(format!("{label}_final.csv"));
            write_curve_csv(&p, c)?;
            p
        }
        InitialMesh::Surface(s) => {
            let p = dir.join(format!("{label}_final.off"));
            write_off(&p, s)?;
            p
        }
    };
    Ok(SchemeManifest {
        label,
        method: scheme.method,
        csv,
        final_mesh,
        snapshots,
        termination: outcome.termination,
        message: outcome.message,
        steps: outcome.steps,
        final_time: outcome.final_time,
        stability_violations: outcome.stability_violations,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Validates the spec, runs every scheme and writes one CSV per scheme,
/// snapshots, final meshes and `manifest.json` into the output directory.
pub fn run_experiment(spec: &ExperimentSpec, options: RunOptions) -> Result<RunManifest> {
    spec.validate()?;
    let started = Instant::now();
    let mesh = spec.problem.build()?;
    let indices = 0..spec.schemes.len();
    let schemes: Vec<SchemeManifest> = if options.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> =
                indices.map(|i| scope.spawn({ let mesh = &mesh; move || run_scheme(spec, mesh, i) })).collect();
            handles.into_iter().map(|h| h.join().expect("scheme thread panicked")).collect::<Result<_>>()
        })?
    } else {
        indices.map(|i| run_scheme(spec, &mesh, i)).collect::<Result<_>>()?
    };
    let manifest = RunManifest { spec: spec.clone(), schemes, wall_clock_seconds: started.elapsed().as_secs_f64() };
    let path = spec.output_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)?;
    write_with(&path, |w| w.write_all(json.as_bytes()))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EocRow {
    pub n: usize,
    pub h: f64,
    pub tau: f64,
    pub steps: usize,
    /// Maximum over all time levels of the H¹-seminorm error.
    pub h1_error: f64,
    /// Maximum over all time levels of the L² error.
    pub l2_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EocStudy {
    pub rows: Vec<EocRow>,
    pub h1: Option<EocTable>,
    pub l2: Option<EocTable>,
    /// Set when a run failed; `rows` then holds the completed resolutions.
    pub aborted: Option<String>,
}

/// Shrinking-circle convergence study for the α-scheme: for each `N` the
/// regular `N`-gon of radius `r0` is evolved to `end_time` with
/// `τ = end_time / ⌈end_time / (c h²)⌉` (so that `τ ≤ c h²` and the last step
/// lands on `end_time`), `h = 2π/N`, and the errors against the exact
/// solution are maximized over all time levels.
pub fn eoc_circle(alpha: f64, r0: f64, end_time: f64, resolutions: &[usize], c: f64) -> Result<EocStudy> {
    if resolutions.len() < 2 {
        return Err(Error::Spec(format!("an EOC study needs at least two resolutions, got {}", resolutions.len())));
    }
    let mut rows = Vec::with_capacity(resolutions.len());
    let mut aborted = None;
    for &n in resolutions {
        match eoc_run(alpha, r0, end_time, n, c) {
            Ok(row) => rows.push(row),
            Err(e) => {
                aborted = Some(format!("N = {n}: {e}"));
                break;
            }
        }
    }
    let table = |f: fn(&EocRow) -> f64| {
        (rows.len() >= 2).then(|| eoc(&rows.iter().map(|r| (r.h, f(r))).collect::<Vec<_>>())).transpose()
    };
    Ok(EocStudy { h1: table(|r| r.h1_error)?, l2: table(|r| r.l2_error)?, rows, aborted })
}

fn eoc_run(alpha: f64, r0: f64, end_time: f64, n: usize, c: f64) -> Result<EocRow> {
    let h = TAU / n as f64;
    let steps = step_count(end_time, c * h * h);
    let tau = end_time / steps as f64;
    let cfg = csf::CsfConfig::new(alpha, tau);
    let mut state = CsfState::new(generate_circle(n, r0)?);
    let err0 = h1_error_vs_circle(&state.curve, 0.0, r0)?;
    let (mut h1, mut l2) = (err0.h1_seminorm, err0.l2);
    while state.step_index < steps {
        state = step_csf(&state, &cfg)?;
        let e = h1_error_vs_circle(&state.curve, state.time, r0)?;
        h1 = h1.max(e.h1_seminorm);
        l2 = l2.max(e.l2);
    }
    if state.stability_violations > 0 {
        return Err(Error::Numerics(curvflow_core::Error::InvalidConfig(format!(
            "{} stability violations",
            state.stability_violations
        ))));
    }
    Ok(EocRow { n, h, tau, steps, h1_error: h1, l2_error: l2 })
}

/// Runs the `[eoc]` section of a circle spec with the α of its first `alg1`
/// scheme and writes `eoc.csv` into the output directory.
pub fn run_eoc_study(spec: &ExperimentSpec) -> Result<EocStudy> {
    spec.validate()?;
    let eoc_spec = spec.eoc.as_ref().ok_or_else(|| Error::Spec("missing [eoc] section".into()))?;
    if spec.problem.kind != ProblemKind::Curve || spec.problem.shape != "circle" {
        return Err(Error::Spec("EOC studies run on the circle problem".into()));
    }
    let alpha = spec
        .schemes
        .iter()
        .find_map(|s| match s.to_config() {
            Ok(SchemeConfig::Alg1(c)) => Some(c.alpha),
            _ => None,
        })
        .ok_or_else(|| Error::Spec("EOC studies need an alg1 scheme".into()))?;
    let r0 = spec.problem.radius.unwrap_or(1.0);
    let study = eoc_circle(alpha, r0, spec.end_time, &eoc_spec.resolutions, eoc_spec.tau_coefficient)?;
    let mut text = String::from("n,h,tau,steps,h1_error,l2_error,h1_eoc,l2_eoc\n");
    for (k, r) in study.rows.iter().enumerate() {
        let order = |t: &Option<EocTable>| {
            k.checked_sub(1).and_then(|j| t.as_ref().map(|t| t.orders[j].to_string())).unwrap_or_default()
        };
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            r.n, r.h, r.tau, r.steps, r.h1_error, r.l2_error, order(&study.h1), order(&study.l2)
        );
    }
    write_with(&spec.output_dir.join("eoc.csv"), |w| w.write_all(text.as_bytes()))?;
    Ok(study)
}
