//! Time steppers for mean curvature flow of closed surfaces.
//!
//! All three schemes solve one linear system per step on the current surface
//! `Γ^m`. The reference map `y` is represented by fixed nodal values `Y`
//! (the surface's `reference` positions); only the basis functions move, so
//! `y^{m+1} = y^m ∘ (u^{m+1})⁻¹` needs no computation.
//!
//! * [`McfScheme::Transport`]: `(M̃/τ + S + B) U = M̃ U_old / τ`, where `B`
//!   transports along `Ĥ⁻¹ (∇y)ᵀ w` and `w` is the discrete Laplacian of `y`.
//! * [`McfScheme::Divergence`]: `(M/τ + S + D) U = M U_old / τ` with a lumped,
//!   ρ-weighted mass and the projected divergence-form term `D`.
//! * [`McfScheme::Bgn`]: lumped normal projection plus stiffness.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::fem::{
    assemble_mapped, assemble_pair, solve, triangle_mass, BlockPattern, BlockSparseMatrix,
    ElementBlockMap, ElementBlocks, Preconditioner, SolveStats, SolverConfig, SolverMethod,
};
use crate::math::{sqrt, Mat3, Vec3};
use crate::mesh::{TriSurface, TriangleGeometry};
use crate::{Error, Result};

pub use crate::csf::LinearSystem;

/// Steps producing a triangle below this area end the run.
pub const DEGENERATE_AREA: f64 = 1e-14;
/// Steps producing a triangle with `σ(T)` above this end the run.
pub const DEGENERATE_SIGMA: f64 = 1e6;
/// A run stops once the area falls below this fraction of the initial one.
pub const EXTINCTION_AREA_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McfScheme {
    /// Transport form of the DeTurck reparametrization (first-order term `B`).
    Transport,
    /// Divergence form of the DeTurck reparametrization (term `D`).
    Divergence,
    /// Normal-projection benchmark scheme.
    Bgn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStepRule {
    Fixed(f64),
    /// `τ = c · h` with `h` the current maximal triangle diameter.
    LinearInH(f64),
    /// `τ = c · h²`.
    QuadraticInH(f64),
}

impl TimeStepRule {
    pub fn tau(&self, surface: &TriSurface) -> f64 {
        match *self {
            TimeStepRule::Fixed(t) => t,
            TimeStepRule::LinearInH(c) => c * surface.max_diameter(),
            TimeStepRule::QuadraticInH(c) => {
                let h = surface.max_diameter();
                c * h * h
            }
        }
    }

    fn coefficient(&self) -> f64 {
        match *self {
            TimeStepRule::Fixed(c) | TimeStepRule::LinearInH(c) | TimeStepRule::QuadraticInH(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    Fixed(f64),
    /// `α = τ` at every step.
    EqualsTau,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McfConfig {
    pub scheme: McfScheme,
    pub alpha: AlphaRule,
    pub time_step: TimeStepRule,
    pub solver: SolverConfig,
}

impl McfConfig {
    pub fn new(scheme: McfScheme, alpha: f64, tau: f64) -> Self {
        McfConfig {
            scheme,
            alpha: AlphaRule::Fixed(alpha),
            time_step: TimeStepRule::Fixed(tau),
            solver: SolverConfig {
                preconditioner: Preconditioner::BlockJacobi,
                ..SolverConfig::bicgstab()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.time_step.coefficient();
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidConfig("time step coefficient must be positive".into()));
        }
        if let AlphaRule::Fixed(a) = self.alpha {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::InvalidConfig("alpha must be a finite value >= 0".into()));
            }
        }
        self.solver.validate()
    }

    pub fn alpha_for(&self, tau: f64) -> f64 {
        match self.alpha {
            AlphaRule::Fixed(a) => a,
            AlphaRule::EqualsTau => tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McfState {
    pub surface: TriSurface,
    pub time: f64,
    pub step_index: usize,
    /// Time step used by the most recent step.
    pub last_tau: f64,
    /// Linear solver iterations of the most recent step.
    pub last_iterations: usize,
    topology: SurfaceTopology,
}

impl McfState {
    pub fn new(surface: TriSurface) -> Result<Self> {
        let topology = SurfaceTopology::new(&surface)?;
        Ok(McfState { surface, time: 0.0, step_index: 0, last_tau: 0.0, last_iterations: 0, topology })
    }

    pub fn topology(&self) -> &SurfaceTopology {
        &self.topology
    }
}

/// Per-element data of the reference map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMetricData {
    /// `∇_Γ y`: row `γ` is the tangential gradient of `y^γ`.
    pub grad_y: Mat3,
    /// `(∇y)ᵀ∇y + ν⊗ν`.
    pub h_hat: Mat3,
    pub h_hat_inv: Mat3,
    /// `√det Ĥ`.
    pub rho: f64,
}

/// Evaluates `∇y`, `Ĥ`, `Ĥ⁻¹` and `ρ` on one triangle with reference values
/// `y` at its vertices.
pub fn compute_element_metric(e: &TriangleGeometry, y: [Vec3; 3]) -> Result<ElementMetricData> {
    let mut rows = [Vec3::ZERO; 3];
    for (g, row) in rows.iter_mut().enumerate() {
        *row = e.grads[0] * y[0][g] + e.grads[1] * y[1][g] + e.grads[2] * y[2][g];
    }
    let grad_y = Mat3::from_rows(rows[0], rows[1], rows[2]);
    let h_hat = grad_y.transpose() * grad_y + e.normal.outer(e.normal);
    let det = h_hat.det();
    let scale = h_hat.max_abs();
    if !(det > 1e-14 * scale * scale * scale) || !det.is_finite() {
        return Err(Error::DegenerateReference { element: 0 });
    }
    let h_hat_inv = h_hat.inverse().ok_or(Error::DegenerateReference { element: 0 })?;
    Ok(ElementMetricData { grad_y, h_hat, h_hat_inv, rho: sqrt(det) })
}

/// Metric data of every triangle of `surface`.
pub fn element_metrics(surface: &TriSurface) -> Result<Vec<ElementMetricData>> {
    let elems: Vec<TriangleGeometry> = surface.elements().collect();
    metrics_of(surface, &elems)
}

fn metrics_of(surface: &TriSurface, elems: &[TriangleGeometry]) -> Result<Vec<ElementMetricData>> {
    let y = surface.reference();
    surface
        .triangles()
        .iter()
        .zip(elems)
        .enumerate()
        .map(|(t, (tri, e))| {
            compute_element_metric(e, [y[tri[0]], y[tri[1]], y[tri[2]]])
                .map_err(|_| Error::DegenerateReference { element: t })
        })
        .collect()
}

/// Sparsity pattern and element-to-block map of a triangulation; shared by
/// every step on the same mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTopology {
    pattern: Arc<BlockPattern>,
    map: Arc<ElementBlockMap<3>>,
}

impl SurfaceTopology {
    pub fn new(surface: &TriSurface) -> Result<Self> {
        let pattern =
            Arc::new(BlockPattern::from_elements(surface.num_vertices(), surface.triangles())?);
        let map = Arc::new(ElementBlockMap::new(&pattern, surface.triangles())?);
        Ok(SurfaceTopology { pattern, map })
    }

    pub fn pattern(&self) -> &Arc<BlockPattern> {
        &self.pattern
    }
}

type Blocks = ElementBlocks<3, 3>;

fn add_stiffness(e: &TriangleGeometry, out: &mut Blocks) {
    for a in 0..3 {
        for b in 0..3 {
            let s = e.area * e.grads[a].dot(e.grads[b]);
            for beta in 0..3 {
                out[a][b][beta][beta] += s;
            }
        }
    }
}

fn add_transport_mass(e: &TriangleGeometry, alpha: f64, out: &mut Blocks) {
    let c = Mat3::IDENTITY.scaled(alpha) + e.normal.outer(e.normal).scaled(1.0 - alpha);
    for a in 0..3 {
        for b in 0..3 {
            let m = triangle_mass(e.area, a, b);
            for beta in 0..3 {
                for gamma in 0..3 {
                    out[a][b][beta][gamma] += c.0[beta][gamma] * m;
                }
            }
        }
    }
}

/// `δ_βγ ∫ φ_a ∇φ_b · Ĥ⁻¹ (∇y)ᵀ w`, exact for the linear `w`.
fn add_transport_term(e: &TriangleGeometry, m: &ElementMetricData, w: [Vec3; 3], out: &mut Blocks) {
    let map = m.h_hat_inv * m.grad_y.transpose();
    let w_sum = w[0] + w[1] + w[2];
    for a in 0..3 {
        // ∫ φ_a w = |T|/12 (w_a + Σ_k w_k)
        let v = map.mul_vec((w[a] + w_sum) * (e.area / 12.0));
        for b in 0..3 {
            let s = e.grads[b].dot(v);
            for beta in 0..3 {
                out[a][b][beta][beta] += s;
            }
        }
    }
}

fn add_divergence_mass(e: &TriangleGeometry, rho: f64, alpha: f64, nu: [Vec3; 3], out: &mut Blocks) {
    let ar = alpha * rho;
    for a in 0..3 {
        let c = Mat3::IDENTITY.scaled(ar) + nu[a].outer(nu[a]).scaled(1.0 - ar);
        for beta in 0..3 {
            for gamma in 0..3 {
                out[a][a][beta][gamma] += c.0[beta][gamma] * e.area / 3.0;
            }
        }
    }
}

/// `P(p_a) ρ ∫ ∇φ_a · Ĥ⁻¹ ∇φ_b` with `P = 𝟙 - ν̃⊗ν̃`.
fn add_divergence_term(e: &TriangleGeometry, m: &ElementMetricData, nu: [Vec3; 3], out: &mut Blocks) {
    for a in 0..3 {
        let p = Mat3::IDENTITY - nu[a].outer(nu[a]);
        for b in 0..3 {
            let s = m.rho * e.area * e.grads[a].dot(m.h_hat_inv.mul_vec(e.grads[b]));
            for beta in 0..3 {
                for gamma in 0..3 {
                    out[a][b][beta][gamma] += s * p.0[beta][gamma];
                }
            }
        }
    }
}

fn add_normal_mass(e: &TriangleGeometry, nu: [Vec3; 3], out: &mut Blocks) {
    for a in 0..3 {
        for beta in 0..3 {
            for gamma in 0..3 {
                out[a][a][beta][gamma] += nu[a][beta] * nu[a][gamma] * e.area / 3.0;
            }
        }
    }
}

fn corners<T: Copy>(values: &[T], tri: [usize; 3]) -> [T; 3] {
    [values[tri[0]], values[tri[1]], values[tri[2]]]
}

/// Nodal values of `w` with `∫ w·ζ + ∫ ∇y : ∇ζ = 0`, i.e. `w = -M⁻¹ S Y`
/// componentwise with the full (consistent) mass matrix.
pub fn discrete_map_laplacian_w(surface: &TriSurface, solver: &SolverConfig) -> Result<Vec<Vec3>> {
    let elems: Vec<TriangleGeometry> = surface.elements().collect();
    map_laplacian(surface, &SurfaceTopology::new(surface)?, &elems, solver)
}

fn map_laplacian(
    surface: &TriSurface,
    topo: &SurfaceTopology,
    elems: &[TriangleGeometry],
    solver: &SolverConfig,
) -> Result<Vec<Vec3>> {
    let (mass, stiff) = assemble_pair::<1, 3, _>(&topo.pattern, &topo.map, |t, m, s| {
        let e = &elems[t];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b][0][0] = triangle_mass(e.area, a, b);
                s[a][b][0][0] = e.area * e.grads[a].dot(e.grads[b]);
            }
        }
        Ok(())
    })?;
    let mut cfg = *solver;
    cfg.method = SolverMethod::Cg;
    let mut w = vec![Vec3::ZERO; surface.num_vertices()];
    for g in 0..3 {
        let yg: Vec<f64> = surface.reference().iter().map(|p| p[g]).collect();
        let rhs: Vec<f64> = stiff.mul_vec(&yg).into_iter().map(|v| -v).collect();
        let (x, _) = solve(&mass, &rhs, None, &cfg)?;
        for (wj, xj) in w.iter_mut().zip(x) {
            match g {
                0 => wj.x = xj,
                1 => wj.y = xj,
                _ => wj.z = xj,
            }
        }
    }
    Ok(w)
}

/// `M̃(T) = (α𝟙 + (1-α) ν⊗ν) ∫ φ_i φ_j` of the transport scheme.
pub fn assemble_transport_mass(
    surface: &TriSurface,
    topo: &SurfaceTopology,
    alpha: f64,
) -> Result<BlockSparseMatrix> {
    assemble_mapped::<3, 3, _>(&topo.pattern, &topo.map, |t, out| {
        add_transport_mass(&surface.element(t), alpha, out);
        Ok(())
    })
}

/// The transport term `B` for given nodal values of `w`.
pub fn assemble_transport_term(
    surface: &TriSurface,
    topo: &SurfaceTopology,
    metrics: &[ElementMetricData],
    w: &[Vec3],
) -> Result<BlockSparseMatrix> {
    assemble_mapped::<3, 3, _>(&topo.pattern, &topo.map, |t, out| {
        let tri = surface.triangles()[t];
        add_transport_term(&surface.element(t), &metrics[t], corners(w, tri), out);
        Ok(())
    })
}

/// Lumped mass of the divergence scheme, built per element and scattered.
pub fn assemble_divergence_mass(
    surface: &TriSurface,
    topo: &SurfaceTopology,
    metrics: &[ElementMetricData],
    normals: &[Vec3],
    alpha: f64,
) -> Result<BlockSparseMatrix> {
    assemble_mapped::<3, 3, _>(&topo.pattern, &topo.map, |t, out| {
        let tri = surface.triangles()[t];
        add_divergence_mass(&surface.element(t), metrics[t].rho, alpha, corners(normals, tri), out);
        Ok(())
    })
}

/// The divergence term `D` for given vertex normals `ν̃`.
pub fn assemble_divergence_term(
    surface: &TriSurface,
    topo: &SurfaceTopology,
    metrics: &[ElementMetricData],
    normals: &[Vec3],
) -> Result<BlockSparseMatrix> {
    assemble_mapped::<3, 3, _>(&topo.pattern, &topo.map, |t, out| {
        let tri = surface.triangles()[t];
        add_divergence_term(&surface.element(t), &metrics[t], corners(normals, tri), out);
        Ok(())
    })
}

/// Consistent vector mass matrix `δ_βγ ∫ φ_i φ_j`.
pub fn assemble_surface_mass(surface: &TriSurface, topo: &SurfaceTopology) -> Result<BlockSparseMatrix> {
    assemble_mapped::<3, 3, _>(&topo.pattern, &topo.map, |t, out| {
        add_transport_mass(&surface.element(t), 1.0, out);
        Ok(())
    })
}

/// Vector stiffness matrix `δ_βγ ∫ ∇φ_i · ∇φ_j`.
pub fn assemble_surface_stiffness(
    surface: &TriSurface,
    topo: &SurfaceTopology,
) -> Result<BlockSparseMatrix> {
    assemble_mapped::<3, 3, _>(&topo.pattern, &topo.map, |t, out| {
        add_stiffness(&surface.element(t), out);
        Ok(())
    })
}

fn finish_system(
    mut matrix: BlockSparseMatrix,
    mass: &BlockSparseMatrix,
    surface: &TriSurface,
    tau: f64,
) -> Result<LinearSystem> {
    matrix.add_scaled(mass, 1.0 / tau)?;
    let u_old = surface.to_flat();
    let rhs = mass.mul_vec(&u_old).into_iter().map(|v| v / tau).collect();
    Ok(LinearSystem { matrix, rhs, initial_guess: u_old })
}

/// The transport-form system `(M̃/τ + S + B) U = M̃ U_old / τ`.
pub fn transport_system(
    surface: &TriSurface,
    topo: &SurfaceTopology,
    alpha: f64,
    tau: f64,
    solver: &SolverConfig,
) -> Result<LinearSystem> {
    let elems: Vec<TriangleGeometry> = surface.elements().collect();
    let metrics = metrics_of(surface, &elems)?;
    let w = map_laplacian(surface, topo, &elems, solver)?;
    let (op, mass) = assemble_pair::<3, 3, _>(&topo.pattern, &topo.map, |t, op, mass| {
        let e = &elems[t];
        add_stiffness(e, op);
        add_transport_term(e, &metrics[t], corners(&w, surface.triangles()[t]), op);
        add_transport_mass(e, alpha, mass);
        Ok(())
    })?;
    finish_system(op, &mass, surface, tau)
}

/// The divergence-form system `(M/τ + S + D) U = M U_old / τ`.
pub fn divergence_system(
    surface: &TriSurface,
    topo: &SurfaceTopology,
    alpha: f64,
    tau: f64,
) -> Result<LinearSystem> {
    let elems: Vec<TriangleGeometry> = surface.elements().collect();
    let metrics = metrics_of(surface, &elems)?;
    let normals = surface.vertex_normals()?;
    let (op, mass) = assemble_pair::<3, 3, _>(&topo.pattern, &topo.map, |t, op, mass| {
        let e = &elems[t];
        let nu = corners(&normals, surface.triangles()[t]);
        add_stiffness(e, op);
        add_divergence_term(e, &metrics[t], nu, op);
        add_divergence_mass(e, metrics[t].rho, alpha, nu, mass);
        Ok(())
    })?;
    finish_system(op, &mass, surface, tau)
}

/// The benchmark system with lumped `ν̃_j⊗ν̃_j ∫ φ_j` and stiffness.
pub fn bgn_surface_system(
    surface: &TriSurface,
    topo: &SurfaceTopology,
    tau: f64,
) -> Result<LinearSystem> {
    let elems: Vec<TriangleGeometry> = surface.elements().collect();
    let normals = surface.vertex_normals()?;
    let (op, mass) = assemble_pair::<3, 3, _>(&topo.pattern, &topo.map, |t, op, mass| {
        let e = &elems[t];
        add_stiffness(e, op);
        add_normal_mass(e, corners(&normals, surface.triangles()[t]), mass);
        Ok(())
    })?;
    finish_system(op, &mass, surface, tau)
}

/// Assembles the system of `cfg.scheme` for the current state with time step
/// `tau`.
pub fn mcf_system(state: &McfState, cfg: &McfConfig, tau: f64) -> Result<LinearSystem> {
    let alpha = cfg.alpha_for(tau);
    match cfg.scheme {
        McfScheme::Transport => {
            transport_system(&state.surface, &state.topology, alpha, tau, &cfg.solver)
        }
        McfScheme::Divergence => divergence_system(&state.surface, &state.topology, alpha, tau),
        McfScheme::Bgn => bgn_surface_system(&state.surface, &state.topology, tau),
    }
}

/// Fails with [`Error::MeshDegeneration`] on the first triangle whose area is
/// below [`DEGENERATE_AREA`] or whose `σ` exceeds [`DEGENERATE_SIGMA`].
pub fn check_degeneration(surface: &TriSurface) -> Result<()> {
    for (t, e) in surface.elements().enumerate() {
        let sigma = e.sigma();
        if !(e.area >= DEGENERATE_AREA) || !(sigma <= DEGENERATE_SIGMA) {
            return Err(Error::MeshDegeneration { element: t, area: e.area, sigma });
        }
    }
    Ok(())
}

/// One step of the configured scheme. On error the input state is untouched
/// and remains the last valid state of the run.
pub fn step_mcf(state: &McfState, cfg: &McfConfig) -> Result<McfState> {
    cfg.validate()?;
    let tau = cfg.time_step.tau(&state.surface);
    let system = mcf_system(state, cfg, tau)?;
    let (u, stats): (Vec<f64>, SolveStats) =
        solve(&system.matrix, &system.rhs, Some(&system.initial_guess), &cfg.solver)?;
    let vertices: Vec<Vec3> = u.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    let surface = state.surface.with_vertices(vertices)?;
    check_degeneration(&surface)?;
    Ok(McfState {
        surface,
        time: state.time + tau,
        step_index: state.step_index + 1,
        last_tau: tau,
        last_iterations: stats.iterations,
        topology: state.topology.clone(),
    })
}

/// Extinction rule for surface runs.
pub fn is_extinct(surface: &TriSurface, initial_area: f64) -> bool {
    surface.area() < EXTINCTION_AREA_FRACTION * initial_area
}

fn with_scheme(cfg: &McfConfig, scheme: McfScheme) -> McfConfig {
    McfConfig { scheme, ..*cfg }
}

/// One step of the transport-form DeTurck scheme, whatever `cfg.scheme` says.
pub fn step_mcf_alg2(state: &McfState, cfg: &McfConfig) -> Result<McfState> {
    step_mcf(state, &with_scheme(cfg, McfScheme::Transport))
}

/// One step of the divergence-form DeTurck scheme.
pub fn step_mcf_alg3(state: &McfState, cfg: &McfConfig) -> Result<McfState> {
    step_mcf(state, &with_scheme(cfg, McfScheme::Divergence))
}

/// One step of the benchmark scheme.
pub fn step_mcf_bgn(state: &McfState, cfg: &McfConfig) -> Result<McfState> {
    step_mcf(state, &with_scheme(cfg, McfScheme::Bgn))
}
