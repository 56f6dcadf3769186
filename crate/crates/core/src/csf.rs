//! Time steppers for curve shortening flow.
//!
//! The α-scheme solves, per step,
//!
//! ```text
//! (M(X^m)/τ + S) X^{m+1} = M(X^m) X^m / τ
//! ```
//!
//! with the element mass coefficient `α|ρ|²𝟙 + (1-α) ρ⊗ρ`, where `ρ` is `X_θ`
//! rotated by 90° on the previous curve. `α = 1` is the Deckelnick–Dziuk
//! scheme; `α → 0` approaches a pure normal projection. The BGN benchmark is
//! fully implicit in its (nodal, lumped) projection vectors and is solved by a
//! damped fixed-point iteration.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::FixedPointFailure;
use crate::fem::{
    assemble, curve_elements, curve_stiffness_kernel, segment_mass, solve, BlockPattern,
    BlockSparseMatrix, SolveStats, SolverConfig,
};
use crate::math::Vec2;
use crate::mesh::PolygonalCurve;
use crate::{Error, Result};

/// Absolute slack allowed in the per-step discrete energy inequality.
pub const STABILITY_SLACK: f64 = 1e-8;

/// A run stops once the length falls below this fraction of the initial one.
pub const EXTINCTION_LENGTH_FRACTION: f64 = 1e-3;
/// ...or once any segment is shorter than this.
pub const MIN_SEGMENT_LENGTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CsfState {
    pub curve: PolygonalCurve,
    pub time: f64,
    pub step_index: usize,
    /// `Σ_m (1/τ) ∫ (α|ΔX|² + (1-α)|ΔX·ν|²) |X_θ^m|² dθ`.
    pub stability_energy_sum: f64,
    /// `½∫|X_θ^0|²` of the initial curve.
    pub initial_energy: f64,
    /// Number of steps whose energy inequality failed beyond [`STABILITY_SLACK`].
    pub stability_violations: usize,
    /// Solver iterations of the most recent step (fixed-point iterations for BGN).
    pub last_iterations: usize,
}

impl CsfState {
    pub fn new(curve: PolygonalCurve) -> Self {
        let initial_energy = curve.dirichlet_energy();
        CsfState {
            curve,
            time: 0.0,
            step_index: 0,
            stability_energy_sum: 0.0,
            initial_energy,
            stability_violations: 0,
            last_iterations: 0,
        }
    }

    /// Left side of the cumulative energy inequality.
    pub fn energy_lhs(&self) -> f64 {
        self.curve.dirichlet_energy() + self.stability_energy_sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsfConfig {
    pub alpha: f64,
    pub tau: f64,
    pub solver: SolverConfig,
}

impl CsfConfig {
    pub fn new(alpha: f64, tau: f64) -> Self {
        CsfConfig { alpha, tau, solver: SolverConfig::cg() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig("time step must be positive".into()));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig("alpha must be a finite value >= 0".into()));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgnCurveConfig {
    pub tau: f64,
    /// Stop when the max vertex displacement between iterates drops below this.
    pub threshold: f64,
    pub max_iterations: usize,
    /// Relaxation `X^{i+1} = θ X_solve + (1-θ) X^i`; 1 means undamped.
    pub damping: f64,
    pub solver: SolverConfig,
}

impl BgnCurveConfig {
    pub fn new(tau: f64) -> Self {
        BgnCurveConfig {
            tau,
            threshold: 1e-8,
            max_iterations: 1000,
            damping: 1.0,
            solver: SolverConfig::cg(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig("time step must be positive".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidConfig("fixed-point threshold must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig("damping must lie in (0, 1]".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("need at least one fixed-point iteration".into()));
        }
        self.solver.validate()
    }
}

/// `α|ρ|²𝟙 + (1-α) ρ⊗ρ`, row-major 2×2.
pub fn mass_coefficient_block(alpha: f64, rho: Vec2) -> [[f64; 2]; 2] {
    let r2 = rho.norm_sq();
    let r = rho.to_array();
    let mut c = [[0.0; 2]; 2];
    for (b, row) in c.iter_mut().enumerate() {
        for (g, v) in row.iter_mut().enumerate() {
            *v = (1.0 - alpha) * r[b] * r[g] + if b == g { alpha * r2 } else { 0.0 };
        }
    }
    c
}

/// Element mass matrix of a segment with parameter length `h`: coefficient
/// block times `∫ φ_a φ_b dθ`. Row-major 4×4 with local index `a·2 + β`.
pub fn csf_element_mass_kernel(h: f64, alpha: f64, rho: Vec2) -> Result<[f64; 16]> {
    if alpha == 0.0 && rho.norm_sq() == 0.0 {
        return Err(Error::SingularKernel { element: 0 });
    }
    let c = mass_coefficient_block(alpha, rho);
    let mut out = [0.0; 16];
    for a in 0..2 {
        for b in 0..2 {
            let m = segment_mass(h, a, b);
            for beta in 0..2 {
                for gamma in 0..2 {
                    out[(a * 2 + beta) * 4 + b * 2 + gamma] = c[beta][gamma] * m;
                }
            }
        }
    }
    Ok(out)
}

/// A linear system as assembled by a stepper, with the starting guess the
/// stepper hands to the iterative solver.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: BlockSparseMatrix,
    pub rhs: Vec<f64>,
    pub initial_guess: Vec<f64>,
}

fn curve_pattern(n: usize) -> Result<Arc<BlockPattern>> {
    Ok(Arc::new(BlockPattern::from_elements(n, &curve_elements(n))?))
}

/// Assembles `M(X^m)` for the α-scheme.
pub fn assemble_csf_mass(curve: &PolygonalCurve, alpha: f64) -> Result<BlockSparseMatrix> {
    let n = curve.len();
    let pattern = curve_pattern(n)?;
    assemble(2, &pattern, &curve_elements(n), |e, out| {
        let seg = curve.segment(e);
        let k = csf_element_mass_kernel(seg.param_length, alpha, seg.rho())
            .map_err(|_| Error::SingularKernel { element: e })?;
        out.copy_from_slice(&k);
        Ok(())
    })
}

/// Stiffness matrix `δ_βγ ∫ φ_i' φ_j' dθ` on the curve's parameter grid.
pub fn assemble_csf_stiffness(curve: &PolygonalCurve) -> Result<BlockSparseMatrix> {
    let n = curve.len();
    let pattern = curve_pattern(n)?;
    assemble(2, &pattern, &curve_elements(n), |e, out| {
        curve_stiffness_kernel(curve.param_length(e), out);
        Ok(())
    })
}

/// The α-scheme system `(M/τ + S) X = M X^m / τ`, plus the mass matrix.
pub fn csf_system(curve: &PolygonalCurve, cfg: &CsfConfig) -> Result<(LinearSystem, BlockSparseMatrix)> {
    cfg.validate()?;
    let mass = assemble_csf_mass(curve, cfg.alpha)?;
    let mut matrix = assemble_csf_stiffness(curve)?;
    matrix.add_scaled(&mass, 1.0 / cfg.tau)?;
    let x_old = curve.to_flat();
    let rhs: Vec<f64> = mass.mul_vec(&x_old).into_iter().map(|v| v / cfg.tau).collect();
    Ok((LinearSystem { matrix, rhs, initial_guess: x_old }, mass))
}

/// One step of the α-scheme. The discrete energy inequality is re-checked
/// after the solve; a violation beyond [`STABILITY_SLACK`] is counted in
/// `stability_violations` but the step is still returned.
pub fn step_csf(state: &CsfState, cfg: &CsfConfig) -> Result<CsfState> {
    let (system, mass) = csf_system(&state.curve, cfg)?;
    let (x_new, stats) = solve(&system.matrix, &system.rhs, Some(&system.initial_guess), &cfg.solver)?;
    let next_curve = state.curve.from_flat(&x_new)?;

    let delta: Vec<f64> = x_new.iter().zip(&system.initial_guess).map(|(a, b)| a - b).collect();
    let dissipation = mass.mul_vec(&delta).iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>() / cfg.tau;
    let before = state.curve.dirichlet_energy();
    let after = next_curve.dirichlet_energy();
    let violated = after + dissipation > before + STABILITY_SLACK;

    let step_index = state.step_index + 1;
    Ok(CsfState {
        curve: next_curve,
        time: step_index as f64 * cfg.tau,
        step_index,
        stability_energy_sum: state.stability_energy_sum + dissipation,
        initial_energy: state.initial_energy,
        stability_violations: state.stability_violations + violated as usize,
        last_iterations: stats.iterations,
    })
}

/// Nodal projection vectors of the BGN scheme: at each vertex the arithmetic
/// mean of the two adjacent values of `X_θ` rotated by 90°.
pub fn bgn_nodal_rho(points: &[Vec2], param_lengths: &[f64]) -> Vec<Vec2> {
    let n = points.len();
    let seg_rho = |j: usize| (points[(j + 1) % n] - points[j]).perp() * (1.0 / param_lengths[j]);
    (0..n).map(|j| (seg_rho((j + n - 1) % n) + seg_rho(j)) * 0.5).collect()
}

/// Linear system of one BGN fixed-point iteration: projection vectors are
/// taken from `iterate`, the old positions from `previous`.
pub fn bgn_curve_system(
    previous: &PolygonalCurve,
    iterate: &[Vec2],
    tau: f64,
) -> Result<LinearSystem> {
    let n = previous.len();
    if iterate.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: iterate.len() });
    }
    let h: Vec<f64> = (0..n).map(|j| previous.param_length(j)).collect();
    let rho = bgn_nodal_rho(iterate, &h);
    let mut matrix = assemble_csf_stiffness(previous)?;
    let mut rhs = vec![0.0; 2 * n];
    for j in 0..n {
        let w = 0.5 * (h[(j + n - 1) % n] + h[j]) / tau;
        let r = rho[j].to_array();
        let mut block = [0.0; 4];
        for b in 0..2 {
            for g in 0..2 {
                block[b * 2 + g] = w * r[b] * r[g];
            }
        }
        matrix.add_block(j, j, &block)?;
        let proj = w * rho[j].dot(previous.vertices()[j]);
        rhs[2 * j] = proj * r[0];
        rhs[2 * j + 1] = proj * r[1];
    }
    Ok(LinearSystem {
        matrix,
        rhs,
        initial_guess: iterate.iter().flat_map(|v| v.to_array()).collect(),
    })
}

/// One step of the BGN curve scheme by (optionally damped) fixed-point
/// iteration. Returns the new state and the number of iterations used.
pub fn step_bgn_curve(state: &CsfState, cfg: &BgnCurveConfig) -> Result<(CsfState, usize)> {
    cfg.validate()?;
    let n = state.curve.len();
    let mut iterate: Vec<Vec2> = state.curve.vertices().to_vec();
    let mut last_increment = f64::INFINITY;
    for i in 1..=cfg.max_iterations {
        let system = bgn_curve_system(&state.curve, &iterate, cfg.tau)?;
        let (x, _): (Vec<f64>, SolveStats) =
            solve(&system.matrix, &system.rhs, Some(&system.initial_guess), &cfg.solver)?;
        let next: Vec<Vec2> = (0..n)
            .map(|j| {
                let solved = Vec2::new(x[2 * j], x[2 * j + 1]);
                solved * cfg.damping + iterate[j] * (1.0 - cfg.damping)
            })
            .collect();
        last_increment = next.iter().zip(&iterate).map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max);
        if !last_increment.is_finite() {
            break;
        }
        let previous = core::mem::replace(&mut iterate, next);
        if last_increment < cfg.threshold {
            let curve = state.curve.with_vertices(iterate)?;
            let step_index = state.step_index + 1;
            return Ok((
                CsfState {
                    curve,
                    time: step_index as f64 * cfg.tau,
                    step_index,
                    stability_energy_sum: state.stability_energy_sum,
                    initial_energy: state.initial_energy,
                    stability_violations: state.stability_violations,
                    last_iterations: i,
                },
                i,
            ));
        }
        if i == cfg.max_iterations {
            return Err(Error::FixedPointDivergence(Box::new(FixedPointFailure {
                iterations: i,
                last_increment,
                previous_iterate: previous.iter().flat_map(|v| v.to_array()).collect(),
                last_iterate: iterate.iter().flat_map(|v| v.to_array()).collect(),
            })));
        }
    }
    Err(Error::FixedPointDivergence(Box::new(FixedPointFailure {
        iterations: cfg.max_iterations,
        last_increment,
        previous_iterate: Vec::new(),
        last_iterate: iterate.iter().flat_map(|v| v.to_array()).collect(),
    })))
}

/// `max_j |X^{m+1}_j - X^m_j| / τ`.
pub fn max_vertex_speed(prev: &PolygonalCurve, next: &PolygonalCurve, tau: f64) -> Result<f64> {
    crate::diagnostics::max_vertex_speed(prev.vertices(), next.vertices(), tau)
}

/// Extinction rule for curve runs: length below [`EXTINCTION_LENGTH_FRACTION`]
/// of `initial_length`, or a segment shorter than [`MIN_SEGMENT_LENGTH`].
pub fn is_extinct(curve: &PolygonalCurve, initial_length: f64) -> bool {
    curve.length() < EXTINCTION_LENGTH_FRACTION * initial_length
        || curve.segments().any(|s| s.length < MIN_SEGMENT_LENGTH)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_circle;

    #[test]
    fn coefficient_block_examples() {
        let rho = Vec2::new(0.0, 2.0);
        assert_eq!(mass_coefficient_block(0.5, rho), [[2.0, 0.0], [0.0, 4.0]]);
        assert_eq!(mass_coefficient_block(1.0, Vec2::new(0.3, -0.4)), [[0.25, 0.0], [0.0, 0.25]]);
        let c0 = mass_coefficient_block(0.0, Vec2::new(3.0, 4.0));
        assert_eq!(c0, [[9.0, 12.0], [12.0, 16.0]]);
    }

    #[test]
    fn degenerate_segment_with_zero_alpha_is_singular() {
        assert!(matches!(
            csf_element_mass_kernel(0.1, 0.0, Vec2::ZERO),
            Err(Error::SingularKernel { .. })
        ));
        assert!(csf_element_mass_kernel(0.1, 0.5, Vec2::ZERO).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(CsfConfig::new(-1.0, 1e-3).validate().is_err());
        assert!(CsfConfig::new(0.0, 0.0).validate().is_err());
        assert!(CsfConfig::new(0.0, 1e-3).validate().is_ok());
        let mut b = BgnCurveConfig::new(1e-3);
        b.damping = 0.0;
        assert!(b.validate().is_err());
        b.damping = 1.5;
        assert!(b.validate().is_err());
    }

    #[test]
    fn one_step_keeps_time_consistent() {
        let s = CsfState::new(generate_circle(16, 1.0).unwrap());
        let cfg = CsfConfig::new(1.0, 1e-3);
        let s1 = step_csf(&s, &cfg).unwrap();
        let s2 = step_csf(&s1, &cfg).unwrap();
        assert_eq!(s2.step_index, 2);
        assert!((s2.time - 2e-3).abs() < 1e-18);
        assert_eq!(s2.stability_violations, 0);
    }
}
