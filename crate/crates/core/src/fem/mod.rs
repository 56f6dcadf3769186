//! Block sparse assembly, element integrals shared by all schemes, and
//! linear solvers.

mod solver;
mod sparse;

pub use solver::{
    bicgstab, conjugate_gradient, solve, Preconditioner, SolveStats, SolverConfig, SolverMethod,
    DEFAULT_TOLERANCE,
};
pub use sparse::{
    assemble, assemble_mapped, assemble_pair, assemble_with_new_pattern, BlockPattern,
    BlockSparseMatrix, DenseMatrix, ElementBlockMap, ElementBlocks,
};

use alloc::vec;
use alloc::vec::Vec;

use crate::mesh::{PolygonalCurve, TriSurface, TriangleGeometry};

/// `∫_T φ_a φ_b` on a segment of parameter length `h`.
#[inline]
pub fn segment_mass(h: f64, a: usize, b: usize) -> f64 {
    if a == b {
        h / 3.0
    } else {
        h / 6.0
    }
}

/// `∫_T φ_a φ_b` on a triangle of area `area`.
#[inline]
pub fn triangle_mass(area: f64, a: usize, b: usize) -> f64 {
    if a == b {
        area / 6.0
    } else {
        area / 12.0
    }
}

/// Writes `δ_βγ ∫ φ_a' φ_b' dθ` for a segment of parameter length `h` into a
/// `4 × 4` element buffer (`d = 2`).
pub fn curve_stiffness_kernel(h: f64, out: &mut [f64]) {
    for a in 0..2 {
        for b in 0..2 {
            let s = if a == b { 1.0 / h } else { -1.0 / h };
            for beta in 0..2 {
                out[(a * 2 + beta) * 4 + b * 2 + beta] += s;
            }
        }
    }
}

/// Writes `δ_βγ ∫_T ∇φ_a · ∇φ_b` into a `9 × 9` element buffer (`d = 3`).
pub fn surface_stiffness_kernel(e: &TriangleGeometry, out: &mut [f64]) {
    for a in 0..3 {
        for b in 0..3 {
            let s = e.area * e.grads[a].dot(e.grads[b]);
            for beta in 0..3 {
                out[(a * 3 + beta) * 9 + b * 3 + beta] += s;
            }
        }
    }
}

/// Writes `δ_βγ ∫_T φ_a φ_b` into a `9 × 9` element buffer (`d = 3`).
pub fn surface_mass_kernel(e: &TriangleGeometry, out: &mut [f64]) {
    for a in 0..3 {
        for b in 0..3 {
            let m = triangle_mass(e.area, a, b);
            for beta in 0..3 {
                out[(a * 3 + beta) * 9 + b * 3 + beta] += m;
            }
        }
    }
}

/// Meshes whose nodal quadrature weights `Σ_{T ∋ p} |T| / k` are defined.
pub trait LumpedMass {
    fn lumped_mass_integrals(&self) -> Vec<f64>;
}

impl LumpedMass for TriSurface {
    fn lumped_mass_integrals(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.num_vertices()];
        for (t, tri) in self.triangles().iter().enumerate() {
            let third = self.element(t).area / 3.0;
            for &v in tri {
                w[v] += third;
            }
        }
        w
    }
}

impl LumpedMass for PolygonalCurve {
    /// Half the Euclidean length of each adjacent segment.
    fn lumped_mass_integrals(&self) -> Vec<f64> {
        let n = self.len();
        let mut w = vec![0.0; n];
        for j in 0..n {
            let half = 0.5 * self.segment(j).length;
            w[j] += half;
            w[(j + 1) % n] += half;
        }
        w
    }
}

/// Per-vertex weights `∫ φ_j`, which realize nodal interpolation in lumped
/// mass terms.
pub fn lumped_mass_integrals<M: LumpedMass>(mesh: &M) -> Vec<f64> {
    mesh.lumped_mass_integrals()
}

/// Connectivity of a closed curve as segments `[j, j+1 mod N]`.
pub fn curve_elements(n: usize) -> Vec<[usize; 2]> {
    (0..n).map(|j| [j, (j + 1) % n]).collect()
}
