use alloc::format;
use alloc::vec::Vec;

use crate::math::{Vec2, TAU};
use crate::{Error, Result};

/// Closed polygon in the plane, parametrized over a periodic grid on
/// `[0, 2π)`.
///
/// Vertex `j` sits at parameter `theta[j]`; segment `j` joins vertex `j` to
/// vertex `(j + 1) % N`. The parameter grid is what the finite element
/// integrals are taken over, so it is part of the discretization and not just
/// decoration: `|X_θ|` on segment `j` is `|p_{j+1} - p_j| / (θ_{j+1} - θ_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalCurve {
    vertices: Vec<Vec2>,
    theta: Vec<f64>,
}

/// Geometry of one curve segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGeometry {
    pub start: Vec2,
    pub end: Vec2,
    /// Euclidean segment length.
    pub length: f64,
    /// Segment vector rotated by +90°; its norm equals `length`.
    pub rotated_tangent: Vec2,
    /// Length of the segment in the parameter domain.
    pub param_length: f64,
}

impl SegmentGeometry {
    /// Unit normal: the rotated tangent, normalized.
    pub fn normal(&self) -> Vec2 {
        self.rotated_tangent * (1.0 / self.length)
    }

    /// Parametric derivative `X_θ` rotated by +90°, the vector entering the
    /// curve mass kernels. `|rho| = |X_θ|`.
    pub fn rho(&self) -> Vec2 {
        self.rotated_tangent * (1.0 / self.param_length)
    }
}

/// Uniform parameter grid `θ_j = 2πj/N`.
pub fn uniform_parameters(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

impl PolygonalCurve {
    /// Curve over the uniform parameter grid.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        let theta = uniform_parameters(vertices.len());
        Self::with_parameters(vertices, theta)
    }

    /// Curve over an explicit parameter grid (strictly increasing in `[0, 2π)`).
    pub fn with_parameters(vertices: Vec<Vec2>, theta: Vec<f64>) -> Result<Self> {
        let curve = PolygonalCurve { vertices, theta };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(Error::InvalidMesh(format!("curve needs at least 3 vertices, got {n}")));
        }
        if self.theta.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.theta.len() });
        }
        if self.theta[0] < 0.0 || self.theta[n - 1] >= TAU {
            return Err(Error::InvalidMesh("parameter grid must lie in [0, 2π)".into()));
        }
        for j in 0..n {
            if !(self.vertices[j].x.is_finite() && self.vertices[j].y.is_finite()) {
                return Err(Error::InvalidMesh(format!("vertex {j} is not finite")));
            }
            if self.param_length(j) <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "parameter grid is not strictly increasing at {j}"
                )));
            }
            let len = (self.vertices[(j + 1) % n] - self.vertices[j]).norm();
            if len <= 0.0 {
                return Err(Error::InvalidMesh(format!("segment {j} has zero length")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    #[inline]
    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    #[inline]
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Parameter-domain length of segment `j`.
    #[inline]
    pub fn param_length(&self, j: usize) -> f64 {
        let n = self.theta.len();
        if j + 1 < n {
            self.theta[j + 1] - self.theta[j]
        } else {
            self.theta[0] + TAU - self.theta[n - 1]
        }
    }

    pub fn segment(&self, j: usize) -> SegmentGeometry {
        let n = self.len();
        let start = self.vertices[j];
        let end = self.vertices[(j + 1) % n];
        let edge = end - start;
        SegmentGeometry {
            start,
            end,
            length: edge.norm(),
            rotated_tangent: edge.perp(),
            param_length: self.param_length(j),
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = SegmentGeometry> + '_ {
        (0..self.len()).map(move |j| self.segment(j))
    }

    /// Total Euclidean length.
    pub fn length(&self) -> f64 {
        self.segments().map(|s| s.length).sum()
    }

    /// `½ ∫ |X_θ|² dθ`, the Dirichlet energy of the parametrization.
    pub fn dirichlet_energy(&self) -> f64 {
        0.5 * self.segments().map(|s| s.length * s.length / s.param_length).sum::<f64>()
    }

    /// Same parameter grid, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: vertices.len() });
        }
        Self::with_parameters(vertices, self.theta.clone())
    }

    /// Interleaved coordinates `[x0, y0, x1, y1, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|v| [v.x, v.y]).collect()
    }

    pub fn from_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != 2 * self.len() {
            return Err(Error::DimensionMismatch { expected: 2 * self.len(), found: flat.len() });
        }
        self.with_vertices(flat.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect())
    }

    pub fn map(&self, f: impl Fn(Vec2) -> Vec2) -> Result<Self> {
        self.with_vertices(self.vertices.iter().map(|&v| f(v)).collect())
    }
}

/// Sum of segment lengths.
pub fn curve_length(curve: &PolygonalCurve) -> f64 {
    curve.length()
}
