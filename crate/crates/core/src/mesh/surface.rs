use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::Vec3;
use crate::{Error, Result};

/// Closed, oriented triangulated surface in R³.
///
/// `reference` holds the nodal values of the reference map: vertex `j` of the
/// moving surface corresponds to point `reference[j]` of the reference
/// surface. Those values never change while the surface evolves.
#[derive(Debug, Clone, PartialEq)]
pub struct TriSurface {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    reference: Vec<Vec3>,
}

/// Per-triangle geometry of a linear surface element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGeometry {
    pub vertices: [Vec3; 3],
    pub area: f64,
    /// Unit normal following the vertex orientation.
    pub normal: Vec3,
    /// Tangential gradients of the three nodal basis functions.
    pub grads: [Vec3; 3],
}

impl TriangleGeometry {
    pub fn new(p: [Vec3; 3]) -> Self {
        let n = (p[1] - p[0]).cross(p[2] - p[0]);
        let twice_area = n.norm();
        let normal = n * (1.0 / twice_area);
        let s = 1.0 / twice_area;
        let grads = [
            normal.cross(p[2] - p[1]) * s,
            normal.cross(p[0] - p[2]) * s,
            normal.cross(p[1] - p[0]) * s,
        ];
        TriangleGeometry { vertices: p, area: 0.5 * twice_area, normal, grads }
    }

    pub fn edge_lengths(&self) -> [f64; 3] {
        let p = &self.vertices;
        [(p[1] - p[0]).norm(), (p[2] - p[1]).norm(), (p[0] - p[2]).norm()]
    }

    /// Longest edge over inradius; `h(T) / r(T)` with `r = 2|T| / perimeter`.
    pub fn sigma(&self) -> f64 {
        let e = self.edge_lengths();
        let diameter = e[0].max(e[1]).max(e[2]);
        let inradius = 2.0 * self.area / (e[0] + e[1] + e[2]);
        if inradius > 0.0 {
            diameter / inradius
        } else {
            f64::INFINITY
        }
    }
}

fn triangle_area(p: [Vec3; 3]) -> f64 {
    0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm()
}

impl TriSurface {
    /// Builds and validates a surface. The reference map defaults to the
    /// identity when `reference` is `None`.
    pub fn new(
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        reference: Option<Vec<Vec3>>,
    ) -> Result<Self> {
        let reference = reference.unwrap_or_else(|| vertices.clone());
        let s = TriSurface { vertices, triangles, reference };
        s.validate()?;
        Ok(s)
    }

    /// Checks non-degeneracy of both the surface and its reference image,
    /// and that the connectivity is a closed oriented 2-manifold.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.reference.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.reference.len() });
        }
        if self.triangles.is_empty() {
            return Err(Error::InvalidMesh("surface has no triangles".into()));
        }
        let mut used = vec![false; n];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} references vertex {v} but there are only {n}"
                    )));
                }
                used[v] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            let area = triangle_area(tri.map(|v| self.vertices[v]));
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            let ref_area = triangle_area(tri.map(|v| self.reference[v]));
            if !(ref_area > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "reference image of triangle {t} is degenerate"
                )));
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} belongs to no triangle")));
        }
        check_closed_oriented_manifold(&self.triangles)
    }

    #[inline]
    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }
    #[inline]
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    #[inline]
    pub fn reference(&self) -> &[Vec3] {
        &self.reference
    }
    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    #[inline]
    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn element(&self, t: usize) -> TriangleGeometry {
        TriangleGeometry::new(self.triangles[t].map(|v| self.vertices[v]))
    }

    pub fn reference_element(&self, t: usize) -> TriangleGeometry {
        TriangleGeometry::new(self.triangles[t].map(|v| self.reference[v]))
    }

    pub fn elements(&self) -> impl Iterator<Item = TriangleGeometry> + '_ {
        (0..self.triangles.len()).map(move |t| self.element(t))
    }

    pub fn area(&self) -> f64 {
        self.elements().map(|e| e.area).sum()
    }

    /// Enclosed volume by the divergence theorem; positive for outward
    /// orientation.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| self.vertices[v]);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }

    /// Longest edge over all triangles.
    pub fn max_diameter(&self) -> f64 {
        self.elements()
            .map(|e| {
                let l = e.edge_lengths();
                l[0].max(l[1]).max(l[2])
            })
            .fold(0.0, f64::max)
    }

    /// Area-weighted vertex normals, normalized.
    pub fn vertex_normals(&self) -> Result<Vec<Vec3>> {
        let mut acc = vec![Vec3::ZERO; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let e = self.element(t);
            for &v in tri {
                acc[v] += e.normal * e.area;
            }
        }
        acc.into_iter()
            .enumerate()
            .map(|(v, n)| {
                let len = n.norm();
                if len > 0.0 && len.is_finite() {
                    Ok(n * (1.0 / len))
                } else {
                    Err(Error::DegenerateNormal { vertex: v })
                }
            })
            .collect()
    }

    /// Same connectivity and reference map, new vertex positions. Only the
    /// length is checked; degeneracy is the caller's concern.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vertices.len(),
                found: vertices.len(),
            });
        }
        Ok(TriSurface {
            vertices,
            triangles: self.triangles.clone(),
            reference: self.reference.clone(),
        })
    }

    /// Same surface with a different reference map.
    pub fn with_reference(&self, reference: Vec<Vec3>) -> Result<Self> {
        TriSurface::new(self.vertices.clone(), self.triangles.clone(), Some(reference))
    }

    /// Reverses the orientation of every triangle.
    pub fn flipped(&self) -> Self {
        TriSurface {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect(),
            reference: self.reference.clone(),
        }
    }

    /// Applies `f` to both the surface and the reference positions.
    pub fn map_both(&self, f: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        TriSurface::new(
            self.vertices.iter().map(|&v| f(v)).collect(),
            self.triangles.clone(),
            Some(self.reference.iter().map(|&v| f(v)).collect()),
        )
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|v| v.to_array()).collect()
    }

    pub fn reference_flat(&self) -> Vec<f64> {
        self.reference.iter().flat_map(|v| v.to_array()).collect()
    }

    /// Vertex adjacency lists (sorted, without the vertex itself).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for t in &self.triangles {
            for a in 0..3 {
                for b in 0..3 {
                    if a != b {
                        nb[t[a]].push(t[b]);
                    }
                }
            }
        }
        for l in &mut nb {
            l.sort_unstable();
            l.dedup();
        }
        nb
    }
}

/// Every directed edge must occur exactly once and its reverse exactly once.
fn check_closed_oriented_manifold(triangles: &[[usize; 3]]) -> Result<()> {
    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let e = (tri[k], tri[(k + 1) % 3]);
            if let Some(other) = directed.insert(e, t) {
                return Err(Error::InvalidMesh(format!(
                    "edge ({}, {}) is used with the same orientation by triangles {other} and {t}",
                    e.0, e.1
                )));
            }
        }
    }
    for (&(a, b), &t) in &directed {
        if !directed.contains_key(&(b, a)) {
            return Err(Error::InvalidMesh(format!(
                "edge ({a}, {b}) of triangle {t} is not shared by a second triangle (non-manifold or open surface)"
            )));
        }
    }
    Ok(())
}

/// Sum of triangle areas.
pub fn surface_area(surface: &TriSurface) -> f64 {
    surface.area()
}

/// Normalized area-weighted average of the incident triangle normals at every
/// vertex.
pub fn vertex_normals_area_weighted(surface: &TriSurface) -> Result<Vec<Vec3>> {
    surface.vertex_normals()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{sqrt, Vec3};

    fn tetra() -> TriSurface {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let t = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        TriSurface::new(v, t, None).unwrap()
    }

    #[test]
    fn basis_gradients_reproduce_nodal_values() {
        let e = TriangleGeometry::new([
            Vec3::new(0.1, -0.3, 0.2),
            Vec3::new(1.2, 0.4, -0.1),
            Vec3::new(-0.2, 0.9, 0.7),
        ]);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let d = e.grads[i].dot(e.vertices[j] - e.vertices[k]);
                    let expect = (i == j) as i32 as f64 - (i == k) as i32 as f64;
                    assert!((d - expect).abs() < 1e-13);
                }
            }
            assert!(e.grads[i].dot(e.normal).abs() < 1e-14);
        }
        assert!((e.normal.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tetra_is_outward_and_valid() {
        let s = tetra();
        assert!(s.signed_volume() > 0.0);
        assert!((s.area() - (1.5 + sqrt(3.0) / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn open_surface_is_rejected() {
        let s = tetra();
        let mut tris = s.triangles().to_vec();
        tris.pop();
        let err = TriSurface::new(s.vertices().to_vec(), tris, None).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn inconsistent_orientation_is_rejected() {
        let s = tetra();
        let mut tris = s.triangles().to_vec();
        tris[0] = [0, 1, 2];
        assert!(TriSurface::new(s.vertices().to_vec(), tris, None).is_err());
    }

    #[test]
    fn equilateral_sigma() {
        let e = TriangleGeometry::new([
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, sqrt(3.0) / 2.0, 0.0),
        ]);
        assert!((e.sigma() - 2.0 * sqrt(3.0)).abs() < 1e-12);
    }
}
