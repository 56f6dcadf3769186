//! Initial shapes: circles, the curve examples, icospheres, dumbbells and
//! undulating tori.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{PolygonalCurve, TriSurface};
use crate::math::{cos, powf, sin, sqrt, Vec2, Vec3, PI, TAU};
use crate::{Error, Result};

/// Max/min segment length of the graded circle when no ratio is given.
pub const DEFAULT_GRADING_RATIO: f64 = 3.0;

/// Named initial curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveShape {
    /// `(cos θ, (0.9 cos²θ + 0.1) sin θ)`.
    FlattenedCircle,
    /// `(cos 2θ cos θ, cos 2θ sin θ)`, a four-petal rose through the origin.
    FourPetal,
    /// Unit circle whose segment lengths decrease geometrically
    /// anti-clockwise from `(1, 0)`, with max/min segment length `ratio`.
    GradedCircle { ratio: f64 },
}

impl CurveShape {
    /// Parses `example1_flattened_circle`, `example2_fourpetal` and
    /// `example3_graded_circle` (plus the short forms `example1`..`example3`).
    pub fn from_name(name: &str, ratio: Option<f64>) -> Result<Self> {
        match name {
            "example1" | "example1_flattened_circle" => Ok(CurveShape::FlattenedCircle),
            "example2" | "example2_fourpetal" => Ok(CurveShape::FourPetal),
            "example3" | "example3_graded_circle" => Ok(CurveShape::GradedCircle {
                ratio: ratio.unwrap_or(DEFAULT_GRADING_RATIO),
            }),
            other => Err(Error::InvalidShape(format!("unknown curve shape `{other}`"))),
        }
    }
}

/// Regular `n`-gon inscribed in the circle of radius `radius`.
pub fn generate_circle(n: usize, radius: f64) -> Result<PolygonalCurve> {
    if n < 3 {
        return Err(Error::InvalidMesh(format!("a circle needs at least 3 vertices, got {n}")));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidShape(format!("radius must be positive, got {radius}")));
    }
    let vertices = (0..n)
        .map(|j| {
            let t = TAU * j as f64 / n as f64;
            Vec2::new(radius * cos(t), radius * sin(t))
        })
        .collect();
    PolygonalCurve::new(vertices)
}

pub fn generate_parametrized_curve(n: usize, shape: CurveShape) -> Result<PolygonalCurve> {
    if n < 3 {
        return Err(Error::InvalidMesh(format!("a curve needs at least 3 vertices, got {n}")));
    }
    let sample = |f: &dyn Fn(f64) -> Vec2| -> Result<PolygonalCurve> {
        PolygonalCurve::new((0..n).map(|j| f(TAU * j as f64 / n as f64)).collect())
    };
    match shape {
        CurveShape::FlattenedCircle => {
            sample(&|t| Vec2::new(cos(t), (0.9 * cos(t) * cos(t) + 0.1) * sin(t)))
        }
        CurveShape::FourPetal => sample(&|t| Vec2::new(cos(2.0 * t) * cos(t), cos(2.0 * t) * sin(t))),
        CurveShape::GradedCircle { ratio } => graded_circle(n, ratio),
    }
}

fn graded_angles(n: usize, angle_ratio: f64) -> Vec<f64> {
    let q = powf(angle_ratio, -1.0 / (n as f64 - 1.0));
    let weights: Vec<f64> = (0..n).map(|k| powf(q, k as f64)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| TAU * w / total).collect()
}

fn chord_ratio(angles: &[f64]) -> f64 {
    let chord = |a: f64| 2.0 * sin(0.5 * a);
    chord(angles[0]) / chord(angles[angles.len() - 1])
}

/// Unit circle with geometrically graded segment angles. The angle grading is
/// tuned by bisection so that the ratio of the first (longest) to the last
/// (shortest) chord is exactly `ratio`.
fn graded_circle(n: usize, ratio: f64) -> Result<PolygonalCurve> {
    if !(ratio >= 1.0) || !ratio.is_finite() {
        return Err(Error::InvalidShape(format!("grading ratio must be >= 1, got {ratio}")));
    }
    let angles = if ratio == 1.0 {
        graded_angles(n, 1.0)
    } else {
        let (mut lo, mut hi) = (ratio, 2.0 * ratio);
        while chord_ratio(&graded_angles(n, hi)) < ratio {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::InvalidShape(format!(
                    "grading ratio {ratio} not reachable with {n} vertices"
                )));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if chord_ratio(&graded_angles(n, mid)) < ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        graded_angles(n, 0.5 * (lo + hi))
    };
    let mut vertices = Vec::with_capacity(n);
    let mut phi = 0.0;
    for a in &angles {
        vertices.push(Vec2::new(cos(phi), sin(phi)));
        phi += a;
    }
    PolygonalCurve::new(vertices)
}

/// Icosahedron refined by `subdivisions` rounds of 4-to-1 midpoint splitting,
/// projected onto the sphere of radius `radius`. The reference map is the
/// identity.
pub fn generate_icosphere(subdivisions: u32, radius: f64) -> Result<TriSurface> {
    if !(radius > 0.0) {
        return Err(Error::InvalidShape(format!("radius must be positive, got {radius}")));
    }
    let (vertices, triangles) = unit_icosphere(subdivisions);
    TriSurface::new(vertices.into_iter().map(|v| v * radius).collect(), triangles, None)
}

fn unit_icosphere(subdivisions: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let g = 0.5 * (1.0 + sqrt(5.0));
    let mut vertices: Vec<Vec3> = [
        (-1.0, g, 0.0),
        (1.0, g, 0.0),
        (-1.0, -g, 0.0),
        (1.0, -g, 0.0),
        (0.0, -1.0, g),
        (0.0, 1.0, g),
        (0.0, -1.0, -g),
        (0.0, 1.0, -g),
        (g, 0.0, -1.0),
        (g, 0.0, 1.0),
        (-g, 0.0, -1.0),
        (-g, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
    .collect();
    let mut triangles: Vec<[usize; 3]> = alloc::vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalized());
                vertices.len() - 1
            })
        };
        let mut refined = Vec::with_capacity(4 * triangles.len());
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            refined.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = refined;
    }
    (vertices, triangles)
}

/// Named initial surfaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceShape {
    /// Unit icosphere.
    Sphere,
    /// `(cos φ, f(φ) cos θ sin φ, f(φ) sin θ sin φ)` with `f = 0.7 cos²φ + 0.3`.
    Dumbbell07,
    /// As [`SurfaceShape::Dumbbell07`] with `f = 0.6 cos²φ + 0.4`.
    Dumbbell06,
    /// Torus with radii `r1 > r2` and a `sin(6θ)/5` vertical undulation.
    UndulatingTorus { r1: f64, r2: f64 },
}

impl SurfaceShape {
    pub fn from_name(name: &str, r1: Option<f64>, r2: Option<f64>) -> Result<Self> {
        match name {
            "sphere" | "icosphere" => Ok(SurfaceShape::Sphere),
            "dumbbell_07" => Ok(SurfaceShape::Dumbbell07),
            "dumbbell_06" => Ok(SurfaceShape::Dumbbell06),
            "undulating_torus" | "torus" => Ok(SurfaceShape::UndulatingTorus {
                r1: r1.unwrap_or(1.0),
                r2: r2.unwrap_or(0.6),
            }),
            other => Err(Error::InvalidShape(format!("unknown surface shape `{other}`"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            SurfaceShape::Sphere => "sphere".into(),
            SurfaceShape::Dumbbell07 => "dumbbell_07".into(),
            SurfaceShape::Dumbbell06 => "dumbbell_06".into(),
            SurfaceShape::UndulatingTorus { r1, r2 } => format!("undulating_torus({r1}, {r2})"),
        }
    }
}

/// Builds one of the named surfaces.
///
/// Sphere-based shapes use `generate_icosphere(subdivisions, 1)` as the
/// reference surface and map each vertex through the shape. The torus uses a
/// `2^(k+3) × 2^(k+2)` grid in `(θ, φ)` for `k = subdivisions`, which gives
/// `2^(2k+6)` triangles (4096 at `k = 3`, 16384 at `k = 4`).
pub fn generate_surface_example(shape: SurfaceShape, subdivisions: u32) -> Result<TriSurface> {
    let dumbbell = |a: f64, b: f64| -> Result<TriSurface> {
        let (reference, triangles) = unit_icosphere(subdivisions);
        // A unit sphere point is (cos φ, cos θ sin φ, sin θ sin φ).
        let vertices = reference
            .iter()
            .map(|p| {
                let f = a * p.x * p.x + b;
                Vec3::new(p.x, f * p.y, f * p.z)
            })
            .collect();
        TriSurface::new(vertices, triangles, Some(reference))
    };
    match shape {
        SurfaceShape::Sphere => generate_icosphere(subdivisions, 1.0),
        SurfaceShape::Dumbbell07 => dumbbell(0.7, 0.3),
        SurfaceShape::Dumbbell06 => dumbbell(0.6, 0.4),
        SurfaceShape::UndulatingTorus { r1, r2 } => {
            let n_phi = 1usize << (subdivisions + 2);
            generate_undulating_torus(r1, r2, 2 * n_phi, n_phi)
        }
    }
}

/// Undulating torus on an `n_theta × n_phi` grid; each grid quad is split
/// along the same diagonal. The reference map points to the plain torus with
/// the same radii.
pub fn generate_undulating_torus(
    r1: f64,
    r2: f64,
    n_theta: usize,
    n_phi: usize,
) -> Result<TriSurface> {
    if !(r2 > 0.0 && r1 > r2) {
        return Err(Error::InvalidShape(format!(
            "torus radii must satisfy r1 > r2 > 0, got r1 = {r1}, r2 = {r2}"
        )));
    }
    if n_theta < 3 || n_phi < 3 {
        return Err(Error::InvalidMesh(format!(
            "torus grid must be at least 3 × 3, got {n_theta} × {n_phi}"
        )));
    }
    let index = |i: usize, j: usize| (i % n_theta) * n_phi + (j % n_phi);
    let mut vertices = Vec::with_capacity(n_theta * n_phi);
    let mut reference = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        let theta = TAU * i as f64 / n_theta as f64;
        for j in 0..n_phi {
            let phi = TAU * j as f64 / n_phi as f64;
            let ring = r1 + r2 * cos(phi);
            let plain = Vec3::new(ring * cos(theta), ring * sin(theta), r2 * sin(phi));
            reference.push(plain);
            vertices.push(plain + Vec3::new(0.0, 0.0, 0.2 * sin(6.0 * theta)));
        }
    }
    let mut triangles = Vec::with_capacity(2 * n_theta * n_phi);
    for i in 0..n_theta {
        for j in 0..n_phi {
            let (a, b, c, d) = (index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriSurface::new(vertices, triangles, Some(reference))
}

/// Exact area of the unit sphere, for quick comparisons.
pub const UNIT_SPHERE_AREA: f64 = 4.0 * PI;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::segment_ratio;

    #[test]
    fn icosahedron_counts_and_area() {
        let s = generate_icosphere(0, 1.0).unwrap();
        assert_eq!((s.num_vertices(), s.num_triangles()), (12, 20));
        // edge length of the unit-circumradius icosahedron
        let a = (s.vertices()[0] - s.vertices()[11]).norm();
        assert!((s.area() - 5.0 * sqrt(3.0) * a * a).abs() < 1e-12);
        assert!(s.signed_volume() > 0.0);
    }

    #[test]
    fn icosphere_counts_follow_closed_form() {
        for k in 0..=4u32 {
            let s = generate_icosphere(k, 1.0).unwrap();
            assert_eq!(s.num_vertices(), 10 * 4usize.pow(k) + 2);
            assert_eq!(s.num_triangles(), 20 * 4usize.pow(k));
            assert!(s.signed_volume() > 0.0);
        }
    }

    #[test]
    fn graded_circle_has_prescribed_ratio() {
        for ratio in [1.0, 1.5, 3.0, 10.0] {
            let c = generate_parametrized_curve(64, CurveShape::GradedCircle { ratio }).unwrap();
            assert!((segment_ratio(&c) - ratio).abs() < 1e-10, "ratio {ratio}");
            for v in c.vertices() {
                assert!((v.norm() - 1.0).abs() < 1e-14);
            }
            // longest segment first, shortest last: the jump sits at (1, 0)
            let first = c.segment(0).length;
            let last = c.segment(63).length;
            assert!(first >= last - 1e-12);
        }
    }

    #[test]
    fn torus_rejects_self_intersecting_radii() {
        let err = generate_surface_example(SurfaceShape::UndulatingTorus { r1: 1.0, r2: 1.2 }, 2);
        assert!(matches!(err, Err(Error::InvalidShape(_))));
    }

    #[test]
    fn torus_is_outward_oriented() {
        let s = generate_surface_example(SurfaceShape::UndulatingTorus { r1: 1.0, r2: 0.6 }, 1)
            .unwrap();
        assert!(s.signed_volume() > 0.0);
        assert_eq!(s.num_triangles(), 1 << 8);
    }

    #[test]
    fn unknown_shape_names() {
        assert!(CurveShape::from_name("example9", None).is_err());
        assert!(SurfaceShape::from_name("klein_bottle", None, None).is_err());
    }
}
