//! Mesh data structures, per-element geometry and initial shapes.

mod curve;
mod shapes;
mod surface;

pub use curve::{curve_length, uniform_parameters, PolygonalCurve, SegmentGeometry};
pub use shapes::{
    generate_circle, generate_icosphere, generate_parametrized_curve, generate_surface_example,
    generate_undulating_torus, CurveShape, SurfaceShape, DEFAULT_GRADING_RATIO, UNIT_SPHERE_AREA,
};
pub use surface::{surface_area, vertex_normals_area_weighted, TriSurface, TriangleGeometry};
