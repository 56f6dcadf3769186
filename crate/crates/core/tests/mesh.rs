use curvflow_core::math::{rotation_matrix, Vec2, Vec3, PI, TAU};
use curvflow_core::mesh::*;
use curvflow_core::Error;
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

#[test]
fn circle_perimeters() {
    let square = generate_circle(4, 1.0).unwrap();
    assert!((curve_length(&square) - 4.0 * 2f64.sqrt()).abs() < 1e-12);
    let c64 = generate_circle(64, 1.0).unwrap();
    assert!((c64.length() - 128.0 * (PI / 64.0).sin()).abs() < 1e-12);
    assert!((c64.length() - 6.28066).abs() < 1e-5);
    assert!(matches!(generate_circle(2, 1.0), Err(Error::InvalidMesh(_))));
}

#[test]
fn unit_diamond_length() {
    let c = PolygonalCurve::new(vec![
        Vec2::new(1.0, 0.0),
        Vec2::new(0.0, 1.0),
        Vec2::new(-1.0, 0.0),
        Vec2::new(0.0, -1.0),
    ])
    .unwrap();
    assert!((curve_length(&c) - 5.656_854_249_492_38).abs() < 1e-12);
}

#[test]
fn example_curve_lengths() {
    let e1 = generate_parametrized_curve(64, CurveShape::FlattenedCircle).unwrap();
    assert!(close(e1.length(), 5.44, 0.01), "{}", e1.length());
    let e2 = generate_parametrized_curve(64, CurveShape::FourPetal).unwrap();
    assert!(close(e2.length(), 9.66, 0.01), "{}", e2.length());
}

#[test]
fn graded_circle_ratio_and_validity() {
    for r in [1.6, 3.0, 5.0] {
        let c = generate_parametrized_curve(64, CurveShape::GradedCircle { ratio: r }).unwrap();
        c.validate().unwrap();
        assert!((curvflow_core::diagnostics::segment_ratio(&c) - r).abs() < 1e-10);
    }
    assert!(CurveShape::from_name("spiral", None).is_err());
    assert_eq!(
        CurveShape::from_name("example3", None).unwrap(),
        CurveShape::GradedCircle { ratio: DEFAULT_GRADING_RATIO }
    );
}

#[test]
fn segment_geometry_invariants() {
    let c = generate_parametrized_curve(33, CurveShape::FourPetal).unwrap();
    for s in c.segments() {
        let edge = s.end - s.start;
        assert!(s.rotated_tangent.dot(edge).abs() < 1e-14);
        assert!((s.rotated_tangent.norm() - s.length).abs() < 1e-14);
        assert!((s.rho().norm() - s.length / s.param_length).abs() < 1e-12);
    }
}

#[test]
fn icosphere_counts_and_areas() {
    let s0 = generate_icosphere(0, 1.0).unwrap();
    assert_eq!((s0.num_vertices(), s0.num_triangles()), (12, 20));
    let s4 = generate_icosphere(4, 1.0).unwrap();
    assert_eq!((s4.num_vertices(), s4.num_triangles()), (2562, 5120));
    assert!(close(surface_area(&s4), 4.0 * PI, 0.002));
    let s1 = generate_icosphere(1, 2.0).unwrap();
    // oracle: sum of cross products, independent of TriangleGeometry
    let v = s1.vertices();
    let oracle: f64 = s1
        .triangles()
        .iter()
        .map(|t| 0.5 * (v[t[1]] - v[t[0]]).cross(v[t[2]] - v[t[0]]).norm())
        .sum();
    assert!((s1.area() - oracle).abs() < 1e-12);
    assert!(close(oracle, 16.0 * PI, 0.15));
}

#[test]
fn icosahedron_with_unit_edges() {
    let s = generate_icosphere(0, 1.0).unwrap();
    let edge = (s.vertices()[s.triangles()[0][0]] - s.vertices()[s.triangles()[0][1]]).norm();
    let scaled = s.map_both(|p| p * (1.0 / edge)).unwrap();
    assert!((scaled.area() - 5.0 * 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn surface_examples() {
    let d = generate_surface_example(SurfaceShape::Dumbbell07, 4).unwrap();
    assert!(close(d.area(), 5.549, 0.02), "{}", d.area());
    let r = generate_icosphere(4, 1.0).unwrap();
    for (p, y) in d.reference().iter().zip(r.vertices()) {
        assert!((*p - *y).norm() < 1e-15);
    }
    let t = generate_surface_example(SurfaceShape::UndulatingTorus { r1: 1.0, r2: 0.6 }, 4).unwrap();
    assert_eq!(t.num_triangles(), 16384);
    assert!(close(t.area(), 27.56, 0.02), "{}", t.area());
    assert!(t.signed_volume() > 0.0);
    assert!(matches!(
        generate_surface_example(SurfaceShape::UndulatingTorus { r1: 1.0, r2: 1.2 }, 2),
        Err(Error::InvalidShape(_))
    ));
}

#[test]
fn vertex_normal_examples() {
    let worst = |k: u32| {
        let s = generate_icosphere(k, 1.0).unwrap();
        let n = vertex_normals_area_weighted(&s).unwrap();
        s.vertices().iter().zip(&n).map(|(p, nu)| {
            assert!((nu.norm() - 1.0).abs() < 1e-12);
            (*nu - *p).norm()
        }).fold(0.0, f64::max)
    };
    let (w3, w4) = (worst(3), worst(4));
    assert!(w3 < 0.015, "{w3}");
    assert!(w4 < 0.01, "{w4}");
    // first-order convergence at the irregular valence-5 neighbourhoods
    assert!(w4 < 0.55 * w3, "{w3} {w4}");
    let s = generate_icosphere(3, 1.0).unwrap();
    let n = vertex_normals_area_weighted(&s).unwrap();
    let f = vertex_normals_area_weighted(&s.flipped()).unwrap();
    for (a, b) in n.iter().zip(&f) {
        assert!((*a + *b).norm() < 1e-14);
    }
    // a planar fan: every vertex normal is the plane normal
    let c = Vec3::new(0.0, 0.0, 0.0);
    let ring: Vec<Vec3> = (0..6).map(|k| {
        let a = TAU * k as f64 / 6.0;
        Vec3::new(a.cos(), a.sin(), 0.0)
    }).collect();
    let mut verts = vec![c];
    verts.extend(&ring);
    verts.push(Vec3::new(0.0, 0.0, -1.0));
    let mut tris = Vec::new();
    for k in 0..6 {
        tris.push([0, 1 + k, 1 + (k + 1) % 6]);
        tris.push([7, 1 + (k + 1) % 6, 1 + k]);
    }
    let cone = TriSurface::new(verts, tris, None).unwrap();
    let nn = cone.vertex_normals().unwrap();
    assert!((nn[0] - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-14);
}

#[test]
fn non_manifold_and_degenerate_meshes_are_rejected() {
    let s = generate_icosphere(0, 1.0).unwrap();
    let mut tris = s.triangles().to_vec();
    tris.pop();
    assert!(matches!(
        TriSurface::new(s.vertices().to_vec(), tris, None),
        Err(Error::InvalidMesh(_))
    ));
    let mut verts = s.vertices().to_vec();
    let t0 = s.triangles()[0];
    verts[t0[1]] = verts[t0[0]];
    assert!(TriSurface::new(verts, s.triangles().to_vec(), None).is_err());
}

fn random_rotation() -> impl Strategy<Value = (Vec3, f64, Vec3)> {
    (
        (-1.0..1.0f64, -1.0..1.0f64, 0.1..1.0f64),
        0.0..TAU,
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
    )
        .prop_map(|((x, y, z), a, (tx, ty, tz))| (Vec3::new(x, y, z), a, Vec3::new(tx, ty, tz)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn length_is_rigid_motion_invariant(angle in 0.0..TAU, tx in -5.0..5.0f64, ty in -5.0..5.0f64, n in 3usize..80) {
        let c = generate_parametrized_curve(n, CurveShape::FourPetal).unwrap();
        let moved = c.map(|p| p.rotated(angle) + Vec2::new(tx, ty)).unwrap();
        prop_assert!(close(moved.length(), c.length(), 1e-10));
    }

    #[test]
    fn length_is_homogeneous(s in 0.01..100.0f64) {
        let c = generate_parametrized_curve(40, CurveShape::FlattenedCircle).unwrap();
        let scaled = c.map(|p| p * s).unwrap();
        prop_assert!(close(scaled.length(), s * c.length(), 1e-12));
    }

    #[test]
    fn area_is_rigid_motion_invariant((axis, angle, t) in random_rotation()) {
        let s = generate_surface_example(SurfaceShape::Dumbbell06, 2).unwrap();
        let r = rotation_matrix(axis, angle);
        let moved = s.map_both(|p| r.mul_vec(p) + t).unwrap();
        prop_assert!(close(moved.area(), s.area(), 1e-10));
        for n in moved.vertex_normals().unwrap() {
            prop_assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }
}
