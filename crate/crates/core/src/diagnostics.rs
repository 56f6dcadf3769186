//! Mesh quality, errors against closed-form solutions and convergence orders.

use alloc::format;
use alloc::vec::Vec;

use crate::math::{cos, ln, sin, sqrt, Vec2};
use crate::mesh::{PolygonalCurve, TriSurface};
use crate::{Error, Result};

/// Status bits attached to a diagnostics sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    /// The discrete energy inequality of the curve scheme was violated beyond
    /// its slack.
    pub stability_violation: bool,
    /// Some element is close to degenerate (σ above the warning level).
    pub near_degeneration: bool,
}

impl Flags {
    pub fn any(&self) -> bool {
        self.stability_violation || self.near_degeneration
    }
}

/// One sample of a run's time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    /// Length for curves, area for surfaces.
    pub size: f64,
    /// Segment ratio for curves, `σ_max` for surfaces.
    pub quality: f64,
    pub max_vertex_speed: f64,
    /// `½∫|X_θ|² + Σ dissipation` (curves running the α-scheme only).
    pub energy_lhs: Option<f64>,
    /// `½∫|X_θ^0|²` (curves running the α-scheme only).
    pub energy_rhs: Option<f64>,
    /// Linear solver iterations (or fixed-point iterations for BGN curves).
    pub iterations: usize,
    pub flags: Flags,
}

/// Warning level for σ(T) used by [`Flags::near_degeneration`].
pub const NEAR_DEGENERATION_SIGMA: f64 = 1e3;

/// `max_T diam(T) / r(T)` where `r(T) = 2|T| / perimeter` is the inradius.
/// Degenerate triangles give `f64::INFINITY`.
pub fn sigma_max(surface: &TriSurface) -> f64 {
    surface.elements().map(|e| e.sigma()).fold(0.0, |m, s| {
        if s.is_nan() {
            f64::INFINITY
        } else {
            m.max(s)
        }
    })
}

/// Longest over shortest segment length.
pub fn segment_ratio(curve: &PolygonalCurve) -> f64 {
    let (lo, hi) = curve
        .segments()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s.length), hi.max(s.length)));
    hi / lo
}

/// `max_j |next_j - prev_j| / τ`.
pub fn max_vertex_speed(prev: &[Vec2], next: &[Vec2], tau: f64) -> Result<f64> {
    if prev.len() != next.len() {
        return Err(Error::DimensionMismatch { expected: prev.len(), found: next.len() });
    }
    Ok(prev.iter().zip(next).map(|(a, b)| (*b - *a).norm()).fold(0.0, f64::max) / tau)
}

/// L² and H¹-seminorm errors of a curve against a smooth parametrization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveError {
    pub l2: f64,
    pub h1_seminorm: f64,
}

const GAUSS5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Errors of the piecewise linear curve against `exact(θ) = (X(θ), X_θ(θ))`
/// over the curve's own parameter grid, with 5-point Gauss quadrature per
/// segment (exact for polynomial integrands up to degree 9).
pub fn curve_error_against(
    curve: &PolygonalCurve,
    exact: impl Fn(f64) -> (Vec2, Vec2),
) -> CurveError {
    let (mut l2, mut h1) = (0.0, 0.0);
    let n = curve.len();
    for j in 0..n {
        let h = curve.param_length(j);
        let t0 = curve.theta()[j];
        let p0 = curve.vertices()[j];
        let p1 = curve.vertices()[(j + 1) % n];
        let slope = (p1 - p0) * (1.0 / h);
        for (xi, w) in GAUSS5_NODES.iter().zip(GAUSS5_WEIGHTS) {
            let s = 0.5 * (xi + 1.0) * h;
            let (x, dx) = exact(t0 + s);
            let xh = p0 + slope * s;
            l2 += 0.5 * h * w * (xh - x).norm_sq();
            h1 += 0.5 * h * w * (slope - dx).norm_sq();
        }
    }
    CurveError { l2: sqrt(l2), h1_seminorm: sqrt(h1) }
}

/// Errors against the shrinking circle `√(R0² - 2t) (cos θ, sin θ)`.
pub fn h1_error_vs_circle(curve: &PolygonalCurve, t: f64, r0: f64) -> Result<CurveError> {
    let extinction = 0.5 * r0 * r0;
    if !(t < extinction) {
        return Err(Error::BeyondExtinction { time: t, extinction });
    }
    let r = sqrt(r0 * r0 - 2.0 * t);
    Ok(curve_error_against(curve, |th| {
        (Vec2::new(r * cos(th), r * sin(th)), Vec2::new(-r * sin(th), r * cos(th)))
    }))
}

/// Experimental orders `ln(e_i/e_{i+1}) / ln(h_i/h_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct EocTable {
    pub rows: Vec<(f64, f64)>,
    pub orders: Vec<f64>,
}

pub fn eoc(rows: &[(f64, f64)]) -> Result<EocTable> {
    if rows.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "EOC needs at least two resolutions, got {}",
            rows.len()
        )));
    }
    for (k, &(h, e)) in rows.iter().enumerate() {
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::InvalidConfig(format!("error in row {k} must be positive, got {e}")));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidConfig(format!("h in row {k} must be positive")));
        }
    }
    if rows.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(Error::InvalidConfig("mesh sizes must be strictly decreasing".into()));
    }
    let orders = rows
        .windows(2)
        .map(|w| ln(w[0].1 / w[1].1) / ln(w[0].0 / w[1].0))
        .collect();
    Ok(EocTable { rows: rows.to_vec(), orders })
}

/// First time the size drops below `fraction` of its initial value, linearly
/// interpolated between the bracketing samples.
pub fn extinction_time(series: &[DiagnosticsRecord], fraction: f64) -> Option<f64> {
    let first = series.first()?;
    let level = fraction * first.size;
    series.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        (b.size < level && a.size >= level).then(|| {
            let s = (a.size - level) / (a.size - b.size);
            a.time + s * (b.time - a.time)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Vec3, PI, TAU};
    use crate::mesh::{generate_circle, TriangleGeometry};
    use alloc::vec;

    fn record(time: f64, size: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            time,
            size,
            quality: 1.0,
            max_vertex_speed: 0.0,
            energy_lhs: None,
            energy_rhs: None,
            iterations: 0,
            flags: Flags::default(),
        }
    }

    #[test]
    fn right_isosceles_sigma() {
        let e = TriangleGeometry::new([
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ]);
        let expect = sqrt(2.0) / ((2.0 - sqrt(2.0)) / 2.0);
        assert!((e.sigma() - expect).abs() < 1e-12);
        assert!((expect - 4.828_427_124_746_19).abs() < 1e-12);
    }

    #[test]
    fn regular_polygon_ratio_is_one() {
        let c = generate_circle(17, 2.5).unwrap();
        assert!((segment_ratio(&c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn speed_of_translation() {
        let c = generate_circle(8, 1.0).unwrap();
        let v = Vec2::new(3.0, -4.0);
        let tau = 1e-3;
        let moved: Vec<Vec2> = c.vertices().iter().map(|p| *p + v * tau).collect();
        let s = max_vertex_speed(c.vertices(), &moved, tau).unwrap();
        assert!((s - 5.0).abs() < 1e-9);
        assert_eq!(max_vertex_speed(c.vertices(), c.vertices(), tau).unwrap(), 0.0);
        assert!(max_vertex_speed(c.vertices(), &moved[1..], tau).is_err());
    }

    #[test]
    fn eoc_examples() {
        let t = eoc(&[(0.1, 0.2), (0.05, 0.1)]).unwrap();
        assert!((t.orders[0] - 1.0).abs() < 1e-14);
        let t = eoc(&[(0.1, 0.04), (0.05, 0.01)]).unwrap();
        assert!((t.orders[0] - 2.0).abs() < 1e-14);
        assert!(eoc(&[(0.1, 0.04), (0.05, 0.0)]).is_err());
        assert!(eoc(&[(0.05, 0.04), (0.1, 0.01)]).is_err());
        assert!(eoc(&[(0.1, 0.04)]).is_err());
    }

    #[test]
    fn extinction_of_analytic_circle_series() {
        let tau = 1e-4;
        let series: Vec<DiagnosticsRecord> = (0..5001)
            .map(|m| {
                let t = m as f64 * tau;
                record(t, TAU * sqrt((1.0 - 2.0 * t).max(0.0)))
            })
            .collect();
        let t = extinction_time(&series, 1e-3).unwrap();
        assert!((t - 0.5).abs() < tau);
        let flat = vec![record(0.0, 1.0), record(1.0, 1.0)];
        assert_eq!(extinction_time(&flat, 1e-3), None);
    }

    #[test]
    fn interpolation_error_is_second_order_in_l2() {
        let e64 = h1_error_vs_circle(&generate_circle(64, 1.0).unwrap(), 0.0, 1.0).unwrap();
        let e128 = h1_error_vs_circle(&generate_circle(128, 1.0).unwrap(), 0.0, 1.0).unwrap();
        // radial gap of a chord is ≈ (h²/2) u(1-u), so ‖e‖² ≈ 2π h⁴ / 120
        let h = TAU / 64.0;
        let oracle = h * h * sqrt(TAU / 120.0);
        assert!((e64.l2 / oracle - 1.0).abs() < 0.01, "l2 {} vs {oracle}", e64.l2);
        assert!(e128.l2 < 1e-3);
        let order = ln(e64.l2 / e128.l2) / ln(2.0);
        assert!((order - 2.0).abs() < 0.02, "order {order}");
        let order_h1 = ln(e64.h1_seminorm / e128.h1_seminorm) / ln(2.0);
        assert!((order_h1 - 1.0).abs() < 0.02, "order {order_h1}");
    }

    #[test]
    fn self_comparison_is_zero_and_rotation_is_detected() {
        let c = generate_circle(32, 1.0).unwrap();
        let n = c.len();
        let interp = |th: f64| {
            let h = TAU / n as f64;
            let j = ((th / h) as usize).min(n - 1);
            let s = th - j as f64 * h;
            let p0 = c.vertices()[j];
            let p1 = c.vertices()[(j + 1) % n];
            let slope = (p1 - p0) * (1.0 / h);
            (p0 + slope * s, slope)
        };
        let e = curve_error_against(&c, interp);
        assert!(e.l2 < 1e-14 && e.h1_seminorm < 1e-13);

        let aligned = h1_error_vs_circle(&c, 0.1, 1.0).unwrap();
        let rotated = c.map(|p| p.rotated(PI / n as f64)).unwrap();
        let rot = h1_error_vs_circle(&rotated, 0.1, 1.0).unwrap();
        assert!(rot.l2 > aligned.l2 && rot.h1_seminorm > aligned.h1_seminorm);
    }

    #[test]
    fn beyond_extinction_is_an_error() {
        let c = generate_circle(8, 1.0).unwrap();
        assert!(matches!(h1_error_vs_circle(&c, 0.5, 1.0), Err(Error::BeyondExtinction { .. })));
    }
}
