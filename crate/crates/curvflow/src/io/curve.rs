use std::path::Path;

use curvflow_core::math::Vec2;
use curvflow_core::mesh::PolygonalCurve;

use super::{read_text, write_with};
use crate::error::{Error, Result};

/// One row `theta,x,y` per vertex after a header line.
pub fn write_curve_csv(path: &Path, curve: &PolygonalCurve) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "theta,x,y")?;
        for (t, v) in curve.theta().iter().zip(curve.vertices()) {
            writeln!(w, "{t},{},{}", v.x, v.y)?;
        }
        Ok(())
    })
}

/// Reads `theta,x,y` or `x,y` rows; without a theta column the parameter
/// grid is uniform.
pub fn read_curve_csv(path: &Path) -> Result<PolygonalCurve> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_theta = match cols.as_slice() {
        ["theta", "x", "y"] => true,
        ["x", "y"] => false,
        _ => return Err(Error::parse(path, 1, format!("unexpected header `{header}`"))),
    };
    let (mut theta, mut vertices) = (Vec::new(), Vec::new());
    for (k, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::parse(path, k + 1, format!("expected {} fields, found {}", cols.len(), fields.len())));
        }
        let mut nums = Vec::with_capacity(fields.len());
        for f in fields {
            nums.push(f.parse::<f64>().map_err(|_| Error::parse(path, k + 1, format!("not a number: `{f}`")))?);
        }
        if with_theta {
            theta.push(nums[0]);
        }
        vertices.push(Vec2::new(nums[nums.len() - 2], nums[nums.len() - 1]));
    }
    let curve = if with_theta {
        PolygonalCurve::with_parameters(vertices, theta)
    } else {
        PolygonalCurve::new(vertices)
    };
    Ok(curve?)
}

/// Legacy ASCII polydata: the closed polygon as a single line cell in the
/// `z = 0` plane.
pub fn write_curve_vtk(path: &Path, curve: &PolygonalCurve, title: &str) -> Result<()> {
    let title = title.replace('\n', " ");
    let n = curve.len();
    write_with(path, |w| {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{title}")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET POLYDATA")?;
        writeln!(w, "POINTS {n} double")?;
        for v in curve.vertices() {
            writeln!(w, "{} {} 0", v.x, v.y)?;
        }
        writeln!(w, "LINES 1 {}", n + 2)?;
        write!(w, "{}", n + 1)?;
        for j in 0..n {
            write!(w, " {j}")?;
        }
        writeln!(w, " 0")?;
        Ok(())
    })
}
