use std::path::Path;

use curvflow_core::math::Vec3;
use curvflow_core::mesh::TriSurface;

use super::{read_text, write_with, Tokens};
use crate::error::Result;

const REFERENCE_FIELD: &str = "reference_position";

/// Legacy ASCII polydata with the reference map as a point vector field.
pub fn write_vtk_surface(path: &Path, surface: &TriSurface, title: &str) -> Result<()> {
    let title = title.replace('\n', " ");
    write_with(path, |w| {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{title}")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET POLYDATA")?;
        writeln!(w, "POINTS {} double", surface.num_vertices())?;
        for v in surface.vertices() {
            writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
        }
        let nt = surface.num_triangles();
        writeln!(w, "POLYGONS {} {}", nt, 4 * nt)?;
        for t in surface.triangles() {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "POINT_DATA {}", surface.num_vertices())?;
        writeln!(w, "VECTORS {REFERENCE_FIELD} double")?;
        for y in surface.reference() {
            writeln!(w, "{} {} {}", y.x, y.y, y.z)?;
        }
        Ok(())
    })
}

fn read_points(t: &mut Tokens<'_>, n: usize) -> Result<Vec<Vec3>> {
    (0..n)
        .map(|_| Ok(Vec3::new(t.parse("coordinate")?, t.parse("coordinate")?, t.parse("coordinate")?)))
        .collect()
}

/// Reads the subset written by [`write_vtk_surface`]: triangle polydata with
/// an optional `reference_position` vector field (identity when absent).
/// Other point-data fields are skipped.
pub fn read_vtk_surface(path: &Path) -> Result<TriSurface> {
    let text = read_text(path)?;
    // the first two lines are free-form
    let mut header = text.splitn(3, '\n');
    let version = header.next().unwrap_or("");
    if !version.starts_with("# vtk DataFile") {
        return Err(crate::Error::parse(path, 1, "missing `# vtk DataFile` header"));
    }
    let _title = header.next();
    let rest = header.next().unwrap_or("");
    let body = format!("\n\n{rest}");
    let mut t = Tokens::new(path, &body);
    t.expect("ASCII")?;
    t.expect("DATASET")?;
    t.expect("POLYDATA")?;
    t.expect("POINTS")?;
    let n: usize = t.parse("point count")?;
    let _ty = t.next("data type")?;
    let vertices = read_points(&mut t, n)?;
    t.expect("POLYGONS")?;
    let nf: usize = t.parse("polygon count")?;
    let size: usize = t.parse("polygon list size")?;
    if size != 4 * nf {
        return Err(t.error("only triangles are supported"));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let k: usize = t.parse("polygon size")?;
        if k != 3 {
            return Err(t.error(format!("only triangles are supported, found a {k}-gon")));
        }
        let mut f = [0usize; 3];
        for v in &mut f {
            *v = t.parse("point index")?;
            if *v >= n {
                return Err(t.error(format!("point index {v} out of range (0..{n})")));
            }
        }
        faces.push(f);
    }
    let mut reference = None;
    if !t.finished() {
        t.expect("POINT_DATA")?;
        let m: usize = t.parse("point data count")?;
        if m != n {
            return Err(t.error(format!("POINT_DATA has {m} entries for {n} points")));
        }
        while !t.finished() {
            let kind = t.next("attribute")?;
            let name = t.next("attribute name")?;
            let _ty = t.next("data type")?;
            let width = match kind.to_ascii_uppercase().as_str() {
                "VECTORS" | "NORMALS" => 3,
                "SCALARS" => {
                    if t.peek() == Some("LOOKUP_TABLE") {
                        t.next("LOOKUP_TABLE")?;
                        t.next("table name")?;
                    }
                    1
                }
                other => return Err(t.error(format!("unsupported point attribute `{other}`"))),
            };
            if width == 3 && name == REFERENCE_FIELD {
                reference = Some(read_points(&mut t, n)?);
            } else {
                for _ in 0..n * width {
                    t.parse::<f64>("attribute value")?;
                }
            }
        }
    }
    Ok(TriSurface::new(vertices, faces, reference)?)
}
