use std::path::{Path, PathBuf};

use curvflow_core::math::Vec3;
use curvflow_core::mesh::TriSurface;

use super::{read_text, write_with, Tokens};
use crate::error::{Error, Result};

/// `mesh.off` → `mesh.ref.off`.
pub fn reference_sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.ref.off"))
}

fn parse_off(path: &Path, text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut t = Tokens::new(path, text);
    t.expect("OFF")?;
    let nv: usize = t.parse("vertex count")?;
    let nf: usize = t.parse("face count")?;
    let _edges: usize = t.parse("edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = t.parse("x coordinate")?;
        let y = t.parse("y coordinate")?;
        let z = t.parse("z coordinate")?;
        vertices.push(Vec3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let line = t.line();
        let k: usize = t.parse("face size")?;
        if k != 3 {
            return Err(Error::parse(path, line, format!("only triangles are supported, found a {k}-gon")));
        }
        let mut f = [0usize; 3];
        for v in &mut f {
            *v = t.parse("vertex index")?;
            if *v >= nv {
                return Err(Error::parse(path, line, format!("vertex index {v} out of range (0..{nv})")));
            }
        }
        faces.push(f);
    }
    if !t.finished() {
        return Err(t.error("trailing data after the last face"));
    }
    Ok((vertices, faces))
}

/// Reads an OFF surface. If `<stem>.ref.off` exists next to it, its vertices
/// become the reference map (the connectivity must match); otherwise the
/// reference map is the identity.
pub fn read_off(path: &Path) -> Result<TriSurface> {
    let (vertices, faces) = parse_off(path, &read_text(path)?)?;
    let sidecar = reference_sidecar_path(path);
    let reference = if sidecar.exists() {
        let (refs, ref_faces) = parse_off(&sidecar, &read_text(&sidecar)?)?;
        if ref_faces != faces || refs.len() != vertices.len() {
            return Err(Error::parse(&sidecar, 1, "connectivity differs from the surface file"));
        }
        Some(refs)
    } else {
        None
    };
    Ok(TriSurface::new(vertices, faces, reference)?)
}

fn write_off_body(path: &Path, vertices: &[Vec3], faces: &[[usize; 3]]) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "OFF")?;
        writeln!(w, "{} {} 0", vertices.len(), faces.len())?;
        for v in vertices {
            writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
        }
        for f in faces {
            writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
        }
        Ok(())
    })
}

/// Writes the surface, plus the reference map as a sidecar unless it is the
/// identity. A stale sidecar is removed in the identity case.
pub fn write_off(path: &Path, surface: &TriSurface) -> Result<()> {
    write_off_body(path, surface.vertices(), surface.triangles())?;
    let sidecar = reference_sidecar_path(path);
    if surface.reference() != surface.vertices() {
        write_off_body(&sidecar, surface.reference(), surface.triangles())
    } else if sidecar.exists() {
        std::fs::remove_file(&sidecar).map_err(|e| Error::io(&sidecar, e))
    } else {
        Ok(())
    }
}
