//! Mesh and matrix file formats.
//!
//! * OFF for triangulated surfaces, with the reference map in a `.ref.off`
//!   sidecar sharing the connectivity.
//! * Legacy ASCII VTK polydata for surfaces (reference map as the point
//!   vector field `reference_position`) and for curves.
//! * CSV for curves (`theta,x,y`).
//! * MatrixMarket coordinate format for assembled matrices.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a write
//! followed by a read reproduces the data bit for bit.

mod curve;
mod mtx;
mod off;
mod vtk;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use curve::{read_curve_csv, write_curve_csv, write_curve_vtk};
pub use mtx::write_matrix_market;
pub use off::{read_off, reference_sidecar_path, write_off};
pub use vtk::{read_vtk_surface, write_vtk_surface};

use crate::error::{Error, Result};

/// Whitespace-separated tokens with their 1-based line numbers; `#` starts a
/// comment that runs to the end of the line.
pub(crate) struct Tokens<'a> {
    path: &'a Path,
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    pub(crate) fn new(path: &'a Path, text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(k, line)| {
                let line = line.split('#').next().unwrap_or("");
                line.split_whitespace().map(move |t| (k + 1, t))
            })
            .collect();
        Tokens { path, items, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.items.last().map_or(1, |&(l, _)| l)
    }

    pub(crate) fn line(&self) -> usize {
        self.items.get(self.pos).map_or(self.last_line(), |&(l, _)| l)
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> Error {
        Error::parse(self.path, self.line(), message)
    }

    pub(crate) fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|&(_, t)| t)
    }

    pub(crate) fn next(&mut self, what: &str) -> Result<&'a str> {
        let t = self.peek().ok_or_else(|| self.error(format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    pub(crate) fn expect(&mut self, keyword: &str) -> Result<()> {
        let t = self.next(keyword)?;
        if t.eq_ignore_ascii_case(keyword) {
            Ok(())
        } else {
            self.pos -= 1;
            Err(self.error(format!("expected `{keyword}`, found `{t}`")))
        }
    }

    pub(crate) fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let t = self.next(what)?;
        t.parse().map_err(|_| {
            self.pos -= 1;
            self.error(format!("expected {what}, found `{t}`"))
        })
    }

    pub(crate) fn finished(&self) -> bool {
        self.pos >= self.items.len()
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `body` to `path` through a buffered writer, creating parent
/// directories.
pub(crate) fn write_with(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}
