use std::path::Path;

use curvflow_core::fem::BlockSparseMatrix;

use super::write_with;
use crate::error::Result;

/// `coordinate real general`, 1-based, structural zeros omitted.
pub fn write_matrix_market(path: &Path, matrix: &BlockSparseMatrix) -> Result<()> {
    let entries: Vec<(usize, usize, f64)> = matrix.entries().collect();
    let n = matrix.size();
    write_with(path, |w| {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{n} {n} {}", entries.len())?;
        for (r, c, v) in &entries {
            writeln!(w, "{} {} {v}", r + 1, c + 1)?;
        }
        Ok(())
    })
}
