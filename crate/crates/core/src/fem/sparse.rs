use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::abs;
use crate::{Error, Result};

/// Node-level sparsity pattern in compressed row form.
///
/// Row `i` lists every node sharing an element with node `i` (including `i`
/// itself), sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPattern {
    nodes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl BlockPattern {
    pub fn from_elements<const K: usize>(nodes: usize, elements: &[[usize; K]]) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = (0..nodes).map(|i| vec![i]).collect();
        for (e, el) in elements.iter().enumerate() {
            for &a in el {
                if a >= nodes {
                    return Err(Error::Assembly {
                        element: e,
                        reason: format!("node {a} out of range ({nodes} nodes)"),
                    });
                }
                rows[a].extend_from_slice(el);
            }
        }
        let mut row_ptr = Vec::with_capacity(nodes + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        Ok(BlockPattern { nodes, row_ptr, col_idx })
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Position of block `(i, j)` in the value array, if it is in the pattern.
    #[inline]
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }
}

/// Square `(d·N) × (d·N)` matrix stored as `d × d` blocks on a node pattern.
///
/// Entry `(i, j, β, γ)` couples component `β` of node `i` with component `γ`
/// of node `j`; it lives at flat index `i·d + β`, `j·d + γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseMatrix {
    dim: usize,
    pattern: Arc<BlockPattern>,
    values: Vec<f64>,
}

impl BlockSparseMatrix {
    pub fn zeros(dim: usize, pattern: Arc<BlockPattern>) -> Self {
        let values = vec![0.0; pattern.num_blocks() * dim * dim];
        BlockSparseMatrix { dim, pattern, values }
    }

    /// A matrix with zero values on the same pattern.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dim, self.pattern.clone())
    }

    #[inline]
    pub fn block_dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn nodes(&self) -> usize {
        self.pattern.nodes()
    }
    /// Number of scalar rows (`d·N`).
    #[inline]
    pub fn size(&self) -> usize {
        self.dim * self.pattern.nodes()
    }
    #[inline]
    pub fn pattern(&self) -> &Arc<BlockPattern> {
        &self.pattern
    }

    pub fn get(&self, i: usize, j: usize, beta: usize, gamma: usize) -> f64 {
        match self.pattern.find(i, j) {
            Some(b) => self.values[b * self.dim * self.dim + beta * self.dim + gamma],
            None => 0.0,
        }
    }

    /// Adds `block` (row-major `d × d`) to block `(i, j)`.
    pub fn add_block(&mut self, i: usize, j: usize, block: &[f64]) -> Result<()> {
        let d2 = self.dim * self.dim;
        let b = self.pattern.find(i, j).ok_or_else(|| {
            Error::InvalidMesh(format!("block ({i}, {j}) is outside the sparsity pattern"))
        })?;
        for (v, add) in self.values[b * d2..(b + 1) * d2].iter_mut().zip(block) {
            *v += add;
        }
        Ok(())
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.size());
        debug_assert_eq!(y.len(), self.size());
        match self.dim {
            1 => self.mul_fixed::<1>(x, y),
            2 => self.mul_fixed::<2>(x, y),
            3 => self.mul_fixed::<3>(x, y),
            _ => self.mul_generic(x, y),
        }
    }

    fn mul_fixed<const D: usize>(&self, x: &[f64], y: &mut [f64]) {
        let p = &*self.pattern;
        for i in 0..p.nodes {
            let mut acc = [0.0; D];
            for b in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[b];
                let block = &self.values[b * D * D..(b + 1) * D * D];
                let xj = &x[j * D..(j + 1) * D];
                for beta in 0..D {
                    for gamma in 0..D {
                        acc[beta] += block[beta * D + gamma] * xj[gamma];
                    }
                }
            }
            y[i * D..(i + 1) * D].copy_from_slice(&acc);
        }
    }

    fn mul_generic(&self, x: &[f64], y: &mut [f64]) {
        let d = self.dim;
        let d2 = d * d;
        for i in 0..self.nodes() {
            let (start, end) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
            let yi = &mut y[i * d..(i + 1) * d];
            yi.iter_mut().for_each(|v| *v = 0.0);
            for b in start..end {
                let j = self.pattern.col_idx[b];
                let block = &self.values[b * d2..(b + 1) * d2];
                let xj = &x[j * d..(j + 1) * d];
                for (beta, yv) in yi.iter_mut().enumerate() {
                    let row = &block[beta * d..(beta + 1) * d];
                    *yv += row.iter().zip(xj).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }

    /// Row-major `d × d` diagonal block of node `i`.
    pub fn diagonal_block(&self, i: usize) -> Option<&[f64]> {
        let d2 = self.dim * self.dim;
        self.pattern.find(i, i).map(|b| &self.values[b * d2..(b + 1) * d2])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = Aᵀ x`.
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let d2 = d * d;
        let mut y = vec![0.0; self.size()];
        for i in 0..self.nodes() {
            for b in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                let j = self.pattern.col_idx[b];
                let block = &self.values[b * d2..(b + 1) * d2];
                for beta in 0..d {
                    for gamma in 0..d {
                        y[j * d + gamma] += block[beta * d + gamma] * x[i * d + beta];
                    }
                }
            }
        }
        y
    }

    /// Scalar diagonal.
    pub fn diagonal(&self) -> Vec<f64> {
        let d = self.dim;
        let mut diag = vec![0.0; self.size()];
        for i in 0..self.nodes() {
            if let Some(b) = self.pattern.find(i, i) {
                for beta in 0..d {
                    diag[i * d + beta] = self.values[b * d * d + beta * d + beta];
                }
            }
        }
        diag
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s · other`; both must share a pattern.
    pub fn add_scaled(&mut self, other: &BlockSparseMatrix, s: f64) -> Result<()> {
        if self.dim != other.dim
            || !(Arc::ptr_eq(&self.pattern, &other.pattern) || *self.pattern == *other.pattern)
        {
            return Err(Error::DimensionMismatch { expected: self.size(), found: other.size() });
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(abs(*v)))
    }

    /// `max |A - Aᵀ|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..self.nodes() {
            for &j in self.pattern.row(i) {
                for beta in 0..d {
                    for gamma in 0..d {
                        let diff = self.get(i, j, beta, gamma) - self.get(j, i, gamma, beta);
                        worst = worst.max(abs(diff));
                    }
                }
            }
        }
        worst
    }

    /// Nonzero entries as `(row, col, value)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let d = self.dim;
        (0..self.nodes()).flat_map(move |i| {
            (0..d).flat_map(move |beta| {
                let (start, end) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
                (start..end).flat_map(move |b| {
                    let j = self.pattern.col_idx[b];
                    (0..d).filter_map(move |gamma| {
                        let v = self.values[b * d * d + beta * d + gamma];
                        (v != 0.0).then_some((i * d + beta, j * d + gamma, v))
                    })
                })
            })
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.size();
        let mut m = DenseMatrix::zeros(n);
        for (r, c, v) in self.entries() {
            m.data[r * n + c] = v;
        }
        m
    }
}

/// Row-major dense square matrix, used as an oracle for small systems.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    /// Solves `A x = b` by LU factorization with partial pivoting.
    pub fn lu_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = a.iter().fold(0.0, |m: f64, v| m.max(abs(*v)));
        for k in 0..n {
            let (mut p, mut best) = (k, abs(a[k * n + k]));
            for r in k + 1..n {
                let v = abs(a[r * n + k]);
                if v > best {
                    p = r;
                    best = v;
                }
            }
            if best <= f64::EPSILON * scale * n as f64 {
                return Err(Error::SolverFailure {
                    iterations: k,
                    residual: f64::NAN,
                    reason: "singular matrix in dense LU",
                });
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                x.swap(k, p);
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / pivot;
                if f != 0.0 {
                    a[r * n + k] = f;
                    for c in k + 1..n {
                        a[r * n + c] -= f * a[k * n + c];
                    }
                    x[r] -= f * x[k];
                }
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|c| a[k * n + c] * x[c]).sum();
            x[k] = (x[k] - s) / a[k * n + k];
        }
        Ok(x)
    }
}

/// Assembles a global block matrix by scattering element matrices.
///
/// `kernel(e, out)` writes the `(d·K) × (d·K)` matrix of element `e` into
/// `out` (row-major, local index `a·d + β`). Elements are merged in index
/// order, so the result does not depend on how the kernel is evaluated.
pub fn assemble<const K: usize, F>(
    dim: usize,
    pattern: &Arc<BlockPattern>,
    elements: &[[usize; K]],
    mut kernel: F,
) -> Result<BlockSparseMatrix>
where
    F: FnMut(usize, &mut [f64]) -> Result<()>,
{
    let local = dim * K;
    let d2 = dim * dim;
    let mut out = BlockSparseMatrix::zeros(dim, pattern.clone());
    let mut buf = vec![0.0; local * local];
    for (e, el) in elements.iter().enumerate() {
        buf.iter_mut().for_each(|v| *v = 0.0);
        kernel(e, &mut buf)?;
        if let Some(bad) = buf.iter().position(|v| !v.is_finite()) {
            return Err(Error::Assembly {
                element: e,
                reason: format!("non-finite entry at local position {bad}"),
            });
        }
        for (a, &i) in el.iter().enumerate() {
            for (b, &j) in el.iter().enumerate() {
                let blk = pattern.find(i, j).ok_or_else(|| Error::Assembly {
                    element: e,
                    reason: format!("block ({i}, {j}) missing from pattern"),
                })?;
                let dst = &mut out.values[blk * d2..(blk + 1) * d2];
                for beta in 0..dim {
                    for gamma in 0..dim {
                        dst[beta * dim + gamma] += buf[(a * dim + beta) * local + b * dim + gamma];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Element matrix of an element with `K` nodes and `D × D` blocks, indexed
/// `[a][b][β][γ]`.
pub type ElementBlocks<const D: usize, const K: usize> = [[[[f64; D]; D]; K]; K];

/// Pattern positions of the `(a, b)` blocks of every element, computed once
/// per mesh so repeated assemblies skip the pattern lookups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementBlockMap<const K: usize> {
    blocks: Vec<[[usize; K]; K]>,
}

impl<const K: usize> ElementBlockMap<K> {
    pub fn new(pattern: &BlockPattern, elements: &[[usize; K]]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(elements.len());
        for (e, el) in elements.iter().enumerate() {
            let mut m = [[0usize; K]; K];
            for (a, &i) in el.iter().enumerate() {
                for (b, &j) in el.iter().enumerate() {
                    m[a][b] = pattern.find(i, j).ok_or_else(|| Error::Assembly {
                        element: e,
                        reason: format!("block ({i}, {j}) missing from pattern"),
                    })?;
                }
            }
            blocks.push(m);
        }
        Ok(ElementBlockMap { blocks })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

fn check_finite<const D: usize, const K: usize>(e: usize, m: &ElementBlocks<D, K>) -> Result<()> {
    if m.iter().flatten().flatten().flatten().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Assembly { element: e, reason: "non-finite element matrix entry".into() })
    }
}

fn scatter<const D: usize, const K: usize>(
    values: &mut [f64],
    map: &[[usize; K]; K],
    m: &ElementBlocks<D, K>,
) {
    for a in 0..K {
        for b in 0..K {
            let dst = &mut values[map[a][b] * D * D..(map[a][b] + 1) * D * D];
            for beta in 0..D {
                for gamma in 0..D {
                    dst[beta * D + gamma] += m[a][b][beta][gamma];
                }
            }
        }
    }
}

/// Assembles two matrices on the same pattern in one pass over the elements.
/// `kernel(e, first, second)` receives zeroed element buffers.
pub fn assemble_pair<const D: usize, const K: usize, F>(
    pattern: &Arc<BlockPattern>,
    map: &ElementBlockMap<K>,
    mut kernel: F,
) -> Result<(BlockSparseMatrix, BlockSparseMatrix)>
where
    F: FnMut(usize, &mut ElementBlocks<D, K>, &mut ElementBlocks<D, K>) -> Result<()>,
{
    let mut first = BlockSparseMatrix::zeros(D, pattern.clone());
    let mut second = BlockSparseMatrix::zeros(D, pattern.clone());
    for (e, blocks) in map.blocks.iter().enumerate() {
        let mut m1 = [[[[0.0; D]; D]; K]; K];
        let mut m2 = [[[[0.0; D]; D]; K]; K];
        kernel(e, &mut m1, &mut m2)?;
        check_finite(e, &m1)?;
        check_finite(e, &m2)?;
        scatter(&mut first.values, blocks, &m1);
        scatter(&mut second.values, blocks, &m2);
    }
    Ok((first, second))
}

/// Single-matrix variant of [`assemble_pair`].
pub fn assemble_mapped<const D: usize, const K: usize, F>(
    pattern: &Arc<BlockPattern>,
    map: &ElementBlockMap<K>,
    mut kernel: F,
) -> Result<BlockSparseMatrix>
where
    F: FnMut(usize, &mut ElementBlocks<D, K>) -> Result<()>,
{
    let mut out = BlockSparseMatrix::zeros(D, pattern.clone());
    for (e, blocks) in map.blocks.iter().enumerate() {
        let mut m = [[[[0.0; D]; D]; K]; K];
        kernel(e, &mut m)?;
        check_finite(e, &m)?;
        scatter(&mut out.values, blocks, &m);
    }
    Ok(out)
}

/// Assembles with a freshly built pattern.
pub fn assemble_with_new_pattern<const K: usize, F>(
    dim: usize,
    nodes: usize,
    elements: &[[usize; K]],
    kernel: F,
) -> Result<BlockSparseMatrix>
where
    F: FnMut(usize, &mut [f64]) -> Result<()>,
{
    let pattern = Arc::new(BlockPattern::from_elements(nodes, elements)?);
    assemble(dim, &pattern, elements, kernel)
}
