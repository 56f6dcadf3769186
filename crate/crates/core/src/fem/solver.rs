use alloc::vec;
use alloc::vec::Vec;

use super::BlockSparseMatrix;
use crate::math::sqrt;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Conjugate gradients; the matrix must be symmetric positive definite.
    Cg,
    /// Stabilized biconjugate gradients for non-symmetric systems.
    BiCgStab,
    /// Dense LU with partial pivoting. Only meant as an oracle for small systems.
    DenseLu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
    /// Inverts the `d × d` diagonal block of every node.
    BlockJacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Relative residual target `‖b - Ax‖ <= tolerance · ‖b‖`.
    pub tolerance: f64,
    /// Iteration cap; `None` means `10 · d·N`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

impl SolverConfig {
    pub fn cg() -> Self {
        SolverConfig {
            method: SolverMethod::Cg,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }

    pub fn bicgstab() -> Self {
        SolverConfig { method: SolverMethod::BiCgStab, ..Self::cg() }
    }

    pub fn dense_lu() -> Self {
        SolverConfig { method: SolverMethod::DenseLu, ..Self::cg() }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("solver tolerance must be positive".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidConfig("solver needs at least one iteration".into()));
        }
        Ok(())
    }

    fn iteration_cap(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or(10 * n).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

struct Precond {
    dim: usize,
    /// Scalar inverse diagonal, or row-major inverse node blocks.
    data: Vec<f64>,
    block: bool,
}

impl Precond {
    fn new(a: &BlockSparseMatrix, pc: Preconditioner) -> Self {
        let dim = a.block_dim();
        let scalar = |a: &BlockSparseMatrix| -> Vec<f64> {
            a.diagonal()
                .into_iter()
                .map(|d| if d != 0.0 && d.is_finite() { 1.0 / d } else { 1.0 })
                .collect()
        };
        match pc {
            Preconditioner::None => Precond { dim, data: vec![1.0; a.size()], block: false },
            Preconditioner::Jacobi => Precond { dim, data: scalar(a), block: false },
            Preconditioner::BlockJacobi => {
                let d2 = dim * dim;
                let mut data = vec![0.0; a.nodes() * d2];
                let diag = scalar(a);
                let zero = vec![0.0; d2];
                let mut work = vec![0.0; d2];
                for i in 0..a.nodes() {
                    let blk = a.diagonal_block(i).unwrap_or(&zero);
                    let out = &mut data[i * d2..(i + 1) * d2];
                    if !invert_small(blk, dim, out, &mut work) {
                        out.iter_mut().for_each(|v| *v = 0.0);
                        for b in 0..dim {
                            out[b * dim + b] = diag[i * dim + b];
                        }
                    }
                }
                Precond { dim, data, block: true }
            }
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        if !self.block {
            for ((z, r), m) in z.iter_mut().zip(r).zip(&self.data) {
                *z = r * m;
            }
            return;
        }
        let d = self.dim;
        for (i, (zi, ri)) in z.chunks_exact_mut(d).zip(r.chunks_exact(d)).enumerate() {
            let m = &self.data[i * d * d..(i + 1) * d * d];
            for b in 0..d {
                zi[b] = (0..d).map(|g| m[b * d + g] * ri[g]).sum();
            }
        }
    }
}

/// Gauss–Jordan inverse of a small row-major matrix; false when singular.
fn invert_small(m: &[f64], n: usize, out: &mut [f64], a: &mut [f64]) -> bool {
    a.copy_from_slice(m);
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..n {
        out[k * n + k] = 1.0;
    }
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap_or(col);
        if !(a[piv * n + col].abs() > 1e-14 * scale) {
            return false;
        }
        for k in 0..n {
            a.swap(col * n + k, piv * n + k);
            out.swap(col * n + k, piv * n + k);
        }
        let inv = 1.0 / a[col * n + col];
        for k in 0..n {
            a[col * n + k] *= inv;
            out[col * n + k] *= inv;
        }
        for r in 0..n {
            if r != col {
                let f = a[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        a[r * n + k] -= f * a[col * n + k];
                        out[r * n + k] -= f * out[col * n + k];
                    }
                }
            }
        }
    }
    true
}

fn residual(a: &BlockSparseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// Solves `A x = b` with the configured method, starting from `x0` (zero when
/// absent).
pub fn solve(
    a: &BlockSparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats)> {
    cfg.validate()?;
    let n = a.size();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    let mut x = match x0 {
        Some(x0) if x0.len() != n => {
            return Err(Error::DimensionMismatch { expected: n, found: x0.len() })
        }
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let stats = match cfg.method {
        SolverMethod::Cg => conjugate_gradient(a, b, &mut x, cfg, None)?,
        SolverMethod::BiCgStab => bicgstab(a, b, &mut x, cfg)?,
        SolverMethod::DenseLu => {
            x = a.to_dense().lu_solve(b)?;
            let bn = norm(b);
            let r = norm(&residual(a, b, &x));
            SolveStats { iterations: 1, relative_residual: if bn > 0.0 { r / bn } else { r } }
        }
    };
    Ok((x, stats))
}

/// Preconditioned conjugate gradients, updating `x` in place.
///
/// When `energy_log` is given, the quadratic functional
/// `½ xᵀAx - bᵀx` is recorded after every iteration; for an SPD matrix it is
/// non-increasing, which is the same as monotone decay of the error in the
/// A-norm.
pub fn conjugate_gradient(
    a: &BlockSparseMatrix,
    b: &[f64],
    x: &mut [f64],
    cfg: &SolverConfig,
    mut energy_log: Option<&mut Vec<f64>>,
) -> Result<SolveStats> {
    let n = a.size();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, relative_residual: 0.0 });
    }
    let target = cfg.tolerance * bnorm;
    let pc = Precond::new(a, cfg.preconditioner);
    let mut r = residual(a, b, x);
    let mut rnorm = norm(&r);
    if rnorm <= target {
        return Ok(SolveStats { iterations: 0, relative_residual: rnorm / bnorm });
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let cap = cfg.iteration_cap(n);
    for it in 1..=cap {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure {
                iterations: it,
                residual: rnorm / bnorm,
                reason: "matrix is not positive definite",
            });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rnorm = norm(&r);
        if let Some(log) = energy_log.as_deref_mut() {
            let e: f64 = -0.5 * x.iter().zip(b).zip(&r).map(|((x, b), r)| x * (b + r)).sum::<f64>();
            log.push(e);
        }
        if rnorm <= target {
            // guard against drift of the recursive residual
            let true_r = norm(&residual(a, b, x));
            if true_r <= 2.0 * target {
                return Ok(SolveStats { iterations: it, relative_residual: true_r / bnorm });
            }
            // restart from the true residual
            r = residual(a, b, x);
            rnorm = true_r;
            pc.apply(&r, &mut z);
            rz = dot(&r, &z);
            p.copy_from_slice(&z);
            continue;
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::SolverFailure {
        iterations: cap,
        residual: rnorm / bnorm,
        reason: "conjugate gradients reached the iteration cap",
    })
}

/// Right-preconditioned BiCGStab, updating `x` in place.
pub fn bicgstab(
    a: &BlockSparseMatrix,
    b: &[f64],
    x: &mut [f64],
    cfg: &SolverConfig,
) -> Result<SolveStats> {
    let n = a.size();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, relative_residual: 0.0 });
    }
    let target = cfg.tolerance * bnorm;
    let pc = Precond::new(a, cfg.preconditioner);
    let cap = cfg.iteration_cap(n);

    let mut r = residual(a, b, x);
    let mut rnorm = norm(&r);
    if rnorm <= target {
        return Ok(SolveStats { iterations: 0, relative_residual: rnorm / bnorm });
    }
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut restarts = 0usize;

    let mut it = 0;
    while it < cap {
        it += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // breakdown: restart with the current residual as shadow vector
            restarts += 1;
            if restarts > 50 {
                break;
            }
            r = residual(a, b, x);
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        pc.apply(&p, &mut p_hat);
        a.mul_vec_into(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            omega = 0.0;
            continue;
        }
        alpha = rho / rv;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) <= target {
            for k in 0..n {
                x[k] += alpha * p_hat[k];
            }
            let true_r = norm(&residual(a, b, x));
            if true_r <= 2.0 * target {
                return Ok(SolveStats { iterations: it, relative_residual: true_r / bnorm });
            }
            r = residual(a, b, x);
            rnorm = true_r;
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        pc.apply(&s, &mut s_hat);
        a.mul_vec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += alpha * p_hat[k] + omega * s_hat[k];
            r[k] = s[k] - omega * t[k];
        }
        rnorm = norm(&r);
        if !rnorm.is_finite() {
            break;
        }
        if rnorm <= target {
            let true_r = norm(&residual(a, b, x));
            if true_r <= 2.0 * target {
                return Ok(SolveStats { iterations: it, relative_residual: true_r / bnorm });
            }
            r = residual(a, b, x);
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
        }
    }
    Err(Error::SolverFailure {
        iterations: it,
        residual: rnorm / bnorm,
        reason: "BiCGStab did not converge",
    })
}
