//! Dense reference computations: reduced equations solved by full
//! diagonalization, residuals evaluated from the formed solution, and a
//! brute-force solver for small full-size equations.
//!
//! These are deliberately independent of the band/QL eigensolver used on the
//! fast path; they rely on nalgebra's dense symmetric eigensolver and LU.

use nalgebra::DMatrix;

use crate::error::{dim_err, Error, Result};
use crate::la::{BlockTridiagonal, DenseMatrix};
use crate::sparse::LinearOperator;

/// Largest `n₁n₂` for which [`kronecker_solve`] assembles the Kronecker
/// matrix; larger symmetric problems go through diagonalization.
pub const KRONECKER_ASSEMBLY_LIMIT: usize = 1600;

/// Largest `n₁n₂` accepted by [`kronecker_solve`].
pub const KRONECKER_LIMIT: usize = 40_000;

fn sym_eigen(m: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let e = m.clone().symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

fn embed(gamma: &DenseMatrix, rows: usize) -> DenseMatrix {
    let mut e = DMatrix::zeros(rows, gamma.ncols());
    e.view_mut((0, 0), gamma.shape()).copy_from(gamma);
    e
}

/// `X` with `Λ X + X M + F Gᵀ = 0` for diagonal `Λ`, `M`.
fn diagonal_solve(lambda: &[f64], mu: &[f64], f: &DenseMatrix, g: &DenseMatrix) -> Result<DenseMatrix> {
    let rhs = f * g.transpose();
    let scale = lambda.iter().chain(mu).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = DMatrix::zeros(lambda.len(), mu.len());
    for (j, &mj) in mu.iter().enumerate() {
        for (i, &li) in lambda.iter().enumerate() {
            let d = li + mj;
            if !(d.abs() >= crate::residual::DENOMINATOR_TOL * scale) {
                return Err(Error::SingularDenominator { i, j, value: d });
            }
            x[(i, j)] = -rhs[(i, j)] / d;
        }
    }
    Ok(x)
}

/// `Y` with `TY + YT + E₁γγᵀE₁ᵀ = 0`, symmetrized.
pub fn solve_reduced_lyapunov(t: &BlockTridiagonal, gamma: &DenseMatrix) -> Result<DenseMatrix> {
    let k = t.dim();
    if gamma.nrows() > t.block_size() {
        return Err(dim_err("solve_reduced_lyapunov γ", t.block_size(), gamma.nrows()));
    }
    let (lam, q) = sym_eigen(&t.to_dense());
    let g = q.transpose() * embed(gamma, k);
    let yt = diagonal_solve(&lam, &lam, &g, &g)?;
    let y = &q * yt * q.transpose();
    Ok((&y + y.transpose()) * 0.5)
}

/// `Y` with `TY + YJ + E₁γ₁γ₂ᵀE₁ᵀ = 0`.
pub fn solve_reduced_sylvester(
    t: &BlockTridiagonal,
    j: &BlockTridiagonal,
    gamma1: &DenseMatrix,
    gamma2: &DenseMatrix,
) -> Result<DenseMatrix> {
    if gamma1.ncols() != gamma2.ncols() {
        return Err(dim_err("solve_reduced_sylvester γ₂ columns", gamma1.ncols(), gamma2.ncols()));
    }
    let (lam, q) = sym_eigen(&t.to_dense());
    let (ups, p) = sym_eigen(&j.to_dense());
    let f = q.transpose() * embed(gamma1, t.dim());
    let g = p.transpose() * embed(gamma2, j.dim());
    let yt = diagonal_solve(&lam, &ups, &f, &g)?;
    Ok(&q * yt * p.transpose())
}

/// `Y` (`ℓm × n₂`) with `TY + YB + E₁γ₁C₂ᵀ = 0` for a small dense symmetric `B`.
pub fn solve_reduced_one_sided(
    t: &BlockTridiagonal,
    b: &DenseMatrix,
    gamma1: &DenseMatrix,
    c2: &DenseMatrix,
) -> Result<DenseMatrix> {
    if c2.nrows() != b.nrows() || c2.ncols() != gamma1.ncols() {
        return Err(dim_err("solve_reduced_one_sided C₂", format!("{}x{}", b.nrows(), gamma1.ncols()), format!("{:?}", c2.shape())));
    }
    let (lam, q) = sym_eigen(&t.to_dense());
    let (ups, p) = sym_eigen(b);
    let f = q.transpose() * embed(gamma1, t.dim());
    let g = p.transpose() * c2;
    let yt = diagonal_solve(&lam, &ups, &f, &g)?;
    Ok(&q * yt * p.transpose())
}

/// Last `ℓ` columns of `Y` (or rows of its transpose) times `τᵀ`.
fn last_block_times(y: &DenseMatrix, l: usize, tau: &DenseMatrix) -> Result<DenseMatrix> {
    if tau.ncols() != l || y.ncols() < l {
        return Err(dim_err("naive residual τ columns", l, tau.ncols()));
    }
    Ok(y.columns(y.ncols() - l, l) * tau.transpose())
}

/// `√2‖Y E_m τᵀ‖_F`, the Lyapunov residual from the formed reduced solution.
pub fn naive_residual(y: &DenseMatrix, tau: &DenseMatrix) -> Result<f64> {
    Ok(2f64.sqrt() * last_block_times(y, tau.ncols(), tau)?.norm())
}

/// `(‖τE_mᵀY‖² + ‖YE_mιᵀ‖²)^{1/2}` for the two-sided Sylvester projection.
pub fn naive_residual_sylvester(y: &DenseMatrix, tau: &DenseMatrix, iota: &DenseMatrix) -> Result<f64> {
    let a = last_block_times(&y.transpose(), tau.ncols(), tau)?.norm();
    let b = last_block_times(y, iota.ncols(), iota)?.norm();
    Ok(a.hypot(b))
}

/// `‖τE_mᵀY‖_F` for the one-sided projection.
pub fn naive_residual_one_sided(y: &DenseMatrix, tau: &DenseMatrix) -> Result<f64> {
    Ok(last_block_times(&y.transpose(), tau.ncols(), tau)?.norm())
}

fn is_symmetric(m: &DenseMatrix) -> bool {
    (m - m.transpose()).norm() <= 1e-14 * m.norm()
}

/// Dense solution of `AX + XB + C₁C₂ᵀ = 0`.
///
/// Small problems assemble `I⊗A + Bᵀ⊗I` and use LU; larger ones (up to
/// [`KRONECKER_LIMIT`]) must have symmetric `A`, `B` and are solved through
/// their eigendecompositions.
pub fn kronecker_solve(a: &DenseMatrix, b: &DenseMatrix, c1: &DenseMatrix, c2: &DenseMatrix) -> Result<DenseMatrix> {
    let (n1, n2) = (a.nrows(), b.nrows());
    if a.ncols() != n1 || b.ncols() != n2 {
        return Err(Error::InvalidArgument("kronecker_solve needs square A and B".into()));
    }
    if c1.nrows() != n1 || c2.nrows() != n2 || c1.ncols() != c2.ncols() {
        return Err(dim_err("kronecker_solve C₁, C₂", format!("{n1}xs and {n2}xs"), format!("{:?} and {:?}", c1.shape(), c2.shape())));
    }
    let n = n1 * n2;
    if n > KRONECKER_LIMIT {
        return Err(Error::InvalidArgument(format!("kronecker_solve limited to n₁n₂ <= {KRONECKER_LIMIT}, got {n}")));
    }
    if n <= KRONECKER_ASSEMBLY_LIMIT {
        let mut k = DMatrix::zeros(n, n);
        for j in 0..n2 {
            let mut diag = k.view_mut((j * n1, j * n1), (n1, n1));
            diag += a;
            for i in 0..n2 {
                let bij = b[(i, j)];
                if bij != 0.0 {
                    // (Bᵀ ⊗ I) has block (j, i) equal to bᵢⱼ I.
                    for r in 0..n1 {
                        k[(j * n1 + r, i * n1 + r)] += bij;
                    }
                }
            }
        }
        let rhs = -(c1 * c2.transpose());
        let v = DMatrix::from_column_slice(n, 1, rhs.as_slice());
        let x = k.lu().solve(&v).ok_or(Error::SingularPivot { index: 0, value: 0.0 })?;
        return Ok(DMatrix::from_column_slice(n1, n2, x.as_slice()));
    }
    if !is_symmetric(a) || !is_symmetric(b) {
        return Err(Error::InvalidArgument("kronecker_solve needs symmetric A, B above the assembly limit".into()));
    }
    let (lam, q) = sym_eigen(a);
    let (ups, p) = sym_eigen(b);
    let y = diagonal_solve(&lam, &ups, &(q.transpose() * c1), &(p.transpose() * c2))?;
    Ok(&q * y * p.transpose())
}

/// `‖AX + XB + C₁C₂ᵀ‖_F` for a dense `X`.
pub fn explicit_residual<A, B>(a: &A, b: &B, x: &DenseMatrix, c1: &DenseMatrix, c2: &DenseMatrix) -> Result<f64>
where
    A: LinearOperator + ?Sized,
    B: LinearOperator + ?Sized,
{
    if x.nrows() != a.dim() || x.ncols() != b.dim() {
        return Err(dim_err("explicit_residual X", format!("{}x{}", a.dim(), b.dim()), format!("{:?}", x.shape())));
    }
    let ax = a.apply_block(x);
    let bxt = b.apply_block(&x.transpose());
    Ok((ax + bxt.transpose() + c1 * c2.transpose()).norm())
}

/// `‖AZ₁Z₂ᵀ + Z₁Z₂ᵀB + C₁C₂ᵀ‖_F` without forming any `n₁×n₂` matrix:
/// the residual is `[AZ₁, Z₁, C₁][Z₂, BZ₂, C₂]ᵀ`, whose norm is that of the
/// product of the two triangular QR factors.
pub fn lowrank_residual<A, B>(
    a: &A,
    b: &B,
    z1: &DenseMatrix,
    z2: &DenseMatrix,
    c1: &DenseMatrix,
    c2: &DenseMatrix,
) -> Result<f64>
where
    A: LinearOperator + ?Sized,
    B: LinearOperator + ?Sized,
{
    if z1.nrows() != a.dim() || z2.nrows() != b.dim() || z1.ncols() != z2.ncols() {
        return Err(dim_err("lowrank_residual factors", format!("{}xt and {}xt", a.dim(), b.dim()), format!("{:?} and {:?}", z1.shape(), z2.shape())));
    }
    if c1.nrows() != a.dim() || c2.nrows() != b.dim() || c1.ncols() != c2.ncols() {
        return Err(dim_err("lowrank_residual C₁, C₂", format!("{}xs and {}xs", a.dim(), b.dim()), format!("{:?} and {:?}", c1.shape(), c2.shape())));
    }
    let (t, s) = (z1.ncols(), c1.ncols());
    let w = 2 * t + s;
    let mut left = DMatrix::zeros(a.dim(), w);
    left.columns_mut(0, t).copy_from(&a.apply_block(z1));
    left.columns_mut(t, t).copy_from(z1);
    left.columns_mut(2 * t, s).copy_from(c1);
    let mut right = DMatrix::zeros(b.dim(), w);
    right.columns_mut(0, t).copy_from(z2);
    right.columns_mut(t, t).copy_from(&b.apply_block(z2));
    right.columns_mut(2 * t, s).copy_from(c2);
    let rl = triangular_factor(left);
    let rr = triangular_factor(right);
    Ok((rl * rr.transpose()).norm())
}

/// `R` with `MᵀM = RᵀR`, padded to `ncols` rows when `M` is short.
fn triangular_factor(m: DenseMatrix) -> DenseMatrix {
    let w = m.ncols();
    if m.nrows() <= w {
        return m;
    }
    let r = m.qr().r();
    let mut out = DMatrix::zeros(w, w);
    out.view_mut((0, 0), r.shape()).copy_from(&r);
    out
}

#[cfg(test)]
mod tests;
