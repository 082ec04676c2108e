//! Sparse symmetric storage and the operator abstraction used by the Krylov
//! basis builders.

mod ldlt;
pub mod mm;

use nalgebra::DMatrix;

use crate::error::{dim_err, Error, Result};
use crate::la::DenseMatrix;

pub use ldlt::SparseFactorization;

/// A symmetric linear operator acting on blocks of vectors.
///
/// Implementations are immutable once built, so concurrent `apply_block` /
/// `solve_block` calls are safe.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `A V` for an `n × k` block `V` with `n = self.dim()`.
    fn apply_block(&self, v: &DenseMatrix) -> DenseMatrix;

    /// `A⁻¹ V`, when an inverse is available.
    fn solve_block(&self, _v: &DenseMatrix) -> Option<Result<DenseMatrix>> {
        None
    }

    fn has_inverse(&self) -> bool {
        false
    }

    /// Whether the operator is known to be negative definite.
    fn negative_definite(&self) -> bool {
        true
    }
}

/// `A V` with a dimension check.
pub fn block_apply<O: LinearOperator + ?Sized>(op: &O, v: &DenseMatrix) -> Result<DenseMatrix> {
    if v.nrows() != op.dim() {
        return Err(dim_err("block_apply", op.dim(), v.nrows()));
    }
    Ok(op.apply_block(v))
}

/// `A⁻¹ V` with a dimension check.
pub fn block_solve<O: LinearOperator + ?Sized>(op: &O, v: &DenseMatrix) -> Result<DenseMatrix> {
    if v.nrows() != op.dim() {
        return Err(dim_err("block_solve", op.dim(), v.nrows()));
    }
    op.solve_block(v).unwrap_or(Err(Error::NoInverse))
}

/// Symmetric matrix in compressed sparse row form, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds from `(row, col, value)` triplets holding both triangles.
    /// Duplicates are summed; the result must be symmetric bit for bit.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(dim_err("SparseSymmetric triplet index", format!("< {n}"), format!("({i}, {j})")));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("SparseSymmetric entry"));
            }
            entries.push((i, j, v));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let m = SparseSymmetric {
            n,
            row_ptr,
            col_idx,
            values,
        };
        m.check_symmetry()?;
        Ok(m)
    }

    /// Builds from triplets of one triangle, mirroring off-diagonal entries.
    pub fn from_triangle(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut full = Vec::with_capacity(2 * triplets.len());
        for &(i, j, v) in triplets {
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Self::from_triplets(n, &full)
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let trip: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), &trip).expect("diagonal matrices are symmetric")
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    fn check_symmetry(&self) -> Result<()> {
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                if j == i {
                    continue;
                }
                let aij = self.values[p];
                let aji = self.get(j, i);
                if aij.to_bits() != aji.to_bits() && !(aij == 0.0 && aji == 0.0) {
                    return Err(Error::Asymmetric { i, j, aij, aji });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// All stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v)));
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// Largest absolute row sum (the ∞-norm, equal to the 1-norm here).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn fro_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl LinearOperator for SparseSymmetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_block(&self, v: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = DMatrix::zeros(n, v.ncols());
        let vs = v.as_slice();
        let os = out.as_mut_slice();
        for c in 0..v.ncols() {
            let x = &vs[c * n..(c + 1) * n];
            let y = &mut os[c * n..(c + 1) * n];
            for (i, yi) in y.iter_mut().enumerate() {
                let mut acc = 0.0;
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.values[p] * x[self.col_idx[p]];
                }
                *yi = acc;
            }
        }
        out
    }
}

/// A sparse matrix together with its factorization, offering both
/// multiplication and inverse application.
#[derive(Debug, Clone)]
pub struct FactoredOperator {
    matrix: SparseSymmetric,
    factor: SparseFactorization,
}

impl FactoredOperator {
    pub fn new(matrix: SparseSymmetric) -> Result<Self> {
        let factor = SparseFactorization::new(&matrix)?;
        Ok(FactoredOperator { matrix, factor })
    }

    pub fn matrix(&self) -> &SparseSymmetric {
        &self.matrix
    }

    pub fn factorization(&self) -> &SparseFactorization {
        &self.factor
    }
}

impl LinearOperator for FactoredOperator {
    fn dim(&self) -> usize {
        self.matrix.n()
    }

    fn apply_block(&self, v: &DenseMatrix) -> DenseMatrix {
        self.matrix.apply_block(v)
    }

    fn solve_block(&self, v: &DenseMatrix) -> Option<Result<DenseMatrix>> {
        Some(Ok(self.factor.solve_block(v)))
    }

    fn has_inverse(&self) -> bool {
        true
    }
}

/// Dense symmetric operator for small problems and tests; the inverse is
/// applied through an LU factorization computed at construction.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DenseMatrix,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseOperator {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(dim_err("DenseOperator", format!("{n}x{n}"), format!("{:?}", matrix.shape())));
        }
        for i in 0..n {
            for j in 0..i {
                if matrix[(i, j)].to_bits() != matrix[(j, i)].to_bits() {
                    return Err(Error::Asymmetric {
                        i,
                        j,
                        aij: matrix[(i, j)],
                        aji: matrix[(j, i)],
                    });
                }
            }
        }
        let lu = matrix.clone().lu();
        Ok(DenseOperator { matrix, lu })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply_block(&self, v: &DenseMatrix) -> DenseMatrix {
        &self.matrix * v
    }

    fn solve_block(&self, v: &DenseMatrix) -> Option<Result<DenseMatrix>> {
        Some(self.lu.solve(v).ok_or(Error::SingularPivot { index: 0, value: 0.0 }))
    }

    fn has_inverse(&self) -> bool {
        true
    }
}

/// The operator `L⁻¹ A L⁻ᵀ` for `E = L Lᵀ`, applied lazily. Turns
/// `A X E + E X A + C Cᵀ = 0` into a standard Lyapunov equation in
/// `X̃ = Lᵀ X L` with right-hand side factor `L⁻¹ C`.
pub struct CholeskyTransformed<'a, O: LinearOperator + ?Sized> {
    a: &'a O,
    e: SparseFactorization,
}

/// Builds the transformed operator. Fails unless `E` is positive definite.
pub fn cholesky_transform<'a, O: LinearOperator + ?Sized>(
    e: &SparseSymmetric,
    a: &'a O,
) -> Result<CholeskyTransformed<'a, O>> {
    if e.n() != a.dim() {
        return Err(dim_err("cholesky_transform", a.dim(), e.n()));
    }
    let fact = SparseFactorization::new(e)?;
    if let Some((index, &value)) = fact.pivots().iter().enumerate().find(|(_, d)| **d <= 0.0) {
        return Err(Error::SingularPivot { index, value });
    }
    Ok(CholeskyTransformed { a, e: fact })
}

impl<O: LinearOperator + ?Sized> CholeskyTransformed<'_, O> {
    /// `L⁻¹ C`.
    pub fn transform_rhs(&self, c: &DenseMatrix) -> Result<DenseMatrix> {
        if c.nrows() != self.a.dim() {
            return Err(dim_err("transform_rhs", self.a.dim(), c.nrows()));
        }
        Ok(self.e.half_solve(c))
    }

    /// `L⁻ᵀ Z̃`, mapping a factor of `X̃` back to a factor of `X`.
    pub fn recover_factor(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        if z.nrows() != self.a.dim() {
            return Err(dim_err("recover_factor", self.a.dim(), z.nrows()));
        }
        Ok(self.e.half_solve_t(z))
    }
}

impl<O: LinearOperator + ?Sized> LinearOperator for CholeskyTransformed<'_, O> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply_block(&self, v: &DenseMatrix) -> DenseMatrix {
        let w = self.e.half_solve_t(v);
        let aw = self.a.apply_block(&w);
        self.e.half_solve(&aw)
    }

    fn solve_block(&self, v: &DenseMatrix) -> Option<Result<DenseMatrix>> {
        let w = self.e.half_mul(v);
        let inner = self.a.solve_block(&w)?;
        Some(inner.map(|x| self.e.half_mul_t(&x)))
    }

    fn has_inverse(&self) -> bool {
        self.a.has_inverse()
    }

    fn negative_definite(&self) -> bool {
        self.a.negative_definite()
    }
}

#[cfg(test)]
mod tests;
