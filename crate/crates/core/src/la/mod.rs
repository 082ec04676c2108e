//! Dense small-matrix kernels for the projected problems.
//!
//! The projected matrices produced by block Lanczos are symmetric block
//! tridiagonal. Their spectral data are obtained by reducing the band to
//! tridiagonal form with Givens rotations and then running implicit QL, while
//! only the first and last `ℓ` rows of the orthogonal transformation are
//! carried along. That keeps the cost at `O(ℓ (ℓm)²)` per decomposition.

mod band;
pub mod kernels;
mod qr;
mod tridiag;
mod truncate;

use nalgebra::DMatrix;

use crate::error::{dim_err, Error, Result};

pub use qr::{economy_qr, economy_qr_scaled, QrFactors, RANK_TOL};
pub use tridiag::MAX_SWEEPS;
pub use truncate::{truncated_spd_factor, truncated_svd_factor, TruncatedFactor, TRUNCATION_EPS};

/// Dense real matrix, column-major.
pub type DenseMatrix = DMatrix<f64>;

/// Symmetric block tridiagonal matrix with square blocks of size `ℓ`.
///
/// Only the diagonal blocks and the sub-diagonal blocks are stored; the
/// super-diagonal blocks are the transposes of the latter.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    block_size: usize,
    diag: Vec<DenseMatrix>,
    offdiag: Vec<DenseMatrix>,
}

impl BlockTridiagonal {
    pub fn new(block_size: usize) -> Self {
        BlockTridiagonal {
            block_size,
            diag: Vec::new(),
            offdiag: Vec::new(),
        }
    }

    pub fn from_blocks(diag: Vec<DenseMatrix>, offdiag: Vec<DenseMatrix>) -> Result<Self> {
        let l = diag.first().map(|d| d.nrows()).unwrap_or(0);
        if l == 0 {
            return Err(Error::InvalidArgument("block tridiagonal matrix needs at least one block".into()));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(dim_err("BlockTridiagonal", diag.len() - 1, offdiag.len()));
        }
        let mut t = BlockTridiagonal::new(l);
        let mut offs = offdiag.into_iter();
        for (i, d) in diag.into_iter().enumerate() {
            let lower = if i == 0 { None } else { offs.next() };
            t.push(lower, d)?;
        }
        Ok(t)
    }

    /// Appends a diagonal block, coupled to the previous one by `lower`
    /// (the block below the previous diagonal block). The first block takes
    /// no coupling.
    pub fn push(&mut self, lower: Option<DenseMatrix>, diag: DenseMatrix) -> Result<()> {
        let l = self.block_size;
        if diag.shape() != (l, l) {
            return Err(dim_err("BlockTridiagonal diagonal block", format!("{l}x{l}"), format!("{:?}", diag.shape())));
        }
        if diag.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("BlockTridiagonal block"));
        }
        match (self.diag.is_empty(), lower) {
            (true, None) => {}
            (false, Some(o)) => {
                if o.shape() != (l, l) {
                    return Err(dim_err("BlockTridiagonal off-diagonal block", format!("{l}x{l}"), format!("{:?}", o.shape())));
                }
                if o.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("BlockTridiagonal block"));
                }
                self.offdiag.push(o);
            }
            (true, Some(_)) => {
                return Err(Error::InvalidArgument("first block takes no coupling".into()));
            }
            (false, None) => {
                return Err(Error::InvalidArgument("missing coupling block".into()));
            }
        }
        self.diag.push(diag);
        Ok(())
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn dim(&self) -> usize {
        self.block_size * self.diag.len()
    }

    pub fn diag_blocks(&self) -> &[DenseMatrix] {
        &self.diag
    }

    pub fn offdiag_blocks(&self) -> &[DenseMatrix] {
        &self.offdiag
    }

    /// Entry `(i, j)` of the lower triangle, `i >= j`.
    pub fn lower(&self, i: usize, j: usize) -> f64 {
        let l = self.block_size;
        let (bi, bj) = (i / l, j / l);
        if bi == bj {
            self.diag[bi][(i % l, j % l)]
        } else if bi == bj + 1 {
            self.offdiag[bj][(i % l, j % l)]
        } else {
            0.0
        }
    }

    /// Largest `i - j` over the nonzero entries of the lower triangle.
    pub fn bandwidth(&self) -> usize {
        let l = self.block_size;
        let mut b = 0;
        for d in &self.diag {
            for j in 0..l {
                for i in j + 1..l {
                    if d[(i, j)] != 0.0 {
                        b = b.max(i - j);
                    }
                }
            }
        }
        for o in &self.offdiag {
            for j in 0..l {
                for i in 0..l {
                    if o[(i, j)] != 0.0 {
                        b = b.max(l + i - j);
                    }
                }
            }
        }
        b
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let k = self.dim();
        DMatrix::from_fn(k, k, |i, j| if i >= j { self.lower(i, j) } else { self.lower(j, i) })
    }

    pub fn fro_norm(&self) -> f64 {
        let d: f64 = self.diag.iter().map(|b| b.norm_squared()).sum();
        let o: f64 = self.offdiag.iter().map(|b| b.norm_squared()).sum();
        (d + 2.0 * o).sqrt()
    }

    /// Leading `blocks` diagonal blocks.
    pub fn leading(&self, blocks: usize) -> BlockTridiagonal {
        BlockTridiagonal {
            block_size: self.block_size,
            diag: self.diag[..blocks].to_vec(),
            offdiag: self.offdiag[..blocks.saturating_sub(1)].to_vec(),
        }
    }
}

/// Eigenvalues of a block tridiagonal matrix with only the first and last
/// `ℓ` rows of its eigenvector matrix.
#[derive(Debug, Clone)]
pub struct PartialSpectral {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `E₁ᵀQ`, ℓ×ℓm.
    pub first_rows: DenseMatrix,
    /// `E_mᵀQ`, ℓ×ℓm.
    pub last_rows: DenseMatrix,
}

/// Tridiagonal form `F = PᵀTP` of a block tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagonalForm {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    /// `E₁ᵀP`.
    pub p_first: DenseMatrix,
    /// `E_mᵀP`.
    pub p_last: DenseMatrix,
}

/// Full symmetric eigendecomposition with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

fn edge_rows(k: usize, l: usize) -> DenseMatrix {
    let mut rows = DMatrix::zeros(2 * l, k);
    for i in 0..l {
        rows[(i, i)] = 1.0;
        rows[(l + i, k - l + i)] = 1.0;
    }
    rows
}

fn check_finite(t: &BlockTridiagonal) -> Result<()> {
    let bad = t.diag.iter().chain(&t.offdiag).any(|b| b.iter().any(|x| !x.is_finite()));
    if bad {
        Err(Error::NonFinite("block tridiagonal matrix"))
    } else {
        Ok(())
    }
}

/// Reduces `T` to tridiagonal form, computing only the first and last `ℓ`
/// rows of the orthogonal transformation.
pub fn band_tridiagonalize(t: &BlockTridiagonal) -> Result<TridiagonalForm> {
    check_finite(t)?;
    let (k, l) = (t.dim(), t.block_size());
    let red = band::reduce(k, t.bandwidth(), |i, j| t.lower(i, j), edge_rows(k, l));
    Ok(TridiagonalForm {
        diag: red.diag,
        offdiag: red.offdiag,
        p_first: red.rows.rows(0, l).into_owned(),
        p_last: red.rows.rows(l, l).into_owned(),
    })
}

/// Sorts eigenpairs ascending and fixes column signs so the largest-magnitude
/// entry among the tracked rows is positive.
fn finish(mut values: Vec<f64>, rows: DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let order = tridiag::ascending_order(&values);
    let mut out = DMatrix::zeros(rows.nrows(), rows.ncols());
    for (dst, &src) in order.iter().enumerate() {
        let col = rows.column(src);
        let mut pivot = 0.0f64;
        for &x in col.iter() {
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        out.set_column(dst, &(col * sign));
    }
    let sorted = order.iter().map(|&i| values[i]).collect();
    values.clear();
    (sorted, out)
}

/// Eigendecomposition of the symmetric tridiagonal matrix `(diag, offdiag)`.
pub fn sym_tridiag_eig(diag: &[f64], offdiag: &[f64]) -> Result<SymEigen> {
    let k = diag.len();
    if offdiag.len() != k.saturating_sub(1) {
        return Err(dim_err("sym_tridiag_eig off-diagonal", k.saturating_sub(1), offdiag.len()));
    }
    let mut d = diag.to_vec();
    let mut rows = DMatrix::identity(k, k);
    tridiag::ql_implicit(&mut d, offdiag, &mut rows)?;
    let (values, vectors) = finish(d, rows);
    Ok(SymEigen { values, vectors })
}

/// Eigenvalues of `T` and the first/last `ℓ` rows of its eigenvectors,
/// without ever forming the full eigenvector matrix.
pub fn partial_eig_blocktridiag(t: &BlockTridiagonal) -> Result<PartialSpectral> {
    check_finite(t)?;
    let (k, l) = (t.dim(), t.block_size());
    let red = band::reduce(k, t.bandwidth(), |i, j| t.lower(i, j), edge_rows(k, l));
    let mut d = red.diag;
    let mut rows = red.rows;
    tridiag::ql_implicit(&mut d, &red.offdiag, &mut rows)?;
    let (eigenvalues, rows) = finish(d, rows);
    Ok(PartialSpectral {
        eigenvalues,
        first_rows: rows.rows(0, l).into_owned(),
        last_rows: rows.rows(l, l).into_owned(),
    })
}

/// Full eigendecomposition of `T` through the same band reduction and QL
/// path. Costs `O((ℓm)³)`; used once at convergence.
pub fn full_eig_blocktridiag(t: &BlockTridiagonal) -> Result<SymEigen> {
    check_finite(t)?;
    let k = t.dim();
    let red = band::reduce(k, t.bandwidth(), |i, j| t.lower(i, j), DMatrix::identity(k, k));
    let mut d = red.diag;
    let mut rows = red.rows;
    tridiag::ql_implicit(&mut d, &red.offdiag, &mut rows)?;
    let (values, vectors) = finish(d, rows);
    Ok(SymEigen { values, vectors })
}
