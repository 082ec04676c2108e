//! Column-local block kernels for tall basis blocks.
//!
//! Every output column depends only on the matching input column and is
//! accumulated in a fixed order, so results are bit-reproducible regardless of
//! how many columns are processed together. The two-pass recovery relies on this.

use nalgebra::DMatrix;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `Vᵀ W` for tall `V` (n×p) and `W` (n×q).
pub fn tr_mul(v: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(v.nrows(), w.nrows());
    let n = v.nrows();
    let vs = v.as_slice();
    let ws = w.as_slice();
    DMatrix::from_fn(v.ncols(), w.ncols(), |i, j| {
        dot(&vs[i * n..(i + 1) * n], &ws[j * n..(j + 1) * n])
    })
}

/// `W ← W − V α` for tall `V` (n×p), small `α` (p×q).
pub fn sub_mul(w: &mut DMatrix<f64>, v: &DMatrix<f64>, alpha: &DMatrix<f64>) {
    assert_eq!(v.nrows(), w.nrows());
    assert_eq!(v.ncols(), alpha.nrows());
    assert_eq!(w.ncols(), alpha.ncols());
    let n = v.nrows();
    let vs = v.as_slice();
    let ws = w.as_mut_slice();
    for j in 0..alpha.ncols() {
        let col = &mut ws[j * n..(j + 1) * n];
        for i in 0..alpha.nrows() {
            let a = alpha[(i, j)];
            if a != 0.0 {
                axpy(-a, &vs[i * n..(i + 1) * n], col);
            }
        }
    }
}

/// `Z ← Z + V α` for tall `V` (n×p), small `α` (p×q).
pub fn add_mul(z: &mut DMatrix<f64>, v: &DMatrix<f64>, alpha: &DMatrix<f64>) {
    assert_eq!(v.nrows(), z.nrows());
    assert_eq!(v.ncols(), alpha.nrows());
    assert_eq!(z.ncols(), alpha.ncols());
    let n = v.nrows();
    let vs = v.as_slice();
    let zs = z.as_mut_slice();
    for j in 0..alpha.ncols() {
        let col = &mut zs[j * n..(j + 1) * n];
        for i in 0..alpha.nrows() {
            let a = alpha[(i, j)];
            if a != 0.0 {
                axpy(a, &vs[i * n..(i + 1) * n], col);
            }
        }
    }
}

/// Columns `start..start + count` of `m` as an owned matrix.
pub fn columns(m: &DMatrix<f64>, start: usize, count: usize) -> DMatrix<f64> {
    m.columns(start, count).into_owned()
}

/// Horizontal concatenation `[a, b]`.
pub fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub fn fro_norm(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_match_nalgebra_products() {
        let v = DMatrix::from_fn(37, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let w = DMatrix::from_fn(37, 2, |i, j| ((i * 5 + j) % 13) as f64 * 0.25);
        let a = tr_mul(&v, &w);
        assert!((a - v.transpose() * &w).norm() < 1e-12);

        let alpha = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.5]);
        let mut w2 = w.clone();
        sub_mul(&mut w2, &v, &alpha);
        assert!((w2 - (&w - &v * &alpha)).norm() < 1e-12);

        let mut z = w.clone();
        add_mul(&mut z, &v, &alpha);
        assert!((z - (&w + &v * &alpha)).norm() < 1e-12);
    }

    #[test]
    fn column_results_do_not_depend_on_block_width() {
        let v = DMatrix::from_fn(101, 4, |i, j| ((i * 31 + j * 17) % 23) as f64 / 7.0 - 1.3);
        let w = DMatrix::from_fn(101, 6, |i, j| ((i * 13 + j * 29) % 19) as f64 / 3.0 - 2.1);
        let full = tr_mul(&v, &w);
        let half = tr_mul(&v, &columns(&w, 0, 3));
        for i in 0..4 {
            for j in 0..3 {
                assert_eq!(full[(i, j)].to_bits(), half[(i, j)].to_bits());
            }
        }
    }
}
