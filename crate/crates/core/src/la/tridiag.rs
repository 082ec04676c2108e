//! Implicit-shift QL for symmetric tridiagonal matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Iteration cap per eigenvalue.
pub const MAX_SWEEPS: usize = 30;

/// Diagonalizes the tridiagonal matrix `(diag, offdiag)` in place. Every
/// rotation is also applied to the columns of `rows` (r×n), so on return
/// `rows ← rows · G` where `G` holds the eigenvectors column by column.
/// Eigenvalues are returned unsorted in `diag`.
pub(crate) fn ql_implicit(diag: &mut [f64], offdiag: &[f64], rows: &mut DMatrix<f64>) -> Result<()> {
    let n = diag.len();
    assert_eq!(offdiag.len(), n.saturating_sub(1));
    assert_eq!(rows.ncols(), n);
    if diag.iter().chain(offdiag).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("tridiagonal eigensolver input"));
    }
    if n <= 1 {
        return Ok(());
    }
    let d = diag;
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(offdiag);
    let nr = rows.nrows();

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() + dd == dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter == MAX_SWEEPS {
                return Err(Error::EigenNoConvergence {
                    index: l,
                    sweeps: MAX_SWEEPS,
                });
            }
            iter += 1;

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..nr {
                    let f = rows[(k, i + 1)];
                    let z = rows[(k, i)];
                    rows[(k, i + 1)] = s * z + c * f;
                    rows[(k, i)] = c * z - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Permutation sorting `values` ascending, ties kept in position order.
pub(crate) fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}
