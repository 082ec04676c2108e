use nalgebra::DMatrix;

use super::kernels::dot;
use crate::error::{dim_err, Error, Result};

/// Relative threshold on `|R_ii|` below which a block is declared rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Thin QR factors `W = Q R` with `Q` n×k orthonormal and `R` k×k upper
/// triangular with a nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Economy-size Householder QR. Rank deficiency is judged against `‖W‖_F`.
pub fn economy_qr(w: &DMatrix<f64>) -> Result<QrFactors> {
    economy_qr_scaled(w, w.norm())
}

/// Economy-size Householder QR with rank deficiency judged against `scale`:
/// an error is raised when some `|R_ii| < RANK_TOL * scale`.
///
/// Column `j` of `Q` and of `R` depend only on columns `0..=j` of `W`, and bit
/// for bit so: factoring a leading column subset reproduces the leading
/// columns of the full factorization exactly.
pub fn economy_qr_scaled(w: &DMatrix<f64>, scale: f64) -> Result<QrFactors> {
    let (q, r) = householder_qr(w)?;
    let tol = RANK_TOL * scale;
    for j in 0..r.ncols() {
        let v = r[(j, j)].abs();
        if !(v >= tol) || v == 0.0 {
            return Err(Error::RankDeficient {
                context: "economy QR",
                column: j,
                value: v,
                tol,
            });
        }
    }
    Ok(QrFactors { q, r })
}

/// Householder QR without any rank check.
pub(crate) fn householder_qr(w: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, k) = w.shape();
    if n < k {
        return Err(dim_err("economy_qr", format!("rows >= {k}"), n));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("economy_qr input"));
    }
    let mut a = w.clone();
    // Reflector j is I - tau_j v_j v_jᵀ with v_j[j] = 1 and support j..n.
    let mut taus = vec![0.0; k];
    for j in 0..k {
        let col = &mut a.as_mut_slice()[j * n..(j + 1) * n];
        let alpha = col[j];
        let sigma = dot(&col[j + 1..], &col[j + 1..]);
        if sigma == 0.0 {
            taus[j] = 0.0;
            continue;
        }
        let norm = (alpha * alpha + sigma).sqrt();
        let beta = if alpha <= 0.0 { norm } else { -norm };
        let v0 = alpha - beta;
        for x in col[j + 1..].iter_mut() {
            *x /= v0;
        }
        taus[j] = (beta - alpha) / beta;
        col[j] = beta;
        // Apply to the trailing columns one at a time.
        let (head, tail) = a.as_mut_slice().split_at_mut((j + 1) * n);
        let v = &head[j * n + j + 1..(j + 1) * n];
        for c in 0..(k - j - 1) {
            let target = &mut tail[c * n..(c + 1) * n];
            let s = target[j] + dot(v, &target[j + 1..]);
            let f = taus[j] * s;
            target[j] -= f;
            for (t, vi) in target[j + 1..].iter_mut().zip(v) {
                *t -= f * vi;
            }
        }
    }

    let mut r = DMatrix::zeros(k, k);
    for j in 0..k {
        for i in 0..=j {
            r[(i, j)] = a[(i, j)];
        }
    }

    let mut q = DMatrix::zeros(n, k);
    for c in 0..k {
        let qs = q.as_mut_slice();
        let col = &mut qs[c * n..(c + 1) * n];
        col[c] = 1.0;
        // Reflectors with index > c leave e_c untouched.
        for j in (0..=c).rev() {
            if taus[j] == 0.0 {
                continue;
            }
            let v = &a.as_slice()[j * n + j + 1..(j + 1) * n];
            let s = col[j] + dot(v, &col[j + 1..]);
            let f = taus[j] * s;
            col[j] -= f;
            for (t, vi) in col[j + 1..].iter_mut().zip(v) {
                *t -= f * vi;
            }
        }
    }

    // Nonnegative diagonal of R.
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for c in j..k {
                r[(j, c)] = -r[(j, c)];
            }
            for x in q.column_mut(j).iter_mut() {
                *x = -*x;
            }
        }
    }
    Ok((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::random_matrix;

    #[test]
    fn identity_columns() {
        let w = DMatrix::<f64>::identity(3, 2);
        let f = economy_qr(&w).unwrap();
        assert!((f.q - &w).norm() < 1e-15);
        assert!((f.r - DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn three_four_five() {
        let w = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let f = economy_qr(&w).unwrap();
        assert!((f.q[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((f.q[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((f.r[(0, 0)] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn random_multiply_back() {
        let w = random_matrix(50, 4, 7);
        let f = economy_qr(&w).unwrap();
        let scale = w.norm();
        assert!((&f.q * &f.r - &w).norm() <= 1e-13 * scale);
        let qtq = f.q.transpose() * &f.q;
        assert!((qtq - DMatrix::<f64>::identity(4, 4)).norm() <= 1e-13);
        for i in 0..4 {
            for j in 0..i {
                assert_eq!(f.r[(i, j)], 0.0);
            }
            assert!(f.r[(i, i)] > 0.0);
        }
    }

    #[test]
    fn idempotent_on_orthonormal_input() {
        let w = random_matrix(30, 5, 11);
        let f = economy_qr(&w).unwrap();
        let g = economy_qr(&f.q).unwrap();
        assert!((g.r - DMatrix::<f64>::identity(5, 5)).norm() <= 1e-12);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let mut w = random_matrix(20, 3, 1);
        let c0 = w.column(0).into_owned();
        w.set_column(2, &(c0 * -2.0));
        match economy_qr(&w) {
            Err(Error::RankDeficient { column, .. }) => assert_eq!(column, 2),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        assert!(economy_qr(&DMatrix::zeros(4, 1)).is_err());
    }

    #[test]
    fn leading_columns_are_bit_identical() {
        let w = random_matrix(64, 6, 5);
        let full = economy_qr(&w).unwrap();
        let lead = economy_qr(&w.columns(0, 3).into_owned()).unwrap();
        for (a, b) in full.q.columns(0, 3).iter().zip(lead.q.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in full.r.view((0, 0), (3, 3)).iter().zip(lead.r.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
