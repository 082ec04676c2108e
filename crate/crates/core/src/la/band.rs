//! Reduction of a symmetric banded matrix to tridiagonal form by Givens
//! rotations with bulge chasing, tracking only selected rows of the
//! accumulated orthogonal transformation.

use nalgebra::DMatrix;

/// Lower band storage of a symmetric matrix with room for one bulge diagonal.
struct SymBand {
    n: usize,
    width: usize,
    data: Vec<f64>,
}

impl SymBand {
    fn new(n: usize, bandwidth: usize) -> Self {
        let width = bandwidth + 2;
        SymBand {
            n,
            width,
            data: vec![0.0; width * n],
        }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i >= j && i - j < self.width);
        self.data[(i - j) * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j < self.width);
        self.data[(i - j) * self.n + j] = v;
    }
}

/// Tridiagonal form `F = Pᵀ A P` together with `rows · P` for the supplied rows.
pub(crate) struct BandReduction {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    pub rows: DMatrix<f64>,
}

/// Reduces the symmetric matrix given by its lower band (`lower(i, j)` for
/// `0 <= i - j <= bandwidth`) to tridiagonal form. `rows` (r×n) is multiplied
/// on the right by every rotation, so passing rows of the identity yields the
/// corresponding rows of `P`.
pub(crate) fn reduce<F>(n: usize, bandwidth: usize, lower: F, mut rows: DMatrix<f64>) -> BandReduction
where
    F: Fn(usize, usize) -> f64,
{
    assert_eq!(rows.ncols(), n);
    let b = bandwidth.min(n.saturating_sub(1));
    let mut a = SymBand::new(n, b);
    for j in 0..n {
        for d in 0..=b {
            if j + d < n {
                a.set(j + d, j, lower(j + d, j));
            }
        }
    }

    if b >= 2 {
        for j in 0..n - 2 {
            for d in (2..=b).rev() {
                let row = j + d;
                if row >= n || a.get(row, j) == 0.0 {
                    continue;
                }
                rotate(&mut a, &mut rows, row - 1, j, b);
                // Chase the bulge created at (q + b, p) down the band.
                let (mut p, mut q) = (row - 1, row);
                while q + b < n {
                    let r = q + b;
                    if a.get(r, p) == 0.0 {
                        break;
                    }
                    rotate(&mut a, &mut rows, r - 1, p, b);
                    p = r - 1;
                    q = r;
                }
            }
        }
    }

    let diag = (0..n).map(|i| a.get(i, i)).collect();
    let offdiag = (0..n.saturating_sub(1)).map(|i| a.get(i + 1, i)).collect();
    BandReduction {
        diag,
        offdiag,
        rows,
    }
}

/// Similarity rotation in the plane (p, p+1) that annihilates entry
/// (p+1, col) against the pivot (p, col).
fn rotate(a: &mut SymBand, rows: &mut DMatrix<f64>, p: usize, col: usize, b: usize) {
    let q = p + 1;
    let n = a.n;
    let x = a.get(p, col);
    let y = a.get(q, col);
    let r = x.hypot(y);
    if r == 0.0 {
        return;
    }
    let c = x / r;
    let s = y / r;

    // Entries left of the 2×2 block, rows p and q.
    let lo = q.saturating_sub(b + 1);
    for i in lo..p {
        let x = a.get(p, i);
        let y = a.get(q, i);
        a.set(p, i, c * x + s * y);
        a.set(q, i, -s * x + c * y);
    }
    a.set(p, col, r);
    a.set(q, col, 0.0);

    // The 2×2 diagonal block.
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let aqp = a.get(q, p);
    let cs = c * s;
    a.set(p, p, c * c * app + 2.0 * cs * aqp + s * s * aqq);
    a.set(q, q, s * s * app - 2.0 * cs * aqp + c * c * aqq);
    a.set(q, p, (c * c - s * s) * aqp + cs * (aqq - app));

    // Entries below the 2×2 block, columns p and q; (p + b + 1, p) is the bulge.
    let hi = (p + b + 1).min(n - 1);
    for i in q + 1..=hi {
        let x = a.get(i, p);
        let y = if i - q <= b + 1 { a.get(i, q) } else { 0.0 };
        a.set(i, p, c * x + s * y);
        a.set(i, q, -s * x + c * y);
    }

    for k in 0..rows.nrows() {
        let x = rows[(k, p)];
        let y = rows[(k, q)];
        rows[(k, p)] = c * x + s * y;
        rows[(k, q)] = -s * x + c * y;
    }
}
