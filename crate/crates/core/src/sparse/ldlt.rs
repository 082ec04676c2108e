//! Envelope `LDLᵀ` factorization under a reverse Cuthill-McKee ordering.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use super::SparseSymmetric;
use crate::error::{Error, Result};
use crate::la::DenseMatrix;

/// `Π E Πᵀ = L D Lᵀ` with `L` unit lower triangular, stored row by row over
/// the envelope of the permuted matrix.
#[derive(Debug, Clone)]
pub struct SparseFactorization {
    n: usize,
    /// `perm[i]` is the original index placed at position `i`.
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    lower: Vec<f64>,
    d: Vec<f64>,
}

fn degree(a: &SparseSymmetric, i: usize) -> usize {
    a.row(i).0.iter().filter(|&&j| j != i).count()
}

/// Breadth-first level structure from `root` restricted to unvisited nodes.
fn levels(a: &SparseSymmetric, root: usize, blocked: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = blocked.to_vec();
    seen[root] = true;
    let mut out = vec![vec![root]];
    loop {
        let mut next = Vec::new();
        for &u in out.last().expect("nonempty") {
            for &v in a.row(u).0 {
                if !seen[v] {
                    seen[v] = true;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            return out;
        }
        out.push(next);
    }
}

pub(crate) fn reverse_cuthill_mckee(a: &SparseSymmetric) -> Vec<usize> {
    let n = a.n();
    let deg: Vec<usize> = (0..n).map(|i| degree(a, i)).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (deg[i], i)).expect("unvisited node");
        // Pseudo-peripheral root: walk to a minimum-degree node of the last level
        // while the eccentricity grows.
        let mut root = start;
        let mut depth = levels(a, root, &visited).len();
        for _ in 0..8 {
            let ls = levels(a, root, &visited);
            let cand = *ls.last().unwrap().iter().min_by_key(|&&i| (deg[i], i)).unwrap();
            let d = levels(a, cand, &visited).len();
            if d <= depth {
                break;
            }
            root = cand;
            depth = d;
        }
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = a.row(u).0.iter().copied().filter(|&v| !visited[v]).collect();
            nb.sort_by_key(|&v| (deg[v], v));
            for v in nb {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

impl SparseFactorization {
    /// Factors a symmetric nonsingular matrix. No pivoting beyond the fill
    /// reducing order, so strongly indefinite matrices may fail with
    /// [`Error::SingularPivot`].
    pub fn new(a: &SparseSymmetric) -> Result<Self> {
        let n = a.n();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let mut first = vec![0; n];
        for i in 0..n {
            let (cols, _) = a.row(perm[i]);
            first[i] = cols.iter().map(|&c| inv[c]).filter(|&j| j <= i).min().unwrap_or(i);
        }
        let mut offset = vec![0; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i]);
        }
        let mut lower = vec![0.0; offset[n]];
        let mut diag_in = vec![0.0; n];
        for i in 0..n {
            let (cols, vals) = a.row(perm[i]);
            for (&c, &v) in cols.iter().zip(vals) {
                let j = inv[c];
                if j < i {
                    lower[offset[i] + j - first[i]] = v;
                } else if j == i {
                    diag_in[i] = v;
                }
            }
        }
        let scale = a.norm_inf();
        let mut d = vec![0.0; n];
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut t = lower[offset[i] + j - fi];
                for k in lo..j {
                    t -= lower[offset[i] + k - fi] * d[k] * lower[offset[j] + k - fj];
                }
                lower[offset[i] + j - fi] = t / d[j];
            }
            let mut di = diag_in[i];
            for k in fi..i {
                let l = lower[offset[i] + k - fi];
                di -= l * l * d[k];
            }
            if !di.is_finite() || di.abs() <= 1e-14 * scale {
                return Err(Error::SingularPivot { index: perm[i], value: di });
            }
            d[i] = di;
        }
        Ok(SparseFactorization {
            n,
            perm,
            first,
            offset,
            lower,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Pivots of `D` in factorization order.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Number of stored strictly lower entries.
    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.lower[self.offset[i]..self.offset[i + 1]]
    }

    fn forward(&self, y: &mut [f64]) {
        for i in 0..self.n {
            let fi = self.first[i];
            let s: f64 = self.row(i).iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
    }

    fn backward(&self, x: &mut [f64]) {
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let xi = x[i];
            for (xk, l) in x[fi..i].iter_mut().zip(self.row(i)) {
                *xk -= l * xi;
            }
        }
    }

    fn mul_l(&self, x: &mut [f64]) {
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let s: f64 = self.row(i).iter().zip(&x[fi..i]).map(|(l, v)| l * v).sum();
            x[i] += s;
        }
    }

    fn mul_lt(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let fi = self.first[i];
            let xi = x[i];
            for (xk, l) in x[fi..i].iter_mut().zip(self.row(i)) {
                *xk += l * xi;
            }
        }
    }

    fn map_columns(&self, v: &DenseMatrix, f: impl Fn(&[f64], &mut [f64])) -> DenseMatrix {
        let n = self.n;
        let mut out = DMatrix::zeros(n, v.ncols());
        for c in 0..v.ncols() {
            let src = &v.as_slice()[c * n..(c + 1) * n];
            let dst = &mut out.as_mut_slice()[c * n..(c + 1) * n];
            f(src, dst);
        }
        out
    }

    /// `E⁻¹ V`.
    pub fn solve_block(&self, v: &DenseMatrix) -> DenseMatrix {
        self.permuted(v, |y| {
            self.forward(y);
            y.iter_mut().zip(&self.d).for_each(|(v, d)| *v /= d);
            self.backward(y);
        })
    }

    /// Gathers into factorization order, applies `f`, scatters back.
    fn permuted(&self, v: &DenseMatrix, f: impl Fn(&mut [f64])) -> DenseMatrix {
        self.map_columns(v, |src, dst| {
            let mut y: Vec<f64> = self.perm.iter().map(|&p| src[p]).collect();
            f(&mut y);
            for (i, &p) in self.perm.iter().enumerate() {
                dst[p] = y[i];
            }
        })
    }

    fn scale_sqrt_d(&self, y: &mut [f64], invert: bool) {
        for (v, d) in y.iter_mut().zip(&self.d) {
            if invert {
                *v /= d.sqrt();
            } else {
                *v *= d.sqrt();
            }
        }
    }

    // With L̃ = Πᵀ L D^{1/2} Π we have E = L̃ L̃ᵀ when D > 0, and L̃ = I for
    // E = I.

    /// `L̃⁻¹ V`.
    pub(crate) fn half_solve(&self, v: &DenseMatrix) -> DenseMatrix {
        self.permuted(v, |y| {
            self.forward(y);
            self.scale_sqrt_d(y, true);
        })
    }

    /// `L̃⁻ᵀ V`.
    pub(crate) fn half_solve_t(&self, v: &DenseMatrix) -> DenseMatrix {
        self.permuted(v, |y| {
            self.scale_sqrt_d(y, true);
            self.backward(y);
        })
    }

    /// `L̃ V`.
    pub(crate) fn half_mul(&self, v: &DenseMatrix) -> DenseMatrix {
        self.permuted(v, |y| {
            self.scale_sqrt_d(y, false);
            self.mul_l(y);
        })
    }

    /// `L̃ᵀ V`.
    pub(crate) fn half_mul_t(&self, v: &DenseMatrix) -> DenseMatrix {
        self.permuted(v, |y| {
            self.mul_lt(y);
            self.scale_sqrt_d(y, false);
        })
    }
}
