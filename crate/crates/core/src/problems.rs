//! Deterministic generators for test operators and right-hand sides.
//!
//! All randomness comes from `ChaCha8Rng` seeded with `seed_from_u64`, so a
//! problem is reproducible from its kind, size and seed alone.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::distr::{Distribution, Open01, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::krylov;
use crate::la::BlockTridiagonal;
use crate::sparse::SparseSymmetric;

/// The named operator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// `(e^{-xy}u_x)_x + (e^{xy}u_y)_y` on the unit square.
    Fd2dExp,
    /// `(sin(xy)u_x)_x + (cos(xy)u_y)_y` on the unit square.
    Fd2dTrig,
    /// The exp operator in (x, y) plus `10 u_zz`, split as `AX + XB`.
    Fd3dSplit,
    Laplacian1d,
    Laplacian2d,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Fd2dExp => "fd2d-exp",
            ProblemKind::Fd2dTrig => "fd2d-trig",
            ProblemKind::Fd3dSplit => "fd3d-split",
            ProblemKind::Laplacian1d => "laplacian1d",
            ProblemKind::Laplacian2d => "laplacian2d",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fd2d-exp" => ProblemKind::Fd2dExp,
            "fd2d-trig" => ProblemKind::Fd2dTrig,
            "fd3d-split" => ProblemKind::Fd3dSplit,
            "laplacian1d" => ProblemKind::Laplacian1d,
            "laplacian2d" => ProblemKind::Laplacian2d,
            other => return Err(Error::InvalidArgument(format!("unknown problem kind '{other}'"))),
        })
    }
}

/// A generated problem: kind, grid points per dimension, block width, seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub s: usize,
    pub seed: u64,
    pub normalize: bool,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("grid size n = {} must be at least 2", self.n)));
        }
        if self.s < 1 {
            return Err(Error::InvalidArgument("block width s must be at least 1".into()));
        }
        Ok(())
    }

    /// The large coefficient matrix `A`.
    pub fn operator(&self) -> Result<SparseSymmetric> {
        self.validate()?;
        Ok(match self.kind {
            ProblemKind::Fd2dExp | ProblemKind::Fd3dSplit => gen_fd2d(Coefficients::Exp, self.n),
            ProblemKind::Fd2dTrig => gen_fd2d(Coefficients::Trig, self.n),
            ProblemKind::Laplacian2d => gen_fd2d(Coefficients::Unit, self.n),
            ProblemKind::Laplacian1d => laplacian1d(self.n),
        })
    }
}

/// Variable diffusion coefficients `(a, b)` of `(a u_x)_x + (b u_y)_y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficients {
    Exp,
    Trig,
    Unit,
}

impl Coefficients {
    fn eval(self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Coefficients::Exp => ((-x * y).exp(), (x * y).exp()),
            Coefficients::Trig => ((x * y).sin(), (x * y).cos()),
            Coefficients::Unit => (1.0, 1.0),
        }
    }
}

/// Five-point finite differences on the `n × n` interior grid of the unit
/// square, zero Dirichlet boundary, `h = 1/(n+1)`, coefficients evaluated at
/// interface midpoints. Unknown `(i, j)` (x index `i`) has index `j n + i`.
pub fn gen_fd2d(coeffs: Coefficients, n: usize) -> SparseSymmetric {
    let h = 1.0 / (n as f64 + 1.0);
    let h2 = h * h;
    let idx = |i: usize, j: usize| j * n + i;
    let mut trip = Vec::with_capacity(5 * n * n);
    for j in 0..n {
        for i in 0..n {
            let x = (i as f64 + 1.0) * h;
            let y = (j as f64 + 1.0) * h;
            let (a_w, _) = coeffs.eval(x - 0.5 * h, y);
            let (a_e, _) = coeffs.eval(x + 0.5 * h, y);
            let (_, b_s) = coeffs.eval(x, y - 0.5 * h);
            let (_, b_n) = coeffs.eval(x, y + 0.5 * h);
            let me = idx(i, j);
            trip.push((me, me, -(a_w + a_e + b_s + b_n) / h2));
            // Each edge weight is inserted once per direction from the same value.
            if i + 1 < n {
                let w = a_e / h2;
                trip.push((me, idx(i + 1, j), w));
                trip.push((idx(i + 1, j), me, w));
            }
            if j + 1 < n {
                let w = b_n / h2;
                trip.push((me, idx(i, j + 1), w));
                trip.push((idx(i, j + 1), me, w));
            }
        }
    }
    SparseSymmetric::from_triplets(n * n, &trip).expect("finite-difference stencil is symmetric")
}

/// `tridiag(1, −2, 1)/h²` with `h = 1/(n+1)`.
pub fn laplacian1d(n: usize) -> SparseSymmetric {
    let h = 1.0 / (n as f64 + 1.0);
    let h2 = h * h;
    let mut trip = Vec::with_capacity(3 * n);
    for i in 0..n {
        trip.push((i, i, -2.0 / h2));
        if i + 1 < n {
            trip.push((i, i + 1, 1.0 / h2));
            trip.push((i + 1, i, 1.0 / h2));
        }
    }
    SparseSymmetric::from_triplets(n, &trip).expect("1D Laplacian is symmetric")
}

/// Splitting of `(e^{-xy}u_x)_x + (e^{xy}u_y)_y + 10u_zz` on the unit cube:
/// `A` (n²×n²) discretizes the (x, y) part and `B = 10·laplacian1d(n)` the z
/// part. With z outermost, the 3D operator is `I ⊗ A + B ⊗ I`.
pub fn gen_fd3d_split(n: usize) -> (SparseSymmetric, SparseSymmetric) {
    (gen_fd2d(Coefficients::Exp, n), laplacian1d(n).scaled(10.0))
}

/// `n × s` matrix with entries uniform in (0, 1), Frobenius-normalized on
/// request.
pub fn gen_rhs(n: usize, s: usize, seed: u64, normalize: bool) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = DMatrix::from_fn(n, s, |_, _| Open01.sample(&mut rng));
    if normalize {
        let nrm = c.norm();
        c /= nrm;
    }
    c
}

/// Matrix with entries uniform in [−1, 1).
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new(-1.0, 1.0).expect("valid range");
    DMatrix::from_fn(rows, cols, |_, _| dist.sample(&mut rng))
}

/// Random symmetric block tridiagonal matrix shifted so that every
/// eigenvalue is at most `−margin` for some margin in [0.1, 1.1).
pub fn random_negdef_block_tridiagonal(l: usize, m: usize, seed: u64) -> BlockTridiagonal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let dist = Uniform::new(-1.0, 1.0).expect("valid range");
    let mut diag: Vec<DMatrix<f64>> = (0..m)
        .map(|_| {
            let b = DMatrix::from_fn(l, l, |_, _| dist.sample(&mut rng));
            (&b + b.transpose()) * 0.5
        })
        .collect();
    let off: Vec<DMatrix<f64>> = (1..m).map(|_| DMatrix::from_fn(l, l, |_, _| dist.sample(&mut rng))).collect();

    // Gershgorin bound on the largest eigenvalue.
    let k = l * m;
    let t = BlockTridiagonal::from_blocks(diag.clone(), off.clone()).expect("consistent blocks");
    let dense = t.to_dense();
    let mut upper = f64::NEG_INFINITY;
    for i in 0..k {
        let radius: f64 = (0..k).filter(|&j| j != i).map(|j| dense[(i, j)].abs()).sum();
        upper = upper.max(dense[(i, i)] + radius);
    }
    let margin = 0.1 + rng.random::<f64>();
    for d in diag.iter_mut() {
        for i in 0..l {
            d[(i, i)] -= upper + margin;
        }
    }
    BlockTridiagonal::from_blocks(diag, off).expect("consistent blocks")
}

/// Projected data of `m` block Lanczos steps on a diagonal operator with
/// eigenvalues log-uniform in `[−10^spread, −1]` and a random start block of
/// width `l`: returns `(T_m, γ, τ_{m+1,m})`.
///
/// Unlike [`random_negdef_block_tridiagonal`], the spectrum of `T_m` spreads
/// the way it does in an actual solve, so the residual decays slowly in `m`.
pub fn random_lanczos_projection(l: usize, m: usize, spread: f64, seed: u64) -> Result<(BlockTridiagonal, DMatrix<f64>, DMatrix<f64>)> {
    let n = 2 * l * (m + 1) + 20;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a09_e667_f3bc_c908);
    let diag: Vec<f64> = (0..n).map(|_| -(10f64).powf(spread * rng.random::<f64>())).collect();
    let op = SparseSymmetric::diagonal(&diag);
    let c = random_matrix(n, l, seed);
    let (mut window, mut state) = krylov::init_basis(&op, &c, krylov::Space::Standard, krylov::Storage::Windowed)?;
    for _ in 0..m {
        krylov::lanczos_step(&op, &mut window, &mut state)?;
    }
    Ok((state.t, state.gamma, state.tau_next))
}

/// Random sparse symmetric matrix with about `per_row` off-diagonal entries
/// per row, strictly diagonally dominant with negative diagonal so every
/// eigenvalue is at most −1.
pub fn random_negdef_sparse(n: usize, per_row: usize, seed: u64) -> SparseSymmetric {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new(-1.0, 1.0).expect("valid range");
    let mut trip = Vec::new();
    let mut radius = vec![0.0; n];
    if n > 1 {
        for i in 0..n {
            for _ in 0..per_row.div_ceil(2) {
                let j = rng.random_range(0..n);
                if j == i {
                    continue;
                }
                let v: f64 = dist.sample(&mut rng);
                trip.push((i, j, v));
                trip.push((j, i, v));
                radius[i] += v.abs();
                radius[j] += v.abs();
            }
        }
    }
    for (i, r) in radius.iter().enumerate() {
        let extra: f64 = rng.random::<f64>();
        trip.push((i, i, -(r + 1.0 + extra)));
    }
    SparseSymmetric::from_triplets(n, &trip).expect("symmetric by construction")
}

/// Random dense symmetric matrix with every eigenvalue at most −1.
pub fn random_negdef_dense(n: usize, seed: u64) -> DMatrix<f64> {
    let b = random_matrix(n, n, seed);
    let s = (&b + b.transpose()) * 0.5;
    let upper = (0..n)
        .map(|i| s[(i, i)] + (0..n).filter(|&j| j != i).map(|j| s[(i, j)].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = s;
    for i in 0..n {
        out[(i, i)] -= upper + 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn largest_eigenvalue(a: &SparseSymmetric) -> f64 {
        a.to_dense().symmetric_eigen().eigenvalues.max()
    }

    #[test]
    fn unit_coefficients_give_five_point_laplacian() {
        let a = gen_fd2d(Coefficients::Unit, 4);
        let h2 = (1.0f64 / 5.0).powi(2);
        // Interior node (1, 1) has all four neighbours.
        let me = 4 + 1;
        assert!((a.get(me, me) + 4.0 / h2).abs() < 1e-9);
        for nb in [me - 1, me + 1, me - 4, me + 4] {
            assert!((a.get(me, nb) - 1.0 / h2).abs() < 1e-9);
        }
        assert_eq!(a.row_nnz(me), 5);
    }

    #[test]
    fn fd_operators_are_exactly_symmetric_and_definite() {
        for coeffs in [Coefficients::Exp, Coefficients::Trig] {
            let a = gen_fd2d(coeffs, 16);
            let d = a.to_dense();
            assert_eq!(d, d.transpose());
            assert!(largest_eigenvalue(&a) < 0.0);
        }
    }

    #[test]
    fn smallest_grid_of_split_operator() {
        let (_, b) = gen_fd3d_split(2);
        let h2 = (1.0f64 / 3.0).powi(2);
        let want = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]) * (10.0 / h2);
        assert!((b.to_dense() - want).norm() < 1e-10);
    }

    /// Direct seven-point assembly of the 3D operator, z outermost.
    fn assemble_3d(n: usize) -> DMatrix<f64> {
        let h = 1.0 / (n as f64 + 1.0);
        let h2 = h * h;
        let total = n * n * n;
        let idx = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
        let mut m = DMatrix::zeros(total, total);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let (x, y) = ((i as f64 + 1.0) * h, (j as f64 + 1.0) * h);
                    let aw = (-(x - 0.5 * h) * y).exp();
                    let ae = (-(x + 0.5 * h) * y).exp();
                    let bs = (x * (y - 0.5 * h)).exp();
                    let bn = (x * (y + 0.5 * h)).exp();
                    let me = idx(i, j, k);
                    m[(me, me)] = -(aw + ae + bs + bn) / h2 - 20.0 / h2;
                    if i > 0 {
                        m[(me, idx(i - 1, j, k))] = aw / h2;
                    }
                    if i + 1 < n {
                        m[(me, idx(i + 1, j, k))] = ae / h2;
                    }
                    if j > 0 {
                        m[(me, idx(i, j - 1, k))] = bs / h2;
                    }
                    if j + 1 < n {
                        m[(me, idx(i, j + 1, k))] = bn / h2;
                    }
                    if k > 0 {
                        m[(me, idx(i, j, k - 1))] = 10.0 / h2;
                    }
                    if k + 1 < n {
                        m[(me, idx(i, j, k + 1))] = 10.0 / h2;
                    }
                }
            }
        }
        m
    }

    #[test]
    fn split_operator_reproduces_kronecker_sum() {
        let n = 3;
        let (a, b) = gen_fd3d_split(n);
        let (a, b) = (a.to_dense(), b.to_dense());
        let kron = DMatrix::<f64>::identity(n, n).kronecker(&a) + b.kronecker(&DMatrix::<f64>::identity(n * n, n * n));
        let direct = assemble_3d(n);
        assert!((kron - direct).amax() < 1e-9);
    }

    #[test]
    fn split_factors_are_definite() {
        let (a, b) = gen_fd3d_split(8);
        assert!(largest_eigenvalue(&a) < 0.0);
        assert!(largest_eigenvalue(&b) < 0.0);
    }

    #[test]
    fn rhs_is_normalized_and_reproducible() {
        let c = gen_rhs(100, 3, 42, true);
        assert!((c.norm() - 1.0).abs() < 1e-15);
        assert_eq!(c, gen_rhs(100, 3, 42, true));
        assert_ne!(c, gen_rhs(100, 3, 43, true));
    }

    #[test]
    fn rhs_entries_are_uniform_on_unit_interval() {
        let c = gen_rhs(2500, 4, 7, false);
        let mut v: Vec<f64> = c.iter().copied().collect();
        assert!(v.iter().all(|&x| x > 0.0 && x < 1.0));
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let d = v
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
        // Kolmogorov–Smirnov critical value at the 1% level.
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn laplacian_spectrum_scales_like_inverse_h_squared() {
        let mut prev: Option<f64> = None;
        for n in [8, 16, 32] {
            // Magnitude of the most negative eigenvalue.
            let a = gen_fd2d(Coefficients::Unit, n).to_dense();
            let big = -a.symmetric_eigen().eigenvalues.min();
            if let Some(p) = prev {
                let ratio = big / p;
                assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
            }
            prev = Some(big);
        }
    }

    #[test]
    fn spec_validation() {
        let spec = ProblemSpec { kind: ProblemKind::Laplacian2d, n: 1, s: 1, seed: 0, normalize: true };
        assert!(spec.operator().is_err());
        assert_eq!("fd2d-trig".parse::<ProblemKind>().unwrap(), ProblemKind::Fd2dTrig);
        assert!("nope".parse::<ProblemKind>().is_err());
    }
}
