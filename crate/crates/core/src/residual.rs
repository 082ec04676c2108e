//! Residual norms of the Galerkin approximations from projected data only.
//!
//! With `T = QΛQᵀ` the reduced Lyapunov solution is `Y = QỸQᵀ`,
//! `Ỹᵢⱼ = −Sᵢⱼ/(λᵢ+λⱼ)` and `S = (QᵀE₁γ)(QᵀE₁γ)ᵀ`. The residual
//! `√2‖Y E_m τᵀ‖_F` then only needs `Λ` and the first and last `ℓ` rows of
//! `Q`, so each check costs `O(ℓ(ℓm)²)` and `Y` is never formed.

use crate::error::{dim_err, Error, Result};
use crate::la::{partial_eig_blocktridiag, BlockTridiagonal, DenseMatrix, PartialSpectral};

/// Absolute and relative residual norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualValue {
    /// `‖R‖_F`.
    pub res: f64,
    /// `res` divided by `‖C‖²_F` (Lyapunov) or `‖C₁‖_F‖C₂‖_F` (Sylvester).
    pub relative: f64,
}

impl ResidualValue {
    pub fn new(res: f64, scale: f64) -> Self {
        let relative = if scale > 0.0 { res / scale } else { res };
        ResidualValue { res, relative }
    }
}

/// Relative size below which `λᵢ + μⱼ` counts as zero.
pub const DENOMINATOR_TOL: f64 = 1e-14;

/// Row-major copy, one `Vec` per row, for the inner loops.
fn rows_of(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn check_block(t: &BlockTridiagonal, what: &'static str) -> Result<()> {
    if t.num_blocks() == 0 {
        return Err(Error::InvalidArgument(format!("{what} has no blocks")));
    }
    Ok(())
}

/// `(E₁ᵀQ)ᵀγ` with `γ` embedded in the leading rows of the first block.
fn first_projection(spec: &PartialSpectral, gamma: &DenseMatrix, what: &'static str) -> Result<DenseMatrix> {
    let l = spec.first_rows.nrows();
    let s = gamma.nrows();
    if s > l {
        return Err(dim_err(what, format!("at most {l} rows"), s));
    }
    Ok(spec.first_rows.rows(0, s).transpose() * gamma)
}

/// `(E_mᵀQ)ᵀτᵀ`; `τ` may be the full `ℓ×ℓ` coupling or its nonzero rows.
fn last_projection(spec: &PartialSpectral, tau: &DenseMatrix, what: &'static str) -> Result<DenseMatrix> {
    let l = spec.last_rows.nrows();
    if tau.ncols() != l {
        return Err(dim_err(what, format!("{l} columns"), tau.ncols()));
    }
    Ok(spec.last_rows.transpose() * tau.transpose())
}

fn denominator(li: f64, mj: f64, i: usize, j: usize, scale: f64) -> Result<f64> {
    let d = li + mj;
    if !(d.abs() >= DENOMINATOR_TOL * scale) {
        return Err(Error::SingularDenominator { i, j, value: d });
    }
    Ok(d)
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `Σ_p ‖Σ_q (a_p · b_q)/(λ_p + μ_q) · w_q‖²` where `a_p`, `b_q` are rows of
/// `a`, `b` and `w_q` rows of `w`.
fn scaled_sum(a: &DenseMatrix, b: &DenseMatrix, lambda: &[f64], mu: &[f64], w: &DenseMatrix) -> Result<f64> {
    let scale = max_abs(lambda).max(max_abs(mu));
    let sm = a * b.transpose();
    let wr = rows_of(w);
    let r = w.ncols();
    let mut total = 0.0;
    let mut acc = vec![0.0; r];
    for (p, &lp) in lambda.iter().enumerate() {
        acc.iter_mut().for_each(|x| *x = 0.0);
        for (q, &mq) in mu.iter().enumerate() {
            let coef = sm[(p, q)] / denominator(lp, mq, p, q, scale)?;
            for (x, wv) in acc.iter_mut().zip(&wr[q]) {
                *x += coef * wv;
            }
        }
        total += acc.iter().map(|x| x * x).sum::<f64>();
    }
    Ok(total)
}

/// `‖AX_m + X_mA + CCᵀ‖_F` for the Galerkin approximation on `m` steps.
///
/// `gamma` is `s×s` with `C = V₁E₁γ`; `tau` is `τ_{m+1,m}` (or its first
/// `s` rows in extended mode).
pub fn ctri_lyapunov(t: &BlockTridiagonal, gamma: &DenseMatrix, tau: &DenseMatrix) -> Result<ResidualValue> {
    check_block(t, "ctri_lyapunov T")?;
    let spec = partial_eig_blocktridiag(t)?;
    ctri_lyapunov_spectral(&spec, gamma, tau)
}

/// [`ctri_lyapunov`] from an already computed partial spectral decomposition.
pub fn ctri_lyapunov_spectral(spec: &PartialSpectral, gamma: &DenseMatrix, tau: &DenseMatrix) -> Result<ResidualValue> {
    let g = first_projection(spec, gamma, "ctri_lyapunov γ")?;
    let w = last_projection(spec, tau, "ctri_lyapunov τ")?;
    let lam = &spec.eigenvalues;
    let sum = scaled_sum(&g, &g, lam, lam, &w)?;
    let beta2 = gamma.norm_squared();
    Ok(ResidualValue::new((2.0 * sum).sqrt(), beta2))
}

/// `‖AX_m + X_mB + C₁C₂ᵀ‖_F` for two-sided projection, `X_m = V Y Uᵀ`.
///
/// `T`, `J` are the projections of `A` and `B`; `τ`, `ι` their couplings to
/// the next blocks.
pub fn ctri_sylvester(
    t: &BlockTridiagonal,
    j: &BlockTridiagonal,
    gamma1: &DenseMatrix,
    gamma2: &DenseMatrix,
    tau: &DenseMatrix,
    iota: &DenseMatrix,
) -> Result<ResidualValue> {
    check_block(t, "ctri_sylvester T")?;
    check_block(j, "ctri_sylvester J")?;
    if gamma1.ncols() != gamma2.ncols() {
        return Err(dim_err("ctri_sylvester γ₂ columns", gamma1.ncols(), gamma2.ncols()));
    }
    let st = partial_eig_blocktridiag(t)?;
    let sj = partial_eig_blocktridiag(j)?;
    let g1 = first_projection(&st, gamma1, "ctri_sylvester γ₁")?;
    let g2 = first_projection(&sj, gamma2, "ctri_sylvester γ₂")?;
    let f = last_projection(&st, tau, "ctri_sylvester τ")?;
    let g = last_projection(&sj, iota, "ctri_sylvester ι")?;
    // ‖Ỹ G‖² over the rows of Ỹ, then ‖Ỹᵀ F‖² over its columns.
    let left = scaled_sum(&g1, &g2, &st.eigenvalues, &sj.eigenvalues, &g)?;
    let right = scaled_sum(&g2, &g1, &sj.eigenvalues, &st.eigenvalues, &f)?;
    Ok(ResidualValue::new((left + right).sqrt(), gamma1.norm() * gamma2.norm()))
}

/// `‖AX_m + X_mB + C₁C₂ᵀ‖_F` with only `A` projected, `X_m = V Y`.
///
/// `upsilon` holds the eigenvalues of the small dense `B = PΥPᵀ` and
/// `pc2 = PᵀC₂`.
pub fn residual_one_sided(
    t: &BlockTridiagonal,
    tau: &DenseMatrix,
    gamma1: &DenseMatrix,
    pc2: &DenseMatrix,
    upsilon: &[f64],
) -> Result<ResidualValue> {
    check_block(t, "residual_one_sided T")?;
    if pc2.nrows() != upsilon.len() {
        return Err(dim_err("residual_one_sided PᵀC₂ rows", upsilon.len(), pc2.nrows()));
    }
    if pc2.ncols() != gamma1.ncols() {
        return Err(dim_err("residual_one_sided PᵀC₂ columns", gamma1.ncols(), pc2.ncols()));
    }
    let spec = partial_eig_blocktridiag(t)?;
    let g1 = first_projection(&spec, gamma1, "residual_one_sided γ₁")?;
    let w = last_projection(&spec, tau, "residual_one_sided τ")?;
    let sum = scaled_sum(pc2, &g1, upsilon, &spec.eigenvalues, &w)?;
    Ok(ResidualValue::new(sum.sqrt(), gamma1.norm() * pc2.norm()))
}
