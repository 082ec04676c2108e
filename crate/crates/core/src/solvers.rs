//! Galerkin projection drivers for Lyapunov and Sylvester equations.
//!
//! Each driver grows a Krylov basis, checks the residual norm of the current
//! Galerkin approximation every `check_period` steps from the projected data
//! only, and forms the low-rank factors once the relative residual drops
//! below `tol`. With [`Storage::Windowed`] the basis is regenerated at that
//! point from the recorded coefficients, so only a few blocks are ever held.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{dim_err, Error, Result};
use crate::krylov::{
    init_basis, replay_combination, step, stored_combination, BasisWindow, ProjectionState, Space, Storage,
};
use crate::la::{full_eig_blocktridiag, truncated_spd_factor, truncated_svd_factor, DenseMatrix, SymEigen, TRUNCATION_EPS};
use crate::residual::{ctri_lyapunov, ctri_sylvester, residual_one_sided, ResidualValue};
use crate::sparse::{cholesky_transform, LinearOperator, SparseSymmetric};

/// Options shared by all drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Relative residual tolerance.
    pub tol: f64,
    /// Largest number of basis steps.
    pub max_m: usize,
    /// Residual check every `check_period` steps.
    pub check_period: usize,
    pub space: Space,
    pub storage: Storage,
    /// Bound on the Frobenius norm dropped when truncating the reduced solution.
    pub trunc_eps: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-6,
            max_m: 500,
            check_period: 1,
            space: Space::Standard,
            storage: Storage::Windowed,
            trunc_eps: TRUNCATION_EPS,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.check_period == 0 {
            return Err(Error::InvalidArgument("check period must be at least 1".into()));
        }
        if self.max_m == 0 {
            return Err(Error::InvalidArgument("max_m must be at least 1".into()));
        }
        if !(self.trunc_eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("truncation tolerance must be nonnegative, got {}", self.trunc_eps)));
        }
        Ok(())
    }
}

/// One residual check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub m: usize,
    /// Dimension of the (left) approximation space.
    pub space_dim: usize,
    pub relative_residual: f64,
    pub cum_basis_secs: f64,
    pub cum_residual_secs: f64,
}

/// Wall-clock split of a solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub basis_secs: f64,
    pub residual_secs: f64,
    pub recovery_secs: f64,
}

/// Basis storage telemetry, in `n`-vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Telemetry {
    /// Most vectors held at once by the basis builders.
    pub peak_basis_vectors: usize,
    /// Vectors a fully stored basis of the final dimension needs.
    pub full_basis_vectors: usize,
}

/// What truncating the reduced solution discarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationReport {
    pub eps: f64,
    /// Frobenius norm of the dropped eigen- or singular values.
    pub discarded_mass: f64,
    /// `‖Ỹ − Y̌Y̌ᵀ‖_F` (or `‖Ỹ − Ŷ₁Ŷ₂ᵀ‖_F`), evaluated explicitly.
    pub reconstruction_error: f64,
    /// Dimension of the reduced problem.
    pub reduced_dim: usize,
}

/// Low-rank approximate solution `X ≈ Z₁Z₂ᵀ` (`Z₂ = Z₁` for Lyapunov).
#[derive(Debug, Clone)]
pub struct LowRankSolution {
    pub z1: DenseMatrix,
    /// `None` for Lyapunov equations, where `X ≈ Z₁Z₁ᵀ`.
    pub z2: Option<DenseMatrix>,
    pub iterations: usize,
    /// Last checked residual.
    pub residual: ResidualValue,
    pub history: Vec<HistoryEntry>,
    pub timings: Timings,
    pub telemetry: Telemetry,
    pub truncation: TruncationReport,
}

impl LowRankSolution {
    pub fn rank(&self) -> usize {
        self.z1.ncols()
    }

    pub fn z2(&self) -> &DenseMatrix {
        self.z2.as_ref().unwrap_or(&self.z1)
    }

    /// `Z₁Z₂ᵀ`, for small problems.
    pub fn to_dense(&self) -> DenseMatrix {
        &self.z1 * self.z2().transpose()
    }
}

/// A basis under construction for one coefficient matrix.
struct Side<'a, O: ?Sized> {
    op: &'a O,
    c: &'a DenseMatrix,
    window: BasisWindow,
    state: ProjectionState,
}

impl<'a, O: LinearOperator + ?Sized> Side<'a, O> {
    fn new(op: &'a O, c: &'a DenseMatrix, opts: &SolveOptions) -> Result<Self> {
        let (window, state) = init_basis(op, c, opts.space, opts.storage)?;
        Ok(Side { op, c, window, state })
    }

    /// One step; `Ok(true)` when the space became invariant at this step.
    /// An invariant space is left as it is.
    fn advance(&mut self) -> Result<bool> {
        if self.state.invariant {
            return Ok(false);
        }
        match step(self.op, &mut self.window, &mut self.state) {
            Ok(()) => Ok(false),
            Err(Error::InvariantSubspace { .. }) => Ok(true),
            Err(e) => Err(e),
        }
    }

    fn dim(&self) -> usize {
        self.state.t.dim()
    }

    /// `τ_{m+1,m}` as used by the residual formulas.
    fn tau(&self) -> DenseMatrix {
        match self.window.space() {
            Space::Standard => self.state.tau_next.clone(),
            Space::Extended => self.state.tau_bar(),
        }
    }

    fn eig(&self) -> Result<SymEigen> {
        full_eig_blocktridiag(&self.state.t)
    }

    /// `(QᵀE₁γ)`, `ℓm × s`.
    fn projected_rhs(&self, eig: &SymEigen) -> DenseMatrix {
        let s = self.state.gamma.nrows();
        eig.vectors.rows(0, s).transpose() * &self.state.gamma
    }

    fn combine(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        if g.ncols() == 0 {
            return Ok(DMatrix::zeros(self.op.dim(), 0));
        }
        match self.window.storage() {
            Storage::Stored => stored_combination(&self.window, g),
            Storage::Windowed => two_pass_recover(self.op, self.c, &self.window, &self.state, g),
        }
    }
}

/// `Σᵢ Vᵢ Gᵢ` for a windowed run: reruns the basis recurrence with the
/// recorded coefficients and accumulates the product block by block.
/// Extended runs reuse their stored `A⁻¹` halves and never solve with `A`.
pub fn two_pass_recover<O: LinearOperator + ?Sized>(
    op: &O,
    c: &DenseMatrix,
    window: &BasisWindow,
    state: &ProjectionState,
    g: &DenseMatrix,
) -> Result<DenseMatrix> {
    replay_combination(op, c, window, state, g)
}

/// `Ỹᵢⱼ = −(aᵢ·bⱼ)/(λᵢ+μⱼ)`.
fn diagonal_coordinates(a: &DenseMatrix, b: &DenseMatrix, lambda: &[f64], mu: &[f64]) -> Result<DenseMatrix> {
    let s = a * b.transpose();
    let scale = lambda.iter().chain(mu).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut y = DMatrix::zeros(lambda.len(), mu.len());
    for (j, &mj) in mu.iter().enumerate() {
        for (i, &li) in lambda.iter().enumerate() {
            let d = li + mj;
            if !(d.abs() >= crate::residual::DENOMINATOR_TOL * scale) {
                return Err(Error::SingularDenominator { i, j, value: d });
            }
            y[(i, j)] = -s[(i, j)] / d;
        }
    }
    Ok(y)
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn check_due(m: usize, opts: &SolveOptions, invariant: bool) -> bool {
    invariant || m.is_multiple_of(opts.check_period) || m == opts.max_m
}

/// Galerkin solution of `AX + XA + CCᵀ = 0` for symmetric negative
/// definite `A`, as `X ≈ ZZᵀ`.
///
/// Fails with [`Error::NotConverged`] (carrying the residual history) when
/// `max_m` steps do not reach `tol`.
pub fn solve_lyapunov<O: LinearOperator + ?Sized>(op: &O, c: &DenseMatrix, opts: &SolveOptions) -> Result<LowRankSolution> {
    opts.validate()?;
    let mut timings = Timings::default();
    let start = Instant::now();
    let mut side = Side::new(op, c, opts)?;
    timings.basis_secs += secs(start);
    let mut history = Vec::new();
    let mut last: Option<ResidualValue> = None;
    for m in 1..=opts.max_m {
        let t0 = Instant::now();
        let invariant = side.advance()?;
        timings.basis_secs += secs(t0);
        if !check_due(m, opts, invariant) {
            continue;
        }
        let t0 = Instant::now();
        let r = ctri_lyapunov(&side.state.t, &side.state.gamma, &side.tau())?;
        timings.residual_secs += secs(t0);
        history.push(HistoryEntry {
            m,
            space_dim: side.dim(),
            relative_residual: r.relative,
            cum_basis_secs: timings.basis_secs,
            cum_residual_secs: timings.residual_secs,
        });
        last = Some(r);
        if r.relative <= opts.tol || invariant {
            let t0 = Instant::now();
            let eig = side.eig()?;
            let g = side.projected_rhs(&eig);
            let ytilde = diagonal_coordinates(&g, &g, &eig.values, &eig.values)?;
            let trunc = truncated_spd_factor(&ytilde, opts.trunc_eps)?;
            let recon = (&ytilde - &trunc.factor * trunc.factor.transpose()).norm();
            let z = side.combine(&(&eig.vectors * &trunc.factor))?;
            timings.recovery_secs += secs(t0);
            return Ok(LowRankSolution {
                z1: z,
                z2: None,
                iterations: m,
                residual: r,
                history,
                timings,
                telemetry: Telemetry {
                    peak_basis_vectors: side.window.peak_vectors(),
                    full_basis_vectors: side.dim(),
                },
                truncation: TruncationReport {
                    eps: opts.trunc_eps,
                    discarded_mass: trunc.discarded_mass,
                    reconstruction_error: recon,
                    reduced_dim: side.dim(),
                },
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_m,
        last: last.map(|r| r.relative).unwrap_or(f64::NAN),
        history: history.iter().map(|h| (h.m, h.relative_residual)).collect(),
    })
}

/// Solves `AXE + EXA + CCᵀ = 0` for symmetric positive definite `E` through
/// the equivalent standard equation for `L⁻¹AL⁻ᵀ`, `E = LLᵀ`. The returned
/// factor satisfies `X ≈ ZZᵀ`; the reported residuals refer to the
/// transformed equation.
pub fn solve_generalized_lyapunov<O: LinearOperator + ?Sized>(
    a: &O,
    e: &SparseSymmetric,
    c: &DenseMatrix,
    opts: &SolveOptions,
) -> Result<LowRankSolution> {
    let t = cholesky_transform(e, a)?;
    let ct = t.transform_rhs(c)?;
    let mut sol = solve_lyapunov(&t, &ct, opts)?;
    sol.z1 = t.recover_factor(&sol.z1)?;
    Ok(sol)
}

/// Galerkin solution of `AX + XB + C₁C₂ᵀ = 0` with bases for both `A` and
/// `B` grown in lockstep, as `X ≈ Z₁Z₂ᵀ`. A side whose Krylov space becomes
/// invariant keeps its dimension while the other side continues.
pub fn solve_sylvester_two_sided<A, B>(
    op_a: &A,
    op_b: &B,
    c1: &DenseMatrix,
    c2: &DenseMatrix,
    opts: &SolveOptions,
) -> Result<LowRankSolution>
where
    A: LinearOperator + ?Sized,
    B: LinearOperator + ?Sized,
{
    opts.validate()?;
    if c1.ncols() != c2.ncols() {
        return Err(dim_err("solve_sylvester_two_sided C₂ columns", c1.ncols(), c2.ncols()));
    }
    let mut timings = Timings::default();
    let start = Instant::now();
    let mut left = Side::new(op_a, c1, opts)?;
    let mut right = Side::new(op_b, c2, opts)?;
    timings.basis_secs += secs(start);
    let mut history = Vec::new();
    let mut last: Option<ResidualValue> = None;
    for m in 1..=opts.max_m {
        let t0 = Instant::now();
        // A side whose space became invariant stops growing; its residual
        // term is zero from then on and the other side continues alone.
        let newly = left.advance()? | right.advance()?;
        timings.basis_secs += secs(t0);
        let both = left.state.invariant && right.state.invariant;
        if !check_due(m, opts, newly) {
            continue;
        }
        let t0 = Instant::now();
        let r = ctri_sylvester(
            &left.state.t,
            &right.state.t,
            &left.state.gamma,
            &right.state.gamma,
            &left.tau(),
            &right.tau(),
        )?;
        timings.residual_secs += secs(t0);
        history.push(HistoryEntry {
            m,
            space_dim: left.dim(),
            relative_residual: r.relative,
            cum_basis_secs: timings.basis_secs,
            cum_residual_secs: timings.residual_secs,
        });
        last = Some(r);
        if r.relative <= opts.tol || both {
            let t0 = Instant::now();
            let ea = left.eig()?;
            let eb = right.eig()?;
            let ytilde = diagonal_coordinates(&left.projected_rhs(&ea), &right.projected_rhs(&eb), &ea.values, &eb.values)?;
            let (f1, f2) = truncated_svd_factor(&ytilde, opts.trunc_eps)?;
            let recon = (&ytilde - &f1.factor * f2.factor.transpose()).norm();
            let z1 = left.combine(&(&ea.vectors * &f1.factor))?;
            let z2 = right.combine(&(&eb.vectors * &f2.factor))?;
            timings.recovery_secs += secs(t0);
            return Ok(LowRankSolution {
                z1,
                z2: Some(z2),
                iterations: m,
                residual: r,
                history,
                timings,
                telemetry: Telemetry {
                    peak_basis_vectors: left.window.peak_vectors() + right.window.peak_vectors(),
                    full_basis_vectors: left.dim() + right.dim(),
                },
                truncation: TruncationReport {
                    eps: opts.trunc_eps,
                    discarded_mass: f1.discarded_mass,
                    reconstruction_error: recon,
                    reduced_dim: left.dim(),
                },
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_m,
        last: last.map(|r| r.relative).unwrap_or(f64::NAN),
        history: history.iter().map(|h| (h.m, h.relative_residual)).collect(),
    })
}

/// Galerkin solution of `AX + XB + C₁C₂ᵀ = 0` for large `A` and small dense
/// symmetric `B`, projecting from the left only: `X ≈ Z₁Z₂ᵀ` with
/// `Z₁ = V(QŶ₁)`, `Z₂ = PŶ₂` where `B = PΥPᵀ`.
pub fn solve_sylvester_one_sided<A: LinearOperator + ?Sized>(
    op_a: &A,
    b: &DenseMatrix,
    c1: &DenseMatrix,
    c2: &DenseMatrix,
    opts: &SolveOptions,
) -> Result<LowRankSolution> {
    opts.validate()?;
    let n2 = b.nrows();
    if b.ncols() != n2 {
        return Err(dim_err("solve_sylvester_one_sided B", format!("{n2}x{n2}"), format!("{:?}", b.shape())));
    }
    if c2.shape() != (n2, c1.ncols()) {
        return Err(dim_err("solve_sylvester_one_sided C₂", format!("{n2}x{}", c1.ncols()), format!("{:?}", c2.shape())));
    }
    for i in 0..n2 {
        for j in 0..i {
            if b[(i, j)] != b[(j, i)] {
                return Err(Error::Asymmetric { i, j, aij: b[(i, j)], aji: b[(j, i)] });
            }
        }
    }
    let mut timings = Timings::default();
    let start = Instant::now();
    let eb = b.clone().symmetric_eigen();
    let upsilon: Vec<f64> = eb.eigenvalues.iter().copied().collect();
    let p = eb.eigenvectors;
    let pc2 = p.transpose() * c2;
    let mut side = Side::new(op_a, c1, opts)?;
    timings.basis_secs += secs(start);
    let mut history = Vec::new();
    let mut last: Option<ResidualValue> = None;
    for m in 1..=opts.max_m {
        let t0 = Instant::now();
        let invariant = side.advance()?;
        timings.basis_secs += secs(t0);
        if !check_due(m, opts, invariant) {
            continue;
        }
        let t0 = Instant::now();
        let r = residual_one_sided(&side.state.t, &side.tau(), &side.state.gamma, &pc2, &upsilon)?;
        timings.residual_secs += secs(t0);
        history.push(HistoryEntry {
            m,
            space_dim: side.dim(),
            relative_residual: r.relative,
            cum_basis_secs: timings.basis_secs,
            cum_residual_secs: timings.residual_secs,
        });
        last = Some(r);
        if r.relative <= opts.tol || invariant {
            let t0 = Instant::now();
            let ea = side.eig()?;
            let ytilde = diagonal_coordinates(&side.projected_rhs(&ea), &pc2, &ea.values, &upsilon)?;
            let (f1, f2) = truncated_svd_factor(&ytilde, opts.trunc_eps)?;
            let recon = (&ytilde - &f1.factor * f2.factor.transpose()).norm();
            let z1 = side.combine(&(&ea.vectors * &f1.factor))?;
            let z2 = &p * &f2.factor;
            timings.recovery_secs += secs(t0);
            return Ok(LowRankSolution {
                z1,
                z2: Some(z2),
                iterations: m,
                residual: r,
                history,
                timings,
                telemetry: Telemetry {
                    peak_basis_vectors: side.window.peak_vectors(),
                    full_basis_vectors: side.dim(),
                },
                truncation: TruncationReport {
                    eps: opts.trunc_eps,
                    discarded_mass: f1.discarded_mass,
                    reconstruction_error: recon,
                    reduced_dim: side.dim(),
                },
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_m,
        last: last.map(|r| r.relative).unwrap_or(f64::NAN),
        history: history.iter().map(|h| (h.m, h.relative_residual)).collect(),
    })
}
