//! Block Lanczos and extended block Krylov bases.
//!
//! Both builders orthogonalize the new block twice against the two most
//! recent blocks with block modified Gram-Schmidt and then take an economy QR.
//! For symmetric `A` that is enough to produce the block tridiagonal
//! projection `T = VᵀAV`; older blocks lose orthogonality slowly and are not
//! touched again.
//!
//! Every coefficient used in the orthogonalization is kept, so a windowed run
//! can regenerate its discarded blocks afterwards with exactly the same
//! floating point operations (see [`replay_combination`]).

use std::fmt;
use std::str::FromStr;

use crate::error::{dim_err, Error, Result};
use crate::la::kernels::{add_mul, columns, fro_norm, hcat, sub_mul, tr_mul};
use crate::la::{economy_qr, economy_qr_scaled, BlockTridiagonal, DenseMatrix, RANK_TOL};
use crate::sparse::{block_apply, block_solve, LinearOperator};

/// Which Krylov space is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// `K(A, C)`, block size `s`.
    Standard,
    /// `EK(A, C)`, block size `2s`; needs `A⁻¹`.
    Extended,
}

/// How much of the basis is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    /// Keep only the two most recent blocks; the rest is regenerated after
    /// convergence.
    Windowed,
    /// Keep every block.
    Stored,
}

impl FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Space::Standard),
            "extended" => Ok(Space::Extended),
            other => Err(Error::InvalidArgument(format!("unknown space '{other}' (standard or extended)"))),
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Standard => "standard",
            Space::Extended => "extended",
        })
    }
}

impl FromStr for Storage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "windowed" => Ok(Storage::Windowed),
            "stored" => Ok(Storage::Stored),
            other => Err(Error::InvalidArgument(format!("unknown storage '{other}' (windowed or stored)"))),
        }
    }
}

impl fmt::Display for Storage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Storage::Windowed => "windowed",
            Storage::Stored => "stored",
        })
    }
}

/// Orthogonalization data of one step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// `sweeps[l][k]` is the coefficient block removed in sweep `l` against
    /// the `k`-th block of the window (oldest first).
    pub sweeps: Vec<Vec<DenseMatrix>>,
    /// `R` of the final QR, the coupling `V_{j+1}R = W`.
    pub r: DenseMatrix,
}

impl StepRecord {
    /// Total coefficient against window block `k`.
    pub fn coefficient(&self, k: usize) -> DenseMatrix {
        let mut sum = self.sweeps[0][k].clone();
        for sweep in &self.sweeps[1..] {
            sum += &sweep[k];
        }
        sum
    }
}

/// The basis blocks currently held in memory.
#[derive(Debug, Clone)]
pub struct BasisWindow {
    space: Space,
    storage: Storage,
    s: usize,
    /// Index (0-based) of `blocks[0]` in the full basis.
    first: usize,
    blocks: Vec<DenseMatrix>,
    /// Extended windowed mode: the `A⁻¹` halves of every block.
    second_halves: Vec<DenseMatrix>,
    peak_vectors: usize,
}

impl BasisWindow {
    pub fn space(&self) -> Space {
        self.space
    }

    pub fn storage(&self) -> Storage {
        self.storage
    }

    pub fn block_size(&self) -> usize {
        match self.space {
            Space::Standard => self.s,
            Space::Extended => 2 * self.s,
        }
    }

    /// Number of basis blocks generated so far, including the newest one.
    pub fn generated(&self) -> usize {
        self.first + self.blocks.len()
    }

    /// Block `i` (0-based), if it is still held.
    pub fn block(&self, i: usize) -> Option<&DenseMatrix> {
        i.checked_sub(self.first).and_then(|k| self.blocks.get(k))
    }

    pub fn newest(&self) -> &DenseMatrix {
        self.blocks.last().expect("a basis window always holds a block")
    }

    /// Largest number of `n`-vectors held at once, counting the block under
    /// construction.
    pub fn peak_vectors(&self) -> usize {
        self.peak_vectors
    }

    /// `[V_1, …, V_k]` for the first `k` blocks, stored mode only.
    pub fn basis(&self, k: usize) -> Option<DenseMatrix> {
        if self.first != 0 || k == 0 || k > self.blocks.len() {
            return None;
        }
        let n = self.blocks[0].nrows();
        let l = self.block_size();
        let mut v = DenseMatrix::zeros(n, l * k);
        for (i, b) in self.blocks[..k].iter().enumerate() {
            v.view_mut((0, i * l), (n, l)).copy_from(b);
        }
        Some(v)
    }

    fn held_vectors(&self) -> usize {
        self.blocks.len() * self.block_size() + self.second_halves.len() * self.s
    }

    fn note_peak(&mut self, extra: usize) {
        self.peak_vectors = self.peak_vectors.max(self.held_vectors() + extra);
    }

    fn push(&mut self, block: DenseMatrix) {
        if self.space == Space::Extended && self.storage == Storage::Windowed {
            self.second_halves.push(columns(&block, self.s, self.s));
        }
        self.blocks.push(block);
        if self.storage == Storage::Windowed && self.blocks.len() > 2 {
            self.blocks.remove(0);
            self.first += 1;
        }
    }
}

/// Projected data accumulated by the basis builders.
#[derive(Debug, Clone)]
pub struct ProjectionState {
    /// `T_m = V_mᵀAV_m` after `m` completed steps.
    pub t: BlockTridiagonal,
    /// `C = V₁ E₁ γ`, `s×s`.
    pub gamma: DenseMatrix,
    /// `τ_{m+1,m}`; zero once an invariant subspace is found.
    pub tau_next: DenseMatrix,
    /// Completed steps.
    pub m: usize,
    /// Extended mode: `R` of the QR of `[C, A⁻¹C]`.
    pub r0: Option<DenseMatrix>,
    /// Per-step orthogonalization records.
    pub steps: Vec<StepRecord>,
    /// Set when the last step found `W = 0`.
    pub invariant: bool,
}

impl ProjectionState {
    /// `τ_{m+1,m}` restricted to its first `s` rows, the only nonzero ones
    /// in extended mode.
    pub fn tau_bar(&self) -> DenseMatrix {
        let s = self.gamma.nrows();
        self.tau_next.rows(0, s).into_owned()
    }
}

fn check_finite(m: &DenseMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// QR of the starting block. Returns `V₁`, `γ` and, in extended mode, the
/// `R` factor of `[C, A⁻¹C]`.
fn first_block<O: LinearOperator + ?Sized>(
    op: &O,
    c: &DenseMatrix,
    space: Space,
) -> Result<(DenseMatrix, DenseMatrix, Option<DenseMatrix>)> {
    let s = c.ncols();
    match space {
        Space::Standard => {
            let qr = economy_qr(c)?;
            Ok((qr.q, qr.r, None))
        }
        Space::Extended => {
            let ac = block_solve(op, c)?;
            check_finite(&ac, "A⁻¹C")?;
            let qr = economy_qr(&hcat(c, &ac))?;
            let gamma = qr.r.view((0, 0), (s, s)).into_owned();
            Ok((qr.q, gamma, Some(qr.r)))
        }
    }
}

/// Orthonormalizes `C` (or `[C, A⁻¹C]` in extended mode) into the first
/// basis block.
pub fn init_basis<O: LinearOperator + ?Sized>(
    op: &O,
    c: &DenseMatrix,
    space: Space,
    storage: Storage,
) -> Result<(BasisWindow, ProjectionState)> {
    let (n, s) = c.shape();
    if n != op.dim() {
        return Err(dim_err("init_basis", op.dim(), n));
    }
    if s == 0 || s > n || (space == Space::Extended && 2 * s > n) {
        return Err(Error::InvalidArgument(format!("block of {s} columns does not fit dimension {n}")));
    }
    check_finite(c, "C")?;
    if space == Space::Extended && !op.has_inverse() {
        return Err(Error::NoInverse);
    }
    let (v1, gamma, r0) = first_block(op, c, space)?;
    let l = v1.ncols();
    let mut window = BasisWindow {
        space,
        storage,
        s,
        first: 0,
        blocks: Vec::new(),
        second_halves: Vec::new(),
        peak_vectors: 0,
    };
    window.push(v1);
    window.note_peak(0);
    let state = ProjectionState {
        t: BlockTridiagonal::new(l),
        gamma,
        tau_next: DenseMatrix::zeros(l, l),
        m: 0,
        r0,
        steps: Vec::new(),
        invariant: false,
    };
    Ok((window, state))
}

/// Two block MGS sweeps of `w` against the window blocks, oldest first.
fn orthogonalize(w: &mut DenseMatrix, blocks: &[&DenseMatrix]) -> Vec<Vec<DenseMatrix>> {
    (0..2)
        .map(|_| {
            blocks
                .iter()
                .map(|v| {
                    let alpha = tr_mul(v, w);
                    sub_mul(w, v, &alpha);
                    alpha
                })
                .collect()
        })
        .collect()
}

/// QR of the orthogonalized block. `Ok(None)` signals `W = 0` (an invariant
/// subspace); a partially vanishing block is an error.
fn next_block(w: &DenseMatrix, scale: f64) -> Result<Option<(DenseMatrix, DenseMatrix)>> {
    check_finite(w, "Krylov block")?;
    if fro_norm(w) <= RANK_TOL * scale {
        return Ok(None);
    }
    match economy_qr_scaled(w, scale) {
        Ok(qr) => Ok(Some((qr.q, qr.r))),
        Err(Error::RankDeficient { column, value, tol, .. }) => Err(Error::RankDeficient {
            context: "new Krylov block",
            column,
            value,
            tol,
        }),
        Err(e) => Err(e),
    }
}

fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    (m + m.transpose()) * 0.5
}

/// The current window blocks, oldest first, that the new block must be
/// orthogonalized against.
fn window_refs(window: &BasisWindow) -> Vec<&DenseMatrix> {
    let g = window.generated();
    (g.saturating_sub(2)..g).map(|i| window.block(i).expect("window holds the last two blocks")).collect()
}

fn finish_step(
    window: &mut BasisWindow,
    state: &mut ProjectionState,
    sweeps: Vec<Vec<DenseMatrix>>,
    next: Option<(DenseMatrix, DenseMatrix)>,
    diag: DenseMatrix,
    tau_next: DenseMatrix,
) -> Result<()> {
    let l = window.block_size();
    let lower = if state.m == 0 { None } else { Some(state.tau_next.clone()) };
    state.t.push(lower, diag)?;
    state.m += 1;
    match next {
        Some((v, r)) => {
            state.steps.push(StepRecord { sweeps, r });
            state.tau_next = tau_next;
            window.push(v);
            Ok(())
        }
        None => {
            state.steps.push(StepRecord {
                sweeps,
                r: DenseMatrix::zeros(l, l),
            });
            state.tau_next = DenseMatrix::zeros(l, l);
            state.invariant = true;
            Err(Error::InvariantSubspace { step: state.m })
        }
    }
}

/// One block Lanczos step: `W = AV_m`, two MGS sweeps against `V_{m−1}, V_m`,
/// then `W = V_{m+1}τ_{m+1,m}`. Appends `τ_{m,m}` and `τ_{m+1,m}` to the
/// state.
///
/// When `W` vanishes the space is invariant: `T_m` is still appended,
/// `τ_{m+1,m}` is set to zero and [`Error::InvariantSubspace`] is returned.
pub fn lanczos_step<O: LinearOperator + ?Sized>(
    op: &O,
    window: &mut BasisWindow,
    state: &mut ProjectionState,
) -> Result<()> {
    if window.space != Space::Standard {
        return Err(Error::InvalidArgument("lanczos_step needs a standard Krylov window".into()));
    }
    if state.invariant {
        return Err(Error::InvariantSubspace { step: state.m });
    }
    window.note_peak(window.block_size());
    let mut w = block_apply(op, window.newest())?;
    let scale = fro_norm(&w);
    let refs = window_refs(window);
    let sweeps = orthogonalize(&mut w, &refs);
    let own = refs.len() - 1;
    let diag = symmetrize(&(&sweeps[0][own] + &sweeps[1][own]));
    let next = next_block(&w, scale)?;
    let tau = next.as_ref().map(|(_, r)| r.clone()).unwrap_or_default();
    finish_step(window, state, sweeps, next, diag, tau)
}

/// One extended Krylov step: `W = [AV_j⁽¹⁾, A⁻¹V_j⁽²⁾]`, orthogonalized like
/// [`lanczos_step`]. The projection `T` is not available from the MGS
/// coefficients directly and is recovered from them by a short recurrence.
pub fn extended_step<O: LinearOperator + ?Sized>(
    op: &O,
    window: &mut BasisWindow,
    state: &mut ProjectionState,
) -> Result<()> {
    if window.space != Space::Extended {
        return Err(Error::InvalidArgument("extended_step needs an extended Krylov window".into()));
    }
    if state.invariant {
        return Err(Error::InvariantSubspace { step: state.m });
    }
    let s = window.s;
    let l = 2 * s;
    window.note_peak(l);
    let vj = window.newest();
    let w1 = block_apply(op, &columns(vj, 0, s))?;
    let w2 = block_solve(op, &columns(vj, s, s))?;
    let mut w = hcat(&w1, &w2);
    let scale = fro_norm(&w);
    let refs = window_refs(window);
    let sweeps = orthogonalize(&mut w, &refs);
    let own = refs.len() - 1;
    let theta_jj = &sweeps[0][own] + &sweeps[1][own];
    let next = next_block(&w, scale)?;

    // ρ is the R factor that introduced V_j.
    let rho = match state.steps.last() {
        Some(rec) => &rec.r,
        None => state.r0.as_ref().expect("extended state carries R₀"),
    };
    let rho12 = rho.view((0, s), (s, s)).into_owned();
    let rho22 = rho.view((s, s), (s, s)).into_owned();
    let rho22_inv = rho22
        .try_inverse()
        .ok_or(Error::SingularPivot { index: state.m, value: 0.0 })?;
    let theta_first = columns(&theta_jj, 0, s);

    // A V_j⁽²⁾ expressed through V_{j−1}⁽²⁾, the previous A⁻¹ coefficients and
    // A V_j⁽¹⁾.
    let mut acc = &theta_first * &rho12;
    match state.steps.last() {
        Some(prev) => {
            let prev_own = prev.sweeps[0].len() - 1;
            let theta_prev = &prev.sweeps[0][prev_own] + &prev.sweeps[1][prev_own];
            acc += &state.tau_next * columns(&theta_prev, s, s);
        }
        None => {
            let r11 = rho.view((0, 0), (s, s));
            let mut top = DenseMatrix::zeros(l, s);
            top.view_mut((0, 0), (s, s)).copy_from(&r11);
            acc -= top;
        }
    }
    let second = -acc * &rho22_inv;
    let diag = symmetrize(&hcat(&theta_first, &second));

    let tau = match &next {
        Some((_, r)) => {
            let r_first = columns(r, 0, s);
            let coupling = -(&r_first * &rho12) * &rho22_inv;
            let mut tau = hcat(&r_first, &coupling);
            // The lower s rows vanish in exact arithmetic.
            tau.view_mut((s, 0), (s, l)).fill(0.0);
            tau
        }
        None => DenseMatrix::zeros(l, l),
    };
    finish_step(window, state, sweeps, next, diag, tau)
}

/// Dispatches to [`lanczos_step`] or [`extended_step`].
pub fn step<O: LinearOperator + ?Sized>(op: &O, window: &mut BasisWindow, state: &mut ProjectionState) -> Result<()> {
    match window.space {
        Space::Standard => lanczos_step(op, window, state),
        Space::Extended => extended_step(op, window, state),
    }
}

/// `Σ_i V_i G_i` for the row blocks `G_i` of `g` (`ℓm × t`), from the stored
/// blocks.
pub fn stored_combination(window: &BasisWindow, g: &DenseMatrix) -> Result<DenseMatrix> {
    let l = window.block_size();
    let m = g.nrows() / l;
    if g.nrows() != l * m || m == 0 {
        return Err(dim_err("stored_combination", "a multiple of the block size", g.nrows()));
    }
    if window.first != 0 || window.blocks.len() < m {
        return Err(Error::InvalidArgument("basis blocks were not stored".into()));
    }
    let n = window.blocks[0].nrows();
    let mut z = DenseMatrix::zeros(n, g.ncols());
    for (i, v) in window.blocks[..m].iter().enumerate() {
        add_mul(&mut z, v, &g.rows(i * l, l).into_owned());
    }
    Ok(z)
}

/// Regenerates the basis from `C` and the recorded coefficients and returns
/// `Σ_i V_i G_i`, never holding more than two blocks (plus, in extended mode,
/// the stored `A⁻¹` halves).
///
/// The replay repeats the first pass operation for operation, so the result is
/// bit-identical to [`stored_combination`] on a stored run. Each regenerated
/// `R` factor is compared with the recorded one; a mismatch above `1e-8`
/// relative means the operator is not deterministic.
pub fn replay_combination<O: LinearOperator + ?Sized>(
    op: &O,
    c: &DenseMatrix,
    window: &BasisWindow,
    state: &ProjectionState,
    g: &DenseMatrix,
) -> Result<DenseMatrix> {
    let l = window.block_size();
    let s = window.s;
    let m = g.nrows() / l;
    if g.nrows() != l * m || m == 0 || m > state.m {
        return Err(dim_err("replay_combination", format!("ℓ·k rows with k <= {}", state.m), g.nrows()));
    }
    if c.shape() != (op.dim(), s) {
        return Err(dim_err("replay_combination C", format!("{}x{}", op.dim(), s), format!("{:?}", c.shape())));
    }
    let extended = window.space == Space::Extended;
    let half = |i: usize| -> DenseMatrix {
        match window.storage {
            Storage::Stored => columns(&window.blocks[i], s, s),
            Storage::Windowed => window.second_halves[i].clone(),
        }
    };
    if extended && window.storage == Storage::Windowed && window.second_halves.len() < m {
        return Err(Error::InvalidArgument("second halves of the extended basis are missing".into()));
    }
    let full_block = |first: DenseMatrix, i: usize| -> DenseMatrix {
        if extended {
            hcat(&first, &half(i))
        } else {
            first
        }
    };
    let block_of = |i: usize| g.rows(i * l, l).into_owned();

    // Extended mode regenerates only the A-half of every block.
    let width = if extended { s } else { l };
    let v1 = if extended {
        let qr = economy_qr(c)?;
        qr.q
    } else {
        first_block(op, c, Space::Standard)?.0
    };
    let mut prev: Option<DenseMatrix> = None;
    let mut cur = full_block(v1, 0);
    let mut z = DenseMatrix::zeros(op.dim(), g.ncols());
    add_mul(&mut z, &cur, &block_of(0));
    for i in 1..m {
        let rec = &state.steps[i - 1];
        let mut w = block_apply(op, &columns(&cur, 0, width))?;
        for sweep in &rec.sweeps {
            let refs: Vec<&DenseMatrix> = prev.iter().chain(std::iter::once(&cur)).collect();
            for (v, alpha) in refs.iter().zip(sweep) {
                sub_mul(&mut w, v, &columns(alpha, 0, width));
            }
        }
        let qr = economy_qr(&w)?;
        let stored = rec.r.view((0, 0), (width, width));
        let diff = (&qr.r - stored).norm() / stored.norm().max(f64::MIN_POSITIVE);
        if !(diff <= 1e-8) {
            return Err(Error::ReplayMismatch { step: i, diff });
        }
        let next = full_block(qr.q, i);
        add_mul(&mut z, &next, &block_of(i));
        prev = Some(cur);
        cur = next;
    }
    Ok(z)
}
