use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use symsylv::dense::{lowrank_residual, naive_residual, solve_reduced_lyapunov};
use symsylv::krylov::{init_basis, step, Space};
use symsylv::problems::{gen_fd3d_split, gen_rhs, ProblemKind, ProblemSpec};
use symsylv::residual::ctri_lyapunov;
use symsylv::solvers::{
    solve_generalized_lyapunov, solve_lyapunov, solve_sylvester_one_sided, solve_sylvester_two_sided, LowRankSolution,
};
use symsylv::sparse::mm::{read_dense, read_sparse, write_dense, write_sparse};
use symsylv::sparse::FactoredOperator;
use symsylv::{DenseMatrix, Error, LinearOperator, Result, SparseSymmetric};

mod config;

use config::{Method, RunArgs, RunConfig, Source};

#[derive(Debug, Parser)]
#[command(name = "symsylv", version, about = "Low-rank Galerkin solvers for symmetric Lyapunov and Sylvester equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated problem as Matrix Market files.
    Gen(RunArgs),
    /// Solve AX + XA + CCᵀ = 0 (or AXE + EXA + CCᵀ = 0 with --e).
    SolveLyap(RunArgs),
    /// Solve AX + XB + C₁C₂ᵀ = 0.
    SolveSylv(RunArgs),
    /// Time the projected residual against forming the reduced solution.
    BenchResidual(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => args.resolve().and_then(|c| cmd_gen(&c)),
        Command::SolveLyap(args) => args.resolve().and_then(|c| cmd_solve_lyap(&c)),
        Command::SolveSylv(args) => args.resolve().and_then(|c| cmd_solve_sylv(&c)),
        Command::BenchResidual(args) => args.resolve().and_then(|c| cmd_bench_residual(&c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn read_sparse_at(path: &Path) -> Result<SparseSymmetric> {
    read_sparse(path).map_err(|e| match e {
        Error::Io(m) => io_err(path, m),
        other => other,
    })
}

fn read_dense_at(path: &Path) -> Result<DenseMatrix> {
    read_dense(path).map_err(|e| match e {
        Error::Io(m) => io_err(path, m),
        other => other,
    })
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// The generated matrices: `A`, optional `B`, `C` (or `C₁`) and, when `B`
/// exists, `C₂`.
struct Generated {
    a: SparseSymmetric,
    b: Option<SparseSymmetric>,
    c1: DenseMatrix,
    c2: Option<DenseMatrix>,
}

fn generate(spec: &ProblemSpec) -> Result<Generated> {
    if spec.kind == ProblemKind::Fd3dSplit {
        let (a, b) = gen_fd3d_split(spec.n);
        let c1 = gen_rhs(a.n(), spec.s, spec.seed, spec.normalize);
        let c2 = gen_rhs(b.n(), spec.s, spec.seed.wrapping_add(1), spec.normalize);
        return Ok(Generated { a, b: Some(b), c1, c2: Some(c2) });
    }
    let a = spec.operator()?;
    let c1 = gen_rhs(a.n(), spec.s, spec.seed, spec.normalize);
    Ok(Generated { a, b: None, c1, c2: None })
}

fn cmd_gen(cfg: &RunConfig) -> Result<()> {
    let Source::Generated(spec) = &cfg.source else {
        return Err(Error::InvalidArgument("gen needs --problem".into()));
    };
    prepare_out(cfg)?;
    let g = generate(spec)?;
    write_sparse(cfg.out.join("A.mtx"), &g.a)?;
    write_dense(cfg.out.join("C.mtx"), &g.c1)?;
    if let Some(b) = &g.b {
        write_sparse(cfg.out.join("B.mtx"), b)?;
    }
    if let Some(c2) = &g.c2 {
        write_dense(cfg.out.join("C2.mtx"), c2)?;
    }
    println!("wrote {} (A is {}x{}, {} nonzeros)", cfg.out.display(), g.a.n(), g.a.n(), g.a.nnz());
    Ok(())
}

fn required<'a>(p: &'a Option<std::path::PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::InvalidArgument(format!("missing --{flag}")))
}

/// `A` as an operator, factored when the extended space needs `A⁻¹`.
fn operator(a: SparseSymmetric, cfg: &RunConfig) -> Result<Box<dyn LinearOperator>> {
    Ok(match cfg.options.space {
        Space::Standard => Box::new(a),
        Space::Extended => Box::new(FactoredOperator::new(a)?),
    })
}

fn history_csv(sol: &LowRankSolution) -> String {
    let mut s = String::from("m,space_dim,relative_residual,cum_basis_secs,cum_residual_secs\n");
    for h in &sol.history {
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{:.16e}",
            h.m, h.space_dim, h.relative_residual, h.cum_basis_secs, h.cum_residual_secs
        );
    }
    s
}

fn summary(command: &str, cfg: &RunConfig, sol: &LowRankSolution, verified: Option<f64>) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("command", command.into());
    if let Source::Generated(spec) = &cfg.source {
        kv("problem", spec.kind.to_string());
        kv("grid_n", spec.n.to_string());
        kv("seed", spec.seed.to_string());
    }
    kv("space", cfg.options.space.to_string());
    kv("storage", cfg.options.storage.to_string());
    kv("tol", format!("{:.16e}", cfg.options.tol));
    kv("check_period", cfg.options.check_period.to_string());
    kv("iterations", sol.iterations.to_string());
    kv("space_dim", sol.truncation.reduced_dim.to_string());
    kv("rank", sol.rank().to_string());
    kv("final_relative_residual", format!("{:.16e}", sol.residual.relative));
    kv("final_residual", format!("{:.16e}", sol.residual.res));
    if let Some(v) = verified {
        kv("verified_relative_residual", format!("{v:.16e}"));
    }
    kv("peak_basis_vectors", sol.telemetry.peak_basis_vectors.to_string());
    kv("full_basis_vectors", sol.telemetry.full_basis_vectors.to_string());
    kv("basis_secs", format!("{:.16e}", sol.timings.basis_secs));
    kv("residual_secs", format!("{:.16e}", sol.timings.residual_secs));
    kv("recovery_secs", format!("{:.16e}", sol.timings.recovery_secs));
    kv("trunc_eps", format!("{:.16e}", sol.truncation.eps));
    kv("trunc_discarded", format!("{:.16e}", sol.truncation.discarded_mass));
    kv("trunc_reconstruction_error", format!("{:.16e}", sol.truncation.reconstruction_error));
    s
}

fn write_solution(command: &str, cfg: &RunConfig, sol: &LowRankSolution, verified: Option<f64>) -> Result<()> {
    prepare_out(cfg)?;
    match &sol.z2 {
        None => write_dense(cfg.out.join("Z.mtx"), &sol.z1)?,
        Some(z2) => {
            write_dense(cfg.out.join("Z1.mtx"), &sol.z1)?;
            write_dense(cfg.out.join("Z2.mtx"), z2)?;
        }
    }
    write_text(&cfg.out.join("history.csv"), &history_csv(sol))?;
    let text = summary(command, cfg, sol, verified);
    write_text(&cfg.out.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_solve_lyap(cfg: &RunConfig) -> Result<()> {
    let (a, c, e) = match &cfg.source {
        Source::Generated(spec) => {
            if spec.kind == ProblemKind::Fd3dSplit {
                return Err(Error::InvalidArgument("fd3d-split is a Sylvester problem; use solve-sylv".into()));
            }
            let g = generate(spec)?;
            (g.a, g.c1, None)
        }
        Source::Files { a, c, e, .. } => {
            let a = read_sparse_at(a)?;
            let c = read_dense_at(required(c, "c")?)?;
            let e = e.as_deref().map(read_sparse_at).transpose()?;
            (a, c, e)
        }
    };
    if c.nrows() != a.n() {
        return Err(Error::InvalidArgument(format!("C has {} rows but A is {}x{}", c.nrows(), a.n(), a.n())));
    }
    let op = operator(a, cfg)?;
    let sol = match &e {
        Some(e) => solve_generalized_lyapunov(op.as_ref(), e, &c, &cfg.options)?,
        None => solve_lyapunov(op.as_ref(), &c, &cfg.options)?,
    };
    let verified = if cfg.verify {
        Some(lowrank_residual(op.as_ref(), op.as_ref(), &sol.z1, &sol.z1, &c, &c)? / c.norm_squared())
    } else {
        None
    };
    write_solution("solve-lyap", cfg, &sol, verified)
}

fn cmd_solve_sylv(cfg: &RunConfig) -> Result<()> {
    let (a, b, c1, c2) = match &cfg.source {
        Source::Generated(spec) => {
            let g = generate(spec)?;
            match (g.b, g.c2) {
                (Some(b), Some(c2)) => (g.a, b, g.c1, c2),
                _ => {
                    // Without a split operator, B = A with an independent C₂.
                    let c2 = gen_rhs(g.a.n(), spec.s, spec.seed.wrapping_add(1), spec.normalize);
                    (g.a.clone(), g.a, g.c1, c2)
                }
            }
        }
        Source::Files { a, b, c1, c2, e, .. } => {
            if e.is_some() {
                return Err(Error::InvalidArgument("--e only applies to solve-lyap".into()));
            }
            (
                read_sparse_at(a)?,
                read_sparse_at(required(b, "b")?)?,
                read_dense_at(required(c1, "c1")?)?,
                read_dense_at(required(c2, "c2")?)?,
            )
        }
    };
    let opa = operator(a, cfg)?;
    let (sol, opb) = match cfg.method {
        Method::TwoSided => {
            let opb = operator(b, cfg)?;
            (solve_sylvester_two_sided(opa.as_ref(), opb.as_ref(), &c1, &c2, &cfg.options)?, opb)
        }
        Method::OneSided => {
            let bd = b.to_dense();
            let sol = solve_sylvester_one_sided(opa.as_ref(), &bd, &c1, &c2, &cfg.options)?;
            (sol, Box::new(b) as Box<dyn LinearOperator>)
        }
    };
    let verified = if cfg.verify {
        let z2 = sol.z2();
        Some(lowrank_residual(opa.as_ref(), opb.as_ref(), &sol.z1, z2, &c1, &c2)? / (c1.norm() * c2.norm()))
    } else {
        None
    };
    write_solution("solve-sylv", cfg, &sol, verified)
}

fn median_secs(reps: usize, mut f: impl FnMut() -> Result<f64>) -> Result<(f64, f64)> {
    let mut times = Vec::with_capacity(reps);
    let mut value = 0.0;
    for _ in 0..reps {
        let t0 = Instant::now();
        value = f()?;
        times.push(t0.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok((value, times[reps / 2]))
}

fn gain_percent(naive: f64, fast: f64) -> f64 {
    if naive > 0.0 {
        100.0 * (naive - fast) / naive
    } else {
        0.0
    }
}

fn cmd_bench_residual(cfg: &RunConfig) -> Result<()> {
    let (a, c) = match &cfg.source {
        Source::Generated(spec) => {
            let g = generate(spec)?;
            (g.a, g.c1)
        }
        Source::Files { a, c, .. } => (read_sparse_at(a)?, read_dense_at(required(c, "c")?)?),
    };
    let op = operator(a, cfg)?;
    let (mut window, mut state) = init_basis(op.as_ref(), &c, cfg.options.space, cfg.options.storage)?;
    let scale = state.gamma.norm_squared();
    let mut csv = String::from(
        "m,space_dim,ctri_relative_residual,naive_relative_residual,relative_difference,ctri_secs,naive_secs,gain_percent\n",
    );
    let (mut total_fast, mut total_naive, mut worst_diff) = (0.0, 0.0, 0.0f64);
    let mut checks = 0;
    for m in 1..=cfg.options.max_m {
        let invariant = match step(op.as_ref(), &mut window, &mut state) {
            Ok(()) => false,
            Err(Error::InvariantSubspace { .. }) => true,
            Err(e) => return Err(e),
        };
        if !(invariant || m.is_multiple_of(cfg.options.check_period) || m == cfg.options.max_m) {
            continue;
        }
        let tau = match cfg.options.space {
            Space::Standard => state.tau_next.clone(),
            Space::Extended => state.tau_bar(),
        };
        let (fast, fast_secs) = median_secs(cfg.reps, || Ok(ctri_lyapunov(&state.t, &state.gamma, &tau)?.res))?;
        let (slow, slow_secs) = median_secs(cfg.reps, || {
            let y = solve_reduced_lyapunov(&state.t, &state.gamma)?;
            naive_residual(&y, &tau)
        })?;
        let diff = (fast - slow).abs() / slow.abs().max(f64::MIN_POSITIVE);
        worst_diff = worst_diff.max(if slow == 0.0 && fast == 0.0 { 0.0 } else { diff });
        total_fast += fast_secs;
        total_naive += slow_secs;
        checks += 1;
        let _ = writeln!(
            csv,
            "{m},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.2}",
            state.t.dim(),
            fast / scale,
            slow / scale,
            diff,
            fast_secs,
            slow_secs,
            gain_percent(slow_secs, fast_secs)
        );
        if invariant || fast / scale <= cfg.options.tol {
            break;
        }
    }
    prepare_out(cfg)?;
    write_text(&cfg.out.join("bench.csv"), &csv)?;
    let mut s = String::new();
    let _ = writeln!(s, "command = bench-residual");
    let _ = writeln!(s, "checks = {checks}");
    let _ = writeln!(s, "final_space_dim = {}", state.t.dim());
    let _ = writeln!(s, "reps = {}", cfg.reps);
    let _ = writeln!(s, "total_ctri_secs = {total_fast:.16e}");
    let _ = writeln!(s, "total_naive_secs = {total_naive:.16e}");
    let _ = writeln!(s, "gain_percent = {:.2}", gain_percent(total_naive, total_fast));
    let _ = writeln!(s, "max_relative_difference = {worst_diff:.16e}");
    write_text(&cfg.out.join("bench_summary.txt"), &s)?;
    print!("{s}");
    Ok(())
}
