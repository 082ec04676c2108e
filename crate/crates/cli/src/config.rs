//! Run configuration: command-line flags layered over an optional flat
//! `key = value` file.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use symsylv::krylov::{Space, Storage};
use symsylv::problems::{ProblemKind, ProblemSpec};
use symsylv::solvers::SolveOptions;
use symsylv::{Error, Result};

/// Flags shared by every subcommand. Anything left unset falls back to the
/// config file, then to the built-in default.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generated problem kind (fd2d-exp, fd2d-trig, fd3d-split, laplacian1d, laplacian2d).
    #[arg(long)]
    pub problem: Option<String>,
    /// Grid points per dimension of the generated problem.
    #[arg(long)]
    pub n: Option<usize>,
    /// Columns of the generated right-hand side.
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scale generated right-hand sides to unit Frobenius norm.
    #[arg(long)]
    pub normalize: Option<bool>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_m: Option<usize>,
    #[arg(long)]
    pub check_period: Option<usize>,
    /// standard or extended.
    #[arg(long)]
    pub space: Option<String>,
    /// windowed or stored.
    #[arg(long)]
    pub storage: Option<String>,
    #[arg(long)]
    pub trunc_eps: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Recompute the residual from the factors after solving.
    #[arg(long)]
    pub verify: bool,
    /// Matrix Market file for A.
    #[arg(long)]
    pub a: Option<PathBuf>,
    /// Matrix Market file for B (Sylvester).
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Matrix Market file for C (Lyapunov).
    #[arg(long)]
    pub c: Option<PathBuf>,
    #[arg(long)]
    pub c1: Option<PathBuf>,
    #[arg(long)]
    pub c2: Option<PathBuf>,
    /// Matrix Market file for a symmetric positive definite E (generalized Lyapunov).
    #[arg(long)]
    pub e: Option<PathBuf>,
    /// Sylvester projection: two-sided or one-sided.
    #[arg(long)]
    pub method: Option<String>,
    /// Timing repetitions per residual check (bench-residual).
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    TwoSided,
    OneSided,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" => Ok(Method::TwoSided),
            "one-sided" => Ok(Method::OneSided),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}' (two-sided or one-sided)"))),
        }
    }
}

/// Where the matrices come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Generated(ProblemSpec),
    Files {
        a: PathBuf,
        b: Option<PathBuf>,
        c: Option<PathBuf>,
        c1: Option<PathBuf>,
        c2: Option<PathBuf>,
        e: Option<PathBuf>,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Source,
    pub options: SolveOptions,
    pub out: PathBuf,
    pub verify: bool,
    pub method: Method,
    pub reps: usize,
}

/// Parses the flat config format: one `key = value` per line, `#` starts a
/// comment, keys may use `-` or `_`.
pub fn parse_config(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Parse { line: i + 1, message: "empty key".into() });
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse { line: i + 1, message: format!("duplicate key '{key}'") });
        }
    }
    Ok(map)
}

struct Layer {
    file: HashMap<String, String>,
}

impl Layer {
    fn get<T: FromStr>(&mut self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let from_file = self.file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match from_file {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::InvalidArgument(format!("config key '{key}': {e}"))),
        }
    }

    fn path(&mut self, flag: Option<PathBuf>, key: &str, base: &Path) -> Result<Option<PathBuf>> {
        Ok(self.get::<PathBuf>(flag, key)?.map(|p| if p.is_relative() && !base.as_os_str().is_empty() { base.join(p) } else { p }))
    }
}

impl RunArgs {
    /// Merges flags over the config file and validates the result.
    pub fn resolve(&self) -> Result<RunConfig> {
        let (file, base) = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                (parse_config(&text)?, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (HashMap::new(), PathBuf::new()),
        };
        let mut layer = Layer { file };
        let defaults = SolveOptions::default();

        let problem = layer.get::<ProblemKind>(self.problem.as_deref().map(str::parse).transpose()?, "problem")?;
        let n = layer.get(self.n, "n")?;
        let s = layer.get(self.s, "s")?;
        let seed = layer.get(self.seed, "seed")?;
        let normalize = layer.get(self.normalize, "normalize")?;
        let options = SolveOptions {
            tol: layer.get(self.tol, "tol")?.unwrap_or(defaults.tol),
            max_m: layer.get(self.max_m, "max-m")?.unwrap_or(defaults.max_m),
            check_period: layer.get(self.check_period, "check-period")?.unwrap_or(defaults.check_period),
            space: layer.get::<Space>(self.space.as_deref().map(str::parse).transpose()?, "space")?.unwrap_or(defaults.space),
            storage: layer
                .get::<Storage>(self.storage.as_deref().map(str::parse).transpose()?, "storage")?
                .unwrap_or(defaults.storage),
            trunc_eps: layer.get(self.trunc_eps, "trunc-eps")?.unwrap_or(defaults.trunc_eps),
        };
        options.validate()?;
        let verify = self.verify || layer.get::<bool>(None, "verify")?.unwrap_or(false);
        let out = layer.path(self.out.clone(), "out", &base)?.unwrap_or_else(|| PathBuf::from("symsylv-out"));
        let method = layer
            .get::<Method>(self.method.as_deref().map(str::parse).transpose()?, "method")?
            .unwrap_or(Method::TwoSided);
        let reps = layer.get(self.reps, "reps")?.unwrap_or(3);
        if reps < 3 {
            return Err(Error::InvalidArgument(format!("reps must be at least 3, got {reps}")));
        }
        let a = layer.path(self.a.clone(), "a", &base)?;
        let b = layer.path(self.b.clone(), "b", &base)?;
        let c = layer.path(self.c.clone(), "c", &base)?;
        let c1 = layer.path(self.c1.clone(), "c1", &base)?;
        let c2 = layer.path(self.c2.clone(), "c2", &base)?;
        let e = layer.path(self.e.clone(), "e", &base)?;

        if let Some(key) = layer.file.keys().min() {
            return Err(Error::InvalidArgument(format!("unknown config key '{key}'")));
        }

        let any_file = a.is_some() || b.is_some() || c.is_some() || c1.is_some() || c2.is_some() || e.is_some();
        let source = match (problem, any_file) {
            (Some(_), true) => {
                return Err(Error::InvalidArgument("give either a generated problem or input files, not both".into()));
            }
            (Some(kind), false) => {
                let spec = ProblemSpec {
                    kind,
                    n: n.unwrap_or(32),
                    s: s.unwrap_or(1),
                    seed: seed.unwrap_or(1),
                    normalize: normalize.unwrap_or(true),
                };
                spec.validate()?;
                Source::Generated(spec)
            }
            (None, true) => {
                let a = a.ok_or_else(|| Error::InvalidArgument("input files need --a".into()))?;
                if n.is_some() || s.is_some() || seed.is_some() {
                    return Err(Error::InvalidArgument("--n, --s and --seed only apply to generated problems".into()));
                }
                Source::Files { a, b, c, c1, c2, e }
            }
            (None, false) => return Err(Error::InvalidArgument("no problem given: use --problem or --a".into())),
        };
        if verify {
            if let Source::Files { e: Some(_), .. } = source {
                return Err(Error::InvalidArgument("--verify is not available for generalized equations".into()));
            }
        }
        Ok(RunConfig { source, options, out, verify, method, reps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let m = parse_config("# run\nmax_m = 50\n tol=1e-8 # tight\n\nspace = extended\n").unwrap();
        assert_eq!(m["max-m"], "50");
        assert_eq!(m["tol"], "1e-8");
        assert_eq!(m["space"], "extended");
        assert!(matches!(parse_config("tol 1e-8"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("a = 1\na = 2"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("symsylv-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "problem = laplacian2d\nn = 8\ntol = 1e-3\nmax-m = 40\n").unwrap();
        let args = RunArgs { config: Some(path), tol: Some(1e-9), ..RunArgs::default() };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.options.tol, 1e-9);
        assert_eq!(cfg.options.max_m, 40);
        match cfg.source {
            Source::Generated(spec) => assert_eq!(spec.n, 8),
            other => panic!("{other:?}"),
        }
        std::fs::write(dir.join("bad.cfg"), "problem = laplacian2d\ncolour = red\n").unwrap();
        let args = RunArgs { config: Some(dir.join("bad.cfg")), ..RunArgs::default() };
        assert!(args.resolve().unwrap_err().to_string().contains("colour"));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn source_is_exclusive() {
        let both = RunArgs { problem: Some("laplacian2d".into()), a: Some("A.mtx".into()), ..RunArgs::default() };
        assert!(both.resolve().is_err());
        assert!(RunArgs::default().resolve().is_err());
        let few_reps = RunArgs { problem: Some("laplacian2d".into()), reps: Some(2), ..RunArgs::default() };
        assert!(few_reps.resolve().is_err());
    }
}
