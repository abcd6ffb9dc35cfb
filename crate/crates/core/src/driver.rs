//! End-to-end runs: build or read a problem, factor it, solve `A x = A 1`
//! (or a user right-hand side) and collect statistics.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense::Par;
use crate::hss::CompressOptions;
use crate::krylov::{gmres, iterative_refinement, KrylovError, KrylovOptions, SolveReport};
use crate::multifrontal::{FactorOptions, FactorStats, Solver, SolverError, SolverOptions};
use crate::order::{AnalysisOptions, NdStrategy, DEFAULT_MIN_LEAF};
use crate::scalar::norm_inf;
use crate::sparse::{generate_grid_problem, read_matrix_market, GridProblem, MmError, SparseError, SparseMatrix};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("reading matrix {path}: {source}")]
    Matrix { path: PathBuf, source: MmError },
    #[error("generating problem: {0}")]
    Generate(#[from] SparseError),
    #[error("reading right-hand side {path}: {msg}")]
    Rhs { path: PathBuf, msg: String },
    #[error("setup: {0}")]
    Setup(#[from] SolverError),
    #[error("solve: {0}")]
    Solve(#[from] KrylovError),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("writing {path}: {msg}")]
    Output { path: PathBuf, msg: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    File(PathBuf),
    Gen(GridProblem),
}

impl fmt::Display for InputSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSource::File(p) => write!(f, "{}", p.display()),
            InputSource::Gen(g) => write!(f, "{:?}(k={})", g.kind, g.k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    /// GMRES when some front was compressed, refinement otherwise.
    Auto,
    /// Plain multifrontal with iterative refinement; `ls` is ignored.
    Mf,
    /// HSS fronts above the switch level, GMRES.
    MfHss,
}

impl FromStr for SolverMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(SolverMode::Auto),
            "mf" => Ok(SolverMode::Mf),
            "mf-hss" => Ok(SolverMode::MfHss),
            other => Err(format!("unknown mode {other:?} (auto, mf, mf-hss)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingChoice {
    /// Geometric for generated grids, graph bisection for files.
    Auto,
    Geometric,
    Graph,
}

impl FromStr for OrderingChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(OrderingChoice::Auto),
            "geometric" => Ok(OrderingChoice::Geometric),
            "graph" => Ok(OrderingChoice::Graph),
            other => Err(format!("unknown ordering {other:?} (auto, geometric, graph)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputSource,
    pub ordering: OrderingChoice,
    pub ls: usize,
    pub eps: f64,
    /// HSS leaf size.
    pub leaf: usize,
    pub d0: usize,
    pub dd: usize,
    pub p: usize,
    /// Fronts smaller than this stay dense even above the switch level.
    pub min_hss_size: usize,
    pub min_leaf: usize,
    pub threads: usize,
    pub mode: SolverMode,
    pub rtol: f64,
    pub atol: f64,
    pub restart: usize,
    pub maxit: usize,
    pub rhs_file: Option<PathBuf>,
    pub stats_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(input: InputSource) -> Self {
        let k = KrylovOptions::default();
        let c = CompressOptions::default();
        RunConfig {
            input,
            ordering: OrderingChoice::Auto,
            ls: 0,
            eps: c.eps,
            leaf: AnalysisOptions::default().leaf_size,
            d0: c.d0,
            dd: c.dd,
            p: c.p,
            min_hss_size: AnalysisOptions::default().min_hss_size,
            min_leaf: DEFAULT_MIN_LEAF,
            threads: 1,
            mode: SolverMode::Auto,
            rtol: k.rtol,
            atol: k.atol,
            restart: k.restart,
            maxit: k.maxit,
            rhs_file: None,
            stats_path: None,
        }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: String| Err(DriverError::Config(m));
        if !(0.0..1.0).contains(&self.eps) {
            return bad(format!("eps must lie in [0, 1), got {}", self.eps));
        }
        if self.leaf < 16 {
            return bad(format!("leaf size must be at least 16, got {}", self.leaf));
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        if self.d0 == 0 || self.dd == 0 {
            return bad("d0 and dd must be positive".into());
        }
        if self.restart == 0 {
            return bad("restart must be positive".into());
        }
        if !(self.rtol >= 0.0 && self.atol >= 0.0 && self.rtol.is_finite() && self.atol.is_finite()) {
            return bad("rtol and atol must be finite and nonnegative".into());
        }
        if self.min_leaf == 0 {
            return bad("min_leaf must be positive".into());
        }
        if let InputSource::Gen(g) = &self.input {
            if g.k == 0 {
                return bad("k must be positive".into());
            }
            if !(g.nu.is_finite() && g.nu > 0.0) {
                return bad(format!("nu must be positive, got {}", g.nu));
            }
        }
        Ok(())
    }

    fn effective_ls(&self) -> usize {
        if self.mode == SolverMode::Mf {
            0
        } else {
            self.ls
        }
    }

    pub fn solver_options(&self, a_n: usize) -> SolverOptions {
        let strategy = match (self.ordering, &self.input) {
            (OrderingChoice::Graph, _) | (OrderingChoice::Auto, InputSource::File(_)) => NdStrategy::Graph,
            (_, InputSource::Gen(g)) => NdStrategy::Geometric { dims: g.dims() },
            (OrderingChoice::Geometric, InputSource::File(_)) => NdStrategy::Geometric { dims: [a_n, 1, 1] },
        };
        SolverOptions {
            analysis: AnalysisOptions {
                strategy,
                min_leaf: self.min_leaf,
                ls: self.effective_ls(),
                min_hss_size: self.min_hss_size,
                leaf_size: self.leaf,
            },
            factor: FactorOptions {
                compress: CompressOptions { eps: self.eps, d0: self.d0, dd: self.dd, p: self.p, max_rank: None },
                log_samples: false,
            },
            no_scaling: false,
        }
    }

    fn krylov_options(&self) -> KrylovOptions {
        KrylovOptions { restart: self.restart, rtol: self.rtol, atol: self.atol, maxit: self.maxit }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub scaling: f64,
    pub analysis: f64,
    pub factor: f64,
    pub solve: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Gmres,
    Refinement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub schema_version: u32,
    pub problem: String,
    pub n: usize,
    pub nnz: usize,
    pub ls: usize,
    pub eps: f64,
    pub leaf: usize,
    pub d0: usize,
    pub dd: usize,
    pub p: usize,
    pub threads: usize,
    pub mode: SolverMode,
    pub method: SolveMethod,
    pub ordering: String,
    pub factor: FactorStats,
    pub iterations: usize,
    pub converged: bool,
    pub stagnated: bool,
    /// `|u| / |u_0|` of the preconditioned residual.
    pub rel_residual: f64,
    pub abs_residual: f64,
    /// `|A x - b|_inf / |b|_inf`.
    pub true_rel_residual: f64,
    pub residual_history: Vec<f64>,
    pub timings: Timings,
}

impl RunStats {
    pub fn summary(&self) -> String {
        format!(
            "{} n={} ls={} eps={:e} {:?}: {} in {} it, rel res {:.3e}, true res {:.3e}, factor {:.1} MB, {:.3e} flops, setup {:.2}s solve {:.2}s",
            self.problem,
            self.n,
            self.ls,
            self.eps,
            self.method,
            if self.converged { "converged" } else { "NOT converged" },
            self.iterations,
            self.rel_residual,
            self.true_rel_residual,
            self.factor.factor_nnz_bytes as f64 / 1e6,
            self.factor.factor_flops as f64,
            self.timings.scaling + self.timings.analysis + self.timings.factor,
            self.timings.solve,
        )
    }

    /// JSON with every float replaced by 0 if it is not finite.
    pub fn to_json(&self) -> String {
        let mut s = self.clone();
        let fix = |v: &mut f64| {
            if !v.is_finite() {
                *v = 0.0;
            }
        };
        fix(&mut s.rel_residual);
        fix(&mut s.abs_residual);
        fix(&mut s.true_rel_residual);
        s.residual_history.iter_mut().for_each(fix);
        serde_json::to_string_pretty(&s).expect("stats serialize")
    }
}

pub fn load_matrix(input: &InputSource) -> Result<SparseMatrix<f64>, DriverError> {
    match input {
        InputSource::File(path) => {
            read_matrix_market(path).map_err(|source| DriverError::Matrix { path: path.clone(), source })
        }
        InputSource::Gen(g) => Ok(generate_grid_problem(g)?),
    }
}

/// Whitespace separated numbers; lines starting with `%` are comments.
pub fn read_rhs(path: &Path, n: usize) -> Result<Vec<f64>, DriverError> {
    let err = |msg: String| DriverError::Rhs { path: path.to_path_buf(), msg };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut v = Vec::with_capacity(n);
    for line in text.lines().filter(|l| !l.trim_start().starts_with('%')) {
        for tok in line.split_whitespace() {
            let x: f64 = tok.parse().map_err(|_| err(format!("non-numeric token {tok:?}")))?;
            if !x.is_finite() {
                return Err(err(format!("non-finite entry {tok}")));
            }
            v.push(x);
        }
    }
    if v.len() != n {
        return Err(err(format!("{} entries, matrix has {n} rows", v.len())));
    }
    Ok(v)
}

/// Runs the full pipeline on a worker pool of `cfg.threads` threads. A run
/// that does not converge still returns its statistics.
pub fn run(cfg: &RunConfig) -> Result<RunStats, DriverError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| DriverError::Pool(e.to_string()))?;
    let stats = pool.install(|| run_in_pool(cfg))?;
    if let Some(path) = &cfg.stats_path {
        std::fs::write(path, stats.to_json() + "\n")
            .map_err(|e| DriverError::Output { path: path.clone(), msg: e.to_string() })?;
    }
    Ok(stats)
}

fn run_in_pool(cfg: &RunConfig) -> Result<RunStats, DriverError> {
    let par = Par::for_threads(cfg.threads);
    let start = Instant::now();
    let a = load_matrix(&cfg.input)?;
    let b = match &cfg.rhs_file {
        Some(p) => read_rhs(p, a.n())?,
        None => a.mul_vec(&vec![1.0; a.n()]),
    };
    let solver = Solver::new(&a, &cfg.solver_options(a.n()), par)?;
    let fstats = solver.factorization.stats.clone();
    let method = match cfg.mode {
        SolverMode::Mf => SolveMethod::Refinement,
        SolverMode::MfHss => SolveMethod::Gmres,
        SolverMode::Auto if fstats.hss_fronts + fstats.dense_fallbacks > 0 => SolveMethod::Gmres,
        SolverMode::Auto => SolveMethod::Refinement,
    };
    let t_solve = Instant::now();
    let apply_a = |v: &[f64]| a.mul_vec(v);
    let apply_m = |v: &[f64]| solver.apply_inverse(v, par).expect("preconditioner input has length n");
    let kopts = cfg.krylov_options();
    let (x, report): (Vec<f64>, SolveReport) = match method {
        SolveMethod::Gmres => gmres(apply_a, apply_m, &b, &kopts)?,
        SolveMethod::Refinement => iterative_refinement(apply_a, apply_m, &b, &kopts)?,
    };
    let solve = t_solve.elapsed().as_secs_f64();
    let ax = a.mul_vec(&x);
    let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
    let bn = norm_inf(&b);
    let true_rel = if bn == 0.0 { norm_inf(&r) } else { norm_inf(&r) / bn };
    Ok(RunStats {
        schema_version: SCHEMA_VERSION,
        problem: cfg.input.to_string(),
        n: a.n(),
        nnz: a.nnz(),
        ls: cfg.effective_ls(),
        eps: cfg.eps,
        leaf: cfg.leaf,
        d0: cfg.d0,
        dd: cfg.dd,
        p: cfg.p,
        threads: cfg.threads,
        mode: cfg.mode,
        method,
        ordering: match solver.strategy {
            NdStrategy::Geometric { .. } => "geometric".into(),
            NdStrategy::Graph => "graph".into(),
        },
        factor: fstats,
        iterations: report.iterations,
        converged: report.converged,
        stagnated: report.stagnated,
        rel_residual: report.rel_residual,
        abs_residual: report.abs_residual,
        true_rel_residual: true_rel,
        residual_history: report.history,
        timings: Timings {
            scaling: solver.timings.scaling,
            analysis: solver.timings.analysis,
            factor: solver.timings.factor,
            solve,
            total: start.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    K,
    Ls,
    Eps,
    Threads,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Parses `name=v1,v2,...` or `name=lo..hi` (integers, inclusive), with up
/// to two axes separated by `;`. Names: `k`, `ls`, `eps`, `threads`.
pub fn parse_sweep(spec: &str) -> Result<Vec<SweepAxis>, DriverError> {
    let bad = |m: String| DriverError::Config(format!("sweep spec {spec:?}: {m}"));
    let mut axes = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, vals) = part.split_once('=').ok_or_else(|| bad(format!("missing '=' in {part:?}")))?;
        let param = match name.trim() {
            "k" => SweepParam::K,
            "ls" => SweepParam::Ls,
            "eps" => SweepParam::Eps,
            "threads" => SweepParam::Threads,
            other => return Err(bad(format!("unknown parameter {other:?}"))),
        };
        let values: Vec<f64> = if let Some((lo, hi)) = vals.split_once("..") {
            let lo: usize = lo.trim().parse().map_err(|_| bad(format!("bad range start {lo:?}")))?;
            let hi: usize = hi.trim().parse().map_err(|_| bad(format!("bad range end {hi:?}")))?;
            if lo > hi {
                return Err(bad(format!("empty range {lo}..{hi}")));
            }
            (lo..=hi).map(|v| v as f64).collect()
        } else {
            vals.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad(format!("bad value {t:?}"))))
                .collect::<Result<_, _>>()?
        };
        if values.is_empty() {
            return Err(bad("no values".into()));
        }
        if param != SweepParam::Eps && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(bad(format!("{name} takes nonnegative integers")));
        }
        if axes.iter().any(|a: &SweepAxis| a.param == param) {
            return Err(bad(format!("{name} given twice")));
        }
        axes.push(SweepAxis { param, values });
    }
    if axes.is_empty() || axes.len() > 2 {
        return Err(bad("expected one or two axes".into()));
    }
    Ok(axes)
}

/// One sweep run: the configuration and either its statistics or the error.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub config: RunConfig,
    pub result: Result<RunStats, String>,
}

/// Flat record for CSV output.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRecord {
    pub problem: String,
    pub k: Option<usize>,
    pub ls: usize,
    pub eps: f64,
    pub leaf: usize,
    pub threads: usize,
    pub mode: SolverMode,
    pub n: Option<usize>,
    pub nnz: Option<usize>,
    pub method: Option<SolveMethod>,
    pub factor_flops: Option<u64>,
    pub solve_flops: Option<u64>,
    pub factor_nnz_bytes: Option<usize>,
    pub peak_bytes: Option<usize>,
    pub max_rank: Option<usize>,
    pub hss_fronts: Option<usize>,
    pub dense_fallbacks: Option<usize>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub rel_residual: Option<f64>,
    pub true_rel_residual: Option<f64>,
    pub time_scaling: Option<f64>,
    pub time_analysis: Option<f64>,
    pub time_factor: Option<f64>,
    pub time_solve: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn record(&self) -> SweepRecord {
        let c = &self.config;
        let s = self.result.as_ref().ok();
        SweepRecord {
            problem: c.input.to_string(),
            k: match &c.input {
                InputSource::Gen(g) => Some(g.k),
                InputSource::File(_) => None,
            },
            ls: c.effective_ls(),
            eps: c.eps,
            leaf: c.leaf,
            threads: c.threads,
            mode: c.mode,
            n: s.map(|s| s.n),
            nnz: s.map(|s| s.nnz),
            method: s.map(|s| s.method),
            factor_flops: s.map(|s| s.factor.factor_flops),
            solve_flops: s.map(|s| s.factor.solve_flops),
            factor_nnz_bytes: s.map(|s| s.factor.factor_nnz_bytes),
            peak_bytes: s.map(|s| s.factor.peak_bytes),
            max_rank: s.map(|s| s.factor.max_rank),
            hss_fronts: s.map(|s| s.factor.hss_fronts),
            dense_fallbacks: s.map(|s| s.factor.dense_fallbacks),
            iterations: s.map(|s| s.iterations),
            converged: s.map(|s| s.converged),
            rel_residual: s.map(|s| s.rel_residual),
            true_rel_residual: s.map(|s| s.true_rel_residual),
            time_scaling: s.map(|s| s.timings.scaling),
            time_analysis: s.map(|s| s.timings.analysis),
            time_factor: s.map(|s| s.timings.factor),
            time_solve: s.map(|s| s.timings.solve),
            error: self.result.as_ref().err().cloned(),
        }
    }
}

fn with_value(base: &RunConfig, param: SweepParam, v: f64) -> Result<RunConfig, DriverError> {
    let mut c = base.clone();
    c.stats_path = None;
    match param {
        SweepParam::K => match &mut c.input {
            InputSource::Gen(g) => g.k = v as usize,
            InputSource::File(_) => return Err(DriverError::Config("sweeping k needs a generated problem".into())),
        },
        SweepParam::Ls => c.ls = v as usize,
        SweepParam::Eps => c.eps = v,
        SweepParam::Threads => c.threads = v as usize,
    }
    Ok(c)
}

/// Runs the cartesian product of the axes in order (first axis outermost).
/// Failures are recorded in their row and the sweep continues.
pub fn sweep(template: &RunConfig, axes: &[SweepAxis]) -> Result<Vec<SweepRow>, DriverError> {
    let mut configs = vec![template.clone()];
    for axis in axes {
        let mut next = Vec::new();
        for c in &configs {
            for &v in &axis.values {
                next.push(with_value(c, axis.param, v)?);
            }
        }
        configs = next;
    }
    Ok(configs
        .into_iter()
        .map(|config| {
            let result = run(&config).map_err(|e| e.to_string());
            SweepRow { config, result }
        })
        .collect())
}
