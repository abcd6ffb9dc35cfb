use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser};
use hssmf::driver::{parse_sweep, run, sweep, DriverError, InputSource, OrderingChoice, RunConfig, SolverMode};
use hssmf::sparse::{GridKind, GridProblem};

/// Sparse direct solver / preconditioner: multifrontal LU with HSS
/// compressed fronts. Solves `A x = b` with `b = A * ones` unless
/// `--rhs-file` is given. Every flag can also be set through an
/// `HSSMF_<FLAG>` environment variable.
#[derive(Parser, Debug)]
#[command(name = "hssmf", version)]
#[command(group(ArgGroup::new("input").required(true).args(["matrix", "gen"])))]
struct Cli {
    /// Matrix Market file (coordinate, real, general or symmetric).
    #[arg(long, env = "HSSMF_MATRIX")]
    matrix: Option<PathBuf>,
    /// Generated model problem: p2d, p3d, c2d or c3d.
    #[arg(long, env = "HSSMF_GEN", requires = "k")]
    gen: Option<GridKind>,
    /// Interior grid points per side.
    #[arg(long, env = "HSSMF_K")]
    k: Option<usize>,
    /// Viscosity of the convection-diffusion problems.
    #[arg(long, env = "HSSMF_NU", default_value_t = 1e-4)]
    nu: f64,
    /// Nested dissection: auto, geometric or graph.
    #[arg(long, env = "HSSMF_ORDERING", default_value = "auto")]
    ordering: OrderingChoice,
    /// Switch level: fronts at tree depth below this are HSS compressed.
    #[arg(long, env = "HSSMF_LS", default_value_t = 0)]
    ls: usize,
    /// Compression tolerance.
    #[arg(long, env = "HSSMF_EPS", default_value_t = 1e-6)]
    eps: f64,
    /// HSS leaf size.
    #[arg(long, env = "HSSMF_LEAF", default_value_t = 128)]
    leaf: usize,
    /// Initial number of random samples.
    #[arg(long, env = "HSSMF_D0", default_value_t = 128)]
    d0: usize,
    /// Samples added per adaptation round.
    #[arg(long, env = "HSSMF_DD", default_value_t = 128)]
    dd: usize,
    /// Oversampling.
    #[arg(long, env = "HSSMF_P", default_value_t = 10)]
    p: usize,
    /// Smallest front that is compressed.
    #[arg(long, env = "HSSMF_MIN_HSS", default_value_t = 512)]
    min_hss: usize,
    /// Worker threads.
    #[arg(long, env = "HSSMF_THREADS", default_value_t = 1)]
    threads: usize,
    /// auto, mf or mf-hss.
    #[arg(long, env = "HSSMF_MODE", default_value = "auto")]
    mode: SolverMode,
    /// Write JSON statistics (or the sweep CSV) here.
    #[arg(long, env = "HSSMF_STATS")]
    stats: Option<PathBuf>,
    /// Parameter sweep, e.g. `k=15,31,63` or `ls=0..6;eps=1e-8,1e-1`.
    #[arg(long, env = "HSSMF_SWEEP")]
    sweep: Option<String>,
    #[arg(long, env = "HSSMF_RTOL", default_value_t = 1e-6)]
    rtol: f64,
    #[arg(long, env = "HSSMF_ATOL", default_value_t = 1e-10)]
    atol: f64,
    /// GMRES restart length.
    #[arg(long, env = "HSSMF_RESTART", default_value_t = 30)]
    restart: usize,
    #[arg(long, env = "HSSMF_MAXIT", default_value_t = 500)]
    maxit: usize,
    /// Right-hand side, whitespace separated.
    #[arg(long, env = "HSSMF_RHS_FILE")]
    rhs_file: Option<PathBuf>,
}

impl Cli {
    fn config(&self) -> RunConfig {
        let input = match (&self.matrix, self.gen) {
            (Some(p), _) => InputSource::File(p.clone()),
            (None, Some(kind)) => {
                InputSource::Gen(GridProblem { kind, k: self.k.unwrap_or(0), nu: self.nu })
            }
            (None, None) => unreachable!("clap enforces the input group"),
        };
        let mut c = RunConfig::new(input);
        c.ordering = self.ordering;
        c.ls = self.ls;
        c.eps = self.eps;
        c.leaf = self.leaf;
        c.d0 = self.d0;
        c.dd = self.dd;
        c.p = self.p;
        c.min_hss_size = self.min_hss;
        c.threads = self.threads;
        c.mode = self.mode;
        c.rtol = self.rtol;
        c.atol = self.atol;
        c.restart = self.restart;
        c.maxit = self.maxit;
        c.rhs_file = self.rhs_file.clone();
        c.stats_path = self.stats.clone();
        c
    }
}

fn run_sweep(cfg: &RunConfig, spec: &str) -> Result<bool, DriverError> {
    cfg.validate()?;
    let axes = parse_sweep(spec)?;
    let rows = sweep(cfg, &axes)?;
    let out: Box<dyn std::io::Write> = match &cfg.stats_path {
        Some(p) => Box::new(
            std::fs::File::create(p).map_err(|e| DriverError::Output { path: p.clone(), msg: e.to_string() })?,
        ),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(out);
    let mut all_ok = true;
    for row in &rows {
        match &row.result {
            Ok(s) => {
                eprintln!("{}", s.summary());
                all_ok &= s.converged;
            }
            Err(e) => {
                eprintln!("{}: {e}", row.config.input);
                all_ok = false;
            }
        }
        w.serialize(row.record()).map_err(|e| DriverError::Output {
            path: cfg.stats_path.clone().unwrap_or_else(|| "stdout".into()),
            msg: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| DriverError::Output { path: "csv".into(), msg: e.to_string() })?;
    Ok(all_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = cli.config();
    if let Some(spec) = &cli.sweep {
        return match run_sweep(&cfg, spec) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }
    match run(&cfg) {
        Ok(stats) => {
            println!("{}", stats.summary());
            if stats.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e @ DriverError::Solve(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
