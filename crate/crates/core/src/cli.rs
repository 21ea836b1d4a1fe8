//! Experiment runner: argument parsing, solver dispatch and CSV output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::coarse::build_hierarchy;
use crate::decomposition::{owner_from_entries, parse_partition_file, Decomposition};
use crate::error::{invalid, Error, Result};
use crate::problems::{Problem, ProblemKind, UpperObstacle};
use crate::solvers::{
    newton_sqp_solve, raspnb_solve, run_preconditioner_only, semismooth_newton_solve, ConvergenceRecord,
    Preconditioner, Schwarz, SolverConfig,
};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

pub const DEFAULT_SWEEP: [usize; 5] = [2, 4, 8, 16, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    Ignition,
    Minsurf,
}

impl From<ProblemArg> for ProblemKind {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::Ignition => ProblemKind::Ignition,
            ProblemArg::Minsurf => ProblemKind::MinimalSurface,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Semismooth Newton.
    Ssn,
    NewtonSqp,
    /// One-level Schwarz iteration on its own.
    Nras,
    /// Two-level Schwarz iteration on its own.
    TlNras,
    /// Newton-SQP preconditioned by the one-level Schwarz step.
    Raspn,
    /// Newton-SQP preconditioned by the two-level Schwarz step.
    TlRaspn,
}

impl Method {
    pub fn uses_subdomains(self) -> bool {
        !matches!(self, Method::Ssn | Method::NewtonSqp)
    }

    pub fn uses_coarse(self) -> bool {
        matches!(self, Method::TlNras | Method::TlRaspn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UpperArg {
    Corrected,
    AsPrinted,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "schwarz-box", version, about = "Bound-constrained FE minimization with Schwarz-preconditioned Newton")]
pub struct Args {
    #[arg(long, value_enum, default_value = "minsurf")]
    pub problem: ProblemArg,

    #[arg(long, value_enum, default_value = "raspn")]
    pub method: Method,

    /// Cells per side of the fine mesh.
    #[arg(long, default_value_t = 120)]
    pub mesh: usize,

    /// Cells per side of the coarse mesh (two-level methods).
    #[arg(long, default_value_t = 30)]
    pub coarse_mesh: usize,

    #[arg(long, default_value_t = 16)]
    pub subdomains: usize,

    /// Overlap in layers of mesh edges.
    #[arg(long, default_value_t = 3)]
    pub overlap: usize,

    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    #[arg(long, default_value_t = 1e-11)]
    pub inner_tol: f64,

    #[arg(long, default_value = "history.csv")]
    pub output: PathBuf,

    /// File of `node subdomain` lines replacing the built-in partitioner.
    #[arg(long)]
    pub partition_file: Option<PathBuf>,

    /// Run once per subdomain count (default 2,4,8,16,32).
    #[arg(long, value_delimiter = ',', num_args = 0.., default_missing_value = "2,4,8,16,32")]
    pub sweep: Option<Vec<usize>>,

    /// Recorded in the run log; the pipeline is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_enum, default_value = "corrected", hide = true)]
    pub upper_obstacle: UpperArg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub method: Method,
    pub mesh: usize,
    pub coarse_mesh: usize,
    pub subdomains: usize,
    pub overlap: usize,
    pub outer_tol: f64,
    pub inner_tol: f64,
    pub output: Option<PathBuf>,
    pub partition_file: Option<PathBuf>,
    pub seed: u64,
    pub upper: UpperObstacle,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::MinimalSurface,
            method: Method::Raspn,
            mesh: 120,
            coarse_mesh: 30,
            subdomains: 16,
            overlap: 3,
            outer_tol: 1e-8,
            inner_tol: 1e-11,
            output: None,
            partition_file: None,
            seed: 0,
            upper: UpperObstacle::Corrected,
        }
    }
}

impl From<&Args> for ExperimentConfig {
    fn from(a: &Args) -> Self {
        Self {
            problem: a.problem.into(),
            method: a.method,
            mesh: a.mesh,
            coarse_mesh: a.coarse_mesh,
            subdomains: a.subdomains,
            overlap: a.overlap,
            outer_tol: a.tol,
            inner_tol: a.inner_tol,
            output: Some(a.output.clone()),
            partition_file: a.partition_file.clone(),
            seed: a.seed,
            upper: match a.upper_obstacle {
                UpperArg::Corrected => UpperObstacle::Corrected,
                UpperArg::AsPrinted => UpperObstacle::AsPrinted,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig { outer_tol: self.outer_tol, ..SolverConfig::default() };
        cfg.inner.tol = self.inner_tol;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh < 2 {
            return Err(invalid("the fine mesh needs at least 2 cells per side"));
        }
        if self.method.uses_subdomains() && self.partition_file.is_none() && self.subdomains == 0 {
            return Err(invalid("at least one subdomain is required"));
        }
        if self.method.uses_coarse() && (self.coarse_mesh < 2 || !self.mesh.is_multiple_of(self.coarse_mesh)) {
            return Err(invalid(format!(
                "coarse mesh {} must divide the fine mesh {} and have at least 2 cells",
                self.coarse_mesh, self.mesh
            )));
        }
        self.solver_config().validate()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub solution: Vec<f64>,
    pub record: ConvergenceRecord,
}

fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let problem = Problem::with_options(cfg.problem, cfg.mesh, cfg.upper, None)?;
    let report = problem.validate_feasibility();
    if !report.is_feasible() {
        return Err(Error::Infeasible { violations: report.violations() });
    }
    Ok(problem)
}

fn build_decomposition(cfg: &ExperimentConfig, problem: &Problem) -> Result<Decomposition> {
    let space = problem.space();
    match &cfg.partition_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let owner = owner_from_entries(&parse_partition_file(&text)?, space)?;
            Decomposition::from_owner(owner, &space.dof_adjacency(), cfg.overlap)
        }
        None => Decomposition::for_space(space, cfg.subdomains, cfg.overlap),
    }
}

/// Runs one experiment without touching the file system.
pub fn solve(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let bounds = problem.bounds()?;
    let v0 = problem.initial_guess()?;
    let objective = problem.objective();
    let solver = cfg.solver_config();
    let (solution, record) = match cfg.method {
        Method::Ssn => semismooth_newton_solve(&objective, &bounds, &v0, &solver),
        Method::NewtonSqp => newton_sqp_solve(&objective, &bounds, &v0, &solver),
        method => {
            let decomposition = build_decomposition(cfg, &problem)?;
            let schwarz = Schwarz::new(&objective, &decomposition);
            let hierarchy = if method.uses_coarse() { Some(build_hierarchy(&problem, cfg.coarse_mesh)?) } else { None };
            let preconditioner = match &hierarchy {
                Some(h) => Preconditioner::TwoLevel(&schwarz, h),
                None => Preconditioner::OneLevel(&schwarz),
            };
            match method {
                Method::Nras | Method::TlNras => {
                    run_preconditioner_only(&objective, &bounds, &preconditioner, &v0, &solver)?
                }
                _ => raspnb_solve(&objective, &bounds, &preconditioner, &v0, &solver),
            }
        }
    };
    Ok(ExperimentOutcome { solution, record })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Runs one experiment and writes its `IT,PRN` history to `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let outcome = solve(cfg)?;
    if let Some(path) = &cfg.output {
        write_file(path, &outcome.record.to_csv())?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub subdomains: usize,
    pub result: Result<ConvergenceRecord>,
}

impl SweepRow {
    pub fn iterations(&self) -> Option<usize> {
        self.result.as_ref().ok().map(ConvergenceRecord::iterations)
    }

    pub fn converged(&self) -> bool {
        self.result.as_ref().is_ok_and(ConvergenceRecord::converged)
    }
}

/// `history.csv` becomes `history_sbd8.csv` for 8 subdomains.
pub fn sweep_output_path(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map_or_else(|| "history".into(), |s| s.to_string_lossy().into_owned());
    let ext = base.extension().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    base.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

pub fn summary_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("subdomains,iterations,converged\n");
    for row in rows {
        let its = row.iterations().map_or_else(|| "-".into(), |i| i.to_string());
        writeln!(out, "{},{},{}", row.subdomains, its, row.converged()).unwrap();
    }
    out
}

/// One run per subdomain count; failures are recorded and the sweep goes on.
pub fn run_sweep(base: &ExperimentConfig, counts: &[usize]) -> Vec<SweepRow> {
    let rows: Vec<SweepRow> = counts
        .iter()
        .map(|&n| {
            let mut cfg = base.clone();
            cfg.subdomains = n;
            cfg.output = base.output.as_deref().map(|p| sweep_output_path(p, &format!("sbd{n}")));
            SweepRow { subdomains: n, result: run_experiment(&cfg).map(|o| o.record) }
        })
        .collect();
    if let Some(path) = &base.output {
        let _ = write_file(&sweep_output_path(path, "summary"), &summary_table(&rows));
    }
    rows
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        Error::NotConverged { .. } | Error::IndefiniteMatrix { .. } => EXIT_NOT_CONVERGED,
        Error::Io(_) => EXIT_IO,
        Error::InvalidArgument(_) | Error::PartitionFailure(_) | Error::Parse { .. } => EXIT_CONFIG,
    }
}

/// Parses command-line arguments (program name first).
pub fn parse_args<I, T>(args: I) -> std::result::Result<Args, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Args::try_parse_from(args)
}

/// Full command-line entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match parse_args(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_CONVERGED };
            let _ = e.print();
            return code;
        }
    };
    let cfg = ExperimentConfig::from(&args);
    if let Some(counts) = &args.sweep {
        let counts = if counts.is_empty() { DEFAULT_SWEEP.to_vec() } else { counts.clone() };
        let rows = run_sweep(&cfg, &counts);
        print!("{}", summary_table(&rows));
        for row in &rows {
            if let Err(e) = &row.result {
                eprintln!("subdomains {}: {e}", row.subdomains);
            }
        }
        return match rows.iter().find_map(|r| r.result.as_ref().err()) {
            Some(e) => exit_code(e),
            None if rows.iter().all(SweepRow::converged) => EXIT_CONVERGED,
            None => EXIT_NOT_CONVERGED,
        };
    }
    match run_experiment(&cfg) {
        Ok(outcome) => {
            let rec = &outcome.record;
            eprintln!(
                "{:?} after {} iterations, projected gradient {:.3e} (seed {})",
                rec.status,
                rec.iterations(),
                rec.final_projected_gradient(),
                cfg.seed
            );
            if rec.converged() {
                EXIT_CONVERGED
            } else {
                EXIT_NOT_CONVERGED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
