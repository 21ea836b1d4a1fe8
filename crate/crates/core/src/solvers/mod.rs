//! Outer solution methods: Newton-SQP, semismooth Newton, the one- and
//! two-level Schwarz iterations, and Newton-SQP right-preconditioned by them.

mod newton_sqp;
mod schwarz;
mod semismooth;

use std::fmt::Write as _;

pub use newton_sqp::{newton_sqp, newton_sqp_solve, sqp_step, SqpStep};
pub use schwarz::{
    nrasb_step, raspnb_solve, run_preconditioner_only, tl_nrasb_step, Preconditioner, PreconditionerStep,
    Schwarz,
};
pub use semismooth::semismooth_newton_solve;

use crate::error::{invalid, Result};
use crate::linesearch::LineSearchConfig;

/// Settings of the inner (subdomain, coarse and QP) solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    pub tol: f64,
    pub local_max_iterations: usize,
    pub coarse_max_iterations: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self { tol: 1e-11, local_max_iterations: 50, coarse_max_iterations: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub outer_tol: f64,
    pub max_outer_iterations: usize,
    pub inner: InnerConfig,
    pub line_search: LineSearchConfig,
    /// An outer step moving the iterate less than this (max-norm) without
    /// reaching the tolerance aborts the run.
    pub stagnation_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_tol: 1e-8,
            max_outer_iterations: 1000,
            inner: InnerConfig::default(),
            line_search: LineSearchConfig::default(),
            stagnation_tol: 1e-15,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0 && self.inner.tol > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if self.inner.tol > self.outer_tol {
            return Err(invalid("inner tolerance must not exceed the outer tolerance"));
        }
        LineSearchConfig::new(
            self.line_search.c1,
            self.line_search.rho,
            self.line_search.alpha0,
            self.line_search.max_backtracks,
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    /// The iterate stopped moving before the tolerance was met.
    Stagnated,
    /// No step satisfying the line-search condition was found.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub projected_gradient: f64,
    pub energy: f64,
    /// Step of the Newton/SQP update (`None` for pure preconditioner runs).
    pub alpha: Option<f64>,
    /// Step of the aggregated subdomain correction.
    pub alpha_schwarz: Option<f64>,
    /// Step of the prolongated coarse correction.
    pub alpha_coarse: Option<f64>,
    pub local_iterations: Vec<usize>,
    pub coarse_iterations: Option<usize>,
}

impl IterationRecord {
    pub(crate) fn initial(projected_gradient: f64, energy: f64) -> Self {
        Self {
            iteration: 0,
            projected_gradient,
            energy,
            alpha: None,
            alpha_schwarz: None,
            alpha_coarse: None,
            local_iterations: Vec::new(),
            coarse_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub entries: Vec<IterationRecord>,
    pub status: Status,
}

impl ConvergenceRecord {
    /// Number of outer iterations performed.
    pub fn iterations(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn final_projected_gradient(&self) -> f64 {
        self.entries.last().map_or(f64::NAN, |e| e.projected_gradient)
    }

    /// `IT,PRN` history, one row per iterate, PRN with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("IT,PRN\n");
        for e in &self.entries {
            writeln!(out, "{},{:.16e}", e.iteration, e.projected_gradient).unwrap();
        }
        out
    }
}
