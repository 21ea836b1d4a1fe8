//! Backtracking Armijo line search.

use crate::error::{invalid, Result};
use crate::objective::Objective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    pub c1: f64,
    pub rho: f64,
    pub alpha0: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self { c1: 1e-4, rho: 0.5, alpha0: 1.0, max_backtracks: 40 }
    }
}

impl LineSearchConfig {
    pub fn new(c1: f64, rho: f64, alpha0: f64, max_backtracks: usize) -> Result<Self> {
        if !(0.0 < c1 && c1 < 1.0) {
            return Err(invalid("line search: c1 must lie in (0, 1)"));
        }
        if !(0.0 < rho && rho < 1.0) {
            return Err(invalid("line search: rho must lie in (0, 1)"));
        }
        if !(0.0 < alpha0 && alpha0 <= 1.0) {
            return Err(invalid("line search: alpha0 must lie in (0, 1]"));
        }
        Ok(Self { c1, rho, alpha0, max_backtracks })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    /// Accepted step, or 0 when stalled.
    pub alpha: f64,
    pub backtracks: usize,
    /// `f(v + alpha d) - f(v)` at the accepted step.
    pub change: f64,
    pub stalled: bool,
}

/// Armijo backtracking on `change(alpha) = f(v + alpha d) - f(v)` given the
/// directional derivative `slope = <grad f(v), d>`.
///
/// Non-descent directions (`slope >= 0`) only need a strict decrease. A step
/// that changes nothing with zero slope (e.g. `d = 0`) is accepted as is.
pub fn armijo_with(
    mut change: impl FnMut(f64) -> f64,
    slope: f64,
    cfg: &LineSearchConfig,
) -> LineSearchOutcome {
    let mut alpha = cfg.alpha0;
    for m in 0..=cfg.max_backtracks {
        let delta = change(alpha);
        let accept = if slope < 0.0 {
            delta <= cfg.c1 * alpha * slope
        } else {
            delta < 0.0 || (m == 0 && slope == 0.0 && delta == 0.0)
        };
        if accept {
            return LineSearchOutcome { alpha, backtracks: m, change: delta, stalled: false };
        }
        alpha *= cfg.rho;
    }
    LineSearchOutcome { alpha: 0.0, backtracks: cfg.max_backtracks, change: 0.0, stalled: true }
}

pub fn armijo<O: Objective + ?Sized>(
    objective: &O,
    v: &[f64],
    d: &[f64],
    slope: f64,
    cfg: &LineSearchConfig,
) -> LineSearchOutcome {
    armijo_with(|alpha| objective.energy_change(v, d, alpha), slope, cfg)
}
