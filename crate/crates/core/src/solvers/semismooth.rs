use super::{ConvergenceRecord, IterationRecord, SolverConfig, Status};
use crate::linalg::{dot, pcg, project_box, projected_gradient_norm, BoxBounds, CgStatus, CsrMatrix};
use crate::objective::Objective;

const CG_RTOL: f64 = 1e-10;
const MAX_SHIFTS: usize = 20;

/// Newton direction of the semismooth reformulation
/// `v - P(v - g) = 0`: components with `v - g` outside the box are pinned to
/// the bound, the rest solve the reduced Newton system.
fn newton_direction(h: &CsrMatrix, v: &[f64], g: &[f64], bounds: &BoxBounds) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    let mut inactive = Vec::with_capacity(n);
    for i in 0..n {
        let trial = v[i] - g[i];
        if trial < bounds.lower[i] {
            d[i] = bounds.lower[i] - v[i];
        } else if trial > bounds.upper[i] {
            d[i] = bounds.upper[i] - v[i];
        } else {
            inactive.push(i);
        }
    }
    if inactive.is_empty() {
        return d;
    }
    let hd = h.mul_vec(&d);
    let rhs: Vec<f64> = inactive.iter().map(|&i| -g[i] - hd[i]).collect();
    let h_ii = h.principal_submatrix(&inactive);
    let tol = CG_RTOL * crate::linalg::norm2(&rhs);
    let cap = 10 * inactive.len().max(1);
    let mut shift = 1e-8 * h_ii.max_abs().max(f64::MIN_POSITIVE);
    let mut out = pcg(&h_ii, &rhs, tol, cap);
    for _ in 0..MAX_SHIFTS {
        if !matches!(out.status, CgStatus::NegativeCurvature(_)) {
            break;
        }
        out = pcg(&h_ii.with_shifted_diagonal(shift), &rhs, tol, cap);
        shift *= 10.0;
    }
    for (l, &i) in inactive.iter().enumerate() {
        d[i] = out.x[l];
    }
    d
}

/// Semismooth Newton on the box-constrained first-order conditions with a
/// projected backtracking line search.
pub fn semismooth_newton_solve<O: Objective + ?Sized>(
    objective: &O,
    bounds: &BoxBounds,
    v0: &[f64],
    cfg: &SolverConfig,
) -> (Vec<f64>, ConvergenceRecord) {
    let ls = &cfg.line_search;
    let mut v = v0.to_vec();
    let mut g = objective.gradient(&v);
    let mut pg = projected_gradient_norm(&v, &g, bounds);
    let mut entries = vec![IterationRecord::initial(pg, objective.energy(&v))];
    let mut status = Status::MaxIterations;
    let mut k = 0;
    loop {
        if pg <= cfg.outer_tol {
            status = Status::Converged;
            break;
        }
        if k == cfg.max_outer_iterations {
            break;
        }
        let d = newton_direction(&objective.hessian(&v), &v, &g, bounds);
        let mut alpha = ls.alpha0;
        let mut accepted = None;
        for _ in 0..=ls.max_backtracks {
            let raw: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let trial = project_box(&raw, bounds);
            let step: Vec<f64> = trial.iter().zip(&v).map(|(a, b)| a - b).collect();
            let predicted = dot(&g, &step);
            let change = objective.energy_change(&v, &step, 1.0);
            let ok = if predicted < 0.0 { change <= ls.c1 * predicted } else { change < 0.0 };
            if ok {
                accepted = Some(trial);
                break;
            }
            alpha *= ls.rho;
        }
        let Some(next) = accepted else {
            status = Status::LineSearchStalled;
            break;
        };
        let moved = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        g = objective.gradient(&v);
        pg = projected_gradient_norm(&v, &g, bounds);
        k += 1;
        entries.push(IterationRecord {
            iteration: k,
            projected_gradient: pg,
            energy: objective.energy(&v),
            alpha: Some(alpha),
            ..IterationRecord::initial(pg, 0.0)
        });
        if moved < cfg.stagnation_tol && pg > cfg.outer_tol {
            status = Status::Stagnated;
            break;
        }
    }
    (v, ConvergenceRecord { entries, status })
}
