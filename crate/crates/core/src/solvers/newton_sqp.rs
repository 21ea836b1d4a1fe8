use super::{ConvergenceRecord, IterationRecord, SolverConfig, Status};
use crate::coarse::apply_step;
use crate::linalg::{dot, projected_gradient_norm, BoxBounds};
use crate::linesearch::{armijo, LineSearchConfig};
use crate::objective::Objective;
use crate::qp::{solve_box_qp, BoxQp, QpSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct SqpStep {
    pub iterate: Vec<f64>,
    pub alpha: f64,
    pub stalled: bool,
    pub qp: QpSolution,
}

/// One Newton-SQP update from a feasible `x` with gradient `g`: minimize the
/// quadratic model over the shifted box, then line-search along the step.
pub fn sqp_step<O: Objective + ?Sized>(
    objective: &O,
    bounds: &BoxBounds,
    x: &[f64],
    g: &[f64],
    qp_tol: f64,
    line_search: &LineSearchConfig,
) -> SqpStep {
    let qp = BoxQp {
        hessian: objective.hessian(x),
        gradient: g.to_vec(),
        bounds: bounds.shifted(x),
        tol: qp_tol,
    };
    let qp = solve_box_qp(&qp).expect("the zero step is feasible at a feasible iterate");
    let slope = dot(g, &qp.step);
    let ls = armijo(objective, x, &qp.step, slope, line_search);
    let iterate = apply_step(x, &qp.step, ls.alpha, bounds);
    SqpStep { iterate, alpha: ls.alpha, stalled: ls.stalled, qp }
}

/// Newton-SQP from `x0` until the projected gradient drops to `tol`.
#[allow(clippy::too_many_arguments)]
pub fn newton_sqp<O: Objective + ?Sized>(
    objective: &O,
    bounds: &BoxBounds,
    x0: &[f64],
    tol: f64,
    qp_tol: f64,
    max_iterations: usize,
    line_search: &LineSearchConfig,
    stagnation_tol: f64,
) -> (Vec<f64>, ConvergenceRecord) {
    let mut x = x0.to_vec();
    let mut g = objective.gradient(&x);
    let mut pg = projected_gradient_norm(&x, &g, bounds);
    let mut entries = vec![IterationRecord::initial(pg, objective.energy(&x))];
    let mut status = Status::MaxIterations;
    let mut k = 0;
    loop {
        if pg <= tol {
            status = Status::Converged;
            break;
        }
        if k == max_iterations {
            break;
        }
        let step = sqp_step(objective, bounds, &x, &g, qp_tol, line_search);
        if step.stalled {
            status = Status::LineSearchStalled;
            break;
        }
        let moved = x.iter().zip(&step.iterate).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = step.iterate;
        g = objective.gradient(&x);
        pg = projected_gradient_norm(&x, &g, bounds);
        k += 1;
        entries.push(IterationRecord {
            iteration: k,
            projected_gradient: pg,
            energy: objective.energy(&x),
            alpha: Some(step.alpha),
            ..IterationRecord::initial(pg, 0.0)
        });
        if moved < stagnation_tol && pg > tol {
            status = Status::Stagnated;
            break;
        }
    }
    (x, ConvergenceRecord { entries, status })
}

/// Global Newton-SQP with the outer tolerance and QP tolerance of `cfg`.
pub fn newton_sqp_solve<O: Objective + ?Sized>(
    objective: &O,
    bounds: &BoxBounds,
    v0: &[f64],
    cfg: &SolverConfig,
) -> (Vec<f64>, ConvergenceRecord) {
    newton_sqp(
        objective,
        bounds,
        v0,
        cfg.outer_tol,
        cfg.inner.tol,
        cfg.max_outer_iterations,
        &cfg.line_search,
        cfg.stagnation_tol,
    )
}
