use super::{newton_sqp, sqp_step, ConvergenceRecord, IterationRecord, SolverConfig, Status};
use crate::coarse::{apply_step, coarse_step, CoarseHierarchy};
use crate::decomposition::{extract_local, Decomposition, Transfer};
use crate::error::{invalid, Result};
use crate::linalg::{dot, projected_gradient_norm, BoxBounds};
use crate::linesearch::armijo;
use crate::objective::{Objective, Restrict};
use crate::problems::FeObjective;

/// Subdomain transfers plus the per-subdomain restriction plans of an objective.
pub struct Schwarz<O: Restrict> {
    transfers: Vec<Transfer>,
    plans: Vec<O::Plan>,
}

impl<O: Restrict> Schwarz<O> {
    pub fn new(objective: &O, decomposition: &Decomposition) -> Self {
        let transfers = decomposition.transfers();
        let plans = transfers.iter().map(|t| objective.plan(&t.indices)).collect();
        Self { transfers, plans }
    }

    pub fn num_subdomains(&self) -> usize {
        self.transfers.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionerStep {
    pub iterate: Vec<f64>,
    /// Step applied to the aggregated subdomain correction.
    pub alpha: f64,
    pub stalled: bool,
    pub local_iterations: Vec<usize>,
    pub alpha_coarse: Option<f64>,
    pub coarse_iterations: Option<usize>,
}

/// One restricted additive Schwarz step that stays in the box: solve every
/// overlapping subproblem from `R_i v`, scatter the owned parts of the
/// corrections, and line-search the sum. `g` is the gradient at `v`.
pub fn nrasb_step<O: Restrict>(
    objective: &O,
    bounds: &BoxBounds,
    schwarz: &Schwarz<O>,
    v: &[f64],
    g: &[f64],
    cfg: &SolverConfig,
) -> PreconditionerStep {
    let mut direction = vec![0.0; v.len()];
    let mut local_iterations = Vec::with_capacity(schwarz.num_subdomains());
    for (i, (transfer, plan)) in schwarz.transfers.iter().zip(&schwarz.plans).enumerate() {
        let local = extract_local(objective, plan, bounds, transfer, i, v);
        let (solution, record) = newton_sqp(
            &local.objective,
            &local.bounds,
            &local.initial,
            cfg.inner.tol,
            cfg.inner.tol,
            cfg.inner.local_max_iterations,
            &cfg.line_search,
            cfg.stagnation_tol,
        );
        local_iterations.push(record.iterations());
        let correction: Vec<f64> = solution.iter().zip(&local.initial).map(|(a, b)| a - b).collect();
        transfer.restricted_prolong_add(&correction, &mut direction);
    }
    let slope = dot(g, &direction);
    let ls = armijo(objective, v, &direction, slope, &cfg.line_search);
    PreconditionerStep {
        iterate: apply_step(v, &direction, ls.alpha, bounds),
        alpha: ls.alpha,
        stalled: ls.stalled,
        local_iterations,
        alpha_coarse: None,
        coarse_iterations: None,
    }
}

/// Coarse correction followed by one subdomain step from the half-step iterate.
pub fn tl_nrasb_step<O: Restrict, C: Objective>(
    objective: &O,
    bounds: &BoxBounds,
    schwarz: &Schwarz<O>,
    hierarchy: &CoarseHierarchy<C>,
    v: &[f64],
    g: &[f64],
    cfg: &SolverConfig,
) -> PreconditionerStep {
    let coarse = coarse_step(objective, bounds, hierarchy, v, g, cfg);
    let g_half = if coarse.alpha == 0.0 { g.to_vec() } else { objective.gradient(&coarse.iterate) };
    let mut step = nrasb_step(objective, bounds, schwarz, &coarse.iterate, &g_half, cfg);
    step.stalled = step.stalled && (coarse.stalled || coarse.alpha == 0.0);
    step.alpha_coarse = Some(coarse.alpha);
    step.coarse_iterations = Some(coarse.coarse_iterations);
    step
}

pub enum Preconditioner<'a, O: Restrict, C = FeObjective> {
    /// No preconditioning step: the driver reduces to plain Newton-SQP.
    Disabled,
    OneLevel(&'a Schwarz<O>),
    TwoLevel(&'a Schwarz<O>, &'a CoarseHierarchy<C>),
}

impl<O: Restrict, C: Objective> Preconditioner<'_, O, C> {
    fn apply(&self, objective: &O, bounds: &BoxBounds, v: &[f64], g: &[f64], cfg: &SolverConfig) -> Option<PreconditionerStep> {
        match self {
            Preconditioner::Disabled => None,
            Preconditioner::OneLevel(s) => Some(nrasb_step(objective, bounds, s, v, g, cfg)),
            Preconditioner::TwoLevel(s, h) => Some(tl_nrasb_step(objective, bounds, s, h, v, g, cfg)),
        }
    }
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Newton-SQP right-preconditioned by a (two-level) Schwarz step: each outer
/// iteration applies the preconditioner, then one SQP step from its result.
pub fn raspnb_solve<O: Restrict, C: Objective>(
    objective: &O,
    bounds: &BoxBounds,
    preconditioner: &Preconditioner<'_, O, C>,
    v0: &[f64],
    cfg: &SolverConfig,
) -> (Vec<f64>, ConvergenceRecord) {
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
        let pre = preconditioner.apply(objective, bounds, &v, &g, cfg);
        let (v_plus, g_plus) = match &pre {
            Some(step) if step.iterate != v => {
                let gp = objective.gradient(&step.iterate);
                (step.iterate.clone(), gp)
            }
            _ => (v.clone(), g.clone()),
        };
        let sqp = sqp_step(objective, bounds, &v_plus, &g_plus, cfg.inner.tol, &cfg.line_search);
        let pre_stalled = pre.as_ref().is_none_or(|p| p.stalled || p.iterate == v);
        if sqp.stalled && pre_stalled {
            status = Status::LineSearchStalled;
            break;
        }
        let moved = max_change(&sqp.iterate, &v);
        v = sqp.iterate;
        g = objective.gradient(&v);
        pg = projected_gradient_norm(&v, &g, bounds);
        k += 1;
        entries.push(IterationRecord {
            iteration: k,
            projected_gradient: pg,
            energy: objective.energy(&v),
            alpha: Some(sqp.alpha),
            alpha_schwarz: pre.as_ref().map(|p| p.alpha),
            alpha_coarse: pre.as_ref().and_then(|p| p.alpha_coarse),
            local_iterations: pre.as_ref().map(|p| p.local_iterations.clone()).unwrap_or_default(),
            coarse_iterations: pre.as_ref().and_then(|p| p.coarse_iterations),
        });
        if moved < cfg.stagnation_tol && pg > cfg.outer_tol {
            status = Status::Stagnated;
            break;
        }
    }
    (v, ConvergenceRecord { entries, status })
}

/// Iterates the preconditioner on its own, as a fixed-point method.
pub fn run_preconditioner_only<O: Restrict, C: Objective>(
    objective: &O,
    bounds: &BoxBounds,
    preconditioner: &Preconditioner<'_, O, C>,
    v0: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, ConvergenceRecord)> {
    if matches!(preconditioner, Preconditioner::Disabled) {
        return Err(invalid("a preconditioner-only run needs a preconditioner"));
    }
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
        let step = preconditioner
            .apply(objective, bounds, &v, &g, cfg)
            .expect("preconditioner is enabled");
        if step.stalled {
            status = Status::LineSearchStalled;
            break;
        }
        let moved = max_change(&step.iterate, &v);
        v = step.iterate;
        g = objective.gradient(&v);
        pg = projected_gradient_norm(&v, &g, bounds);
        k += 1;
        entries.push(IterationRecord {
            iteration: k,
            projected_gradient: pg,
            energy: objective.energy(&v),
            alpha: None,
            alpha_schwarz: Some(step.alpha),
            alpha_coarse: step.alpha_coarse,
            local_iterations: step.local_iterations,
            coarse_iterations: step.coarse_iterations,
        });
        if moved < cfg.stagnation_tol && pg > cfg.outer_tol {
            status = Status::Stagnated;
            break;
        }
    }
    Ok((v, ConvergenceRecord { entries, status }))
}
