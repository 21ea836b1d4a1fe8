//! Coarse-level correction for the two-level iteration.
//!
//! The coarse space lives on a nested coarse grid. Corrections are
//! interpolated with `P0`, gradients are restricted with `R0 = P0^T`, and
//! iterates are transferred by injection at coincident nodes. Coarse bounds
//! follow the Gelman-Mandel rule: for each coarse node, take the tightest
//! fine slack over the interior of its basis support, which keeps every
//! interpolated correction inside the fine box.

use crate::error::{invalid, Result};
use crate::linalg::{dot, BoxBounds};
use crate::linesearch::armijo;
use crate::objective::{Augmented, Objective};
use crate::problems::{FeObjective, Problem};
use crate::solvers::{newton_sqp, SolverConfig};

/// Transfer operators between fine and coarse unknowns (Dirichlet nodes excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseSpace {
    /// Row `j` of `P0`: `(coarse dof, weight)` pairs with positive weight.
    rows: Vec<Vec<(usize, f64)>>,
    /// Fine dof coinciding with each coarse dof.
    injection: Vec<usize>,
    /// Fine dofs in the open support of each coarse basis function.
    supports: Vec<Vec<usize>>,
}

impl CoarseSpace {
    pub fn new(rows: Vec<Vec<(usize, f64)>>, injection: Vec<usize>) -> Result<Self> {
        let n_coarse = injection.len();
        let mut supports = vec![Vec::new(); n_coarse];
        for (j, row) in rows.iter().enumerate() {
            for &(t, w) in row {
                if t >= n_coarse {
                    return Err(invalid(format!("prolongation column {t} out of range")));
                }
                if w < 0.0 {
                    return Err(invalid("prolongation weights must be nonnegative"));
                }
                if w > 0.0 {
                    supports[t].push(j);
                }
            }
        }
        if injection.iter().any(|&j| j >= rows.len()) {
            return Err(invalid("injection index out of range"));
        }
        Ok(Self { rows, injection, supports })
    }

    pub fn fine_dim(&self) -> usize {
        self.rows.len()
    }

    pub fn coarse_dim(&self) -> usize {
        self.injection.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    /// `P0 c`
    pub fn prolong(&self, c: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(t, w)| w * c[t]).sum()).collect()
    }

    /// `R0 r = P0^T r`
    pub fn restrict(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.coarse_dim()];
        for (row, &rj) in self.rows.iter().zip(r) {
            for &(t, w) in row {
                out[t] += w * rj;
            }
        }
        out
    }

    /// `Pi0 v`: injection at coincident nodes.
    pub fn inject(&self, v: &[f64]) -> Vec<f64> {
        self.injection.iter().map(|&j| v[j]).collect()
    }

    /// Coarse bounds around `Pi0 v` from the tightest fine slack in each support.
    pub fn project_constraints(&self, bounds: &BoxBounds, v: &[f64]) -> BoxBounds {
        let v0 = self.inject(v);
        let mut lower = Vec::with_capacity(self.coarse_dim());
        let mut upper = Vec::with_capacity(self.coarse_dim());
        for (t, support) in self.supports.iter().enumerate() {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for &j in support {
                lo = lo.max(bounds.lower[j] - v[j]);
                hi = hi.min(bounds.upper[j] - v[j]);
            }
            lower.push(v0[t] + lo);
            upper.push(v0[t] + hi);
        }
        BoxBounds { lower, upper }
    }
}

/// Coarse objective together with the transfers that connect it to the fine level.
#[derive(Debug, Clone)]
pub struct CoarseHierarchy<C = FeObjective> {
    pub space: CoarseSpace,
    pub objective: C,
}

/// Rows of the nodal P1 interpolation from a `coarse x coarse` grid onto a
/// nested `fine x fine` grid, over all nodes (boundary included).
pub fn nodal_prolongation(fine_cells: usize, coarse_cells: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    if coarse_cells == 0 || !fine_cells.is_multiple_of(coarse_cells) {
        return Err(invalid(format!(
            "coarse grid {coarse_cells} does not nest in fine grid {fine_cells}"
        )));
    }
    let ratio = fine_cells / coarse_cells;
    let cside = coarse_cells + 1;
    let mut rows = Vec::with_capacity((fine_cells + 1) * (fine_cells + 1));
    for row in 0..=fine_cells {
        for col in 0..=fine_cells {
            let cc = (col / ratio).min(coarse_cells - 1);
            let cr = (row / ratio).min(coarse_cells - 1);
            let xi = (col - cc * ratio) as f64 / ratio as f64;
            let eta = (row - cr * ratio) as f64 / ratio as f64;
            let a = cr * cside + cc;
            let b = a + 1;
            let c = a + cside + 1;
            let d = a + cside;
            let weights = if xi >= eta {
                [(a, 1.0 - xi), (b, xi - eta), (c, eta)]
            } else {
                [(a, 1.0 - eta), (c, xi), (d, eta - xi)]
            };
            rows.push(weights.into_iter().filter(|&(_, w)| w > 0.0).collect());
        }
    }
    Ok(rows)
}

/// Nested coarse problem of the same kind, with transfers between free unknowns.
pub fn build_hierarchy(fine: &Problem, coarse_cells: usize) -> Result<CoarseHierarchy<FeObjective>> {
    let fine_cells = fine.mesh().cells_per_side();
    let nodal = nodal_prolongation(fine_cells, coarse_cells)?;
    let coarse = Problem::new(fine.kind(), coarse_cells)?;
    let ratio = fine_cells / coarse_cells;
    let fine_space = fine.space();
    let coarse_space = coarse.space();
    let rows = fine_space
        .free_nodes()
        .iter()
        .map(|&node| {
            nodal[node]
                .iter()
                .filter_map(|&(t, w)| coarse_space.dof_of_node(t).map(|dof| (dof, w)))
                .collect()
        })
        .collect();
    let injection = coarse_space
        .free_nodes()
        .iter()
        .map(|&node| {
            let (r, c) = (node / (coarse_cells + 1), node % (coarse_cells + 1));
            let fine_node = fine.mesh().node_at(r * ratio, c * ratio);
            fine_space.dof_of_node(fine_node).expect("interior coarse node is interior on the fine grid")
        })
        .collect();
    Ok(CoarseHierarchy {
        space: CoarseSpace::new(rows, injection)?,
        objective: coarse.objective(),
    })
}

/// Coarse minimization problem built around the fine iterate `v`.
#[derive(Debug, Clone)]
pub struct CoarseProblem<C> {
    pub objective: Augmented<C>,
    pub bounds: BoxBounds,
    pub initial: Vec<f64>,
}

/// Augments the coarse energy with the linear term that makes its gradient at
/// `Pi0 v` equal to `R0 grad f(v)`.
pub fn make_coarse_problem<'a, C: Objective>(
    hierarchy: &'a CoarseHierarchy<C>,
    fine_gradient: &[f64],
    fine_bounds: &BoxBounds,
    v: &[f64],
) -> CoarseProblem<&'a C> {
    let space = &hierarchy.space;
    let initial = space.inject(v);
    let restricted = space.restrict(fine_gradient);
    let coarse_grad = hierarchy.objective.gradient(&initial);
    let linear = restricted.iter().zip(&coarse_grad).map(|(r, c)| r - c).collect();
    CoarseProblem {
        objective: Augmented { base: &hierarchy.objective, linear },
        bounds: space.project_constraints(fine_bounds, v),
        initial,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseStep {
    /// The half-step iterate `v + alpha P0 (v0* - Pi0 v)`.
    pub iterate: Vec<f64>,
    pub alpha: f64,
    pub stalled: bool,
    pub coarse_iterations: usize,
    /// Max-norm of the prolongated correction before scaling.
    pub correction_norm: f64,
}

/// Solves the coarse problem and applies the line-searched prolongated correction.
pub fn coarse_step<F: Objective, C: Objective>(
    fine: &F,
    fine_bounds: &BoxBounds,
    hierarchy: &CoarseHierarchy<C>,
    v: &[f64],
    fine_gradient: &[f64],
    cfg: &SolverConfig,
) -> CoarseStep {
    let problem = make_coarse_problem(hierarchy, fine_gradient, fine_bounds, v);
    let (solution, record) = newton_sqp(
        &problem.objective,
        &problem.bounds,
        &problem.initial,
        cfg.inner.tol,
        cfg.inner.tol,
        cfg.inner.coarse_max_iterations,
        &cfg.line_search,
        cfg.stagnation_tol,
    );
    let delta: Vec<f64> = solution.iter().zip(&problem.initial).map(|(a, b)| a - b).collect();
    let d = hierarchy.space.prolong(&delta);
    let correction_norm = crate::linalg::norm_inf(&d);
    let coarse_iterations = record.iterations();
    if correction_norm == 0.0 {
        return CoarseStep { iterate: v.to_vec(), alpha: 0.0, stalled: false, coarse_iterations, correction_norm };
    }
    let slope = dot(fine_gradient, &d);
    let ls = armijo(fine, v, &d, slope, &cfg.line_search);
    let iterate = apply_step(v, &d, ls.alpha, fine_bounds);
    CoarseStep { iterate, alpha: ls.alpha, stalled: ls.stalled, coarse_iterations, correction_norm }
}

/// `clamp(v + alpha d)`: exact feasibility despite rounding in the update.
pub(crate) fn apply_step(v: &[f64], d: &[f64], alpha: f64, bounds: &BoxBounds) -> Vec<f64> {
    if alpha == 0.0 {
        return v.to_vec();
    }
    v.iter()
        .zip(d)
        .enumerate()
        .map(|(i, (x, d))| bounds.clamp(i, x + alpha * d))
        .collect()
}
