//! Bound-constrained convex quadratic programs
//! `min 1/2 s^T H s + g^T s  s.t.  lower <= s <= upper`.
//!
//! Gradient projection sweeps identify the active face, conjugate gradients
//! minimize over it, and the two alternate until the projected gradient of
//! the model falls below the tolerance.

use crate::error::{invalid, Result};
use crate::linalg::{dot, norm2, pcg, BoxBounds, CgStatus, CsrMatrix};

const SUFFICIENT_DECREASE: f64 = 0.01;
const PROJECTION_BACKTRACKS: usize = 60;
const MAX_PROJECTION_SWEEPS: usize = 25;
const SWEEP_STALL_RATIO: f64 = 0.25;
const MAX_REGULARIZATIONS: usize = 20;

#[derive(Debug, Clone)]
pub struct BoxQp {
    pub hessian: CsrMatrix,
    pub gradient: Vec<f64>,
    pub bounds: BoxBounds,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub step: Vec<f64>,
    /// Projected-gradient norm of the (possibly regularized) model at `step`.
    pub stationarity: f64,
    pub objective: f64,
    pub converged: bool,
    pub cycles: usize,
    pub cg_iterations: usize,
    /// Diagonal shift that was added to the Hessian, 0 if none.
    pub shift: f64,
}

enum Attempt {
    Done(QpSolution),
    Indefinite(QpSolution),
}

pub fn solve_box_qp(qp: &BoxQp) -> Result<QpSolution> {
    let n = qp.gradient.len();
    if qp.hessian.dim() != n || qp.bounds.len() != n {
        return Err(invalid("box QP: dimension mismatch"));
    }
    if !qp.bounds.contains(&vec![0.0; n]) {
        return Err(invalid("box QP: the zero step must be feasible"));
    }
    let mut shift = 0.0;
    let base_shift = 1e-8 * qp.hessian.max_abs().max(f64::MIN_POSITIVE);
    let mut best: Option<QpSolution> = None;
    for _ in 0..=MAX_REGULARIZATIONS {
        let h = if shift > 0.0 { qp.hessian.with_shifted_diagonal(shift) } else { qp.hessian.clone() };
        match gpcg(&h, &qp.gradient, &qp.bounds, qp.tol, shift) {
            Attempt::Done(sol) => return Ok(sol),
            Attempt::Indefinite(sol) => {
                best = Some(sol);
                shift = if shift == 0.0 { base_shift } else { 10.0 * shift };
            }
        }
    }
    let mut sol = best.expect("at least one attempt was made");
    sol.converged = false;
    Ok(sol)
}

struct State<'a> {
    h: &'a CsrMatrix,
    g: &'a [f64],
    bounds: &'a BoxBounds,
    x: Vec<f64>,
    /// H x + g
    r: Vec<f64>,
    q: f64,
}

impl<'a> State<'a> {
    fn set(&mut self, x: Vec<f64>) {
        self.r = self.h.mul_vec(&x);
        for (ri, gi) in self.r.iter_mut().zip(self.g) {
            *ri += gi;
        }
        self.q = 0.5 * self.x_dot_sum(&x);
        self.x = x;
    }

    // x^T (Hx + g) + x^T g = x^T H x + 2 g^T x
    fn x_dot_sum(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.r).zip(self.g).map(|((x, r), g)| x * (r + g)).sum()
    }

    fn stationarity(&self) -> f64 {
        crate::linalg::projected_gradient_norm(&self.x, &self.r, self.bounds)
    }

    fn at_bound(&self, i: usize) -> bool {
        self.x[i] == self.bounds.lower[i] || self.x[i] == self.bounds.upper[i]
    }

    /// Components held at a bound by the gradient (degenerate ties count).
    fn binding(&self) -> Vec<bool> {
        (0..self.x.len())
            .map(|i| {
                (self.x[i] == self.bounds.lower[i] && self.r[i] >= 0.0)
                    || (self.x[i] == self.bounds.upper[i] && self.r[i] <= 0.0)
            })
            .collect()
    }

    fn active(&self) -> Vec<bool> {
        (0..self.x.len()).map(|i| self.at_bound(i)).collect()
    }

    /// Backtracking search along the projection arc `P(x + alpha d)`.
    /// Returns the decrease achieved (0 if none).
    fn projected_search(&mut self, d: &[f64], mut alpha: f64) -> f64 {
        for _ in 0..PROJECTION_BACKTRACKS {
            let step: Vec<f64> = self
                .x
                .iter()
                .zip(d)
                .enumerate()
                .map(|(i, (x, d))| self.bounds.clamp(i, x + alpha * d) - x)
                .collect();
            let predicted = dot(&self.r, &step);
            // q(x + s) - q(x) without forming either value.
            let change = predicted + 0.5 * dot(&step, &self.h.mul_vec(&step));
            if change <= SUFFICIENT_DECREASE * predicted && change < 0.0 {
                let trial = self.x.iter().zip(&step).map(|(x, s)| x + s).collect();
                self.set(trial);
                return -change;
            }
            alpha *= 0.5;
        }
        0.0
    }
}

fn gpcg(h: &CsrMatrix, g: &[f64], bounds: &BoxBounds, tol: f64, shift: f64) -> Attempt {
    let n = g.len();
    let mut st = State { h, g, bounds, x: vec![0.0; n], r: g.to_vec(), q: 0.0 };
    let max_cycles = 100 + 10 * n.min(1000);
    let mut cg_total = 0;
    let mut skip_projection = false;

    let finish = |st: &State, cycles, cg_total, converged| QpSolution {
        step: st.x.clone(),
        stationarity: st.stationarity(),
        objective: st.q,
        converged,
        cycles,
        cg_iterations: cg_total,
        shift,
    };

    for cycle in 0..max_cycles {
        if st.stationarity() <= tol {
            return Attempt::Done(finish(&st, cycle, cg_total, true));
        }

        let projected = !skip_projection;
        let mut cycle_decrease = 0.0;
        if projected {
            let mut best_decrease: f64 = 0.0;
            for _ in 0..MAX_PROJECTION_SWEEPS {
                let before = st.active();
                let binding = st.binding();
                let d: Vec<f64> = (0..n).map(|i| if binding[i] { 0.0 } else { -st.r[i] }).collect();
                let dd = dot(&d, &d);
                if dd == 0.0 {
                    break;
                }
                let hd = h.mul_vec(&d);
                let curvature = dot(&d, &hd);
                let alpha = if curvature > 0.0 { dd / curvature } else { 1.0 / norm2(&d) };
                let decrease = st.projected_search(&d, alpha);
                best_decrease = best_decrease.max(decrease);
                cycle_decrease += decrease;
                if decrease == 0.0 || st.active() == before || decrease <= SWEEP_STALL_RATIO * best_decrease {
                    break;
                }
            }
            if st.stationarity() <= tol {
                return Attempt::Done(finish(&st, cycle + 1, cg_total, true));
            }
        }

        // Subspace minimization on the free face.
        let free: Vec<usize> = (0..n).filter(|&i| !st.at_bound(i)).collect();
        if free.is_empty() {
            if projected && cycle_decrease == 0.0 {
                return Attempt::Done(finish(&st, cycle + 1, cg_total, false));
            }
            skip_projection = false;
            continue;
        }
        let rhs: Vec<f64> = free.iter().map(|&i| -st.r[i]).collect();
        let rnorm = norm2(&rhs);
        let pg = st.stationarity();
        let cg_tol = (0.5 * tol).max(pg.min(0.1) * rnorm);
        let hff = h.principal_submatrix(&free);
        let out = pcg(&hff, &rhs, cg_tol, 10 * free.len());
        cg_total += out.iterations;
        if let CgStatus::NegativeCurvature(_) = out.status {
            return Attempt::Indefinite(finish(&st, cycle + 1, cg_total, false));
        }
        let mut d = vec![0.0; n];
        for (&i, &w) in free.iter().zip(&out.x) {
            d[i] = w;
        }
        let binding_before = st.binding();
        let decrease = st.projected_search(&d, 1.0);
        if projected && decrease == 0.0 && cycle_decrease == 0.0 {
            return Attempt::Done(finish(&st, cycle + 1, cg_total, false));
        }
        skip_projection = decrease > 0.0 && st.binding() == binding_before;
    }
    let converged = st.stationarity() <= tol;
    Attempt::Done(finish(&st, max_cycles, cg_total, converged))
}

/// `1/2 s^T H s + g^T s`.
pub fn model_value(h: &CsrMatrix, g: &[f64], s: &[f64]) -> f64 {
    let hs = h.mul_vec(s);
    0.5 * dot(s, &hs) + dot(g, s)
}
