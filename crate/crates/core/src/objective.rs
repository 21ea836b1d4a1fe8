//! Twice-differentiable objectives over a vector of free unknowns.

use crate::error::Result;
use crate::linalg::{dot, CsrMatrix};

pub trait Objective {
    fn dim(&self) -> usize;

    fn energy(&self, x: &[f64]) -> f64;

    /// `f(x + alpha d) - f(x)`. Implementations should avoid the cancellation
    /// of the naive difference, since line searches near a minimizer compare
    /// changes far below the rounding level of `f` itself.
    fn energy_change(&self, x: &[f64], d: &[f64], alpha: f64) -> f64 {
        let trial: Vec<f64> = x.iter().zip(d).map(|(x, d)| x + alpha * d).collect();
        self.energy(&trial) - self.energy(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn hessian(&self, x: &[f64]) -> CsrMatrix;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        (**self).energy(x)
    }
    fn energy_change(&self, x: &[f64], d: &[f64], alpha: f64) -> f64 {
        (**self).energy_change(x, d, alpha)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> CsrMatrix {
        (**self).hessian(x)
    }
}

/// Objectives that can be restricted to a subset of their unknowns with the
/// remaining unknowns frozen.
pub trait Restrict: Objective {
    /// Structural data for one index subset, reusable across iterates.
    type Plan;
    type Local: Objective;

    fn plan(&self, indices: &[usize]) -> Self::Plan;

    /// The restricted objective `w -> f(x with x[indices] = w)`.
    fn localize(&self, plan: &Self::Plan, x: &[f64]) -> Self::Local;
}

/// `1/2 x^T H x + c^T x + constant`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    pub hessian: CsrMatrix,
    pub linear: Vec<f64>,
    pub constant: f64,
}

impl QuadraticObjective {
    pub fn new(hessian: CsrMatrix, linear: Vec<f64>) -> Result<Self> {
        if hessian.dim() != linear.len() {
            return Err(crate::error::invalid("quadratic: dimension mismatch"));
        }
        Ok(Self { hessian, linear, constant: 0.0 })
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let hx = self.hessian.mul_vec(x);
        0.5 * dot(x, &hx) + dot(&self.linear, x) + self.constant
    }

    fn energy_change(&self, x: &[f64], d: &[f64], alpha: f64) -> f64 {
        let g = self.gradient(x);
        let hd = self.hessian.mul_vec(d);
        alpha * dot(&g, d) + 0.5 * alpha * alpha * dot(d, &hd)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.hessian.mul_vec(x);
        for (gi, ci) in g.iter_mut().zip(&self.linear) {
            *gi += ci;
        }
        g
    }

    fn hessian(&self, _x: &[f64]) -> CsrMatrix {
        self.hessian.clone()
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticPlan {
    indices: Vec<usize>,
    complement: Vec<usize>,
    block: CsrMatrix,
}

impl Restrict for QuadraticObjective {
    type Plan = QuadraticPlan;
    type Local = QuadraticObjective;

    fn plan(&self, indices: &[usize]) -> QuadraticPlan {
        let mut inside = vec![false; self.dim()];
        for &i in indices {
            inside[i] = true;
        }
        QuadraticPlan {
            indices: indices.to_vec(),
            complement: (0..self.dim()).filter(|&i| !inside[i]).collect(),
            block: self.hessian.principal_submatrix(indices),
        }
    }

    fn localize(&self, plan: &QuadraticPlan, x: &[f64]) -> QuadraticObjective {
        let mut frozen = x.to_vec();
        for &i in &plan.indices {
            frozen[i] = 0.0;
        }
        let hf = self.hessian.mul_vec(&frozen);
        let linear = plan.indices.iter().map(|&i| self.linear[i] + hf[i]).collect();
        let constant = self.constant
            + plan
                .complement
                .iter()
                .map(|&i| 0.5 * frozen[i] * hf[i] + self.linear[i] * frozen[i])
                .sum::<f64>();
        QuadraticObjective { hessian: plan.block.clone(), linear, constant }
    }
}

/// `f(x) + <linear, x>`.
#[derive(Debug, Clone)]
pub struct Augmented<O> {
    pub base: O,
    pub linear: Vec<f64>,
}

impl<O: Objective> Objective for Augmented<O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn energy(&self, x: &[f64]) -> f64 {
        self.base.energy(x) + dot(&self.linear, x)
    }

    fn energy_change(&self, x: &[f64], d: &[f64], alpha: f64) -> f64 {
        self.base.energy_change(x, d, alpha) + alpha * dot(&self.linear, d)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.base.gradient(x);
        for (gi, li) in g.iter_mut().zip(&self.linear) {
            *gi += li;
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> CsrMatrix {
        self.base.hessian(x)
    }
}
