use std::sync::Arc;

use super::{Problem, ProblemKind};
use crate::linalg::CsrMatrix;
use crate::mesh::{ElementGeometry, QUADRATURE_BARYCENTRIC, QUADRATURE_WEIGHT_FRACTION};
use crate::objective::{Objective, Restrict};

const NO_DOF: u32 = u32::MAX;
const NO_SLOT: u32 = u32::MAX;

/// Element loop data for one set of unknowns: the touched elements, the
/// dof numbering, and the Hessian sparsity with per-element scatter slots.
#[derive(Debug)]
pub(crate) struct FeStructure {
    problem: Problem,
    elements: Vec<usize>,
    dofs: Vec<usize>,
    dof_of_node: Vec<u32>,
    pattern: CsrMatrix,
    slots: Vec<[u32; 9]>,
}

impl FeStructure {
    fn new(problem: &Problem, dofs: Vec<usize>) -> Self {
        let mesh = problem.mesh();
        let mut dof_of_node = vec![NO_DOF; mesh.num_nodes()];
        for (d, &node) in dofs.iter().enumerate() {
            dof_of_node[node] = d as u32;
        }
        let elements: Vec<usize> = mesh
            .triangles()
            .iter()
            .enumerate()
            .filter(|(_, tri)| tri.iter().any(|&k| dof_of_node[k] != NO_DOF))
            .map(|(t, _)| t)
            .collect();

        let mut cols: Vec<Vec<usize>> = (0..dofs.len()).map(|d| vec![d]).collect();
        for &t in &elements {
            let tri = mesh.triangles()[t];
            for &a in &tri {
                for &b in &tri {
                    let (da, db) = (dof_of_node[a], dof_of_node[b]);
                    if da != NO_DOF && db != NO_DOF {
                        cols[da as usize].push(db as usize);
                    }
                }
            }
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for mut c in cols {
            c.sort_unstable();
            c.dedup();
            col_idx.extend(c);
            row_ptr.push(col_idx.len());
        }
        let pattern = CsrMatrix::from_pattern(row_ptr, col_idx);
        let slots = elements
            .iter()
            .map(|&t| {
                let tri = mesh.triangles()[t];
                let mut s = [NO_SLOT; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        let (da, db) = (dof_of_node[tri[a]], dof_of_node[tri[b]]);
                        if da != NO_DOF && db != NO_DOF {
                            s[3 * a + b] = pattern.slot(da as usize, db as usize).unwrap() as u32;
                        }
                    }
                }
                s
            })
            .collect();
        Self { problem: problem.clone(), elements, dofs, dof_of_node, pattern, slots }
    }
}

/// Discrete energy over a set of unknowns, with every other nodal value
/// frozen at `base`. Covers the global problem (unknowns = free nodes,
/// frozen = Dirichlet data) as well as subdomain restrictions.
#[derive(Debug, Clone)]
pub struct FeObjective {
    structure: Arc<FeStructure>,
    base: Vec<f64>,
    constant: f64,
}

#[derive(Debug, Clone)]
pub struct FePlan {
    structure: Arc<FeStructure>,
    complement: Vec<usize>,
}

impl FeObjective {
    pub(crate) fn global(problem: &Problem) -> Self {
        Self::global_with_base(problem, problem.space().dirichlet_values().to_vec())
    }

    pub(crate) fn global_with_base(problem: &Problem, base: Vec<f64>) -> Self {
        let dofs = problem.space().free_nodes().to_vec();
        let structure = Arc::new(FeStructure::new(problem, dofs));
        let mut obj = Self { structure, base, constant: 0.0 };
        // Elements with only Dirichlet nodes contribute a constant.
        let triangles = problem.mesh().triangles();
        let mut touched = vec![false; triangles.len()];
        for &t in &obj.structure.elements {
            touched[t] = true;
        }
        obj.constant = (0..triangles.len())
            .filter(|&t| !touched[t])
            .map(|t| obj.element_energy(t, &triangles[t].map(|k| obj.base[k])))
            .sum();
        obj
    }

    pub(crate) fn energy_of_base(&self) -> f64 {
        let x: Vec<f64> = self.structure.dofs.iter().map(|&k| self.base[k]).collect();
        self.energy(&x)
    }

    pub fn problem(&self) -> &Problem {
        &self.structure.problem
    }

    /// Mesh nodes carried by each unknown.
    pub fn nodes(&self) -> &[usize] {
        &self.structure.dofs
    }

    /// Nodal vector with `x` written into the unknowns.
    pub fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.base.clone();
        for (&node, &v) in self.structure.dofs.iter().zip(x) {
            full[node] = v;
        }
        full
    }

    #[inline]
    fn gather(&self, t: usize, x: &[f64]) -> [f64; 3] {
        let tri = self.problem().mesh().triangles()[t];
        tri.map(|k| {
            let d = self.structure.dof_of_node[k];
            if d == NO_DOF {
                self.base[k]
            } else {
                x[d as usize]
            }
        })
    }

    #[inline]
    fn gather_direction(&self, t: usize, d: &[f64]) -> [f64; 3] {
        let tri = self.problem().mesh().triangles()[t];
        tri.map(|k| {
            let dof = self.structure.dof_of_node[k];
            if dof == NO_DOF {
                0.0
            } else {
                d[dof as usize]
            }
        })
    }

    fn element_energy(&self, t: usize, u: &[f64; 3]) -> f64 {
        let data = &self.problem().data;
        let geom = &data.geometry[t];
        let p = grad(geom, u);
        match data.kind {
            ProblemKind::Ignition => {
                let mut e = 0.5 * geom.area * (p[0] * p[0] + p[1] * p[1]);
                for q in 0..3 {
                    let uq = interp(q, u);
                    let w = QUADRATURE_WEIGHT_FRACTION[q] * geom.area;
                    e += w * (-(uq - 1.0) * uq.exp() - data.forcing[t][q] * uq);
                }
                e
            }
            ProblemKind::MinimalSurface => geom.area * (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt(),
        }
    }
}

#[inline]
fn grad(geom: &ElementGeometry, u: &[f64; 3]) -> [f64; 2] {
    let g = &geom.grads;
    [
        u[0] * g[0][0] + u[1] * g[1][0] + u[2] * g[2][0],
        u[0] * g[0][1] + u[1] * g[1][1] + u[2] * g[2][1],
    ]
}

#[inline]
fn interp(q: usize, u: &[f64; 3]) -> f64 {
    let lam = QUADRATURE_BARYCENTRIC[q];
    lam[0] * u[0] + lam[1] * u[1] + lam[2] * u[2]
}

impl Objective for FeObjective {
    fn dim(&self) -> usize {
        self.structure.dofs.len()
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let mut e = self.constant;
        for &t in &self.structure.elements {
            e += self.element_energy(t, &self.gather(t, x));
        }
        e
    }

    fn energy_change(&self, x: &[f64], d: &[f64], alpha: f64) -> f64 {
        let data = &self.problem().data;
        let mut change = 0.0;
        for &t in &self.structure.elements {
            let u = self.gather(t, x);
            let du = self.gather_direction(t, d).map(|v| alpha * v);
            if du == [0.0; 3] {
                continue;
            }
            let geom = &data.geometry[t];
            let p = grad(geom, &u);
            let dp = grad(geom, &du);
            match data.kind {
                ProblemKind::Ignition => {
                    let mut e = geom.area * (p[0] * dp[0] + p[1] * dp[1] + 0.5 * (dp[0] * dp[0] + dp[1] * dp[1]));
                    for q in 0..3 {
                        let uq = interp(q, &u);
                        let dq = interp(q, &du);
                        let w = QUADRATURE_WEIGHT_FRACTION[q] * geom.area;
                        // (u+d-1)e^(u+d) - (u-1)e^u without cancellation
                        let reaction = uq.exp() * ((uq - 1.0) * dq.exp_m1() + dq * dq.exp());
                        e += w * (-reaction - data.forcing[t][q] * dq);
                    }
                    change += e;
                }
                ProblemKind::MinimalSurface => {
                    let w0 = (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt();
                    let p1 = [p[0] + dp[0], p[1] + dp[1]];
                    let w1 = (1.0 + p1[0] * p1[0] + p1[1] * p1[1]).sqrt();
                    let num = 2.0 * (p[0] * dp[0] + p[1] * dp[1]) + dp[0] * dp[0] + dp[1] * dp[1];
                    change += geom.area * num / (w0 + w1);
                }
            }
        }
        change
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let data = &self.problem().data;
        let tris = self.problem().mesh().triangles();
        let mut g = vec![0.0; self.dim()];
        for &t in &self.structure.elements {
            let u = self.gather(t, x);
            let geom = &data.geometry[t];
            let p = grad(geom, &u);
            let mut local = [0.0; 3];
            match data.kind {
                ProblemKind::Ignition => {
                    for a in 0..3 {
                        local[a] = geom.area * (p[0] * geom.grads[a][0] + p[1] * geom.grads[a][1]);
                    }
                    for q in 0..3 {
                        let uq = interp(q, &u);
                        let w = QUADRATURE_WEIGHT_FRACTION[q] * geom.area;
                        let s = w * (-uq * uq.exp() - data.forcing[t][q]);
                        for a in 0..3 {
                            local[a] += s * QUADRATURE_BARYCENTRIC[q][a];
                        }
                    }
                }
                ProblemKind::MinimalSurface => {
                    let w = (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt();
                    for a in 0..3 {
                        local[a] = geom.area * (p[0] * geom.grads[a][0] + p[1] * geom.grads[a][1]) / w;
                    }
                }
            }
            for a in 0..3 {
                let d = self.structure.dof_of_node[tris[t][a]];
                if d != NO_DOF {
                    g[d as usize] += local[a];
                }
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> CsrMatrix {
        let data = &self.problem().data;
        let mut h = self.structure.pattern.clone();
        let values = h.values_mut();
        for (e, &t) in self.structure.elements.iter().enumerate() {
            let u = self.gather(t, x);
            let geom = &data.geometry[t];
            let gr = &geom.grads;
            let mut local = [0.0; 9];
            match data.kind {
                ProblemKind::Ignition => {
                    for a in 0..3 {
                        for b in 0..3 {
                            local[3 * a + b] = geom.area * (gr[a][0] * gr[b][0] + gr[a][1] * gr[b][1]);
                        }
                    }
                    for q in 0..3 {
                        let uq = interp(q, &u);
                        let w = QUADRATURE_WEIGHT_FRACTION[q] * geom.area;
                        let s = -w * (1.0 + uq) * uq.exp();
                        let lam = QUADRATURE_BARYCENTRIC[q];
                        for a in 0..3 {
                            for b in 0..3 {
                                local[3 * a + b] += s * lam[a] * lam[b];
                            }
                        }
                    }
                }
                ProblemKind::MinimalSurface => {
                    let p = grad(geom, &u);
                    let w2 = 1.0 + p[0] * p[0] + p[1] * p[1];
                    let w = w2.sqrt();
                    let w3 = w * w2;
                    let pg: [f64; 3] = std::array::from_fn(|a| p[0] * gr[a][0] + p[1] * gr[a][1]);
                    for a in 0..3 {
                        for b in 0..3 {
                            let gg = gr[a][0] * gr[b][0] + gr[a][1] * gr[b][1];
                            local[3 * a + b] = geom.area * (gg / w - pg[a] * pg[b] / w3);
                        }
                    }
                }
            }
            for (k, &slot) in self.structure.slots[e].iter().enumerate() {
                if slot != NO_SLOT {
                    values[slot as usize] += local[k];
                }
            }
        }
        h
    }
}

impl Restrict for FeObjective {
    type Plan = FePlan;
    type Local = FeObjective;

    fn plan(&self, indices: &[usize]) -> FePlan {
        let nodes: Vec<usize> = indices.iter().map(|&i| self.structure.dofs[i]).collect();
        let structure = FeStructure::new(self.problem(), nodes);
        let mut inside = vec![false; self.problem().mesh().triangles().len()];
        for &t in &structure.elements {
            inside[t] = true;
        }
        let complement = self.structure.elements.iter().copied().filter(|&t| !inside[t]).collect();
        FePlan { structure: Arc::new(structure), complement }
    }

    fn localize(&self, plan: &FePlan, x: &[f64]) -> FeObjective {
        let base = self.full(x);
        let mut constant = self.constant;
        for &t in &plan.complement {
            let tri = self.problem().mesh().triangles()[t];
            constant += self.element_energy(t, &tri.map(|k| base[k]));
        }
        FeObjective { structure: plan.structure.clone(), base, constant }
    }
}
