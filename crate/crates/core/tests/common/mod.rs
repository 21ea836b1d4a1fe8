//! Independent oracles and property checks shared by the integration tests
//! and the acceptance runner. Each check returns `Err` with a diagnostic.

#![allow(dead_code)]

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schwarz_box::coarse::{build_hierarchy, coarse_step, make_coarse_problem, CoarseHierarchy, CoarseSpace};
use schwarz_box::decomposition::Decomposition;
use schwarz_box::linalg::{BoxBounds, CsrMatrix};
use schwarz_box::objective::{Objective, QuadraticObjective, Restrict};
use schwarz_box::problems::{Problem, ProblemKind};
use schwarz_box::qp::{solve_box_qp, BoxQp};
use schwarz_box::solvers::{
    newton_sqp_solve, raspnb_solve, run_preconditioner_only, semismooth_newton_solve, ConvergenceRecord,
    Preconditioner, Schwarz, SolverConfig,
};

pub type Dense = Vec<Vec<f64>>;

// ---------------------------------------------------------------- dense oracle

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Dense, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

pub fn quad_value(h: &Dense, c: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut v = 0.0;
    for i in 0..n {
        v += c[i] * x[i];
        for j in 0..n {
            v += 0.5 * x[i] * h[i][j] * x[j];
        }
    }
    v
}

/// Minimizer of `1/2 x^T H x + c^T x` over `[lo, hi]` for SPD `H`, by
/// trying every lower/upper/free pattern and keeping the KKT points.
pub fn enumerate_box_qp(h: &Dense, c: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(n as u32);
    'patterns: for code in 0..total {
        let mut pattern = vec![0u8; n];
        let mut m = code;
        for p in pattern.iter_mut() {
            *p = (m % 3) as u8;
            m /= 3;
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            match pattern[i] {
                1 if lo[i].is_finite() => x[i] = lo[i],
                2 if hi[i].is_finite() => x[i] = hi[i],
                0 => {}
                _ => continue 'patterns,
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 0).collect();
        if !free.is_empty() {
            let a: Dense = free.iter().map(|&i| free.iter().map(|&j| h[i][j]).collect()).collect();
            let b: Vec<f64> = free
                .iter()
                .map(|&i| -c[i] - (0..n).filter(|&j| pattern[j] != 0).map(|j| h[i][j] * x[j]).sum::<f64>())
                .collect();
            let Some(sol) = dense_solve(a, b) else { continue };
            for (&i, &s) in free.iter().zip(&sol) {
                x[i] = s;
            }
        }
        let tol = 1e-10 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let r: Vec<f64> = (0..n).map(|i| c[i] + (0..n).map(|j| h[i][j] * x[j]).sum::<f64>()).collect();
        for i in 0..n {
            let ok = match pattern[i] {
                0 => x[i] >= lo[i] - tol && x[i] <= hi[i] + tol,
                1 => r[i] >= -tol,
                _ => r[i] <= tol,
            };
            if !ok {
                continue 'patterns;
            }
        }
        let value = quad_value(h, c, &x);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, x));
        }
    }
    best.expect("a strictly convex box QP has a KKT point").1
}

pub fn to_csr(h: &Dense) -> CsrMatrix {
    CsrMatrix::from_dense(h)
}

/// `A^T A + shift I` with entries of `A` uniform in [-1, 1].
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Dense {
    let a: Dense = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[k][i] * a[k][j]).sum::<f64>() + if i == j { shift } else { 0.0 })
                .collect()
        })
        .collect()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- toy problems

/// A small obstacle QP with a chain coupling pattern.
pub struct Toy {
    pub h: Dense,
    pub c: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Toy {
    pub fn objective(&self) -> QuadraticObjective {
        QuadraticObjective::new(to_csr(&self.h), self.c.clone()).unwrap()
    }

    pub fn bounds(&self) -> BoxBounds {
        BoxBounds::new(self.lo.clone(), self.hi.clone()).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Coupling graph of the Hessian.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).filter(|&j| j != i && self.h[i][j] != 0.0).collect()).collect()
    }

    pub fn oracle(&self) -> Vec<f64> {
        enumerate_box_qp(&self.h, &self.c, &self.lo, &self.hi)
    }

    /// Feasible start: the projection of zero.
    pub fn start(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| 0.0f64.clamp(self.lo[i], self.hi[i])).collect()
    }
}

/// Diagonally dominant tridiagonal QP on a chain of `n` nodes with a random
/// obstacle pair.
pub fn random_toy(rng: &mut ChaCha8Rng, n: usize) -> Toy {
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        h[i][i] = 2.0 + rng.gen_range(0.0..1.0);
        if i + 1 < n {
            let w = -rng.gen_range(0.5..1.0);
            h[i][i + 1] = w;
            h[i + 1][i] = w;
        }
    }
    let c = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let lo: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..0.2)).collect();
    let hi = lo.iter().map(|l| l + rng.gen_range(0.1..1.5)).collect();
    Toy { h, c, lo, hi }
}

/// Nested coarse space for a chain: coarse node `t` sits at fine node
/// `2t + 1` with hat weights 1/2 on its neighbours; Galerkin coarse operator.
pub fn chain_hierarchy(toy: &Toy) -> CoarseHierarchy<QuadraticObjective> {
    let n = toy.dim();
    let nc = n / 2;
    let mut p = vec![vec![0.0; nc]; n];
    for t in 0..nc {
        let j = 2 * t + 1;
        p[j][t] = 1.0;
        p[j - 1][t] = 0.5;
        if j + 1 < n {
            p[j + 1][t] = 0.5;
        }
    }
    let rows = p.iter().map(|row| row.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(t, &w)| (t, w)).collect()).collect();
    let injection = (0..nc).map(|t| 2 * t + 1).collect();
    let hc: Dense = (0..nc)
        .map(|a| {
            (0..nc)
                .map(|b| (0..n).map(|i| (0..n).map(|j| p[i][a] * toy.h[i][j] * p[j][b]).sum::<f64>()).sum())
                .collect()
        })
        .collect();
    CoarseHierarchy {
        space: CoarseSpace::new(rows, injection).unwrap(),
        objective: QuadraticObjective::new(to_csr(&hc), vec![0.0; nc]).unwrap(),
    }
}

// ---------------------------------------------------------------- recorder

/// Wraps an objective and remembers every point its gradient was taken at.
/// Outer loops evaluate the gradient at each accepted iterate.
pub struct Recorder<O> {
    pub inner: O,
    pub points: RefCell<Vec<Vec<f64>>>,
}

impl<O> Recorder<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, points: RefCell::new(Vec::new()) }
    }
}

impl<O: Objective> Objective for Recorder<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        self.inner.energy(x)
    }
    fn energy_change(&self, x: &[f64], d: &[f64], alpha: f64) -> f64 {
        self.inner.energy_change(x, d, alpha)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.points.borrow_mut().push(x.to_vec());
        self.inner.gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> CsrMatrix {
        self.inner.hessian(x)
    }
}

impl<O: Restrict> Restrict for Recorder<O> {
    type Plan = O::Plan;
    type Local = O::Local;
    fn plan(&self, indices: &[usize]) -> O::Plan {
        self.inner.plan(indices)
    }
    fn localize(&self, plan: &O::Plan, x: &[f64]) -> O::Local {
        self.inner.localize(plan, x)
    }
}

// ---------------------------------------------------------------- methods

pub const METHOD_NAMES: [&str; 6] = ["ssn", "newton-sqp", "nras", "tl-nras", "raspn", "tl-raspn"];

/// Runs one of the six methods; `hierarchy` is needed by the two-level ones.
pub fn run_method<O: Restrict, C: Objective>(
    name: &str,
    objective: &O,
    bounds: &BoxBounds,
    decomposition: &Decomposition,
    hierarchy: Option<&CoarseHierarchy<C>>,
    v0: &[f64],
    cfg: &SolverConfig,
) -> (Vec<f64>, ConvergenceRecord) {
    let schwarz = Schwarz::new(objective, decomposition);
    let one = Preconditioner::<O, C>::OneLevel(&schwarz);
    let two = || Preconditioner::TwoLevel(&schwarz, hierarchy.expect("two-level method needs a hierarchy"));
    match name {
        "ssn" => semismooth_newton_solve(objective, bounds, v0, cfg),
        "newton-sqp" => newton_sqp_solve(objective, bounds, v0, cfg),
        "nras" => run_preconditioner_only(objective, bounds, &one, v0, cfg).unwrap(),
        "tl-nras" => run_preconditioner_only(objective, bounds, &two(), v0, cfg).unwrap(),
        "raspn" => raspnb_solve(objective, bounds, &one, v0, cfg),
        "tl-raspn" => raspnb_solve(objective, bounds, &two(), v0, cfg),
        other => panic!("unknown method {other}"),
    }
}

/// Independent recomputation of `||P(v - g) - v||_2`.
pub fn projected_gradient_oracle(v: &[f64], g: &[f64], bounds: &BoxBounds) -> f64 {
    v.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&v, &g))| {
            let p = (v - g).max(bounds.lower[i]).min(bounds.upper[i]);
            (p - v) * (p - v)
        })
        .sum::<f64>()
        .sqrt()
}

// ---------------------------------------------------------------- checks

pub type Check = Result<(), String>;

fn random_feasible(rng: &mut ChaCha8Rng, bounds: &BoxBounds) -> Vec<f64> {
    bounds.lower.iter().zip(&bounds.upper).map(|(l, u)| l + rng.gen_range(0.0..=1.0) * (u - l)).collect()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

const KINDS: [ProblemKind; 2] = [ProblemKind::Ignition, ProblemKind::MinimalSurface];

/// Gradient against central differences of the energy at random feasible points.
pub fn check_gradient_fd(cells: usize, points: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for kind in KINDS {
        let p = Problem::new(kind, cells).map_err(|e| e.to_string())?;
        let f = p.objective();
        let bounds = p.bounds().map_err(|e| e.to_string())?;
        for _ in 0..points {
            let x = random_feasible(&mut rng, &bounds);
            let g = f.gradient(&x);
            let h = 1e-6;
            let mut fd = vec![0.0; x.len()];
            for j in 0..x.len() {
                let mut e = vec![0.0; x.len()];
                e[j] = 1.0;
                fd[j] = (f.energy_change(&x, &e, h) - f.energy_change(&x, &e, -h)) / (2.0 * h);
            }
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            worst = worst.max(norm(&diff) / norm(&g).max(1e-12));
        }
    }
    if worst <= 1e-6 {
        Ok(())
    } else {
        Err(format!("worst relative gradient error {worst:e}"))
    }
}

/// Hessian against central differences of the gradient (Frobenius norm).
pub fn check_hessian_fd(cells: usize, points: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for kind in KINDS {
        let p = Problem::new(kind, cells).map_err(|e| e.to_string())?;
        let f = p.objective();
        let bounds = p.bounds().map_err(|e| e.to_string())?;
        for _ in 0..points {
            let x = random_feasible(&mut rng, &bounds);
            let hm = f.hessian(&x).to_dense();
            let h = 1e-5;
            let (mut err, mut size) = (0.0, 0.0);
            for j in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let (gp, gm) = (f.gradient(&xp), f.gradient(&xm));
                for i in 0..x.len() {
                    let fd = (gp[i] - gm[i]) / (2.0 * h);
                    err += (hm[i][j] - fd) * (hm[i][j] - fd);
                    size += hm[i][j] * hm[i][j];
                }
            }
            worst = worst.max((err / size).sqrt());
        }
    }
    if worst <= 1e-5 {
        Ok(())
    } else {
        Err(format!("worst relative Hessian error {worst:e}"))
    }
}

/// `sum_i P~_i R_i v = v` bit for bit.
pub fn check_partition_of_unity(cells: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = Problem::ignition(cells).map_err(|e| e.to_string())?;
    for n in [1, 2, 4, 8] {
        for delta in [0, 1, 3] {
            let d = Decomposition::for_space(p.space(), n, delta).map_err(|e| e.to_string())?;
            let v: Vec<f64> = (0..p.num_free()).map(|_| rng.gen_range(-1e3..1e3)).collect();
            let mut sum = vec![0.0; v.len()];
            for t in d.transfers() {
                t.restricted_prolong_add(&t.restrict(&v), &mut sum);
            }
            if sum != v {
                return Err(format!("n={n} delta={delta}: max deviation {:e}", max_diff(&sum, &v)));
            }
        }
    }
    Ok(())
}

/// The augmented coarse gradient at `Pi0 v` equals `R0 grad f(v)`.
pub fn check_first_order_consistency(cells: usize, coarse: usize, points: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for kind in KINDS {
        let p = Problem::new(kind, cells).map_err(|e| e.to_string())?;
        let f = p.objective();
        let bounds = p.bounds().map_err(|e| e.to_string())?;
        let hier = build_hierarchy(&p, coarse).map_err(|e| e.to_string())?;
        for _ in 0..points {
            let v = random_feasible(&mut rng, &bounds);
            let g = f.gradient(&v);
            let cp = make_coarse_problem(&hier, &g, &bounds, &v);
            let lhs = cp.objective.gradient(&cp.initial);
            let rhs = hier.space.restrict(&g);
            worst = worst.max(max_diff(&lhs, &rhs));
        }
    }
    if worst <= 1e-13 {
        Ok(())
    } else {
        Err(format!("max-norm mismatch {worst:e}"))
    }
}

/// Every scaled prolongated coarse correction stays in the fine box, and
/// the coarse step's own iterate is feasible.
pub fn check_coarse_feasibility(cells: usize, coarse: usize, points: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SolverConfig::default();
    for kind in KINDS {
        let p = Problem::new(kind, cells).map_err(|e| e.to_string())?;
        let f = p.objective();
        let bounds = p.bounds().map_err(|e| e.to_string())?;
        let hier = build_hierarchy(&p, coarse).map_err(|e| e.to_string())?;
        for _ in 0..points {
            let v = random_feasible(&mut rng, &bounds);
            let g = f.gradient(&v);
            let cp = make_coarse_problem(&hier, &g, &bounds, &v);
            if !cp.bounds.contains(&cp.initial) {
                return Err("coarse bounds exclude the injected iterate".into());
            }
            // Any feasible coarse point, not only the minimizer, must map into the box.
            let w = random_feasible(&mut rng, &cp.bounds);
            let delta: Vec<f64> = w.iter().zip(&cp.initial).map(|(a, b)| a - b).collect();
            let d = hier.space.prolong(&delta);
            for k in 0..=10 {
                let alpha = k as f64 / 10.0;
                let x: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                let slack = bounds
                    .lower
                    .iter()
                    .zip(&bounds.upper)
                    .zip(&x)
                    .map(|((l, u), x)| (l - x).max(x - u))
                    .fold(f64::NEG_INFINITY, f64::max);
                if slack > 4.0 * f64::EPSILON {
                    return Err(format!("alpha={alpha}: bound violated by {slack:e}"));
                }
            }
            let step = coarse_step(&f, &bounds, &hier, &v, &g, &cfg);
            if !bounds.contains(&step.iterate) {
                return Err("coarse step left the box".into());
            }
        }
    }
    Ok(())
}

/// `solve_box_qp` against the enumeration oracle on random SPD box QPs.
pub fn check_qp_oracle(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.gen_range(1..=6);
        let h = random_spd(&mut rng, n, 0.1);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let lo: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..=0.0)).collect();
        let hi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=2.0)).collect();
        let qp = BoxQp {
            hessian: to_csr(&h),
            gradient: g.clone(),
            bounds: BoxBounds::new(lo.clone(), hi.clone()).unwrap(),
            tol: 1e-12,
        };
        let sol = solve_box_qp(&qp).map_err(|e| format!("case {case}: {e}"))?;
        let oracle = enumerate_box_qp(&h, &g, &lo, &hi);
        let err = max_diff(&sol.step, &oracle);
        if err > 1e-8 {
            return Err(format!("case {case} (n={n}): error {err:e}"));
        }
    }
    Ok(())
}

fn toy_decomposition(toy: &Toy, parts: usize, overlap: usize) -> Decomposition {
    let n = toy.dim();
    let owner = (0..n).map(|i| i * parts / n).collect();
    Decomposition::from_owner(owner, &toy.adjacency(), overlap).unwrap()
}

/// All methods reach the enumeration minimizer on random obstacle toys, and
/// every outer iterate they produce lies in the box.
pub fn check_methods_oracle(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SolverConfig::default();
    for case in 0..cases {
        let n = rng.gen_range(2..=6);
        let toy = random_toy(&mut rng, n);
        let oracle = toy.oracle();
        let bounds = toy.bounds();
        let parts = rng.gen_range(1..=n.min(3));
        let decomposition = toy_decomposition(&toy, parts, rng.gen_range(0..=2));
        let hierarchy = chain_hierarchy(&toy);
        for name in METHOD_NAMES {
            let rec = Recorder::new(toy.objective());
            let (x, record) = run_method(name, &rec, &bounds, &decomposition, Some(&hierarchy), &toy.start(), &cfg);
            if !record.converged() {
                return Err(format!("case {case} {name}: status {:?}", record.status));
            }
            let err = max_diff(&x, &oracle);
            if err > 1e-8 {
                return Err(format!("case {case} {name}: error {err:e}"));
            }
            let bad = rec.points.borrow().iter().position(|p| !bounds.contains(p));
            if let Some(bad) = bad {
                return Err(format!("case {case} {name}: iterate {bad} infeasible"));
            }
        }
    }
    Ok(())
}

/// Every outer iterate of every method on small FE problems is feasible and
/// converged runs meet the tolerance when recomputed.
pub fn check_fe_feasibility(cells: usize, coarse: usize) -> Check {
    let cfg = SolverConfig::default();
    for kind in KINDS {
        let p = Problem::new(kind, cells).map_err(|e| e.to_string())?;
        let bounds = p.bounds().map_err(|e| e.to_string())?;
        let d = Decomposition::for_space(p.space(), 4, 1).map_err(|e| e.to_string())?;
        let hier = build_hierarchy(&p, coarse).map_err(|e| e.to_string())?;
        let v0 = p.initial_guess().map_err(|e| e.to_string())?;
        for name in METHOD_NAMES {
            let rec = Recorder::new(p.objective());
            let (x, record) = run_method(name, &rec, &bounds, &d, Some(&hier), &v0, &cfg);
            let bad = rec.points.borrow().iter().position(|pt| !bounds.contains(pt));
            if let Some(bad) = bad {
                return Err(format!("{kind:?} {name}: iterate {bad} infeasible"));
            }
            if !record.converged() {
                return Err(format!("{kind:?} {name}: status {:?}", record.status));
            }
            let pg = projected_gradient_oracle(&x, &p.objective().gradient(&x), &bounds);
            if pg > cfg.outer_tol {
                return Err(format!("{kind:?} {name}: recomputed projected gradient {pg:e}"));
            }
        }
    }
    Ok(())
}

/// RASPN-B with the preconditioner disabled on one subdomain without overlap
/// visits exactly the Newton-SQP iterates.
pub fn check_degeneration(cells: usize) -> Check {
    let cfg = SolverConfig::default();
    for kind in KINDS {
        let p = Problem::new(kind, cells).map_err(|e| e.to_string())?;
        let bounds = p.bounds().map_err(|e| e.to_string())?;
        let v0 = p.initial_guess().map_err(|e| e.to_string())?;

        let a = Recorder::new(p.objective());
        let (xa, ra) = newton_sqp_solve(&a, &bounds, &v0, &cfg);

        let b = Recorder::new(p.objective());
        let (xb, rb) = raspnb_solve(&b, &bounds, &Preconditioner::<_, QuadraticObjective>::Disabled, &v0, &cfg);

        if xa != xb || *a.points.borrow() != *b.points.borrow() {
            return Err(format!("{kind:?}: iterate sequences differ"));
        }
        let prn = |r: &ConvergenceRecord| r.entries.iter().map(|e| e.projected_gradient).collect::<Vec<_>>();
        if prn(&ra) != prn(&rb) {
            return Err(format!("{kind:?}: histories differ"));
        }
    }
    Ok(())
}
