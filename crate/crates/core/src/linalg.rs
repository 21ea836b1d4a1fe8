//! Sparse symmetric matrices, box projection and the projected-gradient
//! stationarity measure.

use crate::error::{invalid, Error, Result};

/// Square sparse matrix in compressed row form. Both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(invalid(format!("triplet ({i}, {j}) outside {n}x{n}")));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    /// Zero matrix with a given sorted sparsity pattern.
    pub(crate) fn from_pattern(row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Self {
        let n = row_ptr.len() - 1;
        let values = vec![0.0; col_idx.len()];
        Self { n, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Position of `(i, j)` in the value array, if it is in the pattern.
    pub(crate) fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|` over the stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn with_shifted_diagonal(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            match out.slot(i, i) {
                Some(k) => out.values[k] += shift,
                None => unreachable!("assembled matrices always carry their diagonal"),
            }
        }
        out
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn principal_submatrix(&self, indices: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.n];
        for (l, &g) in indices.iter().enumerate() {
            local[g] = l;
        }
        let mut row_ptr = Vec::with_capacity(indices.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &g in indices {
            let mut row: Vec<(usize, f64)> = self
                .row(g)
                .filter_map(|(j, v)| (local[j] != usize::MAX).then_some((local[j], v)))
                .collect();
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self { n: indices.len(), row_ptr, col_idx, values }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        out
    }
}

/// Componentwise lower/upper bounds defining the feasible box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid("lower and upper bounds differ in length"));
        }
        let violations = lower.iter().zip(&upper).filter(|(l, u)| !(l <= u)).count();
        if violations > 0 {
            return Err(Error::Infeasible { violations });
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    /// Bounds for a step `s` from `x`: `[lower - x, upper - x]`.
    pub fn shifted(&self, x: &[f64]) -> Self {
        Self {
            lower: self.lower.iter().zip(x).map(|(l, v)| l - v).collect(),
            upper: self.upper.iter().zip(x).map(|(u, v)| u - v).collect(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            lower: indices.iter().map(|&i| self.lower[i]).collect(),
            upper: indices.iter().map(|&i| self.upper[i]).collect(),
        }
    }

    #[inline]
    pub fn clamp(&self, i: usize, v: f64) -> f64 {
        v.max(self.lower[i]).min(self.upper[i])
    }

    pub fn clamp_in_place(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = self.clamp(i, *v);
        }
    }
}

pub fn project_box(x: &[f64], bounds: &BoxBounds) -> Vec<f64> {
    x.iter().enumerate().map(|(i, &v)| bounds.clamp(i, v)).collect()
}

/// `P(x - g) - x`, the projected gradient at a feasible `x`.
pub fn projected_gradient(x: &[f64], g: &[f64], bounds: &BoxBounds) -> Result<Vec<f64>> {
    if x.len() != g.len() || x.len() != bounds.len() {
        return Err(invalid("projected_gradient: dimension mismatch"));
    }
    if !bounds.contains(x) {
        return Err(invalid("projected_gradient: x is infeasible"));
    }
    Ok(projected_gradient_unchecked(x, g, bounds))
}

pub(crate) fn projected_gradient_unchecked(x: &[f64], g: &[f64], bounds: &BoxBounds) -> Vec<f64> {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| bounds.clamp(i, xi - gi) - xi)
        .collect()
}

pub fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &BoxBounds) -> f64 {
    let mut acc = 0.0;
    for (i, (&xi, &gi)) in x.iter().zip(g).enumerate() {
        let p = bounds.clamp(i, xi - gi) - xi;
        acc += p * p;
    }
    acc.sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum CgStatus {
    Converged,
    MaxIterations,
    NegativeCurvature(f64),
}

#[derive(Debug, Clone)]
pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub status: CgStatus,
}

/// Jacobi-preconditioned CG from a zero start. Stops when `||b - Ax|| <= tol`.
/// On non-positive curvature the last iterate (before the offending direction) is returned.
pub(crate) fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> CgOutcome {
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm2(&r);
    let mut it = 0;
    while res > tol {
        if it >= max_iter {
            return CgOutcome { x, iterations: it, residual: res, status: CgStatus::MaxIterations };
        }
        a.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 || !curvature.is_finite() {
            return CgOutcome {
                x,
                iterations: it,
                residual: res,
                status: CgStatus::NegativeCurvature(curvature / dot(&p, &p)),
            };
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = norm2(&r);
        it += 1;
    }
    CgOutcome { x, iterations: it, residual: res, status: CgStatus::Converged }
}

/// Solves `A x = b` for symmetric positive definite `A` to `||Ax - b|| <= rtol ||b||`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], rtol: f64) -> Result<Vec<f64>> {
    if a.dim() != b.len() {
        return Err(invalid("solve_spd: dimension mismatch"));
    }
    let tol = rtol * norm2(b);
    let out = pcg(a, b, tol, 10 * a.dim().max(1));
    match out.status {
        CgStatus::Converged => Ok(out.x),
        CgStatus::MaxIterations => Err(Error::NotConverged {
            iterations: out.iterations,
            residual: out.residual,
        }),
        CgStatus::NegativeCurvature(curvature) => Err(Error::IndefiniteMatrix { curvature }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize) -> BoxBounds {
        BoxBounds::new(vec![0.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0), (0, 1, 4.0)]).unwrap();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        let err = BoxBounds::new(vec![0.0, 2.0], vec![1.0, 1.0]).unwrap_err();
        assert_eq!(err, Error::Infeasible { violations: 1 });
    }

    #[test]
    fn projection_clamps() {
        let b = unit_box(2);
        assert_eq!(project_box(&[2.0, -2.0], &b), vec![1.0, 0.0]);
        assert_eq!(project_box(&[0.3, 0.7], &b), vec![0.3, 0.7]);
    }

    #[test]
    fn projected_gradient_examples() {
        let b = unit_box(1);
        assert_eq!(projected_gradient(&[0.5], &[0.0], &b).unwrap(), vec![0.0]);
        assert_eq!(projected_gradient(&[0.0], &[3.0], &b).unwrap(), vec![0.0]);
        let pg = projected_gradient(&[0.5], &[0.2], &b).unwrap();
        assert!((pg[0] + 0.2).abs() < 1e-15);
        assert!(projected_gradient(&[1.5], &[0.2], &b).is_err());
    }

    #[test]
    fn spd_solves() {
        let i = CsrMatrix::identity(3);
        assert_eq!(solve_spd(&i, &[1.0, 2.0, 3.0], 1e-14).unwrap(), vec![1.0, 2.0, 3.0]);
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x = solve_spd(&a, &[3.0, 3.0], 1e-14).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-13 && (x[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn indefinite_is_reported() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert!(matches!(
            solve_spd(&a, &[0.0, 1.0], 1e-12),
            Err(Error::IndefiniteMatrix { .. })
        ));
    }

    #[test]
    fn principal_submatrix_picks_rows_and_cols() {
        let a = CsrMatrix::from_dense(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 5.0, 2.0],
            vec![0.0, 2.0, 6.0],
        ]);
        let s = a.principal_submatrix(&[2, 1]);
        assert_eq!(s.to_dense(), vec![vec![6.0, 2.0], vec![2.0, 5.0]]);
    }
}
