//! Structured triangulations of the unit square, the P1 space on them, and
//! element quadrature.

use crate::error::{invalid, Result};

pub type Point = [f64; 2];

/// Boundary classification of a node. Corner nodes resolve to the first side
/// in the order left, right, bottom, top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    Interior,
    Left,
    Right,
    Bottom,
    Top,
}

impl BoundaryTag {
    pub fn is_boundary(self) -> bool {
        self != BoundaryTag::Interior
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    cells_per_side: usize,
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<BoundaryTag>,
}

impl Mesh {
    /// Uniform `n x n` grid of squares on (0,1)^2, each cut along the
    /// bottom-left to top-right diagonal. Nodes are numbered row by row.
    pub fn structured(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("mesh needs at least one cell per side"));
        }
        let side = n + 1;
        let mut nodes = Vec::with_capacity(side * side);
        for row in 0..side {
            for col in 0..side {
                nodes.push([col as f64 / n as f64, row as f64 / n as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for row in 0..n {
            for col in 0..n {
                let a = row * side + col;
                let b = a + 1;
                let c = a + side + 1;
                let d = a + side;
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let tags = (0..side * side)
            .map(|k| classify(k / side, k % side, n))
            .collect();
        Ok(Self { cells_per_side: n, nodes, triangles, tags })
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn mesh_width(&self) -> f64 {
        1.0 / self.cells_per_side as f64
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_tags(&self) -> &[BoundaryTag] {
        &self.tags
    }

    /// Node index at grid position `(row, col)`.
    pub fn node_at(&self, row: usize, col: usize) -> usize {
        row * (self.cells_per_side + 1) + col
    }

    pub fn is_corner(&self, node: usize) -> bool {
        let side = self.cells_per_side + 1;
        let (row, col) = (node / side, node % side);
        (row == 0 || row == self.cells_per_side) && (col == 0 || col == self.cells_per_side)
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|k| self.nodes[k])
    }

    /// Sorted neighbour lists of the edge graph.
    pub fn node_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for tri in &self.triangles {
            for a in 0..3 {
                for b in 0..3 {
                    if a != b {
                        adj[tri[a]].push(tri[b]);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

fn classify(row: usize, col: usize, n: usize) -> BoundaryTag {
    if col == 0 {
        BoundaryTag::Left
    } else if col == n {
        BoundaryTag::Right
    } else if row == 0 {
        BoundaryTag::Bottom
    } else if row == n {
        BoundaryTag::Top
    } else {
        BoundaryTag::Interior
    }
}

pub fn classify_boundary(mesh: &Mesh) -> Vec<BoundaryTag> {
    mesh.boundary_tags().to_vec()
}

pub fn signed_area(p: &[Point; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

/// Area and constant gradients of the three P1 shape functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(p: &[Point; 3]) -> Self {
        let area = signed_area(p);
        let inv = 1.0 / (2.0 * area);
        let mut grads = [[0.0; 2]; 3];
        for a in 0..3 {
            let b = (a + 1) % 3;
            let c = (a + 2) % 3;
            grads[a] = [(p[b][1] - p[c][1]) * inv, (p[c][0] - p[b][0]) * inv];
        }
        Self { area, grads }
    }
}

/// Barycentric coordinates and weights (fractions of the area) of the
/// symmetric 3-point rule, exact for quadratics.
pub const QUADRATURE_BARYCENTRIC: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];
pub const QUADRATURE_WEIGHT_FRACTION: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
pub const QUADRATURE_DEGREE: usize = 2;

pub fn element_quadrature(p: &[Point; 3]) -> Vec<(Point, f64)> {
    let area = signed_area(p).abs();
    QUADRATURE_BARYCENTRIC
        .iter()
        .zip(QUADRATURE_WEIGHT_FRACTION)
        .map(|(lam, w)| {
            let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
            let y = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
            ([x, y], w * area)
        })
        .collect()
}

/// Quadrature approximation of the integral of `f` over the mesh.
pub fn integrate(mesh: &Mesh, f: impl Fn(Point) -> f64) -> f64 {
    (0..mesh.triangles().len())
        .flat_map(|t| element_quadrature(&mesh.triangle_points(t)))
        .map(|(x, w)| w * f(x))
        .sum()
}

/// P1 space with every boundary node carrying Dirichlet data.
#[derive(Debug, Clone, PartialEq)]
pub struct FeSpace {
    mesh: Mesh,
    free_nodes: Vec<usize>,
    dof_of_node: Vec<Option<usize>>,
    dirichlet_values: Vec<f64>,
}

impl FeSpace {
    pub fn new(mesh: Mesh, dirichlet: impl Fn(Point, BoundaryTag) -> f64) -> Self {
        let mut free_nodes = Vec::new();
        let mut dof_of_node = vec![None; mesh.num_nodes()];
        let mut dirichlet_values = vec![0.0; mesh.num_nodes()];
        for (k, (&x, &tag)) in mesh.nodes().iter().zip(mesh.boundary_tags()).enumerate() {
            if tag.is_boundary() {
                dirichlet_values[k] = dirichlet(x, tag);
            } else {
                dof_of_node[k] = Some(free_nodes.len());
                free_nodes.push(k);
            }
        }
        Self { mesh, free_nodes, dof_of_node, dirichlet_values }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn num_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    pub fn dirichlet_values(&self) -> &[f64] {
        &self.dirichlet_values
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dof_of_node[node].is_none()
    }

    /// Full nodal vector: `free` on free nodes, Dirichlet data elsewhere.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = self.dirichlet_values.clone();
        for (&node, &v) in self.free_nodes.iter().zip(free) {
            full[node] = v;
        }
        full
    }

    pub fn restrict_to_free(&self, full: &[f64]) -> Vec<f64> {
        self.free_nodes.iter().map(|&k| full[k]).collect()
    }

    /// Edge graph restricted to free nodes, in dof numbering.
    pub fn dof_adjacency(&self) -> Vec<Vec<usize>> {
        let adj = self.mesh.node_adjacency();
        self.free_nodes
            .iter()
            .map(|&k| adj[k].iter().filter_map(|&j| self.dof_of_node[j]).collect())
            .collect()
    }

    pub fn dof_coordinates(&self) -> Vec<Point> {
        self.free_nodes.iter().map(|&k| self.mesh.nodes()[k]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_and_triangle_counts() {
        let m = Mesh::structured(1).unwrap();
        assert_eq!((m.num_nodes(), m.triangles().len()), (4, 2));
        let m = Mesh::structured(120).unwrap();
        assert_eq!((m.num_nodes(), m.triangles().len()), (14641, 28800));
        assert_eq!(Mesh::structured(30).unwrap().num_nodes(), 961);
        assert!(Mesh::structured(0).is_err());
    }

    #[test]
    fn triangles_are_positively_oriented_and_tile_the_square() {
        let m = Mesh::structured(7).unwrap();
        let mut total = 0.0;
        for t in 0..m.triangles().len() {
            let a = signed_area(&m.triangle_points(t));
            assert!(a > 0.0);
            total += a;
        }
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn boundary_tags() {
        let m = Mesh::structured(2).unwrap();
        let tag_at = |x: f64, y: f64| {
            let k = m.nodes().iter().position(|p| *p == [x, y]).unwrap();
            m.boundary_tags()[k]
        };
        assert_eq!(tag_at(0.0, 0.5), BoundaryTag::Left);
        assert_eq!(tag_at(0.5, 0.5), BoundaryTag::Interior);
        assert_eq!(tag_at(0.0, 0.0), BoundaryTag::Left);
        assert_eq!(tag_at(1.0, 1.0), BoundaryTag::Right);
        assert_eq!(tag_at(0.5, 0.0), BoundaryTag::Bottom);
        assert_eq!(tag_at(0.5, 1.0), BoundaryTag::Top);
        assert!(m.is_corner(m.node_at(2, 0)));
        assert!(!m.is_corner(m.node_at(1, 0)));
    }

    #[test]
    fn quadrature() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let q = element_quadrature(&tri);
        assert!((q.iter().map(|(_, w)| w).sum::<f64>() - 0.5).abs() < 1e-15);
        // x^2 over the reference triangle is 1/12.
        let x2: f64 = q.iter().map(|(p, w)| w * p[0] * p[0]).sum();
        assert!((x2 - 1.0 / 12.0).abs() < 1e-15);
        let xy: f64 = q.iter().map(|(p, w)| w * p[0] * p[1]).sum();
        assert!((xy - 1.0 / 24.0).abs() < 1e-15);

        assert!((integrate(&Mesh::structured(4).unwrap(), |_| 1.0) - 1.0).abs() < 1e-14);
        assert!((integrate(&Mesh::structured(8).unwrap(), |p| p[0]) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn shape_gradients_reproduce_linears() {
        let tri = [[0.1, 0.2], [0.6, 0.25], [0.3, 0.9]];
        let g = ElementGeometry::new(&tri);
        let f = |p: Point| 2.0 * p[0] - 3.0 * p[1] + 1.0;
        let mut grad = [0.0; 2];
        for a in 0..3 {
            grad[0] += f(tri[a]) * g.grads[a][0];
            grad[1] += f(tri[a]) * g.grads[a][1];
        }
        assert!((grad[0] - 2.0).abs() < 1e-13 && (grad[1] + 3.0).abs() < 1e-13);
    }

    #[test]
    fn rebuild_is_deterministic() {
        assert_eq!(Mesh::structured(5).unwrap(), Mesh::structured(5).unwrap());
    }

    #[test]
    fn fe_space_splits_nodes() {
        let space = FeSpace::new(Mesh::structured(4).unwrap(), |_, _| 1.0);
        assert_eq!(space.num_free(), 9);
        let boundary = (0..25).filter(|&k| space.is_dirichlet(k)).count();
        assert_eq!(boundary + space.num_free(), 25);
        let full = space.expand(&vec![0.0; 9]);
        assert_eq!(full.iter().filter(|&&v| v == 1.0).count(), 16);
    }
}
