//! The ignition (Bratu-type) and minimal-surface benchmark problems.
//!
//! Dirichlet unknowns are eliminated: the optimization variables are the
//! values at free (interior) nodes, and all bounds are plain boxes on them.

mod assembly;

use std::f64::consts::PI;
use std::sync::Arc;

pub use assembly::{FeObjective, FePlan};

use crate::error::{invalid, Error, Result};
use crate::linalg::{BoxBounds, CsrMatrix};
use crate::mesh::{BoundaryTag, ElementGeometry, FeSpace, Mesh, Point, QUADRATURE_BARYCENTRIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Ignition,
    MinimalSurface,
}

/// Which form of the minimal-surface upper obstacle to use.
///
/// `AsPrinted` is `8(x1-0.3)^2 - 8(x2-0.3)^2 - 0.4`, which lies below the lower
/// obstacle near (0.7, 0.7) and leaves the feasible set empty. `Corrected`
/// flips the sign of the second term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpperObstacle {
    #[default]
    Corrected,
    AsPrinted,
}

/// Ignition forcing term, transcribed verbatim (including the trailing
/// `sin(3 pi x1)`).
pub fn ignition_forcing(x: Point) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let s = x1 * x1 - x1 * x1 * x1;
    (9.0 * PI * PI + (s * (3.0 * PI * x2).sin()).exp() * s + 6.0 * x1 - 2.0) * (3.0 * PI * x1).sin()
}

pub fn ignition_lower(x: Point) -> f64 {
    0.2 - 8.0 * (x[0] - 7.0 / 16.0).powi(2) - 8.0 * (x[1] - 7.0 / 16.0).powi(2)
}

pub fn ignition_upper(_x: Point) -> f64 {
    0.5
}

pub fn minimal_surface_lower(x: Point) -> f64 {
    0.25 - 8.0 * (x[0] - 0.7).powi(2) - 8.0 * (x[1] - 0.7).powi(2)
}

pub fn minimal_surface_upper(x: Point, variant: UpperObstacle) -> f64 {
    match variant {
        UpperObstacle::Corrected => 8.0 * (x[0] - 0.3).powi(2) + 8.0 * (x[1] - 0.3).powi(2) - 0.4,
        UpperObstacle::AsPrinted => 8.0 * (x[0] - 0.3).powi(2) - 8.0 * (x[1] - 0.3).powi(2) - 0.4,
    }
}

/// Minimal-surface boundary traces, selected by boundary part.
pub fn minimal_surface_dirichlet(x: Point, tag: BoundaryTag) -> f64 {
    match tag {
        BoundaryTag::Left => -0.3 * (2.0 * PI * x[1]).sin(),
        BoundaryTag::Right => 0.3 * (2.0 * PI * x[1]).sin(),
        BoundaryTag::Bottom => -0.3 * (2.0 * PI * x[0]).sin(),
        BoundaryTag::Top => 0.3 * (2.0 * PI * x[0]).sin(),
        BoundaryTag::Interior => 0.0,
    }
}

#[derive(Debug)]
pub(crate) struct ProblemData {
    pub kind: ProblemKind,
    pub space: FeSpace,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub geometry: Vec<ElementGeometry>,
    /// Forcing at the three quadrature points of each element (ignition only).
    pub forcing: Vec<[f64; 3]>,
}

/// A benchmark problem on a fixed mesh. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Problem {
    pub(crate) data: Arc<ProblemData>,
}

/// Result of scanning a problem for an empty feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Nodes where the lower obstacle exceeds the upper one.
    pub crossed: Vec<usize>,
    /// Dirichlet nodes whose prescribed value lies outside the obstacles.
    pub dirichlet_outside: Vec<usize>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.crossed.is_empty() && self.dirichlet_outside.is_empty()
    }

    pub fn violations(&self) -> usize {
        self.crossed.len() + self.dirichlet_outside.len()
    }
}

impl Problem {
    pub fn ignition(cells: usize) -> Result<Self> {
        Self::new(ProblemKind::Ignition, cells)
    }

    pub fn minimal_surface(cells: usize) -> Result<Self> {
        Self::new(ProblemKind::MinimalSurface, cells)
    }

    pub fn new(kind: ProblemKind, cells: usize) -> Result<Self> {
        Self::with_options(kind, cells, UpperObstacle::Corrected, None)
    }

    /// Full constructor. `dirichlet` overrides the benchmark boundary data.
    pub fn with_options(
        kind: ProblemKind,
        cells: usize,
        upper: UpperObstacle,
        dirichlet: Option<&dyn Fn(Point, BoundaryTag) -> f64>,
    ) -> Result<Self> {
        let mesh = Mesh::structured(cells)?;
        let space = match (dirichlet, kind) {
            (Some(g), _) => FeSpace::new(mesh, g),
            (None, ProblemKind::Ignition) => FeSpace::new(mesh, |_, _| 0.0),
            (None, ProblemKind::MinimalSurface) => FeSpace::new(mesh, minimal_surface_dirichlet),
        };
        let nodes = space.mesh().nodes();
        let (lower, upper): (Vec<f64>, Vec<f64>) = match kind {
            ProblemKind::Ignition => nodes.iter().map(|&x| (ignition_lower(x), ignition_upper(x))).unzip(),
            ProblemKind::MinimalSurface => nodes
                .iter()
                .map(|&x| (minimal_surface_lower(x), minimal_surface_upper(x, upper)))
                .unzip(),
        };
        let mesh = space.mesh();
        let geometry: Vec<ElementGeometry> = (0..mesh.triangles().len())
            .map(|t| ElementGeometry::new(&mesh.triangle_points(t)))
            .collect();
        let forcing = match kind {
            ProblemKind::Ignition => (0..mesh.triangles().len())
                .map(|t| {
                    let p = mesh.triangle_points(t);
                    QUADRATURE_BARYCENTRIC.map(|lam| {
                        let x = [
                            lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                            lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
                        ];
                        ignition_forcing(x)
                    })
                })
                .collect(),
            ProblemKind::MinimalSurface => Vec::new(),
        };
        Ok(Self {
            data: Arc::new(ProblemData { kind, space, lower, upper, geometry, forcing }),
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.data.kind
    }

    pub fn space(&self) -> &FeSpace {
        &self.data.space
    }

    pub fn mesh(&self) -> &Mesh {
        self.data.space.mesh()
    }

    pub fn num_free(&self) -> usize {
        self.data.space.num_free()
    }

    /// Nodal obstacles on every mesh node. Fails if they cross anywhere.
    pub fn evaluate_bounds(&self) -> Result<BoxBounds> {
        BoxBounds::new(self.data.lower.clone(), self.data.upper.clone())
    }

    /// Obstacles restricted to the free unknowns.
    pub fn bounds(&self) -> Result<BoxBounds> {
        let report = self.validate_feasibility();
        if !report.is_feasible() {
            return Err(Error::Infeasible { violations: report.violations() });
        }
        let free = self.space().free_nodes();
        BoxBounds::new(
            free.iter().map(|&k| self.data.lower[k]).collect(),
            free.iter().map(|&k| self.data.upper[k]).collect(),
        )
    }

    pub fn validate_feasibility(&self) -> FeasibilityReport {
        let d = &self.data;
        let crossed = (0..d.lower.len()).filter(|&k| !(d.lower[k] <= d.upper[k])).collect();
        let dirichlet_outside = (0..d.lower.len())
            .filter(|&k| d.space.is_dirichlet(k))
            .filter(|&k| {
                let v = d.space.dirichlet_values()[k];
                !(d.lower[k] <= v && v <= d.upper[k])
            })
            .collect();
        FeasibilityReport { crossed, dirichlet_outside }
    }

    /// The projection of the zero function onto the feasible set, in free unknowns.
    pub fn initial_guess(&self) -> Result<Vec<f64>> {
        let bounds = self.bounds()?;
        Ok(crate::linalg::project_box(&vec![0.0; bounds.len()], &bounds))
    }

    /// Discrete energy as a function of the free unknowns.
    pub fn objective(&self) -> FeObjective {
        FeObjective::global(self)
    }

    fn check_full(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.mesh().num_nodes() {
            return Err(invalid(format!(
                "expected {} nodal values, got {}",
                self.mesh().num_nodes(),
                u.len()
            )));
        }
        Ok(())
    }

    /// Energy of a full nodal vector (Dirichlet entries taken from `u`).
    pub fn evaluate_energy(&self, u: &[f64]) -> Result<f64> {
        self.check_full(u)?;
        let obj = FeObjective::global_with_base(self, u.to_vec());
        Ok(obj.energy_of_base())
    }

    /// Gradient with respect to the free unknowns.
    pub fn assemble_gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_full(u)?;
        let obj = FeObjective::global_with_base(self, u.to_vec());
        Ok(crate::objective::Objective::gradient(&obj, &self.space().restrict_to_free(u)))
    }

    pub fn assemble_hessian(&self, u: &[f64]) -> Result<CsrMatrix> {
        self.check_full(u)?;
        let obj = FeObjective::global_with_base(self, u.to_vec());
        Ok(crate::objective::Objective::hessian(&obj, &self.space().restrict_to_free(u)))
    }
}
