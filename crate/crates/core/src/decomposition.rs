//! Node partitions, overlap extension, restriction/prolongation transfers and
//! local subproblems with a frozen exterior.
//!
//! Everything here works in the numbering of the optimization unknowns
//! (free dofs), not mesh nodes.

use std::collections::VecDeque;

use crate::error::{invalid, Error, Result};
use crate::linalg::BoxBounds;
use crate::mesh::{FeSpace, Point};
use crate::objective::Restrict;

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    owner: Vec<usize>,
    nonoverlapping: Vec<Vec<usize>>,
    overlapping: Vec<Vec<usize>>,
    overlap: usize,
}

impl Decomposition {
    /// Builds the decomposition from a dof-to-subdomain assignment.
    pub fn from_owner(owner: Vec<usize>, adjacency: &[Vec<usize>], overlap: usize) -> Result<Self> {
        if owner.len() != adjacency.len() {
            return Err(invalid("owner map and adjacency differ in length"));
        }
        let n = owner.iter().max().map_or(0, |m| m + 1);
        let mut nonoverlapping = vec![Vec::new(); n];
        for (dof, &s) in owner.iter().enumerate() {
            nonoverlapping[s].push(dof);
        }
        if let Some(empty) = nonoverlapping.iter().position(Vec::is_empty) {
            return Err(Error::PartitionFailure(format!("subdomain {empty} owns no unknowns")));
        }
        let overlapping = extend_overlap(&nonoverlapping, adjacency, overlap);
        Ok(Self { owner, nonoverlapping, overlapping, overlap })
    }

    /// Coordinate-bisection partition of the free nodes of `space`.
    pub fn for_space(space: &FeSpace, subdomains: usize, overlap: usize) -> Result<Self> {
        let owner = partition(&space.dof_coordinates(), subdomains)?;
        Self::from_owner(owner, &space.dof_adjacency(), overlap)
    }

    pub fn num_subdomains(&self) -> usize {
        self.nonoverlapping.len()
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn owner(&self) -> &[usize] {
        &self.owner
    }

    pub fn nonoverlapping(&self, i: usize) -> &[usize] {
        &self.nonoverlapping[i]
    }

    pub fn overlapping(&self, i: usize) -> &[usize] {
        &self.overlapping[i]
    }

    pub fn transfer(&self, i: usize) -> Transfer {
        let indices = self.overlapping[i].clone();
        let owned = indices.iter().map(|&g| self.owner[g] == i).collect();
        Transfer { dim: self.owner.len(), indices, owned }
    }

    pub fn transfers(&self) -> Vec<Transfer> {
        (0..self.num_subdomains()).map(|i| self.transfer(i)).collect()
    }
}

/// Restriction `R_i`, prolongation `P_i = R_i^T` and the restricted
/// prolongation that only scatters owned entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    dim: usize,
    /// Local-to-global map of the overlapping subdomain.
    pub indices: Vec<usize>,
    /// Whether each local entry belongs to the nonoverlapping part.
    pub owned: Vec<bool>,
}

impl Transfer {
    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&g| v[g]).collect()
    }

    pub fn prolong(&self, local: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&g, &v) in self.indices.iter().zip(local) {
            out[g] = v;
        }
        out
    }

    pub fn restricted_prolong(&self, local: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.restricted_prolong_add(local, &mut out);
        out
    }

    pub fn restricted_prolong_add(&self, local: &[f64], out: &mut [f64]) {
        for ((&g, &v), &own) in self.indices.iter().zip(local).zip(&self.owned) {
            if own {
                out[g] += v;
            }
        }
    }
}

/// Recursive coordinate bisection into `n` parts. Each cut splits along the
/// longer extent, in proportion to the number of parts on either side.
pub fn partition(coords: &[Point], n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(invalid("need at least one subdomain"));
    }
    if n > coords.len() {
        return Err(Error::PartitionFailure(format!(
            "{n} subdomains requested for {} unknowns",
            coords.len()
        )));
    }
    let mut owner = vec![0; coords.len()];
    let all: Vec<usize> = (0..coords.len()).collect();
    bisect(coords, all, n, 0, &mut owner);
    Ok(owner)
}

fn bisect(coords: &[Point], mut ids: Vec<usize>, parts: usize, label: usize, owner: &mut [usize]) {
    if parts == 1 {
        for i in ids {
            owner[i] = label;
        }
        return;
    }
    let extent = |axis: usize| {
        let (lo, hi) = ids.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(coords[i][axis]), hi.max(coords[i][axis]))
        });
        hi - lo
    };
    let axis = if extent(0) >= extent(1) { 0 } else { 1 };
    let other = 1 - axis;
    ids.sort_by(|&a, &b| {
        coords[a][axis]
            .total_cmp(&coords[b][axis])
            .then(coords[a][other].total_cmp(&coords[b][other]))
            .then(a.cmp(&b))
    });
    let left_parts = parts / 2;
    let cut = (ids.len() * left_parts + parts / 2) / parts;
    let right = ids.split_off(cut);
    bisect(coords, ids, left_parts, label, owner);
    bisect(coords, right, parts - left_parts, label + left_parts, owner);
}

/// Grows every set by `layers` breadth-first layers of the adjacency graph.
pub fn extend_overlap(sets: &[Vec<usize>], adjacency: &[Vec<usize>], layers: usize) -> Vec<Vec<usize>> {
    sets.iter()
        .map(|set| {
            let mut depth = vec![usize::MAX; adjacency.len()];
            let mut queue = VecDeque::new();
            for &v in set {
                depth[v] = 0;
                queue.push_back(v);
            }
            while let Some(v) = queue.pop_front() {
                if depth[v] == layers {
                    continue;
                }
                for &w in &adjacency[v] {
                    if depth[w] == usize::MAX {
                        depth[w] = depth[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
            (0..adjacency.len()).filter(|&v| depth[v] != usize::MAX).collect()
        })
        .collect()
}

/// Parses a partition file: one `node_index subdomain_index` pair per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_partition_file(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: lineno + 1, message };
        let mut fields = line.split_whitespace();
        let node = fields.next().ok_or_else(|| parse_err("missing node index".into()))?;
        let sub = fields.next().ok_or_else(|| parse_err("missing subdomain index".into()))?;
        if fields.next().is_some() {
            return Err(parse_err("expected exactly two fields".into()));
        }
        let node = node.parse::<usize>().map_err(|e| parse_err(format!("node index: {e}")))?;
        let sub = sub.parse::<usize>().map_err(|e| parse_err(format!("subdomain index: {e}")))?;
        entries.push((node, sub));
    }
    Ok(entries)
}

/// Turns parsed `(node, subdomain)` pairs into a dof owner map, checking that
/// every free node appears exactly once and subdomain labels are contiguous.
pub fn owner_from_entries(entries: &[(usize, usize)], space: &FeSpace) -> Result<Vec<usize>> {
    let mut owner = vec![usize::MAX; space.num_free()];
    for &(node, sub) in entries {
        if node >= space.mesh().num_nodes() {
            return Err(Error::PartitionFailure(format!("node {node} is not a mesh node")));
        }
        let dof = space
            .dof_of_node(node)
            .ok_or_else(|| Error::PartitionFailure(format!("node {node} is a Dirichlet node")))?;
        if owner[dof] != usize::MAX {
            return Err(Error::PartitionFailure(format!("node {node} assigned twice")));
        }
        owner[dof] = sub;
    }
    if let Some(dof) = owner.iter().position(|&s| s == usize::MAX) {
        return Err(Error::PartitionFailure(format!(
            "free node {} has no subdomain",
            space.free_nodes()[dof]
        )));
    }
    let n = owner.iter().max().map_or(0, |m| m + 1);
    let mut used = vec![false; n];
    for &s in &owner {
        used[s] = true;
    }
    if let Some(s) = used.iter().position(|u| !u) {
        return Err(Error::PartitionFailure(format!("subdomain {s} is empty")));
    }
    Ok(owner)
}

/// Subproblem on one overlapping subdomain with the exterior frozen.
#[derive(Debug, Clone)]
pub struct LocalProblem<L> {
    pub subdomain: usize,
    pub transfer: Transfer,
    pub objective: L,
    pub bounds: BoxBounds,
    /// `R_i v`, feasible for `bounds` whenever `v` is feasible globally.
    pub initial: Vec<f64>,
}

pub fn extract_local<O: Restrict>(
    objective: &O,
    plan: &O::Plan,
    bounds: &BoxBounds,
    transfer: &Transfer,
    subdomain: usize,
    v: &[f64],
) -> LocalProblem<O::Local> {
    LocalProblem {
        subdomain,
        transfer: transfer.clone(),
        objective: objective.localize(plan, v),
        bounds: bounds.select(&transfer.indices),
        initial: transfer.restrict(v),
    }
}
