//! Star-graph discretization and fields living on it.
//!
//! A [`StarGrid`] has `N` edges of length `L`, each sampled at `x_i = i h`,
//! `i = 0..=M`. The node `x_0 = 0` is one shared unknown (the vertex), so a
//! [`GraphField`] stores one vertex value plus `N * M` edge samples. Continuity
//! at the vertex is therefore structural.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform discretization of a star graph with `n_edges` truncated half-lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarGrid {
    n_edges: usize,
    edge_length: f64,
    points_per_edge: usize,
    spacing: f64,
}

/// Strength of the delta coupling at the vertex. `alpha = 0` is Kirchhoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexCoupling {
    pub alpha: f64,
}

impl VertexCoupling {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn kirchhoff() -> Self {
        Self { alpha: 0.0 }
    }

    pub fn is_kirchhoff(&self) -> bool {
        self.alpha == 0.0
    }
}

/// Builds a grid; `points_per_edge` must be even (Simpson quadrature) and at least 16.
pub fn make_grid(n_edges: usize, edge_length: f64, points_per_edge: usize) -> Result<StarGrid> {
    StarGrid::new(n_edges, edge_length, points_per_edge)
}

impl StarGrid {
    pub fn new(n_edges: usize, edge_length: f64, points_per_edge: usize) -> Result<Self> {
        if n_edges < 2 {
            return Err(Error::InvalidParameter(format!("n_edges must be >= 2, got {n_edges}")));
        }
        if !(edge_length.is_finite() && edge_length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "edge_length must be positive, got {edge_length}"
            )));
        }
        if points_per_edge < 16 {
            return Err(Error::InvalidParameter(format!(
                "points_per_edge must be >= 16, got {points_per_edge}"
            )));
        }
        if points_per_edge % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "points_per_edge must be even, got {points_per_edge}"
            )));
        }
        Ok(Self {
            n_edges,
            edge_length,
            points_per_edge,
            spacing: edge_length / points_per_edge as f64,
        })
    }

    /// Grid with spacing as close to `spacing` as an even node count allows.
    pub fn with_spacing(n_edges: usize, edge_length: f64, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {spacing}")));
        }
        let m = (edge_length / spacing / 2.0).round().max(8.0) as usize * 2;
        Self::new(n_edges, edge_length, m)
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn edge_length(&self) -> f64 {
        self.edge_length
    }

    pub fn points_per_edge(&self) -> usize {
        self.points_per_edge
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of unknowns: `N * M + 1`.
    pub fn dimension(&self) -> usize {
        self.n_edges * self.points_per_edge + 1
    }

    /// Position of node `i` (0 = vertex) along any edge.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    /// Same grid with half the spacing.
    pub fn refined(&self) -> Self {
        Self::new(self.n_edges, self.edge_length, 2 * self.points_per_edge)
            .expect("refining a valid grid stays valid")
    }

    /// Lattice quadrature weight of the vertex node: `N h / 2`.
    pub fn vertex_weight(&self) -> f64 {
        0.5 * self.n_edges as f64 * self.spacing
    }
}

/// Complex field on a [`StarGrid`], continuous at the vertex by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphField {
    grid: StarGrid,
    vertex: Complex64,
    /// Edge `k`, node `i` (1..=M) lives at `k * M + i - 1`.
    interior: Vec<Complex64>,
}

impl GraphField {
    pub fn zeros(grid: &StarGrid) -> Self {
        Self {
            grid: *grid,
            vertex: Complex64::new(0.0, 0.0),
            interior: vec![Complex64::new(0.0, 0.0); grid.n_edges * grid.points_per_edge],
        }
    }

    pub fn from_parts(grid: &StarGrid, vertex: Complex64, interior: Vec<Complex64>) -> Result<Self> {
        if interior.len() != grid.n_edges * grid.points_per_edge {
            return Err(Error::InvalidParameter(format!(
                "expected {} interior samples, got {}",
                grid.n_edges * grid.points_per_edge,
                interior.len()
            )));
        }
        Ok(Self { grid: *grid, vertex, interior })
    }

    /// Samples `f(edge, x)` at every node. The values `f(k, 0)` must agree
    /// across edges to within `1e-12` relative to the largest of them.
    pub fn from_fn(grid: &StarGrid, f: impl Fn(usize, f64) -> Complex64) -> Result<Self> {
        let at_vertex: Vec<Complex64> = (0..grid.n_edges).map(|k| f(k, 0.0)).collect();
        let vertex = check_continuity(&at_vertex)?;
        let m = grid.points_per_edge;
        let mut interior = Vec::with_capacity(grid.n_edges * m);
        for k in 0..grid.n_edges {
            for i in 1..=m {
                interior.push(f(k, grid.x(i)));
            }
        }
        Ok(Self { grid: *grid, vertex, interior })
    }

    pub fn from_real_fn(grid: &StarGrid, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, |k, x| Complex64::new(f(k, x), 0.0))
    }

    /// Builds a field from per-edge sample vectors of length `M + 1`, each
    /// starting with the edge's value at the vertex. Rejects fields whose
    /// edge values at `x = 0` disagree.
    pub fn from_edge_samples(grid: &StarGrid, edges: &[Vec<Complex64>]) -> Result<Self> {
        if edges.len() != grid.n_edges {
            return Err(Error::InvalidParameter(format!(
                "expected {} edges, got {}",
                grid.n_edges,
                edges.len()
            )));
        }
        let m = grid.points_per_edge;
        if let Some(bad) = edges.iter().find(|e| e.len() != m + 1) {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples per edge, got {}",
                m + 1,
                bad.len()
            )));
        }
        let at_vertex: Vec<Complex64> = edges.iter().map(|e| e[0]).collect();
        let vertex = check_continuity(&at_vertex)?;
        let interior = edges.iter().flat_map(|e| e[1..].iter().copied()).collect();
        Ok(Self { grid: *grid, vertex, interior })
    }

    pub fn grid(&self) -> &StarGrid {
        &self.grid
    }

    pub fn vertex(&self) -> Complex64 {
        self.vertex
    }

    pub fn set_vertex(&mut self, value: Complex64) {
        self.vertex = value;
    }

    /// Interior samples of edge `k` (nodes 1..=M).
    pub fn edge(&self, k: usize) -> &[Complex64] {
        let m = self.grid.points_per_edge;
        &self.interior[k * m..(k + 1) * m]
    }

    pub fn edge_mut(&mut self, k: usize) -> &mut [Complex64] {
        let m = self.grid.points_per_edge;
        &mut self.interior[k * m..(k + 1) * m]
    }

    pub fn interior(&self) -> &[Complex64] {
        &self.interior
    }

    /// Value at node `i` of edge `k`; `i = 0` is the vertex.
    pub fn at(&self, k: usize, i: usize) -> Complex64 {
        if i == 0 {
            self.vertex
        } else if i <= self.grid.points_per_edge {
            self.interior[k * self.grid.points_per_edge + i - 1]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Edge `k` including the vertex sample, length `M + 1`.
    pub fn edge_with_vertex(&self, k: usize) -> Vec<Complex64> {
        std::iter::once(self.vertex).chain(self.edge(k).iter().copied()).collect()
    }

    /// Vertex-first flat vector (the layout used by the arrow solver).
    pub fn to_vector(&self) -> Vec<Complex64> {
        self.values().collect()
    }

    pub fn from_vector(grid: &StarGrid, v: Vec<Complex64>) -> Result<Self> {
        if v.len() != grid.dimension() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                grid.dimension(),
                v.len()
            )));
        }
        let mut v = v;
        let vertex = v[0];
        v.remove(0);
        Ok(Self { grid: *grid, vertex, interior: v })
    }

    pub fn real_vector(&self) -> Vec<f64> {
        self.values().map(|z| z.re).collect()
    }

    pub fn from_real_vector(grid: &StarGrid, v: &[f64]) -> Result<Self> {
        Self::from_vector(grid, v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// All values, vertex first.
    pub fn values(&self) -> impl Iterator<Item = Complex64> + '_ {
        std::iter::once(self.vertex).chain(self.interior.iter().copied())
    }

    pub fn same_grid(&self, other: &GraphField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            vertex: f(self.vertex),
            interior: self.interior.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip_map(&self, other: &GraphField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            vertex: f(self.vertex, other.vertex),
            interior: self
                .interior
                .iter()
                .zip(&other.interior)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|z| c * z)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.map(|z| z * c)
    }

    pub fn add(&self, other: &GraphField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GraphField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &GraphField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b * c)
    }

    pub fn real_part(&self) -> Self {
        self.map(|z| Complex64::new(z.re, 0.0))
    }

    pub fn imag_part(&self) -> Self {
        self.map(|z| Complex64::new(z.im, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.values().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Permutes edge labels: edge `k` of the result is edge `perm[k]` of `self`.
    pub fn permute_edges(&self, perm: &[usize]) -> Result<Self> {
        let n = self.grid.n_edges;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParameter("not a permutation of the edges".into()));
        }
        let interior = perm.iter().flat_map(|&p| self.edge(p).iter().copied()).collect();
        Ok(Self { grid: self.grid, vertex: self.vertex, interior })
    }
}

fn check_continuity(at_vertex: &[Complex64]) -> Result<Complex64> {
    let first = at_vertex[0];
    let scale = at_vertex.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let spread = at_vertex.iter().map(|z| (z - first).norm()).fold(0.0, f64::max);
    if spread > 1e-12 * scale.max(1.0) {
        return Err(Error::VertexDiscontinuity { spread });
    }
    Ok(first)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_is_length_over_points() {
        let g = make_grid(3, 20.0, 400).unwrap();
        assert!((g.spacing() - 0.05).abs() < 1e-15);
        let g = make_grid(2, 10.0, 100).unwrap();
        assert!((g.spacing() - 0.1).abs() < 1e-15);
        assert_eq!(g.dimension(), 201);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(make_grid(1, 20.0, 400), Err(Error::InvalidParameter(_))));
        assert!(make_grid(3, 0.0, 400).is_err());
        assert!(make_grid(3, 10.0, 8).is_err());
        assert!(make_grid(3, 10.0, 101).is_err());
    }

    #[test]
    fn discontinuous_samples_are_rejected() {
        let g = make_grid(3, 4.0, 16).unwrap();
        let err = GraphField::from_real_fn(&g, |k, x| (-x).exp() + if k == 1 { 0.1 } else { 0.0 });
        assert!(matches!(err, Err(Error::VertexDiscontinuity { .. })));
        let edges: Vec<Vec<Complex64>> =
            (0..3).map(|k| vec![Complex64::new(k as f64, 0.0); 17]).collect();
        assert!(GraphField::from_edge_samples(&g, &edges).is_err());
    }

    #[test]
    fn indexing_round_trips() {
        let g = make_grid(3, 4.0, 16).unwrap();
        let f = GraphField::from_real_fn(&g, |k, x| (k as f64 + 1.0) * x + 2.0).unwrap();
        assert_eq!(f.vertex().re, 2.0);
        assert!((f.at(2, 16).re - (3.0 * 4.0 + 2.0)).abs() < 1e-14);
        assert_eq!(f.edge_with_vertex(1).len(), 17);
        let p = f.permute_edges(&[2, 0, 1]).unwrap();
        assert_eq!(p.edge(0), f.edge(2));
        assert!(f.permute_edges(&[0, 0, 1]).is_err());
    }
}
