//! Direct solver for "arrow" systems: one tridiagonal block per edge, all
//! coupled through a single vertex unknown.
//!
//! Each edge is eliminated from its outer end towards the vertex, which leaves
//! a scalar Schur complement on the vertex. There is no fill-in, so a
//! factorization costs `O(N M)` and so does each solve. Entries are generic so
//! the same code handles real, complex and 2x2 block systems. For real
//! symmetric (or symmetrizable) matrices the pivots of this elimination give
//! the inertia by Sylvester's law.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Matrix entry type: a (possibly non-commutative) ring with inverses.
pub trait Entry: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn zero() -> Self;
    fn inverse(&self) -> Option<Self>;
}

/// Vector entry type acted on by `T`.
pub trait VectorEntry: Copy + Add<Output = Self> + Sub<Output = Self> {
    fn zero() -> Self;
}

impl Entry for f64 {
    fn zero() -> Self {
        0.0
    }
    fn inverse(&self) -> Option<Self> {
        (*self != 0.0).then(|| 1.0 / self)
    }
}

impl VectorEntry for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Entry for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn inverse(&self) -> Option<Self> {
        (self.norm_sqr() != 0.0).then(|| self.inv())
    }
}

impl VectorEntry for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
}

/// Row-major 2x2 real block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

/// Column 2-vector paired with [`Mat2`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2(pub [f64; 2]);

impl Mat2 {
    pub fn diag(a: f64, d: f64) -> Self {
        Mat2([[a, 0.0], [0.0, d]])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + (-o)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        let a = self.0;
        Mat2([[-a[0][0], -a[0][1]], [-a[1][0], -a[1][1]]])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        let a = self.0;
        Vec2([a[0][0] * v.0[0] + a[0][1] * v.0[1], a[1][0] * v.0[0] + a[1][1] * v.0[1]])
    }
}

impl Entry for Mat2 {
    fn zero() -> Self {
        Mat2([[0.0; 2]; 2])
    }
    fn inverse(&self) -> Option<Self> {
        let a = self.0;
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det == 0.0 {
            return None;
        }
        Some(Mat2([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl VectorEntry for Vec2 {
    fn zero() -> Self {
        Vec2([0.0; 2])
    }
}

/// Sparse arrow matrix. Vectors use the layout `[vertex, edge 0 nodes 1..=M, edge 1 ..., ...]`.
#[derive(Debug, Clone)]
pub struct ArrowMatrix<T> {
    pub n_edges: usize,
    pub points_per_edge: usize,
    pub vertex_diag: T,
    /// Vertex row, column of node 1 on edge `k`.
    pub vertex_row: Vec<T>,
    /// Row of node 1 on edge `k`, vertex column.
    pub vertex_col: Vec<T>,
    pub diag: Vec<T>,
    /// `upper[k*M + i]`: row of node `i+1`, column of node `i+2` (unused for the last node).
    pub upper: Vec<T>,
    /// `lower[k*M + i]`: row of node `i+1`, column of node `i` (unused for `i = 0`).
    pub lower: Vec<T>,
}

impl<T: Entry> ArrowMatrix<T> {
    pub fn dimension(&self) -> usize {
        self.n_edges * self.points_per_edge + 1
    }

    /// Matrix-vector product.
    pub fn apply<V>(&self, x: &[V]) -> Vec<V>
    where
        V: VectorEntry,
        T: Mul<V, Output = V>,
    {
        assert_eq!(x.len(), self.dimension());
        let m = self.points_per_edge;
        let mut y = vec![V::zero(); x.len()];
        let mut v = self.vertex_diag * x[0];
        for k in 0..self.n_edges {
            v = v + self.vertex_row[k] * x[1 + k * m];
        }
        y[0] = v;
        for k in 0..self.n_edges {
            let base = k * m;
            for i in 0..m {
                let idx = base + i;
                let left = if i == 0 { self.vertex_col[k] * x[0] } else { self.lower[idx] * x[idx] };
                let mut r = left + self.diag[idx] * x[1 + idx];
                if i + 1 < m {
                    r = r + self.upper[idx] * x[2 + idx];
                }
                y[1 + idx] = r;
            }
        }
        y
    }

    /// Entry-wise map (used to form shifted or Crank-Nicolson matrices).
    pub fn map<U>(&self, f: impl Fn(T) -> U, diag_shift: impl Fn(U) -> U) -> ArrowMatrix<U> {
        ArrowMatrix {
            n_edges: self.n_edges,
            points_per_edge: self.points_per_edge,
            vertex_diag: diag_shift(f(self.vertex_diag)),
            vertex_row: self.vertex_row.iter().map(|&t| f(t)).collect(),
            vertex_col: self.vertex_col.iter().map(|&t| f(t)).collect(),
            diag: self.diag.iter().map(|&t| diag_shift(f(t))).collect(),
            upper: self.upper.iter().map(|&t| f(t)).collect(),
            lower: self.lower.iter().map(|&t| f(t)).collect(),
        }
    }

    pub fn factor(&self) -> Result<ArrowFactor<T>> {
        let m = self.points_per_edge;
        let mut pivot_inv = vec![T::zero(); self.n_edges * m];
        let mut schur = self.vertex_diag;
        for k in 0..self.n_edges {
            let base = k * m;
            let mut d = self.diag[base + m - 1];
            for i in (0..m).rev() {
                if i + 1 < m {
                    d = self.diag[base + i] - self.upper[base + i] * pivot_inv[base + i + 1] * self.lower[base + i + 1];
                }
                pivot_inv[base + i] = d
                    .inverse()
                    .ok_or_else(|| Error::SingularSystem(format!("edge {k}, node {}", i + 1)))?;
            }
            schur = schur - self.vertex_row[k] * pivot_inv[base] * self.vertex_col[k];
        }
        let schur_inv = schur.inverse().ok_or_else(|| Error::SingularSystem("vertex".into()))?;
        Ok(ArrowFactor { matrix: self.clone(), pivot_inv, schur_inv })
    }
}

impl ArrowMatrix<f64> {
    /// Number of negative pivots of `A - shift I` in the edge-outward-in
    /// elimination order. For a matrix similar to a symmetric one by a positive
    /// diagonal scaling this is the number of eigenvalues below `shift`.
    pub fn count_below(&self, shift: f64) -> usize {
        let m = self.points_per_edge;
        let tiny = f64::MIN_POSITIVE.sqrt();
        let fix = |d: f64| if d.abs() < tiny { -tiny } else { d };
        let mut negatives = 0;
        let mut schur = self.vertex_diag - shift;
        for k in 0..self.n_edges {
            let base = k * m;
            let mut d = fix(self.diag[base + m - 1] - shift);
            if d < 0.0 {
                negatives += 1;
            }
            for i in (0..m - 1).rev() {
                d = fix(self.diag[base + i] - shift - self.upper[base + i] * self.lower[base + i + 1] / d);
                if d < 0.0 {
                    negatives += 1;
                }
            }
            schur -= self.vertex_row[k] * self.vertex_col[k] / d;
        }
        if fix(schur) < 0.0 {
            negatives += 1;
        }
        negatives
    }

    /// Gershgorin interval of the symmetrized matrix `W^{1/2} A W^{-1/2}`.
    /// Off-diagonal products `a_ij a_ji` are scale invariant, so the symmetric
    /// entries are `sqrt(a_ij a_ji)` with the sign of `a_ij`.
    pub fn gershgorin(&self) -> (f64, f64) {
        let m = self.points_per_edge;
        let sym = |a: f64, b: f64| (a * b).abs().sqrt();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let r0: f64 = (0..self.n_edges).map(|k| sym(self.vertex_row[k], self.vertex_col[k])).sum();
        lo = lo.min(self.vertex_diag - r0);
        hi = hi.max(self.vertex_diag + r0);
        for k in 0..self.n_edges {
            let base = k * m;
            for i in 0..m {
                let idx = base + i;
                let mut r = if i == 0 {
                    sym(self.vertex_row[k], self.vertex_col[k])
                } else {
                    sym(self.lower[idx], self.upper[idx - 1])
                };
                if i + 1 < m {
                    r += sym(self.upper[idx], self.lower[idx + 1]);
                }
                lo = lo.min(self.diag[idx] - r);
                hi = hi.max(self.diag[idx] + r);
            }
        }
        (lo, hi)
    }
}

/// Factorization produced by [`ArrowMatrix::factor`].
#[derive(Debug, Clone)]
pub struct ArrowFactor<T> {
    matrix: ArrowMatrix<T>,
    pivot_inv: Vec<T>,
    schur_inv: T,
}

impl<T: Entry> ArrowFactor<T> {
    pub fn solve<V>(&self, b: &[V]) -> Vec<V>
    where
        V: VectorEntry,
        T: Mul<V, Output = V>,
    {
        let a = &self.matrix;
        let m = a.points_per_edge;
        assert_eq!(b.len(), a.dimension());
        let mut g = vec![V::zero(); b.len() - 1];
        let mut rhs0 = b[0];
        for k in 0..a.n_edges {
            let base = k * m;
            g[base + m - 1] = b[base + m];
            for i in (0..m - 1).rev() {
                let idx = base + i;
                g[idx] = b[1 + idx] - a.upper[idx] * (self.pivot_inv[idx + 1] * g[idx + 1]);
            }
            rhs0 = rhs0 - a.vertex_row[k] * (self.pivot_inv[base] * g[base]);
        }
        let y = self.schur_inv * rhs0;
        let mut x = vec![V::zero(); b.len()];
        x[0] = y;
        for k in 0..a.n_edges {
            let base = k * m;
            let mut prev = self.pivot_inv[base] * (g[base] - a.vertex_col[k] * y);
            x[1 + base] = prev;
            for i in 1..m {
                let idx = base + i;
                prev = self.pivot_inv[idx] * (g[idx] - a.lower[idx] * prev);
                x[1 + idx] = prev;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_arrow(n: usize, m: usize, seed: u64) -> ArrowMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = |c: f64| rng.gen_range(-1.0..1.0) + c;
        let len = n * m;
        ArrowMatrix {
            n_edges: n,
            points_per_edge: m,
            vertex_diag: r(6.0),
            vertex_row: (0..n).map(|_| r(0.0)).collect(),
            vertex_col: (0..n).map(|_| r(0.0)).collect(),
            diag: (0..len).map(|_| r(4.0)).collect(),
            upper: (0..len).map(|_| r(0.0)).collect(),
            lower: (0..len).map(|_| r(0.0)).collect(),
        }
    }

    #[test]
    fn real_solve_inverts_apply() {
        let a = random_arrow(3, 7, 1);
        let x: Vec<f64> = (0..a.dimension()).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.apply(&x);
        let sol = a.factor().unwrap().solve(&b);
        for (p, q) in sol.iter().zip(&x) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_and_block_solves_invert_apply() {
        let a = random_arrow(4, 5, 2).map(|t| Complex64::new(t, 0.3 * t), |d| d + Complex64::new(0.0, 1.0));
        let x: Vec<Complex64> = (0..a.dimension()).map(|i| Complex64::new(i as f64, 1.0 / (1.0 + i as f64))).collect();
        let sol = a.factor().unwrap().solve(&a.apply(&x));
        for (p, q) in sol.iter().zip(&x) {
            assert!((p - q).norm() < 1e-11);
        }

        let re = random_arrow(3, 6, 3);
        let im = random_arrow(3, 6, 4);
        let blocks = ArrowMatrix {
            n_edges: 3,
            points_per_edge: 6,
            vertex_diag: Mat2([[re.vertex_diag, 0.5], [-0.25, im.vertex_diag]]),
            vertex_row: re.vertex_row.iter().zip(&im.vertex_row).map(|(&a, &b)| Mat2([[a, b], [0.0, a]])).collect(),
            vertex_col: re.vertex_col.iter().zip(&im.vertex_col).map(|(&a, &b)| Mat2([[a, 0.0], [b, a]])).collect(),
            diag: re.diag.iter().zip(&im.diag).map(|(&a, &b)| Mat2([[a, 0.1], [0.2, b]])).collect(),
            upper: re.upper.iter().map(|&a| Mat2([[a, -a], [0.3, a]])).collect(),
            lower: im.lower.iter().map(|&a| Mat2([[a, 0.0], [a, 0.7 * a]])).collect(),
        };
        let x: Vec<Vec2> = (0..blocks.dimension()).map(|i| Vec2([(i as f64).cos(), i as f64 * 0.1])).collect();
        let sol = blocks.factor().unwrap().solve(&blocks.apply(&x));
        for (p, q) in sol.iter().zip(&x) {
            assert!((p.0[0] - q.0[0]).abs() < 1e-11 && (p.0[1] - q.0[1]).abs() < 1e-11);
        }
    }

    #[test]
    fn singular_vertex_is_reported() {
        let a = ArrowMatrix {
            n_edges: 2,
            points_per_edge: 2,
            vertex_diag: 0.0,
            vertex_row: vec![0.0; 2],
            vertex_col: vec![0.0; 2],
            diag: vec![1.0; 4],
            upper: vec![0.0; 4],
            lower: vec![0.0; 4],
        };
        assert!(matches!(a.factor(), Err(Error::SingularSystem(_))));
    }
}
