//! Discrete Hamiltonian `H_alpha` with the delta vertex condition.
//!
//! Edge rows are the usual three-point stencil `-(u_{i-1} - 2u_i + u_{i+1}) / h^2`
//! with the shared vertex value as left neighbour of node 1 and a zero ghost
//! beyond `x_M`. The vertex row comes from a ghost-point elimination of the
//! condition `sum_k psi_k'(0) = alpha psi(0)`:
//!
//! ```text
//! (H u)_0 = 2/(N h^2) * sum_k (u_0 - u_{k,1}) + 2 alpha/(N h) * u_0
//! ```
//!
//! With lattice weights `w_0 = N h / 2` at the vertex and `h` elsewhere,
//! `W H` is symmetric, so `H` is self-adjoint in the lattice inner product.
//! Its quadratic form is exactly `sum_cells h |du/h|^2 + alpha |u_0|^2`.
//!
//! The vertex row is only first-order consistent as a pointwise value; the
//! boundary condition itself is checked separately by [`vertex_flux_residual`]
//! with the second-order one-sided derivative.

use num_complex::Complex64;

use crate::arrow::ArrowMatrix;
use crate::grid::{GraphField, StarGrid, VertexCoupling};

/// Arrow matrix of `H_alpha + diag(potential)`; `potential` uses the
/// vertex-first layout and may be empty for zero.
pub fn hamiltonian_matrix(grid: &StarGrid, coupling: VertexCoupling, potential: &[f64]) -> ArrowMatrix<f64> {
    let n = grid.n_edges();
    let m = grid.points_per_edge();
    let h = grid.spacing();
    let h2 = h * h;
    let nf = n as f64;
    let pot = |i: usize| potential.get(i).copied().unwrap_or(0.0);
    let len = n * m;
    ArrowMatrix {
        n_edges: n,
        points_per_edge: m,
        vertex_diag: 2.0 / h2 + 2.0 * coupling.alpha / (nf * h) + pot(0),
        vertex_row: vec![-2.0 / (nf * h2); n],
        vertex_col: vec![-1.0 / h2; n],
        diag: (0..len).map(|i| 2.0 / h2 + pot(i + 1)).collect(),
        upper: vec![-1.0 / h2; len],
        lower: vec![-1.0 / h2; len],
    }
}

/// `H_alpha` applied to a complex field.
pub fn apply_hamiltonian(field: &GraphField, coupling: VertexCoupling) -> GraphField {
    let grid = field.grid();
    let n = grid.n_edges();
    let m = grid.points_per_edge();
    let h = grid.spacing();
    let h2 = h * h;
    let u0 = field.vertex();
    let mut out = GraphField::zeros(grid);
    let mut flux = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let e = field.edge(k);
        flux += u0 - e[0];
        let dst = out.edge_mut(k);
        for i in 0..m {
            let left = if i == 0 { u0 } else { e[i - 1] };
            let right = if i + 1 < m { e[i + 1] } else { Complex64::new(0.0, 0.0) };
            dst[i] = (e[i] * 2.0 - left - right) / h2;
        }
    }
    let nf = n as f64;
    out.set_vertex(flux * (2.0 / (nf * h2)) + u0 * (2.0 * coupling.alpha / (nf * h)));
    out
}

/// Lattice quadrature weights in the vertex-first layout.
pub fn lattice_weights(grid: &StarGrid) -> Vec<f64> {
    let mut w = vec![grid.spacing(); grid.dimension()];
    w[0] = grid.vertex_weight();
    w
}

/// Lattice inner product `sum_i w_i conj(f_i) g_i`.
pub fn lattice_inner(f: &GraphField, g: &GraphField) -> Complex64 {
    let grid = f.grid();
    let h = grid.spacing();
    let body: Complex64 = f.interior().iter().zip(g.interior()).map(|(a, b)| a.conj() * b).sum();
    f.vertex().conj() * g.vertex() * grid.vertex_weight() + body * h
}

/// One-sided second-order derivative of edge `k` at the vertex.
pub fn vertex_derivative(field: &GraphField, k: usize) -> Complex64 {
    let h = field.grid().spacing();
    (field.vertex() * -3.0 + field.at(k, 1) * 4.0 - field.at(k, 2)) / (2.0 * h)
}

/// `|sum_k psi_k'(0) - alpha psi(0)|` with second-order one-sided derivatives.
pub fn vertex_flux_residual(field: &GraphField, coupling: VertexCoupling) -> f64 {
    let n = field.grid().n_edges();
    let flux: Complex64 = (0..n).map(|k| vertex_derivative(field, k)).sum();
    (flux - field.vertex() * coupling.alpha).norm()
}

/// Pointwise `H u - |u|^{2 mu} u + omega u` at edge nodes (vertex excluded).
pub fn stationarity_residual_field(field: &GraphField, coupling: VertexCoupling, omega: f64, mu: f64) -> GraphField {
    let hu = apply_hamiltonian(field, coupling);
    let mut r = hu
        .zip_map(field, |a, u| a - u * u.norm().powf(2.0 * mu) + u * omega)
        .expect("same grid");
    r.set_vertex(Complex64::new(0.0, 0.0));
    r
}

/// Max-norm of the stationary equation residual over the edge nodes.
pub fn stationarity_residual(field: &GraphField, coupling: VertexCoupling, omega: f64, mu: f64) -> f64 {
    stationarity_residual_field(field, coupling, omega, mu).max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn exp_field(grid: &StarGrid) -> GraphField {
        GraphField::from_real_fn(grid, |_, x| (-x).exp()).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = make_grid(3, 5.0, 64).unwrap();
        let z = apply_hamiltonian(&GraphField::zeros(&g), VertexCoupling::new(-1.0).unwrap());
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn interior_rows_are_second_order() {
        // -(e^{-x})'' = -e^{-x}; error on interior nodes away from the far end.
        let mut errs = Vec::new();
        for m in [200, 400, 800] {
            let g = make_grid(2, 10.0, m).unwrap();
            let hf = apply_hamiltonian(&exp_field(&g), VertexCoupling::kirchhoff());
            let err = (0..2)
                .flat_map(|k| (1..m / 2).map(move |i| (k, i)))
                .map(|(k, i)| (hf.at(k, i).re + (-g.x(i)).exp()).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
        }
    }

    #[test]
    fn matrix_agrees_with_apply() {
        let g = make_grid(3, 4.0, 32).unwrap();
        let c = VertexCoupling::new(-1.3).unwrap();
        let f = GraphField::from_real_fn(&g, |k, x| (-(x - 0.3 * k as f64).powi(2)).exp() + (-x * x).exp() - (-(0.3 * k as f64).powi(2)).exp()).unwrap();
        let a = hamiltonian_matrix(&g, c, &[]);
        let y = a.apply(&f.real_vector());
        let hf = apply_hamiltonian(&f, c);
        for (p, q) in y.iter().zip(hf.values()) {
            assert!((p - q.re).abs() < 1e-9 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn symmetric_in_lattice_inner_product() {
        let g = make_grid(4, 6.0, 48).unwrap();
        let c = VertexCoupling::new(0.7).unwrap();
        let f = GraphField::from_real_fn(&g, |k, x| (1.0 + k as f64 * x).cos() * (-x).exp() - (1.0f64).cos() + 1.0).unwrap();
        let p = GraphField::from_fn(&g, |k, x| Complex64::new((-x * x).exp(), (k as f64 * x).sin() * (-x).exp())).unwrap();
        let lhs = lattice_inner(&apply_hamiltonian(&f, c), &p);
        let rhs = lattice_inner(&f, &apply_hamiltonian(&p, c));
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn quadratic_form_is_dirichlet_sum_plus_vertex_term() {
        let g = make_grid(3, 3.0, 24).unwrap();
        let c = VertexCoupling::new(-2.0).unwrap();
        let f = GraphField::from_real_fn(&g, |k, x| (-(1.0 + k as f64) * x).exp() * (1.0 - x / 3.0)).unwrap();
        let q = lattice_inner(&f, &apply_hamiltonian(&f, c)).re;
        let h = g.spacing();
        let mut expected = c.alpha * f.vertex().norm_sqr();
        for k in 0..3 {
            let e = f.edge_with_vertex(k);
            for i in 0..g.points_per_edge() {
                expected += (e[i + 1] - e[i]).norm_sqr() / h;
            }
            expected += e[g.points_per_edge()].norm_sqr() / h;
        }
        assert!((q - expected).abs() < 1e-10 * expected.abs());
    }
}
