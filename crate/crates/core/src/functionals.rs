//! Mass, energy and H1 metric on a [`GraphField`].
//!
//! Two quadrature families are available:
//!
//! * [`Quadrature::Simpson`]: composite Simpson on each edge, derivatives by
//!   fourth-order finite differences at the nodes. Used to compare against closed forms.
//! * [`Quadrature::Lattice`]: the inner product in which the discrete
//!   Hamiltonian is self-adjoint (weights `N h / 2` at the vertex, `h`
//!   elsewhere) with the exact cell-wise Dirichlet sum for the kinetic term.
//!   Its functionals are exactly the ones whose gradients the time stepper and
//!   the minimizers use, and the lattice mass is what Crank-Nicolson conserves.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{GraphField, StarGrid, VertexCoupling};
use crate::operator::lattice_inner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    #[default]
    Simpson,
    Lattice,
}

fn simpson_weight(i: usize, m: usize) -> f64 {
    if i == 0 || i == m {
        1.0 / 3.0
    } else if i % 2 == 1 {
        4.0 / 3.0
    } else {
        2.0 / 3.0
    }
}

/// `sum_k int_0^L f(|psi_k(x)|) dx` for a pointwise integrand of the modulus.
fn integrate_modulus(field: &GraphField, quad: Quadrature, f: impl Fn(f64) -> f64) -> f64 {
    let grid = field.grid();
    let h = grid.spacing();
    let m = grid.points_per_edge();
    let n = grid.n_edges();
    match quad {
        Quadrature::Simpson => {
            let v0 = f(field.vertex().norm());
            let mut total = n as f64 * v0 * simpson_weight(0, m);
            for k in 0..n {
                for (i, z) in field.edge(k).iter().enumerate() {
                    total += simpson_weight(i + 1, m) * f(z.norm());
                }
            }
            total * h
        }
        Quadrature::Lattice => {
            let body: f64 = field.interior().iter().map(|z| f(z.norm())).sum();
            grid.vertex_weight() * f(field.vertex().norm()) + h * body
        }
    }
}

/// Fourth-order finite-difference derivative of one edge (samples include the
/// vertex): centered five-point stencil inside, one-sided five-point stencils
/// on the two nodes nearest each end.
fn edge_derivative(e: &[Complex64], h: f64) -> Vec<Complex64> {
    let m = e.len() - 1;
    let s = 1.0 / (12.0 * h);
    (0..=m)
        .map(|i| match i {
            0 => (e[0] * -25.0 + e[1] * 48.0 - e[2] * 36.0 + e[3] * 16.0 - e[4] * 3.0) * s,
            1 => (e[0] * -3.0 - e[1] * 10.0 + e[2] * 18.0 - e[3] * 6.0 + e[4]) * s,
            _ if i == m => (e[m] * 25.0 - e[m - 1] * 48.0 + e[m - 2] * 36.0 - e[m - 3] * 16.0 + e[m - 4] * 3.0) * s,
            _ if i == m - 1 => (e[m] * 3.0 + e[m - 1] * 10.0 - e[m - 2] * 18.0 + e[m - 3] * 6.0 - e[m - 4]) * s,
            _ => (e[i - 2] - e[i - 1] * 8.0 + e[i + 1] * 8.0 - e[i + 2]) * s,
        })
        .collect()
}

/// `sum_k int conj(f_k') g_k'` under the chosen quadrature.
fn derivative_inner(f: &GraphField, g: &GraphField, quad: Quadrature) -> Complex64 {
    let grid = f.grid();
    let h = grid.spacing();
    let m = grid.points_per_edge();
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..grid.n_edges() {
        let fe = f.edge_with_vertex(k);
        let ge = g.edge_with_vertex(k);
        match quad {
            Quadrature::Simpson => {
                let df = edge_derivative(&fe, h);
                let dg = edge_derivative(&ge, h);
                for i in 0..=m {
                    total += df[i].conj() * dg[i] * (simpson_weight(i, m) * h);
                }
            }
            Quadrature::Lattice => {
                let zero = Complex64::new(0.0, 0.0);
                for i in 0..=m {
                    let next_f = if i < m { fe[i + 1] } else { zero };
                    let next_g = if i < m { ge[i + 1] } else { zero };
                    total += (next_f - fe[i]).conj() * (next_g - ge[i]) / h;
                }
            }
        }
    }
    total
}

/// `||Psi||_2^2` by composite Simpson.
pub fn mass(field: &GraphField) -> f64 {
    mass_with(field, Quadrature::Simpson)
}

pub fn mass_with(field: &GraphField, quad: Quadrature) -> f64 {
    integrate_modulus(field, quad, |a| a * a)
}

/// `sum_k int |psi_k|^p`.
pub fn power_integral(field: &GraphField, p: f64, quad: Quadrature) -> f64 {
    integrate_modulus(field, quad, |a| a.powf(p))
}

/// `sum_k int |psi_k'|^2`.
pub fn kinetic(field: &GraphField, quad: Quadrature) -> f64 {
    derivative_inner(field, field, quad).re
}

/// `E = sum_k int (|psi'|^2/2 - |psi|^{2mu+2}/(2mu+2)) + alpha/2 |psi(0)|^2` by Simpson.
pub fn energy(field: &GraphField, coupling: VertexCoupling, mu: f64) -> f64 {
    energy_with(field, coupling, mu, Quadrature::Simpson)
}

pub fn energy_with(field: &GraphField, coupling: VertexCoupling, mu: f64, quad: Quadrature) -> f64 {
    let p = 2.0 * mu + 2.0;
    0.5 * kinetic(field, quad) - power_integral(field, p, quad) / p
        + 0.5 * coupling.alpha * field.vertex().norm_sqr()
}

/// Lattice H1 inner product `<f, g> = sum_cells conj(df) dg / h + sum w conj(f) g`.
pub fn h1_inner(f: &GraphField, g: &GraphField) -> Complex64 {
    derivative_inner(f, g, Quadrature::Lattice) + lattice_inner(f, g)
}

pub fn h1_norm(f: &GraphField) -> f64 {
    h1_inner(f, f).re.max(0.0).sqrt()
}

/// `min_theta ||f - e^{i theta} g||_{H1}`; the optimal phase is `arg <g, f>`.
pub fn h1_distance_mod_phase(f: &GraphField, g: &GraphField) -> Result<f64> {
    f.same_grid(g)?;
    let overlap = h1_inner(g, f);
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
    let diff = f.sub(&g.scale(phase))?;
    Ok(h1_norm(&diff))
}

/// `|<f, g>| / (||f|| ||g||)` in the lattice L2 inner product; 0 if either vanishes.
pub fn overlap(f: &GraphField, g: &GraphField) -> f64 {
    let nf = lattice_inner(f, f).re.sqrt();
    let ng = lattice_inner(g, g).re.sqrt();
    if nf == 0.0 || ng == 0.0 {
        return 0.0;
    }
    lattice_inner(f, g).norm() / (nf * ng)
}

/// Fraction of the lattice mass carried by each edge (vertex split evenly).
pub fn edge_mass_fractions(field: &GraphField) -> Vec<f64> {
    let grid: &StarGrid = field.grid();
    let h = grid.spacing();
    let n = grid.n_edges();
    let v = 0.5 * h * field.vertex().norm_sqr();
    let per: Vec<f64> = (0..n).map(|k| v + h * field.edge(k).iter().map(|z| z.norm_sqr()).sum::<f64>()).collect();
    let total: f64 = per.iter().sum();
    per.iter().map(|p| if total > 0.0 { p / total } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn sample(grid: &StarGrid) -> GraphField {
        GraphField::from_fn(grid, |k, x| {
            Complex64::new((-(x - k as f64).powi(2)).exp() - (-(k as f64).powi(2)).exp() + 1.0, 0.2 * x * (-x).exp())
                * (-0.3 * x).exp()
        })
        .unwrap()
    }

    #[test]
    fn zero_field_has_zero_functionals() {
        let g = make_grid(3, 5.0, 40).unwrap();
        let z = GraphField::zeros(&g);
        let c = VertexCoupling::new(-1.0).unwrap();
        assert_eq!(mass(&z), 0.0);
        assert_eq!(energy(&z, c, 1.0), 0.0);
        assert_eq!(energy_with(&z, c, 1.0, Quadrature::Lattice), 0.0);
    }

    #[test]
    fn simpson_integrates_exponential_accurately() {
        // int_0^20 e^{-2x} = (1 - e^{-40})/2 per edge
        let g = make_grid(3, 20.0, 400).unwrap();
        let f = GraphField::from_real_fn(&g, |_, x| (-x).exp()).unwrap();
        assert!((mass(&f) - 1.5).abs() < 2e-6);
    }

    #[test]
    fn homogeneity_of_each_term() {
        let g = make_grid(3, 6.0, 60).unwrap();
        let f = sample(&g);
        let c = Complex64::new(1.7, -0.4);
        let cf = f.scale(c);
        let mu = 1.5;
        let p = 2.0 * mu + 2.0;
        for q in [Quadrature::Simpson, Quadrature::Lattice] {
            let s = c.norm_sqr();
            assert!((mass_with(&cf, q) - s * mass_with(&f, q)).abs() < 1e-12 * s * mass_with(&f, q));
            assert!((kinetic(&cf, q) - s * kinetic(&f, q)).abs() < 1e-12 * s * kinetic(&f, q));
            let pi = power_integral(&f, p, q);
            assert!((power_integral(&cf, p, q) - c.norm().powf(p) * pi).abs() < 1e-12 * c.norm().powf(p) * pi);
        }
    }

    #[test]
    fn h1_distance_properties() {
        let g = make_grid(3, 6.0, 60).unwrap();
        let f = sample(&g);
        assert!(h1_distance_mod_phase(&f, &f).unwrap() < 1e-12);
        let rotated = f.scale(Complex64::from_polar(1.0, 2.3));
        assert!(h1_distance_mod_phase(&rotated, &f).unwrap() < 1e-12);
        let zero = GraphField::zeros(&g);
        assert!((h1_distance_mod_phase(&f, &zero).unwrap() - h1_norm(&f)).abs() < 1e-14);
        let other = make_grid(3, 6.0, 62).unwrap();
        assert!(h1_distance_mod_phase(&f, &GraphField::zeros(&other)).is_err());
    }

    #[test]
    fn phase_minimizer_beats_sampled_phases() {
        let g = make_grid(2, 5.0, 40).unwrap();
        let f = sample(&g);
        let p = GraphField::from_fn(&g, |_, x| Complex64::new((-x).exp(), (-2.0 * x).exp())).unwrap();
        let d = h1_distance_mod_phase(&f, &p).unwrap();
        for i in 0..64 {
            let th = i as f64 * std::f64::consts::TAU / 64.0;
            let dd = h1_norm(&f.sub(&p.scale(Complex64::from_polar(1.0, th))).unwrap());
            assert!(d <= dd + 1e-12);
        }
    }
}
