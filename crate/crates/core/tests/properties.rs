use num_complex::Complex64;
use proptest::prelude::*;

use star_nls::dynamics::{random_smooth_field, EvolutionConfig, Stepper};
use star_nls::functionals::{mass_with, Quadrature};
use star_nls::operator::lattice_inner;
use star_nls::spectral::vk_derivative;
use star_nls::stationary::{admissible_bump_counts, existence_threshold};
use star_nls::{apply_hamiltonian, build_state, energy, mass, StarGrid, StationarySpec, VertexCoupling};

fn sech_profile(a: f64, omega: f64, mu: f64, x: f64) -> f64 {
    ((mu + 1.0) * omega).powf(0.5 / mu) / (mu * omega.sqrt() * (x - a)).cosh().powf(1.0 / mu)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn explicit_states_satisfy_the_vertex_condition(
        alpha in -3.0f64..3.0,
        n in 3usize..7,
        mu in 0.3f64..3.0,
        excess in 0.05f64..4.0,
        pick in 0usize..8,
    ) {
        prop_assume!(alpha.abs() > 0.05);
        let counts = admissible_bump_counts(alpha, n).unwrap();
        let j = counts[pick % counts.len()];
        let floor = (alpha / (2.0 * j as f64 - n as f64)).powi(2);
        let omega = floor + excess;
        let spec = StationarySpec::delta(alpha, omega, mu, n, j).unwrap();
        let centers = spec.edge_centers();
        // d/dx sech^{1/mu}(mu sqrt(omega)(x - a)) at x = 0, by a centered difference
        let eps = 1e-6;
        let flux: f64 = centers.iter()
            .map(|&a| (sech_profile(a, omega, mu, eps) - sech_profile(a, omega, mu, -eps)) / (2.0 * eps))
            .sum();
        let value = sech_profile(centers[0], omega, mu, 0.0);
        for &a in &centers {
            prop_assert!((sech_profile(a, omega, mu, 0.0) - value).abs() < 1e-12 * value.max(1.0));
        }
        prop_assert!((flux - alpha * value).abs() < 1e-5 * (1.0 + value.abs()), "{flux} vs {}", alpha * value);
    }

    #[test]
    fn hamiltonian_is_symmetric_in_the_lattice_product(alpha in -4.0f64..4.0, s1 in 0u64..1000, s2 in 0u64..1000) {
        let grid = StarGrid::new(3, 6.0, 60).unwrap();
        let c = VertexCoupling::new(alpha).unwrap();
        let f = random_smooth_field(&grid, s1).unwrap();
        let g = random_smooth_field(&grid, s2).unwrap().scale(Complex64::new(0.3, -1.1));
        let left = lattice_inner(&apply_hamiltonian(&f, c), &g);
        let right = lattice_inner(&f, &apply_hamiltonian(&g, c));
        prop_assert!((left - right).norm() < 1e-9 * (1.0 + left.norm()));
    }

    #[test]
    fn split_step_conserves_lattice_mass(alpha in -3.0f64..3.0, mu in 0.5f64..2.5, seed in 0u64..1000) {
        let grid = StarGrid::new(3, 8.0, 80).unwrap();
        let c = VertexCoupling::new(alpha).unwrap();
        let psi = random_smooth_field(&grid, seed).unwrap().scale_real(0.5);
        let stepper = Stepper::new(&grid, c, mu, 1e-2, &EvolutionConfig::default()).unwrap();
        let mut next = psi.clone();
        for _ in 0..20 {
            next = stepper.step(&next).unwrap();
        }
        let (m0, m1) = (mass_with(&psi, Quadrature::Lattice), mass_with(&next, Quadrature::Lattice));
        prop_assert!((m0 - m1).abs() < 1e-11 * m0);
    }

    #[test]
    fn functionals_are_invariant_under_edge_permutation(seed in 0u64..1000, rot in 1usize..4) {
        let grid = StarGrid::new(4, 6.0, 60).unwrap();
        let f = random_smooth_field(&grid, seed).unwrap();
        let perm: Vec<usize> = (0..4).map(|k| (k + rot) % 4).collect();
        let g = f.permute_edges(&perm).unwrap();
        let c = VertexCoupling::new(-1.5).unwrap();
        prop_assert!((mass(&f) - mass(&g)).abs() < 1e-12 * mass(&f));
        prop_assert!((energy(&f, c, 1.0) - energy(&g, c, 1.0)).abs() < 1e-10 * (1.0 + energy(&f, c, 1.0).abs()));
    }

    #[test]
    fn vk_slope_is_positive_below_the_critical_power(alpha in -4.0f64..-0.1, f in 1.001f64..50.0, mu in 0.2f64..2.0, n in 3usize..6) {
        let omega = existence_threshold(alpha, n) * f;
        prop_assert!(vk_derivative(alpha, omega, mu, n).unwrap() > 0.0);
    }

    #[test]
    fn sampled_mass_matches_cubic_closed_form(alpha in -2.0f64..-0.2, excess in 0.2f64..3.0) {
        let omega = existence_threshold(alpha, 3) + excess;
        let spec = StationarySpec::ground(alpha, omega, 1.0, 3).unwrap();
        let grid = StarGrid::with_spacing(3, spec.suggested_length(), 0.01).unwrap();
        let m = mass(&build_state(&spec, &grid).unwrap());
        prop_assert!((m - (6.0 * omega.sqrt() + 2.0 * alpha)).abs() < 1e-5);
    }
}
