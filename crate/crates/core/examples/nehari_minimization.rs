//! Minimizes the action on the natural constraint and the energy at fixed
//! mass, and compares both minimizers with the explicit ground state.

use star_nls::variational::{minimize_action_on_nehari, minimize_energy_fixed_mass, MinimizationOptions};
use star_nls::{build_state, h1_distance_mod_phase, StarGrid, StationarySpec, VertexCoupling};

fn main() -> star_nls::Result<()> {
    let (alpha, omega, mu, n) = (-5.0, 4.0, 1.0, 3);
    let grid = StarGrid::with_spacing(n, 7.0, 0.02)?;
    let coupling = VertexCoupling::new(alpha)?;
    let ground = build_state(&StationarySpec::ground(alpha, omega, mu, n)?, &grid)?;

    for seed in 1..=3 {
        let opts = MinimizationOptions { seed, ..Default::default() };
        let out = minimize_action_on_nehari(omega, coupling, mu, &grid, &opts)?;
        println!(
            "nehari seed {seed}: {} iterations, H1 distance to ground {:.3e}",
            out.iterations,
            h1_distance_mod_phase(&out.field, &ground)?
        );
    }

    let out = minimize_energy_fixed_mass(2.0, coupling, mu, &grid, &MinimizationOptions::default())?;
    println!(
        "fixed mass 2: omega = {:.6}, {} iterations, H1 distance {:.3e}",
        out.omega,
        out.iterations,
        h1_distance_mod_phase(&out.field, &ground)?
    );
    Ok(())
}
