//! Builds every admissible delta-coupled stationary state on a 5-edge star
//! and compares quadrature mass/energy with the closed forms.

use star_nls::stationary::{admissible_bump_counts, cubic_energy_spectrum, cubic_mass};
use star_nls::{build_state, energy, mass, StarGrid, StationarySpec};

fn main() -> star_nls::Result<()> {
    let (alpha, omega, mu, n) = (-2.0, 5.0, 1.0, 5);
    println!("{:>2} {:>10} {:>12} {:>12} {:>12}", "j", "offset", "mass", "energy", "closed E");
    for j in admissible_bump_counts(alpha, n)? {
        let spec = StationarySpec::delta(alpha, omega, mu, n, j)?;
        let grid = StarGrid::with_spacing(n, spec.suggested_length(), 0.01)?;
        let psi = build_state(&spec, &grid)?;
        let offset = star_nls::stationary::bump_offset(&spec)?;
        println!(
            "{j:>2} {offset:>10.6} {:>12.8} {:>12.8} {:>12.8}",
            mass(&psi),
            energy(&psi, spec.coupling(), mu),
            cubic_energy_spectrum(n, omega, alpha, j)?
        );
    }
    println!("closed-form mass (all j): {:.8}", cubic_mass(n, omega, alpha)?);

    // a quintic ground state, for comparison
    let spec = StationarySpec::ground(alpha, omega, 2.0, n)?;
    let grid = StarGrid::with_spacing(n, spec.suggested_length(), 0.01)?;
    let psi = build_state(&spec, &grid)?;
    println!("mu = 2 ground state: vertex {:.6}, mass {:.6}", spec.vertex_amplitude(), mass(&psi));
    Ok(())
}
