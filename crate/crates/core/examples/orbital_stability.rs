//! Perturbs the ground state by 1% and follows the distance to its orbit.

use star_nls::dynamics::{orbital_stability_experiment, EvolutionConfig};
use star_nls::{build_state, StarGrid, StationarySpec};

fn main() -> star_nls::Result<()> {
    let spec = StationarySpec::ground(-5.0, 4.0, 1.0, 3)?;
    let grid = StarGrid::with_spacing(3, spec.suggested_length() + 3.0, 0.02)?;
    let psi = build_state(&spec, &grid)?;
    let config = EvolutionConfig { observables_stride: 1000, ..EvolutionConfig::new(1e-3, 20.0) };
    for seed in [1, 2] {
        let report = orbital_stability_experiment(&psi, 0.01, spec.coupling(), spec.mu(), &config, seed)?;
        println!(
            "seed {seed}: initial {:.3e}, max {:.3e}, amplification {:.2}",
            report.initial_deviation,
            report.max_deviation,
            report.amplification()
        );
    }
    Ok(())
}
