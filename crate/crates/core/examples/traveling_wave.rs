//! Sends a line soliton through the vertex of a 4-edge Kirchhoff star and
//! tracks the mismatch with the exact traveling solution.

use star_nls::dynamics::{traveling_wave_experiment, EvolutionConfig};
use star_nls::StarGrid;

fn main() -> star_nls::Result<()> {
    let grid = StarGrid::new(4, 20.0, 400)?;
    let config = EvolutionConfig { observables_stride: 1000, ..EvolutionConfig::new(5e-4, 8.0) };
    let report = traveling_wave_experiment(1.0, 1.0, 4, -4.0, 1.0, &grid, &config)?;
    for (t, m) in report.times.iter().zip(&report.mismatch) {
        println!("t = {t:5.2}  mismatch {m:.3e}");
    }
    println!("max mismatch {:.3e}", report.max_mismatch);
    Ok(())
}
