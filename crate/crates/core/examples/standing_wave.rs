//! Evolves the ground state and writes the observables and final field to
//! `target/standing_wave/`.

use star_nls::dynamics::{evolve_tracking, EvolutionConfig};
use star_nls::io::{fmt_float, write_field};
use star_nls::{build_state, StarGrid, StationarySpec};
use std::io::Write;

fn main() -> star_nls::Result<()> {
    let spec = StationarySpec::ground(-1.0, 1.0, 1.0, 3)?;
    let grid = StarGrid::with_spacing(3, spec.suggested_length(), 0.05)?;
    let psi = build_state(&spec, &grid)?;
    let config = EvolutionConfig { observables_stride: 100, ..EvolutionConfig::new(1e-3, 5.0) };
    let traj = evolve_tracking(&psi, spec.coupling(), spec.mu(), &config, Some(&psi))?;

    let out = std::path::Path::new("target/standing_wave");
    std::fs::create_dir_all(out)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(out.join("observables.csv"))?);
    writeln!(f, "t,mass,energy,vertex_re,vertex_im,deviation")?;
    for o in &traj.observables {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            fmt_float(o.t),
            fmt_float(o.mass),
            fmt_float(o.energy),
            fmt_float(o.vertex_re),
            fmt_float(o.vertex_im),
            fmt_float(o.deviation)
        )?;
    }
    write_field(out, "final", &traj.final_field, spec.coupling())?;
    println!("mass drift {:.2e}, max H1 deviation {:.2e}", traj.max_mass_drift(), traj.max_deviation());
    println!("wrote {}", out.display());
    Ok(())
}
