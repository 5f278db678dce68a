//! Inertia of the linearization at the ground state, with a mesh sweep
//! showing the translation-free kernel of L_plus closing like h^2.

use star_nls::spectral::{assemble_linearization, is_discrete_kernel, lowest_eigenpairs, OperatorLabel};
use star_nls::{build_state, StarGrid, StationarySpec};

fn main() -> star_nls::Result<()> {
    let spec = StationarySpec::ground(-5.0, 4.0, 1.0, 3)?;
    for h in [0.04, 0.02, 0.01] {
        let grid = StarGrid::with_spacing(3, 7.0, h)?;
        let psi = build_state(&spec, &grid)?;
        let lp = assemble_linearization(&psi, spec.omega(), spec.mu(), spec.coupling(), OperatorLabel::Lplus)?;
        let lm = assemble_linearization(&psi, spec.omega(), spec.mu(), spec.coupling(), OperatorLabel::Lminus)?;
        let rp = lowest_eigenpairs(&lp, 2)?;
        let rm = lowest_eigenpairs(&lm, 2)?;
        let l0 = rp.lowest_eigenvalues[0];
        println!(
            "h={h:<5} L+ lowest {l0:+.3e} (discrete zero: {}, overlap {:.8})  L- negative {}  <L- psi,psi> {:.4}",
            is_discrete_kernel(l0, &grid),
            rp.kernel_candidate_overlap,
            rm.negative_count,
            lm.quadratic_form(&psi)
        );
    }
    Ok(())
}
