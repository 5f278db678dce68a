//! Explicit stationary states `Psi(t, x) = e^{i omega t} Psi_omega(x)`.
//!
//! On every edge the profile is a piece of the line soliton
//! `phi(a; x) = [(mu+1) omega]^{1/(2mu)} sech^{1/mu}(mu sqrt(omega) (x - a))`.
//! Continuity forces `a_i = +-a`; an edge with `a_i > 0` carries a *bump*, one
//! with `a_i < 0` a *tail*. With `j` bumps the flux condition fixes
//!
//! ```text
//! a^j = artanh(alpha / ((2j - N) sqrt(omega))) / (mu sqrt(omega))
//! ```
//!
//! which needs `|alpha| < |2j - N| sqrt(omega)`. For `j = 0` this is the global
//! bound `omega > alpha^2 / N^2`; for excited states it is stronger.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GraphField, StarGrid, VertexCoupling};

/// Which explicit family a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateKind {
    /// `alpha != 0`, `bumps` edges with a bump, the rest with tails.
    Delta { bumps: usize },
    /// `alpha = 0`, odd `N`: half solitons glued at the vertex.
    KirchhoffOdd,
    /// `alpha = 0`, even `N`: tails `phi(-a)` on the first half, `phi(+a)` on the rest.
    KirchhoffEven { offset: f64 },
}

/// Parameters identifying one explicit stationary state. Constructed only
/// through validating constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarySpec {
    alpha: f64,
    omega: f64,
    mu: f64,
    n_edges: usize,
    kind: StateKind,
}

/// `[(mu+1) omega]^{1/(2mu)} sech^{1/mu}(mu sqrt(omega) (x - a))`.
pub fn soliton_profile(a: f64, omega: f64, mu: f64, x: f64) -> f64 {
    let amp = ((mu + 1.0) * omega).powf(0.5 / mu);
    let y = mu * omega.sqrt() * (x - a);
    amp * (1.0 / y.cosh()).powf(1.0 / mu)
}

/// `d/dx` of [`soliton_profile`]: `-sqrt(omega) tanh(mu sqrt(omega)(x - a)) phi`.
pub fn soliton_derivative(a: f64, omega: f64, mu: f64, x: f64) -> f64 {
    let y = mu * omega.sqrt() * (x - a);
    -omega.sqrt() * y.tanh() * soliton_profile(a, omega, mu, x)
}

/// `alpha^2 / N^2`: no bound state exists for `omega` at or below it.
pub fn existence_threshold(alpha: f64, n_edges: usize) -> f64 {
    (alpha / n_edges as f64).powi(2)
}

/// Bump counts allowed by the sign of `alpha` (more bumps than tails iff `alpha > 0`).
pub fn admissible_bump_counts(alpha: f64, n_edges: usize) -> Result<Vec<usize>> {
    if alpha == 0.0 {
        return Err(Error::ZeroAlpha);
    }
    if alpha > 0.0 {
        Ok((n_edges / 2 + 1..=n_edges).collect())
    } else {
        Ok((0..=(n_edges - 1) / 2).collect())
    }
}

/// Raw offset formula; `ratio = alpha / ((2j - N) sqrt(omega))` must lie in `(0, 1)`.
pub fn offset_for(alpha: f64, omega: f64, mu: f64, n_edges: usize, bumps: usize) -> Result<f64> {
    let excess = 2 * bumps as i64 - n_edges as i64;
    if excess == 0 {
        return Err(Error::DegenerateConfiguration);
    }
    let ratio = alpha / (excess as f64 * omega.sqrt());
    if !(ratio.abs() < 1.0) {
        return Err(Error::OffsetDomain {
            bumps,
            ratio: ratio.abs(),
            bound: (alpha / excess as f64).powi(2),
        });
    }
    Ok(ratio.atanh() / (mu * omega.sqrt()))
}

fn check_common(omega: f64, mu: f64, n_edges: usize) -> Result<()> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    if n_edges < 2 {
        return Err(Error::InvalidParameter(format!("n_edges must be >= 2, got {n_edges}")));
    }
    Ok(())
}

impl StationarySpec {
    /// State with `bumps` bumps for a non-zero delta coupling.
    pub fn delta(alpha: f64, omega: f64, mu: f64, n_edges: usize, bumps: usize) -> Result<Self> {
        check_common(omega, mu, n_edges)?;
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite, got {alpha}")));
        }
        if alpha == 0.0 {
            return Err(Error::ZeroAlpha);
        }
        let bound = existence_threshold(alpha, n_edges);
        if omega <= bound {
            return Err(Error::ExistenceBound { omega, bound });
        }
        if !admissible_bump_counts(alpha, n_edges)?.contains(&bumps) {
            return Err(Error::InadmissibleBumpCount { bumps, alpha, n_edges });
        }
        offset_for(alpha, omega, mu, n_edges, bumps)?;
        Ok(Self { alpha, omega, mu, n_edges, kind: StateKind::Delta { bumps } })
    }

    /// The all-tail state `j = 0` (the ground state for `alpha < 0`).
    pub fn ground(alpha: f64, omega: f64, mu: f64, n_edges: usize) -> Result<Self> {
        Self::delta(alpha, omega, mu, n_edges, 0)
    }

    pub fn kirchhoff_odd(omega: f64, mu: f64, n_edges: usize) -> Result<Self> {
        check_common(omega, mu, n_edges)?;
        if n_edges % 2 == 0 {
            return Err(Error::ParityMismatch(format!("kirchhoff_odd needs odd N, got {n_edges}")));
        }
        Ok(Self { alpha: 0.0, omega, mu, n_edges, kind: StateKind::KirchhoffOdd })
    }

    pub fn kirchhoff_even(omega: f64, mu: f64, n_edges: usize, offset: f64) -> Result<Self> {
        check_common(omega, mu, n_edges)?;
        if n_edges % 2 == 1 {
            return Err(Error::ParityMismatch(format!("kirchhoff_even needs even N, got {n_edges}")));
        }
        if !offset.is_finite() {
            return Err(Error::InvalidParameter(format!("offset must be finite, got {offset}")));
        }
        Ok(Self { alpha: 0.0, omega, mu, n_edges, kind: StateKind::KirchhoffEven { offset } })
    }

    /// Generic constructor from a kind; `alpha` must be 0 for the Kirchhoff kinds.
    pub fn new(alpha: f64, omega: f64, mu: f64, n_edges: usize, kind: StateKind) -> Result<Self> {
        match kind {
            StateKind::Delta { bumps } => Self::delta(alpha, omega, mu, n_edges, bumps),
            StateKind::KirchhoffOdd | StateKind::KirchhoffEven { .. } if alpha != 0.0 => {
                Err(Error::KirchhoffNeedsZeroAlpha(alpha))
            }
            StateKind::KirchhoffOdd => Self::kirchhoff_odd(omega, mu, n_edges),
            StateKind::KirchhoffEven { offset } => Self::kirchhoff_even(omega, mu, n_edges, offset),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn kind(&self) -> StateKind {
        self.kind
    }

    pub fn coupling(&self) -> VertexCoupling {
        VertexCoupling { alpha: self.alpha }
    }

    /// Signed soliton center `a_i` on each edge.
    pub fn edge_centers(&self) -> Vec<f64> {
        let n = self.n_edges;
        match self.kind {
            StateKind::Delta { bumps } => {
                let a = bump_offset(self).expect("validated at construction");
                (0..n).map(|k| if k < bumps { a } else { -a }).collect()
            }
            StateKind::KirchhoffOdd => vec![0.0; n],
            StateKind::KirchhoffEven { offset } => {
                (0..n).map(|k| if k < n / 2 { -offset } else { offset }).collect()
            }
        }
    }

    /// Profile value at the vertex.
    pub fn vertex_amplitude(&self) -> f64 {
        soliton_profile(self.edge_centers()[0], self.omega, self.mu, 0.0)
    }

    /// Edge length that puts the outermost profile below `~1e-6` of its peak.
    /// The profile decays like `e^{-sqrt(omega) x}` for every `mu`.
    pub fn suggested_length(&self) -> f64 {
        let reach = self.edge_centers().iter().fold(0.0f64, |acc, &a| acc.max(a));
        reach + 14.0 / self.omega.sqrt()
    }
}

/// `a^j` for a delta state.
pub fn bump_offset(spec: &StationarySpec) -> Result<f64> {
    match spec.kind {
        StateKind::Delta { bumps } => offset_for(spec.alpha, spec.omega, spec.mu, spec.n_edges, bumps),
        _ => Err(Error::ZeroAlpha),
    }
}

fn sample(spec: &StationarySpec, grid: &StarGrid) -> Result<GraphField> {
    if grid.n_edges() != spec.n_edges {
        return Err(Error::InvalidParameter(format!(
            "grid has {} edges, state has {}",
            grid.n_edges(),
            spec.n_edges
        )));
    }
    let centers = spec.edge_centers();
    GraphField::from_real_fn(grid, |k, x| soliton_profile(centers[k], spec.omega, spec.mu, x))
}

/// Samples a delta-coupling state `Psi^j_omega` (Kirchhoff specs are forwarded
/// to [`build_kirchhoff`]).
pub fn build_state(spec: &StationarySpec, grid: &StarGrid) -> Result<GraphField> {
    match spec.kind {
        StateKind::Delta { .. } => sample(spec, grid),
        _ => build_kirchhoff(spec, grid),
    }
}

/// Samples a Kirchhoff state.
pub fn build_kirchhoff(spec: &StationarySpec, grid: &StarGrid) -> Result<GraphField> {
    match spec.kind {
        StateKind::KirchhoffOdd | StateKind::KirchhoffEven { .. } => sample(spec, grid),
        StateKind::Delta { .. } => Err(Error::ParityMismatch("not a Kirchhoff state".into())),
    }
}

/// Cubic (`mu = 1`) mass `2 N sqrt(omega) + 2 alpha`, the same for every `j`.
pub fn cubic_mass(n_edges: usize, omega: f64, alpha: f64) -> Result<f64> {
    let bound = existence_threshold(alpha, n_edges);
    if !(omega > bound) {
        return Err(Error::ExistenceBound { omega, bound });
    }
    Ok(2.0 * n_edges as f64 * omega.sqrt() + 2.0 * alpha)
}

/// Cubic energy `-(N/3) omega^{3/2} - alpha^3 / (3 (2j - N)^2)`.
pub fn cubic_energy_spectrum(n_edges: usize, omega: f64, alpha: f64, bumps: usize) -> Result<f64> {
    if !admissible_bump_counts(alpha, n_edges)?.contains(&bumps) {
        return Err(Error::InadmissibleBumpCount { bumps, alpha, n_edges });
    }
    let bound = existence_threshold(alpha, n_edges);
    if !(omega > bound) {
        return Err(Error::ExistenceBound { omega, bound });
    }
    let excess = (2 * bumps as i64 - n_edges as i64) as f64;
    let n = n_edges as f64;
    Ok(-(n / 3.0) * omega.powf(1.5) - alpha.powi(3) / (3.0 * excess * excess))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::operator::{stationarity_residual, vertex_flux_residual};

    #[test]
    fn profile_values() {
        assert!((soliton_profile(0.0, 1.0, 1.0, 0.0) - 2f64.sqrt()).abs() < 1e-15);
        let a = 0.5 * 2f64.ln();
        assert!((soliton_profile(a, 1.0, 1.0, 0.0) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn profile_solves_the_edge_equation() {
        // -phi'' - phi^{2mu+1} + omega phi = 0 by a centered second difference
        for &(a, omega, mu) in &[(0.3, 1.0, 1.0), (-1.0, 2.5, 0.5), (1.2, 0.7, 2.0)] {
            let mut prev = f64::NAN;
            for h in [1e-2, 5e-3] {
                let mut worst: f64 = 0.0;
                for i in 0..200 {
                    let x = i as f64 * 0.03;
                    let p = |x| soliton_profile(a, omega, mu, x);
                    let d2 = (p(x + h) - 2.0 * p(x) + p(x - h)) / (h * h);
                    worst = worst.max((-d2 - p(x).powf(2.0 * mu + 1.0) + omega * p(x)).abs());
                }
                if prev.is_finite() {
                    assert!((prev / worst - 4.0).abs() < 0.2, "{prev} {worst}");
                }
                prev = worst;
            }
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let (a, omega, mu) = (0.4, 1.7, 1.5);
        for i in 0..20 {
            let x = 0.25 * i as f64;
            let h = 1e-5;
            let fd = (soliton_profile(a, omega, mu, x + h) - soliton_profile(a, omega, mu, x - h)) / (2.0 * h);
            assert!((fd - soliton_derivative(a, omega, mu, x)).abs() < 1e-8);
        }
    }

    #[test]
    fn bump_counts() {
        assert_eq!(admissible_bump_counts(-1.0, 3).unwrap(), vec![0, 1]);
        assert_eq!(admissible_bump_counts(1.0, 3).unwrap(), vec![2, 3]);
        assert_eq!(admissible_bump_counts(-1.0, 4).unwrap(), vec![0, 1]);
        assert_eq!(admissible_bump_counts(1.0, 4).unwrap(), vec![3, 4]);
        assert_eq!(admissible_bump_counts(0.0, 3), Err(Error::ZeroAlpha));
    }

    #[test]
    fn offsets() {
        let s = StationarySpec::delta(-1.0, 1.0, 1.0, 3, 0).unwrap();
        assert!((bump_offset(&s).unwrap() - 0.5 * 2f64.ln()).abs() < 1e-15);
        let s = StationarySpec::delta(2.0, 4.0, 1.0, 3, 3).unwrap();
        assert!((bump_offset(&s).unwrap() - 0.5 * (1.0f64 / 3.0).atanh()).abs() < 1e-15);
        // j = 1 at omega = alpha^2 sits on the artanh boundary
        assert!(matches!(StationarySpec::delta(-1.0, 1.0, 1.0, 3, 1), Err(Error::OffsetDomain { .. })));
        assert!(matches!(offset_for(1.0, 1.0, 1.0, 4, 2), Err(Error::DegenerateConfiguration)));
    }

    #[test]
    fn constructor_rejections() {
        assert!(matches!(StationarySpec::delta(-1.0, 0.1, 1.0, 3, 0), Err(Error::ExistenceBound { .. })));
        assert!(matches!(StationarySpec::delta(-1.0, 1.0 / 9.0, 1.0, 3, 0), Err(Error::ExistenceBound { .. })));
        assert!(matches!(StationarySpec::delta(-1.0, 1.0, 1.0, 3, 2), Err(Error::InadmissibleBumpCount { .. })));
        assert!(matches!(StationarySpec::delta(0.0, 1.0, 1.0, 3, 0), Err(Error::ZeroAlpha)));
        assert!(matches!(StationarySpec::kirchhoff_odd(1.0, 1.0, 4), Err(Error::ParityMismatch(_))));
        assert!(matches!(StationarySpec::kirchhoff_even(1.0, 1.0, 3, 0.0), Err(Error::ParityMismatch(_))));
        assert!(matches!(
            StationarySpec::new(1.0, 1.0, 1.0, 3, StateKind::KirchhoffOdd),
            Err(Error::KirchhoffNeedsZeroAlpha(_))
        ));
    }

    #[test]
    fn ground_state_vertex_and_residuals() {
        let s = StationarySpec::ground(-1.0, 1.0, 1.0, 3).unwrap();
        let g = make_grid(3, 20.0, 400).unwrap();
        let psi = build_state(&s, &g).unwrap();
        assert!((psi.vertex().re - 4.0 / 3.0).abs() < 1e-12);
        assert!(psi.max_imag() == 0.0);
        let c = s.coupling();
        let flux = vertex_flux_residual(&psi, c);
        let res = stationarity_residual(&psi, c, 1.0, 1.0);
        let fine = build_state(&s, &g.refined()).unwrap();
        let flux_f = vertex_flux_residual(&fine, c);
        let res_f = stationarity_residual(&fine, c, 1.0, 1.0);
        assert!((flux / flux_f - 4.0).abs() < 0.4, "{flux} {flux_f}");
        assert!((res / res_f - 4.0).abs() < 0.4, "{res} {res_f}");
    }

    #[test]
    fn kirchhoff_states() {
        let g = make_grid(3, 20.0, 400).unwrap();
        let s = StationarySpec::kirchhoff_odd(1.0, 1.0, 3).unwrap();
        let psi = build_kirchhoff(&s, &g).unwrap();
        assert!((psi.vertex().re - 2f64.sqrt()).abs() < 1e-15);
        assert!(build_kirchhoff(&StationarySpec::ground(-1.0, 1.0, 1.0, 3).unwrap(), &g).is_err());

        let g4 = make_grid(4, 20.0, 400).unwrap();
        let sym = build_kirchhoff(&StationarySpec::kirchhoff_even(1.0, 1.0, 4, 0.0).unwrap(), &g4).unwrap();
        let odd_like = GraphField::from_real_fn(&g4, |_, x| soliton_profile(0.0, 1.0, 1.0, x)).unwrap();
        assert_eq!(sym, odd_like);
        // all edges identical, so the discrete flux cancels exactly
        let flux: num_complex::Complex64 =
            (0..4).map(|k| crate::operator::vertex_derivative(&sym, k) - crate::operator::vertex_derivative(&sym, 0)).sum();
        assert_eq!(flux.norm(), 0.0);

        let s = StationarySpec::kirchhoff_even(1.0, 1.0, 4, 1.0).unwrap();
        let coarse = build_kirchhoff(&s, &g4).unwrap();
        let fine = build_kirchhoff(&s, &g4.refined()).unwrap();
        let c = VertexCoupling::kirchhoff();
        // +-a symmetry cancels the h^2 term of the one-sided stencil, so the ratio is ~8
        let r = vertex_flux_residual(&coarse, c) / vertex_flux_residual(&fine, c);
        assert!(r > 3.6, "{r}");
        let r = stationarity_residual(&coarse, c, 1.0, 1.0) / stationarity_residual(&fine, c, 1.0, 1.0);
        assert!((r - 4.0).abs() < 0.4, "{r}");
    }

    #[test]
    fn cubic_closed_forms() {
        assert!((cubic_mass(3, 1.0, -1.0).unwrap() - 4.0).abs() < 1e-15);
        assert!((cubic_mass(3, 1.0, 0.0).unwrap() - 6.0).abs() < 1e-15);
        assert!((cubic_mass(2, 4.0, 0.0).unwrap() - 8.0).abs() < 1e-15);
        assert!(cubic_mass(3, 0.1, -1.0).is_err());
        let e0 = cubic_energy_spectrum(3, 1.0, -1.0, 0).unwrap();
        let e1 = cubic_energy_spectrum(3, 1.0, -1.0, 1).unwrap();
        assert!((e0 + 26.0 / 27.0).abs() < 1e-15);
        assert!((e1 + 2.0 / 3.0).abs() < 1e-15);
        assert!(e0 < e1);
        assert!(cubic_energy_spectrum(3, 1.0, -1.0, 2).is_err());
    }

    #[test]
    fn line_soliton_mass_by_quadrature() {
        // int_R 2 omega sech^2(sqrt(omega) x) dx = 4 sqrt(omega) = 8 at omega = 4
        let omega: f64 = 4.0;
        let n = 200_000;
        let (lo, hi) = (-15.0, 15.0);
        let dx = (hi - lo) / n as f64;
        let total: f64 = (0..n)
            .map(|i| {
                let x = lo + (i as f64 + 0.5) * dx;
                2.0 * omega / (omega.sqrt() * x).cosh().powi(2)
            })
            .sum::<f64>()
            * dx;
        assert!((total - cubic_mass(2, omega, 0.0).unwrap()).abs() < 1e-6);
    }
}
