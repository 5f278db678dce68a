//! Action functional, natural (Nehari) constraint and the two minimization
//! problems.
//!
//! `S_omega = E + omega/2 ||Psi||^2` and `I_omega = <S_omega'(Psi), Psi>`
//! vanish together on every stationary state. The minimizers descend the
//! lattice versions of these functionals, whose gradients are exactly
//! `H u + omega u - |u|^{2mu} u`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arrow::ArrowFactor;
use crate::error::{Error, Result};
use crate::functionals::{energy_with, kinetic, mass_with, power_integral, Quadrature};
use crate::grid::{GraphField, StarGrid, VertexCoupling};
use crate::operator::{apply_hamiltonian, hamiltonian_matrix, lattice_inner};
use crate::stationary::{existence_threshold, soliton_profile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizationOptions {
    pub max_iterations: usize,
    /// Initial line-search step; accepted steps grow up to 4x this.
    pub step_size: f64,
    /// Stop when the gradient norm falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for MinimizationOptions {
    fn default() -> Self {
        Self { max_iterations: 5000, step_size: 1.0, tolerance: 1e-8, seed: 1 }
    }
}

impl MinimizationOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) || !(self.step_size > 0.0) {
            return Err(Error::InvalidParameter("tolerance and step_size must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the iterate log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Action (natural-constraint runs) or energy (fixed-mass runs).
    pub value: f64,
    pub grad_norm: f64,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizationOutcome {
    pub field: GraphField,
    pub converged: bool,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
    /// Lagrange multiplier of the fixed-mass problem; `omega` itself for the
    /// natural-constraint problem.
    pub omega: f64,
}

impl MinimizationOutcome {
    pub fn require_converged(self) -> Result<GraphField> {
        if self.converged {
            Ok(self.field)
        } else {
            let residual = self.log.last().map_or(f64::NAN, |r| r.grad_norm);
            Err(Error::NonConvergence { iterations: self.iterations, residual })
        }
    }
}

/// `E + omega/2 ||Psi||^2` by Simpson.
pub fn action(field: &GraphField, omega: f64, coupling: VertexCoupling, mu: f64) -> f64 {
    action_with(field, omega, coupling, mu, Quadrature::Simpson)
}

pub fn action_with(field: &GraphField, omega: f64, coupling: VertexCoupling, mu: f64, quad: Quadrature) -> f64 {
    energy_with(field, coupling, mu, quad) + 0.5 * omega * mass_with(field, quad)
}

/// `||Psi'||^2 + omega ||Psi||^2 + alpha |psi(0)|^2`.
fn quadratic_part(field: &GraphField, omega: f64, coupling: VertexCoupling, quad: Quadrature) -> f64 {
    kinetic(field, quad) + omega * mass_with(field, quad) + coupling.alpha * field.vertex().norm_sqr()
}

/// `I_omega` by Simpson.
pub fn nehari(field: &GraphField, omega: f64, coupling: VertexCoupling, mu: f64) -> f64 {
    nehari_with(field, omega, coupling, mu, Quadrature::Simpson)
}

pub fn nehari_with(field: &GraphField, omega: f64, coupling: VertexCoupling, mu: f64, quad: Quadrature) -> f64 {
    quadratic_part(field, omega, coupling, quad) - power_integral(field, 2.0 * mu + 2.0, quad)
}

/// Lattice gradient `H u + omega u - |u|^{2mu} u` of the lattice action.
pub fn action_gradient(field: &GraphField, omega: f64, coupling: VertexCoupling, mu: f64) -> GraphField {
    let hu = apply_hamiltonian(field, coupling);
    hu.zip_map(field, |a, u| a + u * (omega - u.norm().powf(2.0 * mu)))
        .expect("same grid")
}

/// `lambda Psi` with `lambda^{2mu} = Q / P` so that the lattice `I_omega` vanishes.
pub fn project_to_nehari(field: &GraphField, omega: f64, coupling: VertexCoupling, mu: f64) -> Result<GraphField> {
    project_to_nehari_with(field, omega, coupling, mu, Quadrature::Lattice)
}

pub fn project_to_nehari_with(
    field: &GraphField,
    omega: f64,
    coupling: VertexCoupling,
    mu: f64,
    quad: Quadrature,
) -> Result<GraphField> {
    let q = quadratic_part(field, omega, coupling, quad);
    let p = power_integral(field, 2.0 * mu + 2.0, quad);
    if !(q > 0.0) || !(p > 0.0) {
        return Err(Error::NonPositiveQuadraticForm(q));
    }
    Ok(field.scale_real((q / p).powf(0.5 / mu)))
}

/// Random positive smooth field: a shared vertex Gaussian and a few
/// edge-local Gaussians.
pub fn random_positive_field(grid: &StarGrid, seed: u64) -> Result<GraphField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = grid.edge_length().min(6.0);
    let shared = rng.gen_range(0.5..1.5);
    let width = rng.gen_range(0.5..2.0);
    let bumps: Vec<Vec<(f64, f64)>> = (0..grid.n_edges())
        .map(|_| (0..2).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.5..reach))).collect())
        .collect();
    GraphField::from_real_fn(grid, |k, x| {
        let local: f64 = bumps[k].iter().map(|(c, x0)| c * (-(x - x0).powi(2)).exp()).sum();
        shared * (-(x / width).powi(2)).exp() + local * -(-x * x).exp_m1()
    })
}

fn preconditioner(grid: &StarGrid, coupling: VertexCoupling, shift: f64) -> Result<ArrowFactor<f64>> {
    let potential = vec![shift; grid.dimension()];
    hamiltonian_matrix(grid, coupling, &potential).factor()
}

fn precondition(p: &ArrowFactor<f64>, field: &GraphField) -> GraphField {
    let v = field.to_vector();
    let re = p.solve(&v.iter().map(|z| z.re).collect::<Vec<_>>());
    let im = p.solve(&v.iter().map(|z| z.im).collect::<Vec<_>>());
    GraphField::from_vector(field.grid(), re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect())
        .expect("dimension preserved")
}

/// Lowest eigenvalue bound of `H_alpha` used to pick a positive shift.
fn hamiltonian_floor(grid: &StarGrid, coupling: VertexCoupling) -> f64 {
    let h = hamiltonian_matrix(grid, coupling, &[]);
    let (mut lo, mut hi) = (h.gershgorin().0, 0.0f64);
    if h.count_below(0.0) == 0 {
        return 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if h.count_below(mid) > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Preconditioned projected-gradient descent of the lattice action on the
/// natural constraint, from a seeded random positive field.
pub fn minimize_action_on_nehari(
    omega: f64,
    coupling: VertexCoupling,
    mu: f64,
    grid: &StarGrid,
    opts: &MinimizationOptions,
) -> Result<MinimizationOutcome> {
    let initial = random_positive_field(grid, opts.seed)?;
    minimize_action_from(&initial, omega, coupling, mu, opts)
}

/// [`minimize_action_on_nehari`] from a given starting field.
pub fn minimize_action_from(
    initial: &GraphField,
    omega: f64,
    coupling: VertexCoupling,
    mu: f64,
    opts: &MinimizationOptions,
) -> Result<MinimizationOutcome> {
    opts.validate()?;
    let grid = *initial.grid();
    let alpha = coupling.alpha;
    if alpha > 0.0 {
        return Err(Error::InvalidParameter(format!("action minimization needs alpha <= 0, got {alpha}")));
    }
    let bound = existence_threshold(alpha, grid.n_edges());
    if !(omega > bound) {
        return Err(Error::ExistenceBound { omega, bound });
    }
    if alpha == 0.0 {
        log::warn!("alpha = 0: the infimum is not attained on the infinite star; expect concentration on one edge");
    }
    let shift = omega.max(1e-3 - hamiltonian_floor(&grid, coupling));
    let pre = preconditioner(&grid, coupling, shift)?;
    let lattice_action = |f: &GraphField| action_with(f, omega, coupling, mu, Quadrature::Lattice);

    let mut u = project_to_nehari(initial, omega, coupling, mu)?;
    let mut value = lattice_action(&u);
    let mut tau = opts.step_size;
    let mut log = Vec::new();
    let mut converged = false;
    let mut iteration = 0;
    while iteration < opts.max_iterations {
        let grad = action_gradient(&u, omega, coupling, mu);
        let dir = precondition(&pre, &grad);
        let grad_norm = lattice_inner(&grad, &dir).re.max(0.0).sqrt();
        log.push(IterationRecord { iteration, value, grad_norm, mass: mass_with(&u, Quadrature::Lattice) });
        if grad_norm < opts.tolerance {
            converged = true;
            break;
        }
        let mut accepted = false;
        while tau > 1e-14 {
            let trial = project_to_nehari(&u.axpy(-tau, &dir)?, omega, coupling, mu);
            if let Ok(trial) = trial {
                let v = lattice_action(&trial);
                if v < value {
                    u = trial;
                    value = v;
                    accepted = true;
                    break;
                }
            }
            tau *= 0.5;
        }
        iteration += 1;
        if !accepted {
            // no descent possible at machine precision
            converged = grad_norm < 1e3 * opts.tolerance;
            break;
        }
        tau = (tau * 1.5).min(4.0 * opts.step_size);
    }
    if !converged {
        log::warn!("action minimization stopped after {iteration} iterations without reaching the tolerance");
    }
    Ok(MinimizationOutcome { field: u, converged, iterations: iteration, log, omega })
}

fn rescale_to_mass(field: &GraphField, target: f64) -> Result<GraphField> {
    let m = mass_with(field, Quadrature::Lattice);
    if !(m > 0.0) {
        return Err(Error::InvalidParameter("cannot normalize a zero field".into()));
    }
    Ok(field.scale_real((target / m).sqrt()))
}

/// Normalized gradient (imaginary-time) flow for the energy at fixed lattice
/// mass. Each step moves along `-(H + s)^{-1} r`, where
/// `r = H u - |u|^{2mu} u + lambda u` and `lambda` is the Rayleigh multiplier,
/// and then renormalizes the mass. The step is halved whenever the lattice energy
/// would increase, so its fixed points are exactly the constrained critical points.
pub fn minimize_energy_fixed_mass(
    target_mass: f64,
    coupling: VertexCoupling,
    mu: f64,
    grid: &StarGrid,
    opts: &MinimizationOptions,
) -> Result<MinimizationOutcome> {
    opts.validate()?;
    if !(target_mass > 0.0) {
        return Err(Error::InvalidParameter(format!("target mass must be positive, got {target_mass}")));
    }
    if mu >= 2.0 {
        log::warn!("mu = {mu} >= 2: the energy at fixed mass may be unbounded below");
    }
    let shift = 1.0 - hamiltonian_floor(grid, coupling).min(0.0);
    let pre = preconditioner(grid, coupling, shift)?;
    let energy = |f: &GraphField| energy_with(f, coupling, mu, Quadrature::Lattice);

    let mut u = rescale_to_mass(&random_positive_field(grid, opts.seed)?, target_mass)?;
    let mut value = energy(&u);
    let mut tau = opts.step_size;
    let mut log = Vec::new();
    let mut converged = false;
    let mut iteration = 0;
    let mut omega = f64::NAN;
    while iteration < opts.max_iterations {
        let hu = apply_hamiltonian(&u, coupling);
        let nl = hu.zip_map(&u, |a, z| a - z * z.norm().powf(2.0 * mu))?;
        omega = -lattice_inner(&u, &nl).re / lattice_inner(&u, &u).re;
        let residual = nl.axpy(omega, &u)?;
        let dir = precondition(&pre, &residual);
        let grad_norm = lattice_inner(&residual, &dir).re.max(0.0).sqrt();
        log.push(IterationRecord { iteration, value, grad_norm, mass: mass_with(&u, Quadrature::Lattice) });
        if grad_norm < opts.tolerance {
            converged = true;
            break;
        }
        let mut accepted = false;
        while tau > 1e-14 {
            let next = rescale_to_mass(&u.axpy(-tau, &dir)?, target_mass)?;
            let e = energy(&next);
            if e < value {
                u = next;
                value = e;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        iteration += 1;
        if !accepted {
            converged = grad_norm < 1e3 * opts.tolerance;
            break;
        }
        tau = (tau * 1.5).min(4.0 * opts.step_size);
    }
    if !converged {
        log::warn!("fixed-mass flow stopped after {iteration} iterations without reaching the tolerance");
    }
    Ok(MinimizationOutcome { field: u, converged, iterations: iteration, log, omega })
}

/// Line soliton centered at `center` on edge 0; the other edges carry the
/// vertex value tapered linearly to zero over 10 nodes.
pub fn one_edge_trial(omega: f64, mu: f64, center: f64, grid: &StarGrid) -> Result<GraphField> {
    if !(omega > 0.0 && mu > 0.0) {
        return Err(Error::InvalidParameter("omega and mu must be positive".into()));
    }
    let margin = 5.0 / omega.sqrt();
    if !(center >= margin && center + margin <= grid.edge_length()) {
        return Err(Error::BoundaryProximity(format!(
            "center {center} must stay {margin:.3} away from the vertex and from x = {}",
            grid.edge_length()
        )));
    }
    let v0 = soliton_profile(center, omega, mu, 0.0);
    let taper = 10usize.min(grid.points_per_edge());
    let m = grid.points_per_edge();
    let mut interior = vec![Complex64::new(0.0, 0.0); grid.n_edges() * m];
    for i in 0..m {
        interior[i] = Complex64::new(soliton_profile(center, omega, mu, grid.x(i + 1)), 0.0);
    }
    for k in 1..grid.n_edges() {
        for i in 0..taper {
            interior[k * m + i] = Complex64::new(v0 * (1.0 - (i + 1) as f64 / taper as f64), 0.0);
        }
    }
    let field = GraphField::from_parts(grid, Complex64::new(v0, 0.0), interior)?;
    Ok(field)
}
