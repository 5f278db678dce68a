//! Time integration of `i d/dt Psi = H_alpha Psi - |Psi|^{2mu} Psi`.
//!
//! The default scheme is Strang splitting: half a step of the exact nonlinear
//! phase rotation `psi <- e^{i |psi|^{2mu} dt/2} psi`, one Crank-Nicolson step
//! of the linear flow with the vertex-coupled matrix, another half nonlinear
//! step. Both substeps preserve the lattice mass exactly.
//!
//! The cross-check scheme is a fully implicit Crank-Nicolson step whose
//! nonlinear term is the conservative difference quotient
//! `(F(|u|^2) - F(|v|^2)) / (|u|^2 - |v|^2) (u + v)/2`, `F(s) = s^{mu+1}/(mu+1)`,
//! solved by fixed-point iteration. It conserves the lattice mass and energy.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arrow::{ArrowFactor, ArrowMatrix};
use crate::error::{Error, Result};
use crate::functionals::{energy_with, h1_distance_mod_phase, h1_norm, mass_with, Quadrature};
use crate::grid::{GraphField, StarGrid, VertexCoupling};
use crate::operator::hamiltonian_matrix;
use crate::stationary::soliton_profile;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    StrangSplitting,
    CrankNicolsonFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    /// Observables are recorded every `observables_stride` steps (and at the end).
    pub observables_stride: usize,
    /// Fixed-point tolerance of the implicit scheme.
    pub linear_solve_tolerance: f64,
    /// Snapshot every this many steps; 0 disables snapshots.
    pub snapshot_stride: usize,
    /// Drop the nonlinear term.
    pub linear_only: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 1.0,
            scheme: Scheme::StrangSplitting,
            observables_stride: 10,
            linear_solve_tolerance: 1e-13,
            snapshot_stride: 0,
            linear_only: false,
        }
    }
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self { dt, t_final, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_final = {} must be >= dt", self.t_final)));
        }
        if self.observables_stride == 0 {
            return Err(Error::InvalidParameter("observables_stride must be >= 1".into()));
        }
        if !(self.linear_solve_tolerance > 0.0) {
            return Err(Error::InvalidParameter("linear_solve_tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps, `round(t_final / dt)`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// One step of the chosen scheme with prefactored Crank-Nicolson matrices.
/// `dt` may be negative (backward integration).
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: StarGrid,
    mu: f64,
    dt: f64,
    scheme: Scheme,
    linear_only: bool,
    tolerance: f64,
    implicit: ArrowFactor<Complex64>,
    explicit: ArrowMatrix<Complex64>,
}

impl Stepper {
    pub fn new(grid: &StarGrid, coupling: VertexCoupling, mu: f64, dt: f64, config: &EvolutionConfig) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if !(dt != 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be non-zero, got {dt}")));
        }
        let h = hamiltonian_matrix(grid, coupling, &[]);
        let one = Complex64::new(1.0, 0.0);
        let half = 0.5 * dt;
        let implicit = h.map(|t| I * half * t, |d| d + one).factor()?;
        let explicit = h.map(|t| -I * half * t, |d| d + one);
        Ok(Self {
            grid: *grid,
            mu,
            dt,
            scheme: config.scheme,
            linear_only: config.linear_only,
            tolerance: config.linear_solve_tolerance,
            implicit,
            explicit,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn rotate(&self, v: &mut [Complex64], tau: f64) {
        let p = self.mu;
        for z in v.iter_mut() {
            *z *= Complex64::from_polar(1.0, z.norm_sqr().powf(p) * tau);
        }
    }

    /// `(F(|u|^2) - F(|v|^2)) / (|u|^2 - |v|^2) * (u + v) / 2`, with the quotient
    /// written as `s^mu expm1(q ln1p(d)) / (q d)` to avoid cancellation.
    fn conservative_term(&self, u: Complex64, v: Complex64) -> Complex64 {
        let (su, sv) = (u.norm_sqr(), v.norm_sqr());
        let (big, small) = if su >= sv { (su, sv) } else { (sv, su) };
        if big == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let q = self.mu + 1.0;
        let d = (small - big) / big;
        let ratio = if d == 0.0 { 1.0 } else { (q * d.ln_1p()).exp_m1() / (q * d) };
        0.5 * big.powf(self.mu) * ratio * (u + v)
    }

    pub fn step(&self, psi: &GraphField) -> Result<GraphField> {
        let mut v = psi.to_vector();
        match (self.scheme, self.linear_only) {
            (_, true) => v = self.implicit.solve(&self.explicit.apply(&v)),
            (Scheme::StrangSplitting, false) => {
                self.rotate(&mut v, 0.5 * self.dt);
                v = self.implicit.solve(&self.explicit.apply(&v));
                self.rotate(&mut v, 0.5 * self.dt);
            }
            (Scheme::CrankNicolsonFull, false) => {
                let base = self.explicit.apply(&v);
                let mut next = self.implicit.solve(&base);
                let scale = psi.max_abs().max(1.0);
                let mut converged = false;
                for _ in 0..200 {
                    let rhs: Vec<Complex64> = base
                        .iter()
                        .zip(next.iter().zip(&v))
                        .map(|(b, (u, w))| b + I * self.dt * self.conservative_term(*u, *w))
                        .collect();
                    let candidate = self.implicit.solve(&rhs);
                    if !candidate.iter().all(|z| z.is_finite()) {
                        return Err(Error::NonFinite { time: f64::NAN });
                    }
                    let change = candidate.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                    next = candidate;
                    if change <= self.tolerance * scale {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::NonConvergence { iterations: 200, residual: f64::NAN });
                }
                v = next;
            }
        }
        GraphField::from_vector(&self.grid, v)
    }
}

/// One row of the observables table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub t: f64,
    /// Lattice mass (the quantity the schemes conserve).
    pub mass: f64,
    /// Lattice energy.
    pub energy: f64,
    pub vertex_re: f64,
    pub vertex_im: f64,
    /// `h1_distance_mod_phase(psi(t), reference)`, NaN without a reference.
    pub deviation: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub observables: Vec<Observables>,
    pub snapshots: Vec<(f64, GraphField)>,
    pub final_field: GraphField,
    /// Set when `max |psi|` exceeded `1e3` times the initial peak; the run stops there.
    pub blowup_time: Option<f64>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.observables.iter().map(|o| o.t).collect()
    }

    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.observables[0].mass;
        self.observables.iter().map(|o| (o.mass - m0).abs()).fold(0.0, f64::max)
    }

    pub fn max_deviation(&self) -> f64 {
        self.observables.iter().map(|o| o.deviation).fold(0.0, f64::max)
    }
}

fn observe(t: f64, psi: &GraphField, coupling: VertexCoupling, mu: f64, reference: Option<&GraphField>) -> Result<Observables> {
    let deviation = match reference {
        Some(r) => h1_distance_mod_phase(psi, r)?,
        None => f64::NAN,
    };
    Ok(Observables {
        t,
        mass: mass_with(psi, Quadrature::Lattice),
        energy: energy_with(psi, coupling, mu, Quadrature::Lattice),
        vertex_re: psi.vertex().re,
        vertex_im: psi.vertex().im,
        deviation,
    })
}

/// Evolves `initial`; observables carry the orbital deviation from `reference`
/// when given. Snapshots (if `config.snapshot_stride > 0`) are handed to `sink`
/// as soon as they are produced.
pub fn evolve_with(
    initial: &GraphField,
    coupling: VertexCoupling,
    mu: f64,
    config: &EvolutionConfig,
    reference: Option<&GraphField>,
    sink: &mut dyn FnMut(f64, &GraphField) -> Result<()>,
) -> Result<Trajectory> {
    config.validate()?;
    if let Some(r) = reference {
        initial.same_grid(r)?;
    }
    let grid = initial.grid();
    if config.dt >= grid.spacing() {
        log::warn!("dt = {} is not below h = {}", config.dt, grid.spacing());
    }
    let stepper = Stepper::new(grid, coupling, mu, config.dt, config)?;
    let steps = config.steps();
    let peak = initial.max_abs();
    let mut psi = initial.clone();
    let mut observables = vec![observe(0.0, &psi, coupling, mu, reference)?];
    if config.snapshot_stride > 0 {
        sink(0.0, &psi)?;
    }
    let mut blowup_time = None;
    for step in 1..=steps {
        psi = stepper.step(&psi)?;
        let t = step as f64 * config.dt;
        if !psi.is_finite() {
            return Err(Error::NonFinite { time: t });
        }
        let blown = peak > 0.0 && psi.max_abs() > 1e3 * peak;
        if step % config.observables_stride == 0 || step == steps || blown {
            observables.push(observe(t, &psi, coupling, mu, reference)?);
        }
        if config.snapshot_stride > 0 && (step % config.snapshot_stride == 0 || step == steps) {
            sink(t, &psi)?;
        }
        if blown {
            log::warn!("max |psi| exceeded 1e3 x initial peak at t = {t}");
            blowup_time = Some(t);
            break;
        }
    }
    Ok(Trajectory { observables, snapshots: Vec::new(), final_field: psi, blowup_time })
}

/// [`evolve_with`] collecting snapshots in memory.
pub fn evolve_tracking(
    initial: &GraphField,
    coupling: VertexCoupling,
    mu: f64,
    config: &EvolutionConfig,
    reference: Option<&GraphField>,
) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    let mut traj = evolve_with(initial, coupling, mu, config, reference, &mut |t, f| {
        snapshots.push((t, f.clone()));
        Ok(())
    })?;
    traj.snapshots = snapshots;
    Ok(traj)
}

pub fn evolve(initial: &GraphField, coupling: VertexCoupling, mu: f64, config: &EvolutionConfig) -> Result<Trajectory> {
    evolve_tracking(initial, coupling, mu, config, None)
}

/// Closed-form traveling wave on an even star with Kirchhoff coupling.
///
/// Edges `0..N/2` are the negative half-line (`X = -x`), the rest the positive
/// one (`X = x`), and on the line
/// `psi = e^{i(v X/2 - v^2 t/4 + omega t + theta)} phi(X - a - v t)`.
#[allow(clippy::too_many_arguments)]
pub fn traveling_wave_exact(
    omega: f64,
    mu: f64,
    n_edges: usize,
    a: f64,
    v: f64,
    theta: f64,
    t: f64,
    grid: &StarGrid,
) -> Result<GraphField> {
    if n_edges % 2 != 0 {
        return Err(Error::ParityMismatch(format!("traveling waves need an even number of edges, got {n_edges}")));
    }
    if grid.n_edges() != n_edges {
        return Err(Error::InvalidParameter(format!("grid has {} edges, expected {n_edges}", grid.n_edges())));
    }
    if !(omega > 0.0 && mu > 0.0) {
        return Err(Error::InvalidParameter("omega and mu must be positive".into()));
    }
    let center = a + v * t;
    GraphField::from_fn(grid, |k, x| {
        let big_x = if k < n_edges / 2 { -x } else { x };
        let phase = 0.5 * v * big_x - 0.25 * v * v * t + omega * t + theta;
        Complex64::from_polar(soliton_profile(center, omega, mu, big_x), phase)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TravelReport {
    pub times: Vec<f64>,
    /// `max |psi_num - psi_exact|` at each output time.
    pub mismatch: Vec<f64>,
    pub max_mismatch: f64,
}

/// Evolves the traveling wave numerically and compares it with the closed form.
#[allow(clippy::too_many_arguments)]
pub fn traveling_wave_experiment(
    omega: f64,
    mu: f64,
    n_edges: usize,
    a: f64,
    v: f64,
    grid: &StarGrid,
    config: &EvolutionConfig,
) -> Result<TravelReport> {
    config.validate()?;
    let t_end = config.steps() as f64 * config.dt;
    let reach = a.abs().max((a + v * t_end).abs()) + 5.0 / omega.sqrt();
    if reach > grid.edge_length() {
        return Err(Error::BoundaryProximity(format!(
            "bump reaches {reach:.3} (center + 5 decay lengths) but edges have length {}",
            grid.edge_length()
        )));
    }
    let initial = traveling_wave_exact(omega, mu, n_edges, a, v, 0.0, 0.0, grid)?;
    let traj = evolve_tracking(
        &initial,
        VertexCoupling::kirchhoff(),
        mu,
        &EvolutionConfig { snapshot_stride: config.observables_stride, ..*config },
        None,
    )?;
    let mut times = Vec::new();
    let mut mismatch = Vec::new();
    for (t, field) in &traj.snapshots {
        let exact = traveling_wave_exact(omega, mu, n_edges, a, v, 0.0, *t, grid)?;
        times.push(*t);
        mismatch.push(field.sub(&exact)?.max_abs());
    }
    let max_mismatch = mismatch.iter().copied().fold(0.0, f64::max);
    Ok(TravelReport { times, mismatch, max_mismatch })
}

/// Deterministic smooth random field, continuous at the vertex: a shared
/// Gaussian plus edge-local bumps that vanish at `x = 0`.
pub fn random_smooth_field(grid: &StarGrid, seed: u64) -> Result<GraphField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = grid.edge_length().min(8.0);
    let draw = |rng: &mut ChaCha8Rng| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let shared = draw(&mut rng);
    let terms: Vec<Vec<(Complex64, f64)>> = (0..grid.n_edges())
        .map(|_| (0..3).map(|_| (draw(&mut rng), rng.gen_range(0.5..reach))).collect())
        .collect();
    GraphField::from_fn(grid, |k, x| {
        let local: Complex64 = terms[k].iter().map(|(z, x0)| z * (-(x - x0).powi(2)).exp()).sum::<Complex64>() * -(-x * x).exp_m1();
        shared * (-x * x).exp() + local
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub initial_deviation: f64,
    pub max_deviation: f64,
    pub times: Vec<f64>,
    pub deviation: Vec<f64>,
    pub blowup_time: Option<f64>,
}

impl StabilityReport {
    /// `max d(t) / d(0)`; infinite when the initial deviation is zero.
    pub fn amplification(&self) -> f64 {
        self.max_deviation / self.initial_deviation
    }
}

/// Perturbs `ground` by a random smooth field of relative H1 size
/// `perturbation_scale` and records the orbital deviation.
pub fn orbital_stability_experiment(
    ground: &GraphField,
    perturbation_scale: f64,
    coupling: VertexCoupling,
    mu: f64,
    config: &EvolutionConfig,
    seed: u64,
) -> Result<StabilityReport> {
    if !(0.0..=0.05).contains(&perturbation_scale) {
        return Err(Error::InvalidParameter(format!(
            "perturbation_scale must lie in [0, 0.05], got {perturbation_scale}"
        )));
    }
    let noise = random_smooth_field(ground.grid(), seed)?;
    let size = perturbation_scale * h1_norm(ground) / h1_norm(&noise);
    let initial = ground.add(&noise.scale_real(size))?;
    let traj = evolve_with(&initial, coupling, mu, config, Some(ground), &mut |_, _| Ok(()))?;
    let deviation: Vec<f64> = traj.observables.iter().map(|o| o.deviation).collect();
    Ok(StabilityReport {
        initial_deviation: deviation[0],
        max_deviation: deviation.iter().copied().fold(0.0, f64::max),
        times: traj.times(),
        deviation,
        blowup_time: traj.blowup_time,
    })
}
