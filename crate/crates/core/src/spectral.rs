//! Linearization around the ground state and the orbital-stability checks.
//!
//! Writing `Psi(t) = (Psi0 + eta + i rho) e^{i omega t}` and dropping
//! nonlinear terms gives `d/dt (eta, rho) = (L_plus rho, -L_minus eta)` with
//!
//! ```text
//! L_plus  = H_alpha + omega - |Psi0|^{2mu}
//! L_minus = H_alpha + omega - (2mu + 1) |Psi0|^{2mu}
//! ```
//!
//! This labeling is the opposite of the common convention: here `L_plus`
//! annihilates `Psi0` (it is the stationary equation itself).
//!
//! Eigenvalues are found by bisection on exact inertia counts of the arrow
//! factorization, and eigenvectors by inverse iteration. Negative counts never
//! depend on thresholding computed eigenvalues.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arrow::{ArrowMatrix, Mat2, Vec2};
use crate::dynamics::EvolutionConfig;
use crate::error::{Error, Result};
use crate::grid::{GraphField, StarGrid, VertexCoupling};
use crate::operator::{hamiltonian_matrix, lattice_inner, lattice_weights};
use crate::stationary::existence_threshold;

/// Near-zero `L_plus` eigenvalues with `|lambda| < KERNEL_CONSTANT * h^2` count
/// as the discrete kernel. Calibrated on the cubic ground states used in the
/// tests, where `|lambda| / h^2` stays below 2.
pub const KERNEL_CONSTANT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorLabel {
    Lplus,
    Lminus,
    Halpha,
}

/// Discretized self-adjoint operator `H_alpha + diag(potential)`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    grid: StarGrid,
    label: OperatorLabel,
    matrix: ArrowMatrix<f64>,
    reference: Option<GraphField>,
}

/// Result of [`lowest_eigenpairs`].
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub label: OperatorLabel,
    pub lowest_eigenvalues: Vec<f64>,
    /// Number of negative eigenvalues of the whole operator, from inertia.
    pub negative_count: usize,
    /// `|<v, Psi0>| / (|v| |Psi0|)` for the eigenvector with smallest `|lambda|`.
    pub kernel_candidate_overlap: f64,
    pub residual_norms: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<GraphField>,
}

fn check_real(field: &GraphField) -> Result<()> {
    let tol = 1e-12 * field.max_abs().max(1.0);
    if field.max_imag() > tol {
        return Err(Error::NonRealGround(field.max_imag()));
    }
    Ok(())
}

/// Assembles `L_plus` or `L_minus` around a real ground state.
pub fn assemble_linearization(
    ground: &GraphField,
    omega: f64,
    mu: f64,
    coupling: VertexCoupling,
    which: OperatorLabel,
) -> Result<OperatorMatrix> {
    check_real(ground)?;
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let factor = match which {
        OperatorLabel::Lplus => 1.0,
        OperatorLabel::Lminus => 2.0 * mu + 1.0,
        OperatorLabel::Halpha => 0.0,
    };
    let potential: Vec<f64> = ground.values().map(|z| omega - factor * z.norm().powf(2.0 * mu)).collect();
    Ok(OperatorMatrix {
        grid: *ground.grid(),
        label: which,
        matrix: hamiltonian_matrix(ground.grid(), coupling, &potential),
        reference: Some(ground.clone()),
    })
}

impl OperatorMatrix {
    /// `H_alpha + shift`.
    pub fn hamiltonian(grid: &StarGrid, coupling: VertexCoupling, shift: f64) -> Self {
        let potential = vec![shift; grid.dimension()];
        Self {
            grid: *grid,
            label: OperatorLabel::Halpha,
            matrix: hamiltonian_matrix(grid, coupling, &potential),
            reference: None,
        }
    }

    pub fn grid(&self) -> &StarGrid {
        &self.grid
    }

    pub fn label(&self) -> OperatorLabel {
        self.label
    }

    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }

    pub fn arrow(&self) -> &ArrowMatrix<f64> {
        &self.matrix
    }

    /// Diagonal entries (vertex first).
    pub fn diagonal(&self) -> Vec<f64> {
        std::iter::once(self.matrix.vertex_diag).chain(self.matrix.diag.iter().copied()).collect()
    }

    pub fn apply(&self, field: &GraphField) -> GraphField {
        let re = self.matrix.apply(&field.values().map(|z| z.re).collect::<Vec<_>>());
        let im = self.matrix.apply(&field.values().map(|z| z.im).collect::<Vec<_>>());
        GraphField::from_vector(&self.grid, re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect())
            .expect("dimension preserved")
    }

    /// `<A f, f>` in the lattice inner product.
    pub fn quadratic_form(&self, field: &GraphField) -> f64 {
        lattice_inner(&self.apply(field), field).re
    }

    /// Number of eigenvalues strictly below `shift`.
    pub fn count_below(&self, shift: f64) -> usize {
        self.matrix.count_below(shift)
    }

    pub fn negative_count(&self) -> usize {
        self.count_below(0.0)
    }

    /// Dense `W^{1/2} A W^{-1/2}` (row-major), for small grids and tests.
    pub fn symmetrized_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dimension();
        let w = lattice_weights(&self.grid);
        let mut dense = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.matrix.apply(&e);
            for i in 0..n {
                dense[i][j] = col[i] * (w[i] / w[j]).sqrt();
            }
        }
        dense
    }

    /// `max |S_ij - S_ji|` over the structural non-zeros of the symmetrized matrix.
    pub fn asymmetry(&self) -> f64 {
        let a = &self.matrix;
        let m = a.points_per_edge;
        let w = lattice_weights(&self.grid);
        let sym = |aij: f64, wi: f64, wj: f64| aij * (wi / wj).sqrt();
        let mut worst: f64 = 0.0;
        for k in 0..a.n_edges {
            let base = k * m;
            let s01 = sym(a.vertex_row[k], w[0], w[1 + base]);
            let s10 = sym(a.vertex_col[k], w[1 + base], w[0]);
            worst = worst.max((s01 - s10).abs());
            for i in 0..m - 1 {
                let idx = base + i;
                let up = sym(a.upper[idx], w[1 + idx], w[2 + idx]);
                let down = sym(a.lower[idx + 1], w[2 + idx], w[1 + idx]);
                worst = worst.max((up - down).abs());
            }
        }
        worst
    }
}

fn normalize(v: &mut [f64], w: &[f64]) -> f64 {
    let norm = v.iter().zip(w).map(|(x, wi)| wi * x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn weighted_dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), wi)| wi * x * y).sum()
}

/// The `k` smallest eigenvalues (bisection on inertia) and eigenvectors
/// (inverse iteration, orthogonalized inside clusters).
pub fn lowest_eigenpairs(op: &OperatorMatrix, k: usize) -> Result<SpectralReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let k = k.min(op.dimension());
    let (lo, hi) = op.matrix.gershgorin();
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let mut values = Vec::with_capacity(k);
    for index in 0..k {
        let (mut a, mut b) = (lo - 1e-9 * scale, hi + 1e-9 * scale);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if op.count_below(mid) > index {
                b = mid;
            } else {
                a = mid;
            }
        }
        values.push(0.5 * (a + b));
    }

    let w = lattice_weights(&op.grid);
    let n = op.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let cluster_tol = 1e-7 * scale;
    for (index, &lambda) in values.iter().enumerate() {
        let shift = lambda - 1e-10 * scale.min(1.0 + lambda.abs());
        let shifted = op.matrix.map(|t| t, |d| d - shift);
        let factor = shifted.factor()?;
        let cluster: Vec<usize> = (0..index).filter(|&j| (values[j] - lambda).abs() < cluster_tol).collect();
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..4 {
            v = factor.solve(&v);
            for &j in &cluster {
                let c = weighted_dot(&v, &vectors[j], &w);
                v.iter_mut().zip(&vectors[j]).for_each(|(x, y)| *x -= c * y);
            }
            if normalize(&mut v, &w) == 0.0 {
                return Err(Error::NonConvergence { iterations: index, residual: f64::NAN });
            }
        }
        let av = op.matrix.apply(&v);
        let r: Vec<f64> = av.iter().zip(&v).map(|(a, x)| a - lambda * x).collect();
        let res = weighted_dot(&r, &r, &w).sqrt();
        if !(res < 1e-6 * scale) {
            return Err(Error::NonConvergence { iterations: index, residual: res });
        }
        residuals.push(res);
        vectors.push(v);
    }

    let eigenvectors: Vec<GraphField> = vectors
        .iter()
        .map(|v| GraphField::from_real_vector(&op.grid, v).expect("dimension preserved"))
        .collect();
    let kernel_candidate_overlap = match &op.reference {
        Some(reference) if reference.max_abs() > 0.0 => {
            let idx = (0..values.len())
                .min_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()))
                .expect("k >= 1");
            crate::functionals::overlap(&eigenvectors[idx], reference)
        }
        _ => 0.0,
    };
    Ok(SpectralReport {
        label: op.label,
        lowest_eigenvalues: values,
        negative_count: op.negative_count(),
        kernel_candidate_overlap,
        residual_norms: residuals,
        eigenvectors,
    })
}

/// `|lambda| < KERNEL_CONSTANT * h^2`.
pub fn is_discrete_kernel(lambda: f64, grid: &StarGrid) -> bool {
    lambda.abs() < KERNEL_CONSTANT * grid.spacing().powi(2)
}

/// Both sides of `<L_plus p, p> = sum_k int Psi0^2 |d/dx (p / Psi0)|^2`.
///
/// The left side is the lattice quadratic form; the right side uses the cell
/// quadrature `sum g_i g_{i+1} (r_{i+1} - r_i)^2 / h` with `r = p / Psi0`.
pub fn quadratic_form_identity(
    ground: &GraphField,
    probe: &GraphField,
    omega: f64,
    mu: f64,
    coupling: VertexCoupling,
) -> Result<(f64, f64)> {
    ground.same_grid(probe)?;
    check_real(ground)?;
    if probe.max_imag() > 1e-12 * probe.max_abs().max(1.0) {
        return Err(Error::InvalidParameter("probe must be real".into()));
    }
    if let Some(node) = ground.values().position(|z| !(z.re > 0.0)) {
        return Err(Error::GroundVanishes { node });
    }
    let op = assemble_linearization(ground, omega, mu, coupling, OperatorLabel::Lplus)?;
    let left = op.quadratic_form(probe);
    let grid = ground.grid();
    let h = grid.spacing();
    let mut right = 0.0;
    for k in 0..grid.n_edges() {
        let g = ground.edge_with_vertex(k);
        let p = probe.edge_with_vertex(k);
        for i in 0..grid.points_per_edge() {
            let dr = p[i + 1].re / g[i + 1].re - p[i].re / g[i].re;
            right += g[i].re * g[i + 1].re * dr * dr / h;
        }
    }
    Ok((left, right))
}

/// Adaptive Simpson quadrature on `[a, b]`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `int_r^1 (1 - t^2)^{1/mu - 1} dt`, regularized by `t = 1 - s^q` with
/// `q = n mu`, `n = ceil(1/mu)`, which turns the integrand into the bounded
/// `q s^{n-1} (2 - s^q)^{1/mu - 1}`.
fn vk_integral(r: f64, mu: f64) -> f64 {
    let p = 1.0 / mu - 1.0;
    let n = (1.0 / mu).ceil().max(1.0);
    let q = n * mu;
    let upper = (1.0 - r).powf(1.0 / q);
    let integrand = move |s: f64| q * s.powf(n - 1.0) * (2.0 - s.powf(q)).powf(p);
    adaptive_simpson(&integrand, 0.0, upper, 1e-14)
}

/// `d/d omega ||Psi0_omega||^2` for the all-tail ground state (`alpha < 0`).
pub fn vk_derivative(alpha: f64, omega: f64, mu: f64, n_edges: usize) -> Result<f64> {
    if !(alpha < 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be negative, got {alpha}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let bound = existence_threshold(alpha, n_edges);
    if !(omega > bound) {
        return Err(Error::ExistenceBound { omega, bound });
    }
    let n = n_edges as f64;
    let r = alpha.abs() / (n * omega.sqrt());
    let c = n * (mu + 1.0).powf(1.0 / mu) / mu * omega.powf(1.0 / mu - 1.5);
    let p = 1.0 / mu - 1.0;
    Ok(c * ((1.0 / mu - 0.5) * vk_integral(r, mu) + 0.5 * r * (1.0 - r * r).powf(p)))
}

/// Closed-form ground-state mass `N (mu+1)^{1/mu}/mu omega^{1/mu - 1/2} int_r^1 (1-t^2)^{1/mu-1} dt`.
/// Independent of the VK formula apart from sharing the integral.
pub fn ground_mass(alpha: f64, omega: f64, mu: f64, n_edges: usize) -> Result<f64> {
    let bound = existence_threshold(alpha, n_edges);
    if !(omega > bound) || !(alpha <= 0.0) {
        return Err(Error::ExistenceBound { omega, bound });
    }
    let n = n_edges as f64;
    let r = alpha.abs() / (n * omega.sqrt());
    Ok(n * (mu + 1.0).powf(1.0 / mu) / mu * omega.powf(1.0 / mu - 0.5) * vk_integral(r, mu))
}

/// Bracket `[lo, hi]` around the sign change of the VK derivative (`mu > 2`).
pub fn bracket_omega_star(alpha: f64, mu: f64, n_edges: usize, tolerance: f64) -> Result<(f64, f64)> {
    if !(mu > 2.0) {
        return Err(Error::NoSignChange(format!("the VK derivative stays positive for mu = {mu} <= 2")));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let bound = existence_threshold(alpha, n_edges);
    let mut lo = bound * (1.0 + 1e-9);
    if vk_derivative(alpha, lo, mu, n_edges)? <= 0.0 {
        return Err(Error::NoSignChange("derivative not positive at the existence threshold".into()));
    }
    let mut hi = 2.0 * bound;
    let mut tries = 0;
    while vk_derivative(alpha, hi, mu, n_edges)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::NoSignChange("no negative value found".into()));
        }
    }
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if vk_derivative(alpha, mid, mu, n_edges)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Frequency above which the supercritical ground state loses the VK condition.
pub fn find_omega_star(alpha: f64, mu: f64, n_edges: usize, bracket_tolerance: f64) -> Result<f64> {
    let (lo, hi) = bracket_omega_star(alpha, mu, n_edges, bracket_tolerance)?;
    Ok(0.5 * (lo + hi))
}

/// Observables of [`linearized_evolve`].
#[derive(Debug, Clone, Serialize)]
pub struct LinearizedTrajectory {
    pub times: Vec<f64>,
    pub eta_norm: Vec<f64>,
    pub rho_norm: Vec<f64>,
    /// `<L_minus eta, eta> + <L_plus rho, rho>`, conserved by the flow.
    pub quadratic_form: Vec<f64>,
    /// Norm of the part of `rho` orthogonal to `Psi0`.
    pub rho_off_kernel: Vec<f64>,
    #[serde(skip)]
    pub final_state: (GraphField, GraphField),
}

/// Crank-Nicolson integration of `d/dt (eta, rho) = (L_plus rho, -L_minus eta)`.
pub fn linearized_evolve(
    eta: &GraphField,
    rho: &GraphField,
    ground: &GraphField,
    omega: f64,
    mu: f64,
    coupling: VertexCoupling,
    config: &EvolutionConfig,
) -> Result<LinearizedTrajectory> {
    config.validate()?;
    eta.same_grid(ground)?;
    rho.same_grid(ground)?;
    for f in [eta, rho] {
        if f.max_imag() > 1e-12 * f.max_abs().max(1.0) {
            return Err(Error::InvalidParameter("eta and rho must be real".into()));
        }
    }
    let lp = assemble_linearization(ground, omega, mu, coupling, OperatorLabel::Lplus)?;
    let lm = assemble_linearization(ground, omega, mu, coupling, OperatorLabel::Lminus)?;
    let grid = *ground.grid();
    let half = 0.5 * config.dt;
    // B = [[0, L+], [-L-, 0]] entrywise; both operators share the sparsity pattern.
    let block = |p: f64, m: f64| Mat2([[0.0, p], [-m, 0.0]]);
    let (a, b) = (lp.arrow(), lm.arrow());
    let generator = ArrowMatrix {
        n_edges: a.n_edges,
        points_per_edge: a.points_per_edge,
        vertex_diag: block(a.vertex_diag, b.vertex_diag),
        vertex_row: a.vertex_row.iter().zip(&b.vertex_row).map(|(&p, &m)| block(p, m)).collect(),
        vertex_col: a.vertex_col.iter().zip(&b.vertex_col).map(|(&p, &m)| block(p, m)).collect(),
        diag: a.diag.iter().zip(&b.diag).map(|(&p, &m)| block(p, m)).collect(),
        upper: a.upper.iter().zip(&b.upper).map(|(&p, &m)| block(p, m)).collect(),
        lower: a.lower.iter().zip(&b.lower).map(|(&p, &m)| block(p, m)).collect(),
    };
    let scaled = |s: f64| generator.map(move |t| Mat2([[s * t.0[0][0], s * t.0[0][1]], [s * t.0[1][0], s * t.0[1][1]]]), |d| d + Mat2::diag(1.0, 1.0));
    let implicit = scaled(-half).factor()?;
    let explicit = scaled(half);

    let mut state: Vec<Vec2> = eta.values().zip(rho.values()).map(|(e, r)| Vec2([e.re, r.re])).collect();
    let ground_norm = lattice_inner(ground, ground).re.sqrt();
    let unpack = |s: &[Vec2]| -> (GraphField, GraphField) {
        let e: Vec<f64> = s.iter().map(|v| v.0[0]).collect();
        let r: Vec<f64> = s.iter().map(|v| v.0[1]).collect();
        (
            GraphField::from_real_vector(&grid, &e).expect("dimension"),
            GraphField::from_real_vector(&grid, &r).expect("dimension"),
        )
    };
    let mut out = LinearizedTrajectory {
        times: Vec::new(),
        eta_norm: Vec::new(),
        rho_norm: Vec::new(),
        quadratic_form: Vec::new(),
        rho_off_kernel: Vec::new(),
        final_state: (eta.clone(), rho.clone()),
    };
    let record = |t: f64, s: &[Vec2], out: &mut LinearizedTrajectory| {
        let (e, r) = unpack(s);
        out.times.push(t);
        out.eta_norm.push(lattice_inner(&e, &e).re.sqrt());
        out.rho_norm.push(lattice_inner(&r, &r).re.sqrt());
        out.quadratic_form.push(lm.quadratic_form(&e) + lp.quadratic_form(&r));
        let off = if ground_norm > 0.0 {
            let c = lattice_inner(ground, &r).re / (ground_norm * ground_norm);
            let perp = r.axpy(-c, ground).expect("same grid");
            lattice_inner(&perp, &perp).re.sqrt()
        } else {
            lattice_inner(&r, &r).re.sqrt()
        };
        out.rho_off_kernel.push(off);
    };
    record(0.0, &state, &mut out);
    let steps = config.steps();
    for step in 1..=steps {
        state = implicit.solve(&explicit.apply(&state));
        let t = step as f64 * config.dt;
        if state.iter().any(|v| !v.0[0].is_finite() || !v.0[1].is_finite()) {
            return Err(Error::NonFinite { time: t });
        }
        if step % config.observables_stride == 0 || step == steps {
            record(t, &state, &mut out);
        }
    }
    out.final_state = unpack(&state);
    Ok(out)
}
