//! Batch front-end behind the `star-nls` binary.
//!
//! Every subcommand resolves its parameters as flag > JSON config > default,
//! writes its outputs plus one `manifest.json` into `--out`, and maps errors to
//! exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | usage or invalid configuration |
//! | 3 | `omega <= alpha^2/N^2`: no bound state at all |
//! | 4 | other domain violations (bump count, offset, parity, boundary) |
//! | 5 | non-convergence, non-finite values, singular systems |
//! | 6 | i/o or malformed files |
//!
//! A JSON error record `{"error": .., "message": .., "exit_code": ..}` goes to stderr.
//! A manifest can be passed back as `--config` to rerun with the same parameters.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::{self, EvolutionConfig, Scheme};
use crate::error::{Error, Result};
use crate::functionals::{energy, mass, Quadrature};
use crate::grid::{GraphField, StarGrid, VertexCoupling};
use crate::io::{fmt_float, write_field, write_field_csv, FieldHeader};
use crate::operator::{stationarity_residual, vertex_flux_residual};
use crate::spectral::{self, OperatorLabel};
use crate::stationary::{self, build_state, StateKind, StationarySpec};
use crate::variational::{self, MinimizationOptions};

#[derive(Debug, Parser)]
#[command(name = "star-nls", version, about = "NLS on a star graph with a delta vertex")]
pub struct Cli {
    /// JSON config (flat key/value map, or a manifest written by a previous run).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "star-nls-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an explicit stationary state and its closed-form observables.
    Construct(StateArgs),
    /// Lowest eigenvalues and inertia of L_plus / L_minus at a j = 0 state.
    Spectrum(SpectrumArgs),
    /// Sweep the VK derivative over omega.
    Vk(VkArgs),
    /// Evolve a stationary state (optionally perturbed).
    Evolve(EvolveArgs),
    /// Traveling wave through the vertex of an even Kirchhoff star.
    Travel(TravelArgs),
    /// Natural-constraint or fixed-mass minimization.
    Minimize(MinimizeArgs),
    /// Orbital-stability probe around a j = 0 state.
    Stability(StabilityArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct GridArgs {
    /// Edge length (default: decay-based suggestion).
    #[arg(long)]
    pub length: Option<f64>,
    /// Points per edge (overrides --spacing).
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub spacing: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct StateArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub edges: Option<usize>,
    /// Number of bumps.
    #[arg(long)]
    pub j: Option<usize>,
    /// Bump offset of the even Kirchhoff family (alpha = 0, even N).
    #[arg(long, allow_hyphen_values = true)]
    pub offset: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args, Clone)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Number of eigenvalues per operator.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct VkArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub edges: Option<usize>,
    /// `lo:hi`.
    #[arg(long)]
    pub omega_range: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub bracket_tolerance: Option<f64>,
    /// Worker threads for the sweep.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct TimeArgs {
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// strang_splitting | crank_nicolson_full
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub observables_stride: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    /// Relative H1 size of a random perturbation.
    #[arg(long)]
    pub perturbation: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write a field snapshot every this many steps (0 = none).
    #[arg(long)]
    pub snapshot_stride: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct TravelArgs {
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub edges: Option<usize>,
    /// Initial center on the line (negative = incoming).
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub time: TimeArgs,
}

#[derive(Debug, Args, Clone)]
pub struct MinimizeArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub edges: Option<usize>,
    /// nehari | fixed_mass
    #[arg(long)]
    pub problem: Option<String>,
    /// Target mass of the fixed-mass problem (default: mass of the j = 0 state at omega).
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args, Clone)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    #[arg(long)]
    pub perturbation: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: BTreeMap<String, Value>,
    pub artifact_version: String,
    pub timestamp: String,
}

/// Flag > config > default resolution; every resolved value is recorded.
struct Params {
    config: serde_json::Map<String, Value>,
    resolved: BTreeMap<String, Value>,
}

impl Params {
    fn load(path: Option<&Path>, subcommand: &str) -> Result<Self> {
        let mut config = serde_json::Map::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidParameter(format!("config {}: {e}", path.display())))?;
            let Value::Object(mut map) = value else {
                return Err(Error::InvalidParameter("config must be a JSON object".into()));
            };
            if let Some(Value::String(sub)) = map.get("subcommand") {
                if sub != subcommand {
                    return Err(Error::InvalidParameter(format!("manifest is for `{sub}`, not `{subcommand}`")));
                }
            }
            if let Some(Value::Object(inner)) = map.remove("parameters") {
                map = inner;
            }
            config = map;
        }
        Ok(Self { config, resolved: BTreeMap::new() })
    }

    fn lookup<T: DeserializeOwned + Serialize + Clone>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.config.get(key) {
                Some(Value::Null) | None => None,
                Some(raw) => Some(
                    serde_json::from_value(raw.clone())
                        .map_err(|e| Error::InvalidParameter(format!("config key `{key}`: {e}")))?,
                ),
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), serde_json::to_value(v.clone())?);
        }
        Ok(value)
    }

    fn get<T: DeserializeOwned + Serialize + Clone>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        match self.lookup(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.resolved.insert(key.to_string(), serde_json::to_value(default.clone())?);
                Ok(default)
            }
        }
    }

    fn require<T: DeserializeOwned + Serialize + Clone>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        self.lookup(key, flag)?
            .ok_or_else(|| Error::InvalidParameter(format!("missing required parameter `{key}`")))
    }

    fn set<T: Serialize>(&mut self, key: &str, value: T) -> Result<()> {
        self.resolved.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }
}

/// Exit code for an error.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidParameter(_) | Error::GridMismatch | Error::VertexDiscontinuity { .. } => 2,
        Error::ExistenceBound { .. } => 3,
        Error::OffsetDomain { .. }
        | Error::InadmissibleBumpCount { .. }
        | Error::ZeroAlpha
        | Error::DegenerateConfiguration
        | Error::KirchhoffNeedsZeroAlpha(_)
        | Error::ParityMismatch(_)
        | Error::NonPositiveQuadraticForm(_)
        | Error::NonRealGround(_)
        | Error::GroundVanishes { .. }
        | Error::NoSignChange(_)
        | Error::BoundaryProximity(_) => 4,
        Error::SingularSystem(_) | Error::NonConvergence { .. } | Error::NonFinite { .. } => 5,
        Error::Io(_) | Error::Format(_) => 6,
    }
}

fn error_kind(error: &Error) -> &'static str {
    match error {
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::GridMismatch => "grid_mismatch",
        Error::VertexDiscontinuity { .. } => "vertex_discontinuity",
        Error::ExistenceBound { .. } => "existence_bound",
        Error::OffsetDomain { .. } => "offset_domain",
        Error::InadmissibleBumpCount { .. } => "inadmissible_bump_count",
        Error::ZeroAlpha => "zero_alpha",
        Error::DegenerateConfiguration => "degenerate_configuration",
        Error::KirchhoffNeedsZeroAlpha(_) => "kirchhoff_needs_zero_alpha",
        Error::ParityMismatch(_) => "parity_mismatch",
        Error::NonPositiveQuadraticForm(_) => "nonpositive_quadratic_form",
        Error::NonRealGround(_) => "non_real_ground",
        Error::GroundVanishes { .. } => "ground_vanishes",
        Error::NoSignChange(_) => "no_sign_change",
        Error::SingularSystem(_) => "singular_system",
        Error::NonConvergence { .. } => "non_convergence",
        Error::NonFinite { .. } => "non_finite",
        Error::BoundaryProximity(_) => "boundary_proximity",
        Error::Io(_) => "io",
        Error::Format(_) => "format",
    }
}

/// Machine-readable error record.
pub fn error_record(error: &Error) -> Value {
    json!({ "error": error_kind(error), "message": error.to_string(), "exit_code": exit_code(error) })
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(error) => {
            let record = error_record(&error);
            let _ = writeln!(std::io::stderr(), "{record}");
            exit_code(&error)
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let name = match &cli.command {
        Command::Construct(_) => "construct",
        Command::Spectrum(_) => "spectrum",
        Command::Vk(_) => "vk",
        Command::Evolve(_) => "evolve",
        Command::Travel(_) => "travel",
        Command::Minimize(_) => "minimize",
        Command::Stability(_) => "stability",
    };
    let mut params = Params::load(cli.config.as_deref(), name)?;
    let out = cli.out.as_path();
    let outcome = match &cli.command {
        Command::Construct(a) => construct(a, &mut params, out),
        Command::Spectrum(a) => spectrum(a, &mut params, out),
        Command::Vk(a) => vk(a, &mut params, out),
        Command::Evolve(a) => evolve(a, &mut params, out),
        Command::Travel(a) => travel(a, &mut params, out),
        Command::Minimize(a) => minimize(a, &mut params, out),
        Command::Stability(a) => stability(a, &mut params, out),
    };
    // the manifest is written for failed runs too when parameters resolved
    if out.exists() || outcome.is_ok() {
        write_manifest(out, name, &params)?;
    }
    outcome
}

fn write_manifest(out: &Path, name: &str, params: &Params) -> Result<()> {
    fs::create_dir_all(out)?;
    let manifest = RunManifest {
        subcommand: name.to_string(),
        parameters: params.resolved.clone(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn write_json<T: Serialize>(out: &Path, file: &str, value: &T) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(file), serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn write_rows(out: &Path, file: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join(file))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn resolve_spec(a: &StateArgs, p: &mut Params) -> Result<StationarySpec> {
    let alpha: f64 = p.require("alpha", a.alpha)?;
    let omega: f64 = p.require("omega", a.omega)?;
    let mu = p.get("mu", a.mu, 1.0)?;
    let n = p.get("edges", a.edges, 3usize)?;
    if alpha != 0.0 {
        let j = p.get("j", a.j, 0usize)?;
        StationarySpec::delta(alpha, omega, mu, n, j)
    } else if n % 2 == 1 {
        StationarySpec::kirchhoff_odd(omega, mu, n)
    } else {
        let offset = p.get("offset", a.offset, 0.0)?;
        StationarySpec::kirchhoff_even(omega, mu, n, offset)
    }
}

fn resolve_grid(g: &GridArgs, p: &mut Params, n_edges: usize, suggested: f64, spacing: f64) -> Result<StarGrid> {
    let length = p.get("length", g.length, suggested)?;
    let grid = match p.lookup::<usize>("points", g.points)? {
        Some(m) => StarGrid::new(n_edges, length, m)?,
        None => {
            let h = p.get("spacing", g.spacing, spacing)?;
            StarGrid::with_spacing(n_edges, length, h)?
        }
    };
    p.set("points", grid.points_per_edge())?;
    p.set("spacing", grid.spacing())?;
    Ok(grid)
}

fn resolve_time(t: &TimeArgs, p: &mut Params, dt: f64, t_final: f64) -> Result<EvolutionConfig> {
    let scheme = match p.get("scheme", t.scheme.clone(), "strang_splitting".to_string())?.as_str() {
        "strang_splitting" => Scheme::StrangSplitting,
        "crank_nicolson_full" => Scheme::CrankNicolsonFull,
        other => return Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
    };
    let config = EvolutionConfig {
        dt: p.get("dt", t.dt, dt)?,
        t_final: p.get("t_final", t.t_final, t_final)?,
        scheme,
        observables_stride: p.get("observables_stride", t.observables_stride, 10usize)?,
        linear_solve_tolerance: p.get("linear_solve_tolerance", None, EvolutionConfig::default().linear_solve_tolerance)?,
        ..EvolutionConfig::default()
    };
    config.validate()?;
    Ok(config)
}

fn construct(a: &StateArgs, p: &mut Params, out: &Path) -> Result<()> {
    let spec = resolve_spec(a, p)?;
    let grid = resolve_grid(&a.grid, p, spec.n_edges(), spec.suggested_length(), 0.01)?;
    let psi = build_state(&spec, &grid)?;
    let coupling = spec.coupling();
    let (omega, mu) = (spec.omega(), spec.mu());
    let offset = match spec.kind() {
        StateKind::Delta { .. } => Some(stationary::bump_offset(&spec)?),
        StateKind::KirchhoffEven { offset } => Some(offset),
        StateKind::KirchhoffOdd => Some(0.0),
    };
    let (closed_mass, closed_energy) = match spec.kind() {
        StateKind::Delta { bumps } if mu == 1.0 => (
            Some(stationary::cubic_mass(spec.n_edges(), omega, spec.alpha())?),
            Some(stationary::cubic_energy_spectrum(spec.n_edges(), omega, spec.alpha(), bumps)?),
        ),
        _ => (None, None),
    };
    let quad_mass = mass(&psi);
    let quad_energy = energy(&psi, coupling, mu);
    let report = json!({
        "kind": spec.kind(),
        "offset": offset,
        "vertex_amplitude": spec.vertex_amplitude(),
        "mass": closed_mass.unwrap_or(quad_mass),
        "energy": closed_energy.unwrap_or(quad_energy),
        "action": closed_energy.unwrap_or(quad_energy) + 0.5 * omega * closed_mass.unwrap_or(quad_mass),
        "closed_form": closed_mass.is_some(),
        "quadrature_mass": quad_mass,
        "quadrature_energy": quad_energy,
        "quadrature_action": variational::action(&psi, omega, coupling, mu),
        "stationarity_residual": stationarity_residual(&psi, coupling, omega, mu),
        "vertex_flux_residual": vertex_flux_residual(&psi, coupling),
    });
    write_field(out, "state", &psi, coupling)?;
    write_json(out, "observables.json", &report)
}

fn spectrum(a: &SpectrumArgs, p: &mut Params, out: &Path) -> Result<()> {
    let spec = resolve_spec(&a.state, p)?;
    let k = p.get("k", a.k, 4usize)?;
    let grid = resolve_grid(&a.state.grid, p, spec.n_edges(), spec.suggested_length(), 0.02)?;
    let psi = build_state(&spec, &grid)?;
    let (omega, mu, c) = (spec.omega(), spec.mu(), spec.coupling());
    let lp = spectral::assemble_linearization(&psi, omega, mu, c, OperatorLabel::Lplus)?;
    let lm = spectral::assemble_linearization(&psi, omega, mu, c, OperatorLabel::Lminus)?;
    let rp = spectral::lowest_eigenpairs(&lp, k)?;
    let rm = spectral::lowest_eigenpairs(&lm, k)?;
    let near_zero = rp.lowest_eigenvalues.iter().copied().fold(f64::INFINITY, |m, l| if l.abs() < m.abs() { l } else { m });
    let report = json!({
        "lplus": rp,
        "lminus": rm,
        "lminus_ground_form": lm.quadratic_form(&psi),
        "kernel_is_discrete_zero": spectral::is_discrete_kernel(near_zero, &grid),
        "h": grid.spacing(),
    });
    write_json(out, "spectrum.json", &report)
}

fn parse_range(text: &str) -> Result<(f64, f64)> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| Error::InvalidParameter(format!("range `{text}` is not lo:hi")))?;
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::InvalidParameter(format!("range `{text}`: {e}")));
    let (lo, hi) = (parse(lo)?, parse(hi)?);
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("range `{text}` is empty")));
    }
    Ok((lo, hi))
}

fn vk(a: &VkArgs, p: &mut Params, out: &Path) -> Result<()> {
    let alpha: f64 = p.require("alpha", a.alpha)?;
    let mu = p.get("mu", a.mu, 1.0)?;
    let n = p.get("edges", a.edges, 3usize)?;
    let range: String = p.require("omega_range", a.omega_range.clone())?;
    let samples = p.get("samples", a.samples, 200usize)?;
    let tol = p.get("bracket_tolerance", a.bracket_tolerance, 1e-8)?;
    let jobs = p.get("jobs", a.jobs, 1usize)?.max(1);
    let (lo, hi) = parse_range(&range)?;
    let bound = stationary::existence_threshold(alpha, n);
    if !(lo > bound) {
        return Err(Error::ExistenceBound { omega: lo, bound });
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("samples must be >= 2".into()));
    }
    let omegas: Vec<f64> = (0..samples).map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64).collect();
    let chunk = omegas.len().div_ceil(jobs);
    let values: Vec<Result<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = omegas
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|&w| spectral::vk_derivative(alpha, w, mu, n)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("vk worker panicked")).collect()
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let sign_changes = values.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
    write_rows(
        out,
        "vk.csv",
        &["omega", "vk_value"],
        omegas.iter().zip(&values).map(|(w, v)| vec![fmt_float(*w), fmt_float(*v)]),
    )?;
    let omega_star = if mu > 2.0 { spectral::bracket_omega_star(alpha, mu, n, tol).ok() } else { None };
    write_json(
        out,
        "vk.json",
        &json!({
            "sign_changes": sign_changes,
            "omega_star_bracket": omega_star,
            "omega_star": omega_star.map(|(l, h)| 0.5 * (l + h)),
        }),
    )
}

/// Spawns the snapshot writer thread; returns the sender and its join handle.
fn snapshot_writer(dir: PathBuf) -> (mpsc::SyncSender<(f64, GraphField)>, std::thread::JoinHandle<Result<()>>) {
    let (tx, rx) = mpsc::sync_channel::<(f64, GraphField)>(16);
    let handle = std::thread::spawn(move || -> Result<()> {
        fs::create_dir_all(&dir)?;
        let mut index = csv::Writer::from_path(dir.join("index.csv"))?;
        index.write_record(["index", "t", "file"])?;
        for (i, (t, field)) in rx.iter().enumerate() {
            let file = format!("snapshot_{i:05}.csv");
            let f = fs::File::create(dir.join(&file))?;
            write_field_csv(std::io::BufWriter::new(f), &field)?;
            index.write_record([i.to_string(), fmt_float(t), file])?;
        }
        index.flush()?;
        Ok(())
    });
    (tx, handle)
}

fn observables_rows(obs: &[dynamics::Observables]) -> Vec<Vec<String>> {
    obs.iter()
        .map(|o| vec![fmt_float(o.t), fmt_float(o.mass), fmt_float(o.energy), fmt_float(o.vertex_re), fmt_float(o.vertex_im), fmt_float(o.deviation)])
        .collect()
}

const OBSERVABLE_COLUMNS: [&str; 6] = ["t", "mass", "energy", "vertex_re", "vertex_im", "deviation"];

fn evolve(a: &EvolveArgs, p: &mut Params, out: &Path) -> Result<()> {
    let spec = resolve_spec(&a.state, p)?;
    let mut config = resolve_time(&a.time, p, 1e-3, 1.0)?;
    config.snapshot_stride = p.get("snapshot_stride", a.snapshot_stride, 0usize)?;
    let perturbation = p.get("perturbation", a.perturbation, 0.0)?;
    let seed = p.get("seed", a.seed, 1u64)?;
    let grid = resolve_grid(&a.state.grid, p, spec.n_edges(), spec.suggested_length(), 0.05)?;
    let psi = build_state(&spec, &grid)?;
    let initial = if perturbation > 0.0 {
        let noise = dynamics::random_smooth_field(&grid, seed)?;
        let size = perturbation * crate::functionals::h1_norm(&psi) / crate::functionals::h1_norm(&noise);
        psi.add(&noise.scale_real(size))?
    } else {
        psi.clone()
    };
    let (tx, writer) = snapshot_writer(out.join("snapshots"));
    let traj = dynamics::evolve_with(&initial, spec.coupling(), spec.mu(), &config, Some(&psi), &mut |t, f| {
        tx.send((t, f.clone())).map_err(|_| Error::Io("snapshot writer stopped".into()))
    });
    drop(tx);
    let written = writer.join().map_err(|_| Error::Io("snapshot writer panicked".into()))?;
    let traj = traj?;
    written?;
    if config.snapshot_stride == 0 {
        let _ = fs::remove_dir_all(out.join("snapshots"));
    }
    write_rows(out, "observables.csv", &OBSERVABLE_COLUMNS, observables_rows(&traj.observables))?;
    write_field(out, "final", &traj.final_field, spec.coupling())?;
    write_json(out, "summary.json", &json!({ "blowup_time": traj.blowup_time, "max_mass_drift": traj.max_mass_drift(), "max_deviation": traj.max_deviation() }))
}

fn travel(a: &TravelArgs, p: &mut Params, out: &Path) -> Result<()> {
    let omega = p.get("omega", a.omega, 1.0)?;
    let mu = p.get("mu", a.mu, 1.0)?;
    let n = p.get("edges", a.edges, 4usize)?;
    let a0 = p.get("a", a.a, -4.0)?;
    let v = p.get("v", a.v, 1.0)?;
    let mut config = resolve_time(&a.time, p, 5e-4, 8.0)?;
    config.observables_stride = p.get("observables_stride", a.time.observables_stride, 200usize)?;
    let reach = a0.abs().max((a0 + v * config.t_final).abs()) + 12.0 / omega.sqrt();
    let grid = resolve_grid(&a.grid, p, n, reach, 0.05)?;
    let report = dynamics::traveling_wave_experiment(omega, mu, n, a0, v, &grid, &config)?;
    write_rows(
        out,
        "travel.csv",
        &["t", "mismatch"],
        report.times.iter().zip(&report.mismatch).map(|(t, m)| vec![fmt_float(*t), fmt_float(*m)]),
    )?;
    let last = report.times.last().copied().unwrap_or(0.0);
    let exact = dynamics::traveling_wave_exact(omega, mu, n, a0, v, 0.0, last, &grid)?;
    write_field(out, "exact_final", &exact, VertexCoupling::kirchhoff())?;
    write_json(out, "summary.json", &json!({ "max_mismatch": report.max_mismatch }))
}

fn minimize(a: &MinimizeArgs, p: &mut Params, out: &Path) -> Result<()> {
    let alpha: f64 = p.require("alpha", a.alpha)?;
    let omega: f64 = p.require("omega", a.omega)?;
    let mu = p.get("mu", a.mu, 1.0)?;
    let n = p.get("edges", a.edges, 3usize)?;
    let problem = p.get("problem", a.problem.clone(), "nehari".to_string())?;
    let opts = MinimizationOptions {
        max_iterations: p.get("max_iterations", a.max_iterations, 5000usize)?,
        step_size: p.get("step_size", a.step_size, 1.0)?,
        tolerance: p.get("tolerance", a.tolerance, 1e-8)?,
        seed: p.get("seed", a.seed, 1u64)?,
    };
    let coupling = VertexCoupling::new(alpha)?;
    let bound = stationary::existence_threshold(alpha, n);
    if !(omega > bound) {
        return Err(Error::ExistenceBound { omega, bound });
    }
    let suggested = if alpha < 0.0 { 14.0 / omega.sqrt() } else { 28.0 / omega.sqrt() };
    let grid = resolve_grid(&a.grid, p, n, suggested, 0.02)?;
    let outcome = match problem.as_str() {
        "nehari" => variational::minimize_action_on_nehari(omega, coupling, mu, &grid, &opts)?,
        "fixed_mass" => {
            let target = match p.lookup::<f64>("mass", a.mass)? {
                Some(m) => m,
                None => {
                    let spec = StationarySpec::ground(alpha, omega, mu, n)?;
                    let m = crate::functionals::mass_with(&build_state(&spec, &grid)?, Quadrature::Simpson);
                    p.set("mass", m)?;
                    m
                }
            };
            variational::minimize_energy_fixed_mass(target, coupling, mu, &grid, &opts)?
        }
        other => return Err(Error::InvalidParameter(format!("unknown problem `{other}`"))),
    };
    write_rows(
        out,
        "iterates.csv",
        &["iteration", "value", "grad_norm", "mass"],
        outcome.log.iter().map(|r| vec![r.iteration.to_string(), fmt_float(r.value), fmt_float(r.grad_norm), fmt_float(r.mass)]),
    )?;
    write_field(out, "minimizer", &outcome.field, coupling)?;
    write_json(
        out,
        "summary.json",
        &json!({
            "converged": outcome.converged,
            "iterations": outcome.iterations,
            "omega": outcome.omega,
            "action": variational::action_with(&outcome.field, outcome.omega, coupling, mu, Quadrature::Lattice),
        }),
    )?;
    outcome.require_converged().map(|_| ())
}

fn stability(a: &StabilityArgs, p: &mut Params, out: &Path) -> Result<()> {
    let spec = resolve_spec(&a.state, p)?;
    let config = resolve_time(&a.time, p, 1e-3, 20.0)?;
    let scale = p.get("perturbation", a.perturbation, 0.01)?;
    let seed = p.get("seed", a.seed, 1u64)?;
    let grid = resolve_grid(&a.state.grid, p, spec.n_edges(), spec.suggested_length() + 3.0, 0.02)?;
    let psi = build_state(&spec, &grid)?;
    let report = dynamics::orbital_stability_experiment(&psi, scale, spec.coupling(), spec.mu(), &config, seed)?;
    write_rows(
        out,
        "deviation.csv",
        &["t", "deviation"],
        report.times.iter().zip(&report.deviation).map(|(t, d)| vec![fmt_float(*t), fmt_float(*d)]),
    )?;
    write_json(
        out,
        "stability.json",
        &json!({
            "initial_deviation": report.initial_deviation,
            "max_deviation": report.max_deviation,
            "amplification": report.amplification(),
            "blowup_time": report.blowup_time,
        }),
    )
}

/// Header of a field written by the CLI.
pub fn read_header(dir: &Path, stem: &str) -> Result<FieldHeader> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.header.json")))?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_for_existence_bound() {
        assert_eq!(exit_code(&Error::ExistenceBound { omega: 0.1, bound: 0.11 }), 3);
        assert_eq!(exit_code(&Error::NonConvergence { iterations: 1, residual: 1.0 }), 5);
        assert_eq!(exit_code(&Error::Io("x".into())), 6);
        let record = error_record(&Error::ZeroAlpha);
        assert_eq!(record["error"], "zero_alpha");
        assert_eq!(record["exit_code"], 4);
    }

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("0.12:10").unwrap(), (0.12, 10.0));
        assert!(parse_range("3:1").is_err());
        assert!(parse_range("abc").is_err());
    }

    #[test]
    fn flags_override_config_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"omega": 2.0, "mu": 1.5}"#).unwrap();
        let mut p = Params::load(Some(&path), "construct").unwrap();
        assert_eq!(p.get("omega", Some(3.0), 1.0).unwrap(), 3.0);
        assert_eq!(p.get("mu", None, 1.0).unwrap(), 1.5);
        assert_eq!(p.get("edges", None, 3usize).unwrap(), 3);
        assert_eq!(p.resolved["omega"], json!(3.0));
        assert_eq!(p.resolved["edges"], json!(3));
    }

    #[test]
    fn manifest_for_another_subcommand_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, r#"{"subcommand": "vk", "parameters": {"alpha": -1.0}}"#).unwrap();
        assert!(Params::load(Some(&path), "construct").is_err());
        let mut p = Params::load(Some(&path), "vk").unwrap();
        assert_eq!(p.require::<f64>("alpha", None).unwrap(), -1.0);
    }
}
