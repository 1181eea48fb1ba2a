//! Experiment orchestration: JSON-configured rate studies, the source
//! condition probe, and the self-test suite behind the command-line
//! interface.
//!
//! A rate study solves the regularized problem over a grid of noise levels
//! (or, for exact data, regularization parameters), writes one CSV row per
//! solve, fits the decay of the Bregman error in log-log coordinates, and
//! compares the fitted slope against the predicted exponent.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banach::LpSpace;
use crate::linop::{
    build_source_problem, load_dense_text, load_vector_text, LinearOperator, ProblemInstance,
};
use crate::rates::{
    choose_alpha, exact_data_exponent, fit_loglog, median, predicted_exponent, var_ineq_probe,
    IndexFunction,
};
use crate::regfun::Regularizer;
use crate::rng::{derive_seed, gaussian_vector, rng_from_seed};
use crate::solver::{solve_primal, SolveOptions};
use crate::{Error, Matrix, Result, Vector};

/// Header of the per-solve CSV artifact.
pub const CSV_HEADER: &str =
    "delta,seed,alpha,bregman_error,norm_error,kkt_r1,kkt_r2,iters,converged";

/// Candidates scanned when the parameter-choice constant is calibrated.
const CALIBRATION_POINTS: usize = 25;
const CALIBRATION_LO: f64 = 1e-2;
const CALIBRATION_HI: f64 = 1e2;

/// Top-level experiment description, deserialized from JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub operator: OperatorConfig,
    /// Exponent of the solution space `l^{r_x}`.
    pub r_x: f64,
    /// Exponent of the data space `l^{r_y}`.
    pub r_y: f64,
    /// Exponent of the residual term.
    pub p: f64,
    pub regularizer: RegularizerConfig,
    pub source: SourceConfig,
    /// Noise-level grid for noisy-data studies. Mutually exclusive with
    /// `alphas`.
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    /// Regularization-parameter grid for exact-data studies. Mutually
    /// exclusive with `noise`.
    #[serde(default)]
    pub alphas: Option<GridSpec>,
    #[serde(default)]
    pub alpha_rule: AlphaRuleConfig,
    /// Smoothness index `q` entering the rate formulas; inferred from the
    /// source mode when absent (smooth: 2, generic: 1, explicit: 2).
    #[serde(default)]
    pub index_q: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub probe: Option<ProbeConfig>,
    pub master_seed: u64,
    /// Marks a study whose verdict is informative rather than binding.
    #[serde(default)]
    pub exploratory: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    /// Diagonal operator with entries `(1/i)^decay`, `i = 1..=dim`.
    DiagonalPower { dim: usize, decay: f64 },
    Diagonal { entries: Vec<f64> },
    DiagonalFile { path: String },
    Dense { rows: Vec<Vec<f64>> },
    DenseFile { path: String },
    Convolution { kernel: Vec<f64> },
    ConvolutionFile { path: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegularizerConfig {
    PowerNorm { gauge: f64 },
    NegEntropy,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Reference dual element pushed through the operator:
    /// `omega+ = J_p(A v)`, so `J_{p*}(omega+)` lies in the operator range.
    /// `v` is either supplied explicitly or drawn Gaussian from `seed`.
    Smooth {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        v: Option<Vec<f64>>,
    },
    /// Raw Gaussian `omega+`, generically not matched to the operator.
    Generic {
        #[serde(default)]
        seed: u64,
    },
    Explicit { omega_dagger: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub deltas: GridSpec,
    pub seeds_per_delta: usize,
}

/// Either an explicit strictly-ascending list or a log-spaced grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Log(LogGrid),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    /// Materializes the grid: strictly positive, strictly ascending.
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            GridSpec::List(values) => {
                if values.is_empty() {
                    return Err(Error::Config("grid list must not be empty".into()));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::Config("grid values must be positive and finite".into()));
                }
                if values.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("grid values must be strictly ascending".into()));
                }
                Ok(values.clone())
            }
            GridSpec::Log(g) => {
                if !(g.lo.is_finite() && g.lo > 0.0 && g.hi.is_finite() && g.hi > g.lo) {
                    return Err(Error::Config(format!(
                        "log grid needs 0 < lo < hi, got lo={} hi={}",
                        g.lo, g.hi
                    )));
                }
                if g.points < 2 {
                    return Err(Error::Config("log grid needs at least 2 points".into()));
                }
                let n = g.points;
                Ok((0..n)
                    .map(|i| g.lo * (g.hi / g.lo).powf(i as f64 / (n - 1) as f64))
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaRuleConfig {
    /// Constant of the a-priori choice `alpha = c0 delta^{...}`. Absent
    /// means: calibrate by scanning a log grid of candidates at the largest
    /// noise level and keeping the one with the smallest median error.
    #[serde(default)]
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_kkt_tol")]
    pub kkt_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_kkt_tol() -> f64 {
    1e-9
}

fn default_max_iters() -> usize {
    200_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { kkt_tol: default_kkt_tol(), max_iters: default_max_iters() }
    }
}

impl SolverConfig {
    fn to_options(&self) -> SolveOptions {
        SolveOptions { kkt_tol: self.kkt_tol, max_iters: self.max_iters, ..Default::default() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Fraction of points trimmed from each end of the grid before the
    /// slope fit (floored; reduced when fewer than three points remain).
    #[serde(default = "default_trim")]
    pub trim: f64,
    /// Acceptable deviation of the fitted slope from the prediction.
    #[serde(default = "default_fit_tolerance")]
    pub tolerance: f64,
    /// Compare one-sidedly (`slope >= predicted - tolerance`); defaults to
    /// two-sided for smooth/explicit sources and one-sided for generic
    /// ones, which may converge faster than the worst-case prediction.
    #[serde(default)]
    pub one_sided: Option<bool>,
}

fn default_trim() -> f64 {
    0.1
}

fn default_fit_tolerance() -> f64 {
    0.15
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { trim: default_trim(), tolerance: default_fit_tolerance(), one_sided: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Index function `Phi(t) = c t^mu` tested by the probe. When absent, a
    /// Hilbert smooth source supplies its own exact candidate.
    #[serde(default)]
    pub phi: Option<PhiConfig>,
    #[serde(default = "default_probe_directions")]
    pub directions: usize,
    #[serde(default = "default_probe_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiConfig {
    pub c: f64,
    pub mu: f64,
}

fn default_probe_directions() -> usize {
    500
}

fn default_probe_steps() -> usize {
    20
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            phi: None,
            directions: default_probe_directions(),
            steps: default_probe_steps(),
            seed: 0,
        }
    }
}

/// One solve of the study.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResultRow {
    pub delta: f64,
    /// Noise seed of the cell, derived from the master seed and the cell's
    /// grid position.
    pub seed: u64,
    pub alpha: f64,
    /// Bregman distance of the solution to the reference, anchored at the
    /// reference subgradient.
    pub bregman_error: f64,
    pub norm_error: f64,
    pub kkt_r1: f64,
    pub kkt_r2: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Fitted rate with its verdict; serialized as the JSON summary.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub name: Option<String>,
    /// "noisy" (error vs. noise level) or "exact" (error vs. alpha).
    pub mode: String,
    pub slope: f64,
    pub stderr: f64,
    pub predicted: f64,
    pub tolerance: f64,
    /// "pass" when the slope matches the prediction within tolerance.
    pub verdict: String,
    pub n_rows: usize,
    /// Rows whose solve did not meet the convergence tolerance.
    pub n_failed: usize,
    pub exploratory: bool,
    /// Parameter-choice constant actually used (noisy mode).
    pub c0: Option<f64>,
    /// Grid points that survived aggregation and trimming.
    pub points_fitted: usize,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }
}

/// Everything a study produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RateReport,
    pub rows: Vec<ResultRow>,
    /// CSV with [`CSV_HEADER`]; byte-deterministic for a fixed config.
    pub csv: String,
    pub summary_json: String,
}

/// Probe output: variational-inequality statistics plus the range
/// diagnostic of the reference dual element.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub max_ratio: Option<f64>,
    pub fitted_mu: Option<f64>,
    pub n_pairs: usize,
    /// Relative residual of `J_{p*}(omega+)` against the operator range;
    /// absent when the reference dual element vanishes.
    pub range_residual: Option<f64>,
    pub degenerate: bool,
}

impl ExperimentConfig {
    /// Parses a config from JSON text (no path resolution).
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks the fields that every operation relies on.
    pub fn validate(&self) -> Result<()> {
        for (label, value) in [("r_x", self.r_x), ("r_y", self.r_y), ("p", self.p)] {
            if !(value.is_finite() && value > 1.0) {
                return Err(Error::Config(format!("{label} must be finite and > 1, got {value}")));
            }
        }
        if let RegularizerConfig::PowerNorm { gauge } = self.regularizer {
            if !(gauge.is_finite() && gauge > 1.0) {
                return Err(Error::Config(format!(
                    "regularizer gauge must be finite and > 1, got {gauge}"
                )));
            }
        }
        if let Some(q) = self.index_q {
            if !(q.is_finite() && q >= 1.0) {
                return Err(Error::Config(format!("index_q must be >= 1, got {q}")));
            }
        }
        if let Some(c0) = self.alpha_rule.c0 {
            if !(c0.is_finite() && c0 > 0.0) {
                return Err(Error::Config(format!("alpha_rule.c0 must be positive, got {c0}")));
            }
        }
        if !(self.fit.trim >= 0.0 && self.fit.trim < 0.5) {
            return Err(Error::Config(format!("fit.trim must lie in [0, 0.5), got {}", self.fit.trim)));
        }
        if !(self.fit.tolerance.is_finite() && self.fit.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "fit.tolerance must be positive, got {}",
                self.fit.tolerance
            )));
        }
        if !(self.solver.kkt_tol.is_finite() && self.solver.kkt_tol > 0.0) {
            return Err(Error::Config(format!(
                "solver.kkt_tol must be positive, got {}",
                self.solver.kkt_tol
            )));
        }
        if self.solver.max_iters == 0 {
            return Err(Error::Config("solver.max_iters must be at least 1".into()));
        }
        if let Some(noise) = &self.noise {
            if noise.seeds_per_delta == 0 {
                return Err(Error::Config("noise.seeds_per_delta must be at least 1".into()));
            }
        }
        if let Some(probe) = &self.probe {
            if probe.directions == 0 || probe.steps == 0 {
                return Err(Error::Config("probe.directions and probe.steps must be >= 1".into()));
            }
            if let Some(phi) = probe.phi {
                IndexFunction::power(phi.c, phi.mu).map_err(|e| {
                    Error::Config(format!("probe.phi: {e}"))
                })?;
            }
        }
        Ok(())
    }

    /// Smoothness index used by the rate formulas.
    pub fn effective_index_q(&self) -> f64 {
        self.index_q.unwrap_or(match self.source {
            SourceConfig::Smooth { .. } | SourceConfig::Explicit { .. } => 2.0,
            SourceConfig::Generic { .. } => 1.0,
        })
    }
}

/// Loads a config file, resolving operator file paths relative to the
/// config's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &mut String| {
        let joined = dir.join(&*p);
        *p = joined.to_string_lossy().into_owned();
    };
    match &mut config.operator {
        OperatorConfig::DiagonalFile { path }
        | OperatorConfig::DenseFile { path }
        | OperatorConfig::ConvolutionFile { path } => resolve(path),
        _ => {}
    }
    Ok(config)
}

fn build_operator(config: &ExperimentConfig) -> Result<LinearOperator> {
    let space = |dim: usize, r: f64| LpSpace::new(dim, r);
    match &config.operator {
        OperatorConfig::DiagonalPower { dim, decay } => {
            if *dim == 0 {
                return Err(Error::Config("operator dim must be at least 1".into()));
            }
            if !decay.is_finite() {
                return Err(Error::NonFinite { context: "operator decay" });
            }
            let entries = Vector::from_fn(*dim, |i, _| ((i + 1) as f64).powf(-decay));
            LinearOperator::diagonal(entries, space(*dim, config.r_x)?, space(*dim, config.r_y)?)
        }
        OperatorConfig::Diagonal { entries } => {
            let n = entries.len();
            let entries = Vector::from_vec(entries.clone());
            LinearOperator::diagonal(entries, space(n, config.r_x)?, space(n, config.r_y)?)
        }
        OperatorConfig::DiagonalFile { path } => {
            let entries = load_vector_text(Path::new(path))?;
            let n = entries.len();
            LinearOperator::diagonal(entries, space(n, config.r_x)?, space(n, config.r_y)?)
        }
        OperatorConfig::Dense { rows } => {
            let m = rows.len();
            if m == 0 || rows[0].is_empty() {
                return Err(Error::Config("dense operator must have rows and columns".into()));
            }
            let n = rows[0].len();
            if rows.iter().any(|row| row.len() != n) {
                return Err(Error::Config("dense operator rows must have equal length".into()));
            }
            let matrix = Matrix::from_fn(m, n, |i, j| rows[i][j]);
            LinearOperator::dense(matrix, space(n, config.r_x)?, space(m, config.r_y)?)
        }
        OperatorConfig::DenseFile { path } => {
            let matrix = load_dense_text(Path::new(path))?;
            let (m, n) = (matrix.nrows(), matrix.ncols());
            LinearOperator::dense(matrix, space(n, config.r_x)?, space(m, config.r_y)?)
        }
        OperatorConfig::Convolution { kernel } => {
            let n = kernel.len();
            let kernel = Vector::from_vec(kernel.clone());
            LinearOperator::convolution(kernel, space(n, config.r_x)?, space(n, config.r_y)?)
        }
        OperatorConfig::ConvolutionFile { path } => {
            let kernel = load_vector_text(Path::new(path))?;
            let n = kernel.len();
            LinearOperator::convolution(kernel, space(n, config.r_x)?, space(n, config.r_y)?)
        }
    }
}

fn build_regularizer(config: &ExperimentConfig, domain: LpSpace) -> Result<Regularizer> {
    match config.regularizer {
        RegularizerConfig::PowerNorm { gauge } => Regularizer::power_norm(domain, gauge),
        RegularizerConfig::NegEntropy => Regularizer::neg_entropy(domain.dim()),
    }
}

/// Exact-data instance plus what the probe needs about its construction.
struct BuiltProblem {
    instance: ProblemInstance,
    /// Euclidean norm of the latent direction of a smooth source.
    v_norm: Option<f64>,
}

fn build_base(config: &ExperimentConfig) -> Result<BuiltProblem> {
    let operator = build_operator(config)?;
    let regularizer = build_regularizer(config, *operator.domain())?;
    let (omega_dagger, v_norm) = match &config.source {
        SourceConfig::Smooth { seed, v } => {
            let v = match v {
                Some(v) => {
                    if v.len() != operator.domain().dim() {
                        return Err(Error::Config(format!(
                            "smooth source v has length {}, operator domain is {}",
                            v.len(),
                            operator.domain().dim()
                        )));
                    }
                    Vector::from_vec(v.clone())
                }
                None => {
                    let mut rng =
                        rng_from_seed(derive_seed(config.master_seed, 0x5EED, *seed));
                    gaussian_vector(&mut rng, operator.domain().dim())
                }
            };
            let av = operator.apply(&v)?;
            (operator.range().duality_map(&av, config.p)?, Some(v.norm()))
        }
        SourceConfig::Generic { seed } => {
            let mut rng = rng_from_seed(derive_seed(config.master_seed, 0x5EED, *seed));
            (gaussian_vector(&mut rng, operator.range().dim()), None)
        }
        SourceConfig::Explicit { omega_dagger } => {
            (Vector::from_vec(omega_dagger.clone()), None)
        }
    };
    let instance = build_source_problem(operator, regularizer, config.p, omega_dagger)?;
    Ok(BuiltProblem { instance, v_norm })
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let single = std::env::var_os("TIKHRATE_SINGLE_THREAD")
        .is_some_and(|v| !v.is_empty() && v != "0");
    let threads = if single { Some(1) } else { jobs };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    delta: f64,
    alpha: f64,
    seed: u64,
}

fn run_cell(base: &ProblemInstance, cell: Cell, opts: &SolveOptions) -> Result<ResultRow> {
    let inst = base.with_noise(cell.delta, cell.seed)?;
    let sol = solve_primal(&inst.operator, &inst.y_obs, cell.alpha, inst.p, &inst.regularizer, opts)?;
    let bregman_error = inst.regularizer.bregman(&sol.x, &inst.x_dagger, &inst.xi_dagger)?;
    let norm_error = inst.operator.domain().norm(&(&sol.x - &inst.x_dagger))?;
    Ok(ResultRow {
        delta: cell.delta,
        seed: cell.seed,
        alpha: cell.alpha,
        bregman_error,
        norm_error,
        kkt_r1: sol.kkt_r1,
        kkt_r2: sol.kkt_r2,
        iters: sol.iters,
        converged: sol.converged,
    })
}

fn solve_cells(
    pool: &rayon::ThreadPool,
    base: &ProblemInstance,
    cells: &[Cell],
    opts: &SolveOptions,
) -> Result<Vec<ResultRow>> {
    pool.install(|| cells.par_iter().map(|cell| run_cell(base, *cell, opts)).collect())
}

/// Scans the calibration grid at the largest noise level and returns the
/// constant with the smallest median Bregman error over converged solves.
fn calibrate_c0(
    pool: &rayon::ThreadPool,
    base: &ProblemInstance,
    config: &ExperimentConfig,
    deltas: &[f64],
    opts: &SolveOptions,
) -> Result<f64> {
    let q = config.effective_index_q();
    let delta_max = *deltas.last().expect("validated non-empty grid");
    let i_max = deltas.len() - 1;
    let seeds = config.noise.as_ref().expect("noisy mode").seeds_per_delta;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..CALIBRATION_POINTS {
        let c0 = CALIBRATION_LO
            * (CALIBRATION_HI / CALIBRATION_LO).powf(k as f64 / (CALIBRATION_POINTS - 1) as f64);
        let alpha = choose_alpha(delta_max, config.p, q, c0)?;
        let cells: Vec<Cell> = (0..seeds)
            .map(|j| Cell {
                delta: delta_max,
                alpha,
                seed: derive_seed(config.master_seed, i_max as u64, j as u64),
            })
            .collect();
        let rows = solve_cells(pool, base, &cells, opts)?;
        let errors: Vec<f64> =
            rows.iter().filter(|r| r.converged).map(|r| r.bregman_error).collect();
        if errors.is_empty() {
            continue;
        }
        let score = median(&errors)?;
        if best.map_or(true, |(_, s)| score < s) {
            best = Some((c0, score));
        }
    }
    best.map(|(c0, _)| c0).ok_or_else(|| {
        Error::Config("calibration failed: no converged solves at the largest noise level".into())
    })
}

fn trim_points(points: &[(f64, f64)], frac: f64) -> &[(f64, f64)] {
    let n = points.len();
    let mut t = (n as f64 * frac).floor() as usize;
    while t > 0 && n - 2 * t < 3 {
        t -= 1;
    }
    &points[t..n - t]
}

fn format_row(row: &ResultRow) -> String {
    format!(
        "{:e},{},{:e},{:e},{:e},{:e},{:e},{},{}",
        row.delta,
        row.seed,
        row.alpha,
        row.bregman_error,
        row.norm_error,
        row.kkt_r1,
        row.kkt_r2,
        row.iters,
        row.converged
    )
}

/// Runs the configured study. `jobs` bounds the worker threads (the
/// `TIKHRATE_SINGLE_THREAD` environment variable forces one); results are
/// byte-identical regardless of parallelism.
pub fn run(config: &ExperimentConfig, jobs: Option<usize>) -> Result<RunArtifacts> {
    config.validate()?;
    let base = build_base(config)?;
    let pool = thread_pool(jobs)?;
    let opts = config.solver.to_options();
    let q = config.effective_index_q();

    let (rows, mode, c0_used, predicted) = match (&config.noise, &config.alphas) {
        (Some(noise), None) => {
            let deltas = noise.deltas.values()?;
            let c0 = match config.alpha_rule.c0 {
                Some(c0) => c0,
                None => calibrate_c0(&pool, &base.instance, config, &deltas, &opts)?,
            };
            let mut cells = Vec::with_capacity(deltas.len() * noise.seeds_per_delta);
            for (i, &delta) in deltas.iter().enumerate() {
                let alpha = choose_alpha(delta, config.p, q, c0)?;
                for j in 0..noise.seeds_per_delta {
                    cells.push(Cell {
                        delta,
                        alpha,
                        seed: derive_seed(config.master_seed, i as u64, j as u64),
                    });
                }
            }
            let rows = solve_cells(&pool, &base.instance, &cells, &opts)?;
            (rows, "noisy", Some(c0), predicted_exponent(config.p, q))
        }
        (None, Some(grid)) => {
            let alphas = grid.values()?;
            let cells: Vec<Cell> = alphas
                .iter()
                .enumerate()
                .map(|(i, &alpha)| Cell {
                    delta: 0.0,
                    alpha,
                    seed: derive_seed(config.master_seed, i as u64, 0),
                })
                .collect();
            let rows = solve_cells(&pool, &base.instance, &cells, &opts)?;
            (rows, "exact", None, exact_data_exponent(config.p, q))
        }
        (Some(_), Some(_)) => {
            return Err(Error::Config("config sets both noise and alphas; pick one".into()))
        }
        (None, None) => {
            return Err(Error::Config("config needs either a noise or an alphas grid".into()))
        }
    };

    // Aggregate to one point per grid value: median over converged seeds in
    // noisy mode, the single converged solve in exact mode.
    let points: Vec<(f64, f64)> = if mode == "noisy" {
        let seeds = config.noise.as_ref().expect("noisy mode").seeds_per_delta;
        rows.chunks(seeds)
            .filter_map(|chunk| {
                let errors: Vec<f64> =
                    chunk.iter().filter(|r| r.converged).map(|r| r.bregman_error).collect();
                if errors.is_empty() {
                    return None;
                }
                let m = median(&errors).ok()?;
                (m > 0.0).then_some((chunk[0].delta, m))
            })
            .collect()
    } else {
        rows.iter()
            .filter(|r| r.converged && r.bregman_error > 0.0)
            .map(|r| (r.alpha, r.bregman_error))
            .collect()
    };

    let kept = trim_points(&points, config.fit.trim);
    let xs: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1).collect();
    // Too few usable points (e.g. mass solver failure) yields a failed
    // report with a null slope rather than an error, so callers can still
    // see the row-level evidence.
    let fit = if kept.len() >= 3 {
        Some(fit_loglog(&xs, &ys)?)
    } else {
        None
    };

    let one_sided = config
        .fit
        .one_sided
        .unwrap_or(matches!(config.source, SourceConfig::Generic { .. }));
    let pass = fit.is_some_and(|fit| {
        if one_sided {
            fit.slope >= predicted - config.fit.tolerance
        } else {
            (fit.slope - predicted).abs() <= config.fit.tolerance
        }
    });
    let (slope, stderr) =
        fit.map_or((f64::NAN, f64::NAN), |f| (f.slope, f.stderr));

    let n_failed = rows.iter().filter(|r| !r.converged).count();
    let report = RateReport {
        name: config.name.clone(),
        mode: mode.into(),
        slope,
        stderr,
        predicted,
        tolerance: config.fit.tolerance,
        verdict: if pass { "pass" } else { "fail" }.into(),
        n_rows: rows.len(),
        n_failed,
        exploratory: config.exploratory,
        c0: c0_used,
        points_fitted: kept.len(),
    };
    let mut csv = String::with_capacity(64 * (rows.len() + 1));
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&format_row(row));
        csv.push('\n');
    }
    let summary_json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("summary serialization: {e}")))?
        + "\n";
    Ok(RunArtifacts { report, rows, csv, summary_json })
}

/// Runs the variational-inequality probe and the range diagnostic on the
/// configured exact-data instance.
pub fn probe(config: &ExperimentConfig) -> Result<ProbeReport> {
    config.validate()?;
    let base = build_base(config)?;
    let pc = config.probe.clone().unwrap_or_default();
    let phi = match pc.phi {
        Some(phi) => IndexFunction::power(phi.c, phi.mu)?,
        None => oracle_phi(config, &base)?,
    };
    let vi = var_ineq_probe(
        &base.instance,
        &phi,
        pc.directions,
        pc.steps,
        derive_seed(config.master_seed, 0xB0BE, pc.seed),
    )?;
    let rd = base
        .instance
        .operator
        .range_diagnostic(&base.instance.omega_dagger, config.p)?;
    Ok(ProbeReport {
        max_ratio: vi.max_ratio,
        fitted_mu: vi.fitted_mu,
        n_pairs: vi.n_pairs,
        range_residual: (!rd.degenerate).then_some(rd.residual),
        degenerate: vi.degenerate || rd.degenerate,
    })
}

/// Exact candidate index function for a Hilbert smooth source:
/// the pairing is bounded by `||v|| sqrt(2 t)` with `v` the latent
/// direction, by the Cauchy-Schwarz inequality.
fn oracle_phi(config: &ExperimentConfig, base: &BuiltProblem) -> Result<IndexFunction> {
    let hilbert_power = config.r_x == 2.0
        && matches!(config.regularizer, RegularizerConfig::PowerNorm { gauge } if gauge == 2.0);
    match (hilbert_power, base.v_norm) {
        (true, Some(v_norm)) if v_norm > 0.0 => {
            IndexFunction::power(2.0_f64.sqrt() * v_norm, 0.5)
        }
        _ => Err(Error::Config(
            "probe needs an explicit phi unless the source is smooth on a Hilbert-power setup"
                .into(),
        )),
    }
}

/// One named check of the self-test suite.
#[derive(Debug, Clone, Serialize)]
pub struct SelfTestCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfTestReport {
    pub checks: Vec<SelfTestCheck>,
    pub passed: bool,
}

/// Built-in consistency suite: duality-mapping identities on a family of
/// space/gauge pairs, and solver agreement with the closed-form solution of
/// quadratic instances. `rel_tol` bounds the accepted relative deviation;
/// zero makes every check fail, which is how the suite proves it measures
/// anything at all.
pub fn selftest(rel_tol: f64, seed: u64) -> Result<SelfTestReport> {
    if !(rel_tol.is_finite() && rel_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "self-test tolerance must be >= 0, got {rel_tol}"
        )));
    }
    let mut checks = Vec::new();

    // Duality-mapping identities <J v, v> = ||v||^gauge and
    // ||J v||_dual = ||v||^{gauge-1} across exponent pairs.
    let mut max_dev = 0.0_f64;
    let mut samples = 0usize;
    let mut rng = rng_from_seed(derive_seed(seed, 1, 0));
    for r in [1.5, 2.0, 3.0, 4.0] {
        let space = LpSpace::new(10, r)?;
        for gauge in [1.5, 2.0, 3.0] {
            for _ in 0..1000 {
                let v = gaussian_vector(&mut rng, 10);
                let omega = space.duality_map(&v, gauge)?;
                let nv = space.norm(&v)?;
                let scale = nv.powf(gauge).max(1.0);
                let dev_pairing = (omega.dot(&v) - nv.powf(gauge)).abs() / scale;
                let dual_scale = nv.powf(gauge - 1.0).max(1.0);
                let dev_norm =
                    (space.dual().norm(&omega)? - nv.powf(gauge - 1.0)).abs() / dual_scale;
                max_dev = max_dev.max(dev_pairing).max(dev_norm);
                samples += 1;
            }
        }
    }
    checks.push(SelfTestCheck {
        name: "duality-identities".into(),
        passed: max_dev <= rel_tol,
        detail: format!("max relative deviation {max_dev:.3e} over {samples} samples"),
    });

    // Solver vs. closed form (A^T A + alpha I) x = A^T y on dense Gaussian
    // instances across regularization strengths.
    let mut max_rel = 0.0_f64;
    let mut rng = rng_from_seed(derive_seed(seed, 2, 0));
    for (n, alpha) in [(5usize, 1.0), (20, 1e-3), (40, 1e-6)] {
        let l2 = LpSpace::new(n, 2.0)?;
        let m = Matrix::from_fn(n, n, |_, _| crate::rng::standard_normal(&mut rng));
        let y = gaussian_vector(&mut rng, n);
        let a = LinearOperator::dense(m.clone(), l2, l2)?;
        let reg = Regularizer::power_norm(l2, 2.0)?;
        let opts = SolveOptions { kkt_tol: 1e-12, max_iters: 400_000, ..Default::default() };
        let sol = solve_primal(&a, &y, alpha, 2.0, &reg, &opts)?;
        let h = m.transpose() * &m + Matrix::identity(n, n) * alpha;
        let oracle = h
            .cholesky()
            .ok_or(Error::InvalidArgument("calibration system not positive definite".into()))?
            .solve(&(m.transpose() * &y));
        max_rel = max_rel.max((&sol.x - &oracle).norm() / oracle.norm());
    }
    checks.push(SelfTestCheck {
        name: "oracle-equivalence".into(),
        passed: max_rel <= rel_tol,
        detail: format!("max relative solution error {max_rel:.3e} across 3 instances"),
    });

    let passed = checks.iter().all(|c| c.passed);
    Ok(SelfTestReport { checks, passed })
}
